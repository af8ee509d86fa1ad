"""Command-line driver: ``bismut <subcommand> ...``.

Exit status: 0 when every case passes, 1 when any case fails or errors,
2 for configuration problems (bad arguments, schema violations, unknown
models).
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from . import comparison as cmp
from .chart import to_complex
from .connections import christoffel
from .curvature import curvature, hsc_from_field, ricci_matrix, ricci_real_from_field
from .errors import ConfigError, GeometryError
from .experiments import EXPERIMENTS, run_experiment
from .geodesy import covariant_acceleration, integrate_geodesic
from .models import model_from_config, parse_model_spec

CASE_COLUMNS = ["id", "lhs", "rhs", "residual", "tolerance", "check", "pass", "error"]
SAMPLE_COLUMNS = ["rho", "direction", "delta_r", "trace_check", "bound", "margin", "lambda", "error"]


def _schema(name: str) -> dict:
    return json.loads(resources.files("bismut").joinpath("schemas", name).read_text())


def suite_manifest() -> dict:
    return json.loads(resources.files("bismut").joinpath("suites.json").read_text())


def clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [clean(obj.real), clean(obj.imag)]
    return obj


def dumps(obj) -> str:
    # repr-based float output is shortest round-trip
    return json.dumps(clean(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _model_header(model) -> dict:
    return {"name": model.name, "params": dict(model.params), "fd_step": model.fd_step, "spec": model.spec}


def config_hash(cfg: dict) -> str:
    blob = json.dumps(clean(cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def build_report(cfg: dict, model, cases: list[dict], diagnostics: dict) -> dict:
    cases = sorted(cases, key=lambda c: c["id"])
    passed = sum(1 for c in cases if c["pass"])
    return {
        "header": {
            "tool": "bismut",
            "version": __version__,
            "config_sha256": config_hash(cfg),
            "model": _model_header(model),
            "experiment": cfg["experiment"],
            "seed": int(cfg.get("seed", 0)),
            "rng": "philox(seed, experiment index)",
        },
        "cases": cases,
        "diagnostics": diagnostics,
        "summary": {"pass": passed, "fail": len(cases) - passed, "total": len(cases)},
    }


def cases_csv(cases: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CASE_COLUMNS, extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for c in cases:
        w.writerow({k: ("" if c.get(k) is None else c.get(k)) for k in CASE_COLUMNS})
    return buf.getvalue()


def samples_csv(samples: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for s in samples:
        row = []
        for k in SAMPLE_COLUMNS:
            v = s.get(k)
            row.append(" ".join(repr(float(c)) for c in v) if k == "direction" else ("" if v is None else v))
        w.writerow(row)
    return buf.getvalue()


def emit(report: dict, path: str | None, fmt: str = "json", out=None) -> None:
    text = dumps(report) if fmt == "json" else cases_csv(report["cases"])
    if path:
        Path(path).write_text(text)
    else:
        (out or sys.stdout).write(text)


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, _schema("config.schema.json"))
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config rejected: {exc.message}") from None


def resolve(args, experiment: str | None) -> tuple[dict, object]:
    cfg = load_config(getattr(args, "config", None))
    if experiment is not None:
        cfg["experiment"] = experiment
    if "experiment" not in cfg:
        raise ConfigError("no experiment given")
    if args.model:
        model = parse_model_spec(args.model)
        cfg["model"] = {"name": model.name, "params": dict(model.params)}
    elif "model" in cfg:
        model = model_from_config(cfg["model"])
    else:
        raise ConfigError("no model given (use --model or a config with 'model')")
    if args.seed is not None:
        cfg["seed"] = args.seed
    cfg.setdefault("seed", 0)
    cfg.setdefault("params", {})
    if getattr(args, "cases", None) is not None:
        cfg["params"]["cases"] = args.cases
    validate_config(cfg)
    return cfg, model


def run_config(cfg: dict, model) -> dict:
    """Run one experiment or the shipped suite for the model family; returns the report."""
    name = cfg["experiment"]
    seed = int(cfg.get("seed", 0))
    params = cfg.get("params", {})
    if name == "full-suite":
        family = suite_manifest().get(model.name)
        if family is None:
            raise ConfigError(f"no shipped suite for model family {model.name!r}")
        cases, diag = [], {}
        for exp in family["experiments"]:
            p = {**family.get("params", {}).get(exp, {}), **params.get(exp, {})}
            c, d = run_experiment(exp, model, p, seed)
            cases += c
            diag[exp] = d
        diag["suite_size"] = family["size"].get(model.spec)
    else:
        cases, diag = run_experiment(name, model, params, seed)
    return build_report(cfg, model, cases, diag)


def _exit_code(cases: list[dict]) -> int:
    return 0 if all(c["pass"] for c in cases) else 1


def parse_point(text: str, n: int | None = None) -> np.ndarray:
    """``"0.1+0.2j,0.3"`` -> complex coordinates."""
    try:
        z = np.array([complex(t.strip().replace(" ", "")) for t in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse point {text!r}") from None
    if n is not None and z.size != n:
        raise ConfigError(f"point {text!r} has {z.size} coordinates, model needs {n}")
    return z


def parse_vector(text: str, dim: int) -> np.ndarray:
    try:
        v = np.array([float(t) for t in text.split(",")])
    except ValueError:
        raise ConfigError(f"cannot parse vector {text!r}") from None
    if v.size != dim:
        raise ConfigError(f"vector {text!r} needs {dim} real components")
    return v


def parse_grid(text: str) -> np.ndarray:
    try:
        a, b, m = text.split(":")
        return np.linspace(float(a), float(b), int(m))
    except ValueError:
        raise ConfigError(f"rho grid must look like a:b:n, got {text!r}") from None


def _write(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_run(args) -> int:
    cfg, model = resolve(args, args.experiment)
    report = run_config(cfg, model)
    out = cfg.get("output", {})
    emit(report, args.report or out.get("report"), args.format)
    if out.get("csv"):
        Path(out["csv"]).write_text(cases_csv(report["cases"]))
    return _exit_code(report["cases"])


def cmd_variation(args) -> int:
    return cmd_run(args)


def cmd_connections(args) -> int:
    model = parse_model_spec(args.model)
    z = parse_point(args.point, model.n)
    field = christoffel(args.flavor, model, z)
    out = {"model": _model_header(model), "point": z, "flavor": args.flavor, "components": field.nonzero()}
    _write(dumps(out), args.report)
    return 0


def cmd_curvature(args) -> int:
    model = parse_model_spec(args.model)
    z = parse_point(args.point, model.n)
    n = model.n
    fld = curvature(args.flavor, model, z)
    out: dict = {"model": _model_header(model), "point": z, "flavor": args.flavor}
    r = fld.r
    comps = []
    for idx in zip(*np.nonzero(np.abs(r) > 1e-12)):
        v = r[idx]
        comps.append({"index": [int(i) for i in idx], "re": float(v.real), "im": float(v.imag)})
    out["components"] = comps
    if args.ricci:
        e = np.eye(2 * n)
        out["ricci_real"] = ricci_real_from_field(fld, e[:, None, :], e[None, :, :])
        q = ricci_matrix(fld)
        out["ricci_hol_matrix"] = {"re": q.real, "im": q.imag}
    if args.hsc is not None:
        out["hsc"] = float(hsc_from_field(fld, parse_vector(args.hsc, 2 * n)))
    _write(dumps(out), args.report)
    return 0


def cmd_geodesic(args) -> int:
    model = parse_model_spec(args.model)
    z = parse_point(args.start, model.n)
    v = parse_vector(args.dir, 2 * model.n)
    c = integrate_geodesic(model, z, v, args.length, steps=args.steps)
    resid = covariant_acceleration(c, "lc")
    speed = c.speed()
    pts = to_complex(c.x)
    if args.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t"] + [f"re_z{k + 1}" for k in range(model.n)] + [f"im_z{k + 1}" for k in range(model.n)]
                   + ["speed", "residual"])
        for i in range(len(c.t)):
            w.writerow([repr(float(c.t[i]))] + [repr(float(a)) for a in pts[i].real]
                       + [repr(float(a)) for a in pts[i].imag] + [repr(float(speed[i])), repr(float(resid[i]))])
        _write(buf.getvalue(), args.report)
    else:
        _write(dumps({"model": _model_header(model), "t": c.t, "re": pts.real, "im": pts.imag, "speed": speed,
                      "residual": resid, "geodesic_residual": c.geodesic_residual}), args.report)
    return 0


def cmd_compare(args) -> int:
    model = parse_model_spec(args.model)
    z = parse_point(args.point, model.n)
    grid = parse_grid(args.rho_grid)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence([args.seed or 0, 99])))
    if args.K == "auto":
        K = cmp.estimate_K(model, rng).value
    else:
        try:
            K = float(args.K)
        except ValueError:
            raise ConfigError(f"--K must be a number or 'auto', got {args.K!r}") from None
    rep = cmp.laplacian_comparison_check(model, z, K, grid, steps=args.steps)
    out = {"model": _model_header(model), "point": z, **rep.as_dict()}
    _write(dumps(out), args.report)
    if args.report:
        Path(args.report).with_suffix(".csv").write_text(samples_csv(rep.samples))
    v = rep.verdicts
    return 0 if v["laplacian_ok"] and v["lambda_monotone"] and not v["errors"] else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bismut", description="Bismut-connection geometry checks on Hermitian metrics.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, model_required=True):
        sp.add_argument("--model", required=model_required, help='model spec, e.g. "hopf(2)"')
        sp.add_argument("--report", help="output path (default: stdout)")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("connections", help="nonzero Christoffel symbols at a point")
    common(sp)
    sp.add_argument("--point", required=True, help='complex coordinates, e.g. "0.1+0.2j,0.3"')
    sp.add_argument("--flavor", choices=["lc", "sb"], default="sb")
    sp.set_defaults(func=cmd_connections)

    sp = sub.add_parser("curvature", help="curvature tensor, Ricci forms and HSC at a point")
    common(sp)
    sp.add_argument("--point", required=True)
    sp.add_argument("--flavor", choices=["lc", "sb"], default="sb")
    sp.add_argument("--ricci", action="store_true")
    sp.add_argument("--hsc", metavar="DIR", help="real direction, comma separated")
    sp.set_defaults(func=cmd_curvature)

    sp = sub.add_parser("geodesic", help="integrate a geodesic and print samples")
    common(sp)
    sp.add_argument("--from", dest="start", required=True)
    sp.add_argument("--dir", required=True, help="real initial velocity, comma separated")
    sp.add_argument("--length", type=float, required=True)
    sp.add_argument("--steps", type=int)
    sp.add_argument("--out", choices=["csv", "json"], default="csv")
    sp.set_defaults(func=cmd_geodesic)

    sp = sub.add_parser("variation", help="second variation experiments")
    common(sp, model_required=False)
    sp.add_argument("--experiment", choices=["thm11", "thm12", "myers", "synge"], required=True)
    sp.add_argument("--config")
    sp.add_argument("--cases", type=int)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_variation)

    sp = sub.add_parser("compare", help="Laplacian and volume comparison along radial geodesics")
    common(sp)
    sp.add_argument("--point", required=True)
    sp.add_argument("--K", default="auto")
    sp.add_argument("--rho-grid", default="0.1:1.0:8")
    sp.add_argument("--steps", type=int, default=200)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("run", help="run a verification experiment and write a report")
    common(sp, model_required=False)
    sp.add_argument("experiment", nargs="?", choices=list(EXPERIMENTS) + ["full-suite"])
    sp.add_argument("--config")
    sp.add_argument("--cases", type=int)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.set_defaults(func=cmd_run)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except GeometryError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
