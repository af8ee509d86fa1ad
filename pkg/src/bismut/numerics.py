"""Fixed-step integration, finite-difference stencils and quadrature on uniform grids."""
from __future__ import annotations

from typing import Callable

import numpy as np
from scipy.integrate import simpson as _simpson

# 4th-order first-derivative stencils (offsets 0..4) for the two nodes at each end
_EDGE0 = np.array([-25.0, 48.0, -36.0, 16.0, -3.0]) / 12.0
_EDGE1 = np.array([-3.0, -10.0, 18.0, -6.0, 1.0]) / 12.0
_CENTRAL = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0


def rk4(rhs: Callable, y0: np.ndarray, h, steps: int, t0=0.0,
        after_step: Callable | None = None) -> np.ndarray:
    """Classical RK4 for y' = rhs(t, y).

    ``h`` may be a scalar or an array broadcastable against ``y0[..., :1]``
    (one step size per batch member).  Returns all nodes, shape
    ``(steps + 1,) + y0.shape``.  ``after_step(k, t, y)`` may raise to abort.
    """
    y = np.asarray(y0, dtype=float)
    h = np.asarray(h, dtype=float)
    out = np.empty((steps + 1,) + y.shape)
    out[0] = y
    for k in range(steps):
        t = t0 + k * h
        k1 = rhs(t, y)
        k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = rhs(t + h, y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = y
        if after_step is not None:
            after_step(k + 1, t0 + (k + 1) * h, y)
    return out


def fd_derivative(y: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    """First derivative of uniformly sampled data, 4th order everywhere (needs >= 5 samples)."""
    y = np.moveaxis(np.asarray(y), axis, 0)
    m = y.shape[0]
    if m < 5:
        raise ValueError("fd_derivative needs at least 5 samples")
    d = np.empty_like(y)
    d[2:-2] = sum(c * y[k: m - 4 + k] for k, c in enumerate(_CENTRAL) if c)
    d[0] = np.tensordot(_EDGE0, y[:5], axes=1)
    d[1] = np.tensordot(_EDGE1, y[:5], axes=1)
    d[-1] = -np.tensordot(_EDGE0, y[::-1][:5], axes=1)
    d[-2] = -np.tensordot(_EDGE1, y[::-1][:5], axes=1)
    return np.moveaxis(d / dt, 0, axis)


def five_point(values: np.ndarray, delta: float) -> np.ndarray:
    """Central derivative from samples at -2d, -d, 0, d, 2d (leading axis)."""
    return np.tensordot(_CENTRAL, values, axes=1) / delta


def simpson(y: np.ndarray, dt: float, axis: int = 0) -> np.ndarray:
    return _simpson(y, dx=dt, axis=axis)


def uniform_grid(a: float, b: float, steps: int) -> np.ndarray:
    return a + (b - a) * np.arange(steps + 1) / steps
