"""Independent real-coordinate oracle for connections and curvature.

Works only with the real metric g_ab(x) on R^{2n}, written symbolically and
differentiated by sympy.  The Bismut connection is assembled from the
Levi-Civita one plus half the torsion 3-form dw(J., J., J.).  Nothing here
touches the complex tables used by the package.
"""
import numpy as np
import sympy as sp


def _h_builder(name, n, *params):
    def fs(z, w, scale):
        phi = 1 + sum(z[k] * w[k] for k in range(n))
        return sp.Matrix(n, n, lambda i, j: scale * ((1 if i == j else 0) / phi - w[i] * z[j] / phi**2))

    if name == "flat":
        return lambda z, w: sp.eye(n)
    if name == "fubini_study":
        scale = sp.nsimplify(params[0]) if params else 1
        return lambda z, w: fs(z, w, scale)
    if name == "hopf":
        return lambda z, w: sp.eye(n) / sum(z[k] * w[k] for k in range(n))
    if name == "fs_perturbed":
        eps = sp.nsimplify(params[0]) if params else sp.Rational(1, 10)
        return lambda z, w: fs(z, w, 1) + eps * sum(z[k] * w[k] for k in range(n)) * sp.eye(n)
    raise KeyError(name)


def j_real(n):
    J = np.zeros((2 * n, 2 * n))
    J[n:, :n] = np.eye(n)
    J[:n, n:] = -np.eye(n)
    return J


class RealOracle:
    def __init__(self, name, n, *params):
        self.n = n
        m = 2 * n
        xs = sp.symbols(f"x0:{m}", real=True)
        z = [xs[k] + sp.I * xs[n + k] for k in range(n)]
        w = [xs[k] - sp.I * xs[n + k] for k in range(n)]
        h = sp.Matrix(_h_builder(name, n, *params)(z, w))
        re = h.applyfunc(lambda e: sp.re(sp.expand_complex(e)))
        im = h.applyfunc(lambda e: sp.im(sp.expand_complex(e)))
        G = 2 * sp.Matrix(sp.BlockMatrix([[re, im], [-im, re]]))
        dG = [[[sp.diff(G[b, c], xs[a]) for c in range(m)] for b in range(m)] for a in range(m)]
        d2G = [[[[sp.diff(dG[a][c][d], xs[b]) for d in range(m)] for c in range(m)] for b in range(m)]
               for a in range(m)]
        self._g = sp.lambdify([xs], G.tolist(), "numpy")
        self._dg = sp.lambdify([xs], dG, "numpy")
        self._d2g = sp.lambdify([xs], d2G, "numpy")
        self.J = j_real(n)

    def g(self, x):
        return np.array(self._g(np.asarray(x, float)), float)

    def dg(self, x):
        return np.array(self._dg(np.asarray(x, float)), float)

    def d2g(self, x):
        return np.array(self._d2g(np.asarray(x, float)), float)

    def gamma_lc(self, x):
        """G[a, b, c] = Gamma^a_{bc}, i.e. nabla_{d_b} d_c = Gamma^a_{bc} d_a."""
        gi = np.linalg.inv(self.g(x))
        dg = self.dg(x)
        low = 0.5 * (np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg)  # [d, b, c]
        return np.einsum("ad,dbc->abc", gi, low)

    def dgamma_lc(self, x):
        """[e, a, b, c] = d_e Gamma^a_{bc}."""
        g = self.g(x)
        gi = np.linalg.inv(g)
        dg = self.dg(x)
        d2 = self.d2g(x)
        low = 0.5 * (np.einsum("bdc->dbc", dg) + np.einsum("cdb->dbc", dg) - dg)
        dlow = 0.5 * (np.einsum("ebdc->edbc", d2) + np.einsum("ecdb->edbc", d2) - d2)
        dgi = -np.einsum("ap,epq,qd->ead", gi, dg, gi)
        return np.einsum("ead,dbc->eabc", dgi, low) + np.einsum("ad,edbc->eabc", gi, dlow)

    def _omega(self, g):
        # w_bc = g(J d_b, d_c)
        return np.einsum("kb,...kc->...bc", self.J, g)

    def d_omega(self, x):
        dw = self._omega(self.dg(x))  # [a, b, c] = d_a w_bc
        return dw + np.einsum("bca->abc", dw) + np.einsum("cab->abc", dw)

    def torsion(self, x):
        """T_abc = dw(J d_a, J d_b, J d_c)."""
        J = self.J
        return np.einsum("abc,ap,bq,cr->pqr", self.d_omega(x), J, J, J)

    def dtorsion(self, x):
        J = self.J
        dw = self._omega(self.d2g(x))  # [e, a, b, c] = d_e d_a w_bc
        ddw = dw + np.einsum("ebca->eabc", dw) + np.einsum("ecab->eabc", dw)
        return np.einsum("eabc,ap,bq,cr->epqr", ddw, J, J, J)

    def gamma_sb(self, x):
        gi = np.linalg.inv(self.g(x))
        return self.gamma_lc(x) + 0.5 * np.einsum("ad,bcd->abc", gi, self.torsion(x))

    def dgamma_sb(self, x):
        gi = np.linalg.inv(self.g(x))
        dgi = -np.einsum("ap,epq,qd->ead", gi, self.dg(x), gi)
        extra = np.einsum("ead,bcd->eabc", dgi, self.torsion(x)) + np.einsum("ad,ebcd->eabc", gi, self.dtorsion(x))
        return self.dgamma_lc(x) + 0.5 * extra

    def gamma(self, flavor, x):
        return self.gamma_lc(x) if flavor == "lc" else self.gamma_sb(x)

    def riemann(self, flavor, x):
        """R[a, b, c, d] = g(R(d_a, d_b) d_c, d_d), R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]."""
        G = self.gamma(flavor, x)
        dG = self.dgamma_lc(x) if flavor == "lc" else self.dgamma_sb(x)
        up = (np.einsum("aebc->abce", dG) - np.einsum("beac->abce", dG)
              + np.einsum("eaf,fbc->abce", G, G) - np.einsum("ebf,fac->abce", G, G))
        return np.einsum("abce,ed->abcd", up, self.g(x))


_CACHE = {}


def oracle(name, n, *params):
    key = (name, n, params)
    if key not in _CACHE:
        _CACHE[key] = RealOracle(name, n, *params)
    return _CACHE[key]
