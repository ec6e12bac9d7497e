"""Stability function of a Runge–Kutta tableau and A-stability evidence.

    r(z) = 1 + z wᵀ (I - z S)⁻¹ 1

is evaluated on the [0, 1] form of the tableau in double-double.  S is
reduced once to Hessenberg form H = X⁻¹ S X (with 1 and w carried
along), after which each z costs an O(M²) complex dd solve.

Eigenvalues of S are polished by shifted inverse iteration on H in dd.
For a symplectic tableau r(z) r(-z) = 1, so every pole 1/λ is mirrored by
a zero at -1/λ; with conjugate pairs that zero is also -1/λ̄.
"""

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from . import xprec
from .xprec import DD, _dd_add, _dd_sub, _dd_mul, _cdd_mul, _cdd_div
from .tableau import rescale_to_unit

__all__ = [
    "StabilityReport", "ResolventForm", "stability_function", "eigen_analysis",
    "check_a_stability", "report_to_json", "sweep_to_csv",
]

SWEEP_TOL = 1e-10
ZERO_TOL = 1e-8


def _unit(tab):
    return tab if tab.interval == "[0,1]" else rescale_to_unit(tab)


def _cdd(z):
    """Complex doubles -> (nb, 4) dd layout."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros((z.size, 4))
    out[:, 0] = z.real
    out[:, 2] = z.imag
    return out


class ResolventForm:
    """Hessenberg data for fast dd evaluation of r(z) on one tableau."""

    def __init__(self, tab):
        tab = _unit(tab)
        self.M = tab.M
        self.h, self.u, self.v = xprec.hessenberg(tab.S_dd, DD(np.ones(tab.M)), tab.weights_dd)

    def _solve(self, alpha, beta, rhs=None):
        nb = alpha.shape[0]
        if rhs is None:
            rhs = np.zeros((nb, self.M, 4))
            rhs[:, :, 0] = self.u.hi
            rhs[:, :, 1] = self.u.lo
        return xprec.hess_solve_batch(self.h, alpha, beta, rhs)

    def evaluate_dd(self, z):
        """r(z) as a (nb, 4) complex dd array for complex-double ``z``."""
        zz = _cdd(z)
        alpha = np.zeros_like(zz)
        alpha[:, 0] = 1.0
        x = self._solve(alpha, -zz)
        vh, vl = self.v.hi[None, :], self.v.lo[None, :]
        re = DD(*_dd_mul(x[..., 0], x[..., 1], vh, vl)).sum(axis=1)
        im = DD(*_dd_mul(x[..., 2], x[..., 3], vh, vl)).sum(axis=1)
        rh, rl, ih, il = _cdd_mul(zz[:, 0], zz[:, 1], zz[:, 2], zz[:, 3], re.hi, re.lo, im.hi, im.lo)
        rh, rl = _dd_add(rh, rl, 1.0, 0.0)
        out = np.stack([rh, rl, ih, il], axis=1)
        if not np.all(np.isfinite(out)):
            raise ZeroDivisionError("z hits a pole of the stability function")
        return out

    def evaluate(self, z):
        r = self.evaluate_dd(z)
        return (r[:, 0] + r[:, 1]) + 1j * (r[:, 2] + r[:, 3])

    def modulus_defect(self, z):
        """|r(z)| - 1 computed as (|r|² - 1)/(|r| + 1) in dd."""
        r = self.evaluate_dd(z)
        a = _dd_mul(r[:, 0], r[:, 1], r[:, 0], r[:, 1])
        b = _dd_mul(r[:, 2], r[:, 3], r[:, 2], r[:, 3])
        s = _dd_add(*a, *b)
        d = _dd_sub(*s, 1.0, 0.0)
        mod = np.hypot(r[:, 0], r[:, 2])
        return (d[0] + d[1]) / (mod + 1.0)

    def refine_eigenvalues(self, lam, iters=12):
        """Polish eigenvalue estimates of the [0,1] S by inverse iteration."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        nb, n = lam.size, self.M
        sig = _cdd(lam)
        beta = np.zeros((nb, 4)); beta[:, 0] = 1.0
        rng = np.random.default_rng(0)
        q = np.zeros((nb, n, 4))
        q[:, :, 0] = rng.standard_normal((nb, n))
        q[:, :, 2] = rng.standard_normal((nb, n))
        for _ in range(iters):
            q = _normalize(q)
            x = self._solve(-sig, beta, q)
            # σ + qᴴq / qᴴx with qᴴq = 1
            d = _cdot_conj(q, x)
            inc = _cdd_div(np.ones(nb), np.zeros(nb), np.zeros(nb), np.zeros(nb), *d)
            new = np.stack([*_dd_add(sig[:, 0], sig[:, 1], inc[0], inc[1]),
                            *_dd_add(sig[:, 2], sig[:, 3], inc[2], inc[3])], axis=1)
            ok = np.all(np.isfinite(new), axis=1) & np.all(np.isfinite(x), axis=(1, 2))
            sig[ok] = new[ok]
            q[ok] = x[ok]
        return sig


def _cdot_conj(a, b):
    """Σ conj(a_i) b_i over axis 1 for (nb, n, 4) complex dd arrays."""
    p = _cdd_mul(a[..., 0], a[..., 1], -a[..., 2], -a[..., 3],
                 b[..., 0], b[..., 1], b[..., 2], b[..., 3])
    re = DD(p[0], p[1]).sum(axis=1)
    im = DD(p[2], p[3]).sum(axis=1)
    return re.hi, re.lo, im.hi, im.lo


def _normalize(q):
    s = np.sqrt((q[..., 0] ** 2 + q[..., 2] ** 2).sum(axis=1))
    return q / s[:, None, None]


# -- public operations ----------------------------------------------------------

def stability_function(tab, z):
    """r(z) for a tableau (rescaled to [0,1] if needed); complex array."""
    return ResolventForm(tab).evaluate(z)


def eigen_analysis(tab, refine=True):
    """Eigenvalues of S as given (no rescaling), optionally dd-polished."""
    lam = np.linalg.eigvals(tab.S)
    if refine:
        # the Hessenberg form of the [0,1] tableau has eigenvalues S/2
        scale = 2.0 if tab.interval == "[-1,1]" else 1.0
        sig = ResolventForm(tab).refine_eigenvalues(lam / scale)
        lam_dd = sig * scale
        lam = (lam_dd[:, 0] + lam_dd[:, 1]) + 1j * (lam_dd[:, 2] + lam_dd[:, 3])
    order = np.lexsort((lam.imag, lam.real))
    lam = lam[order]
    n_real = int(np.sum(np.abs(lam.imag) <= 1e-12 * np.abs(lam)))
    cplx = lam[np.abs(lam.imag) > 1e-12 * np.abs(lam)]
    upper = np.sort_complex(cplx[cplx.imag > 0])
    lower = np.sort_complex(np.conj(cplx[cplx.imag < 0]))
    if upper.size == lower.size:
        pair_err = float(np.abs(upper - lower).max()) if upper.size else 0.0
    else:
        pair_err = float("inf")
    return {
        "eigenvalues": lam,
        "min_real_part": float(lam.real.min()),
        "n_complex_pairs": int(upper.size),
        "n_real": n_real,
        "conjugate_pair_error": pair_err,
    }


@dataclass
class StabilityReport:
    method: str
    M: int
    c: float
    eigenvalues: np.ndarray
    min_real_part: float
    n_complex_pairs: int
    n_real: int
    conjugate_pair_error: float
    sweep_y: np.ndarray = field(repr=False)
    sweep_defect: np.ndarray = field(repr=False)
    max_sweep_defect: float = float("nan")
    sweep_max_modulus: float = float("nan")
    zero_points: np.ndarray = field(default=None, repr=False)
    zero_residuals: np.ndarray = field(default=None, repr=False)
    max_zero_residual: float = float("nan")
    approx_error: float = float("nan")
    poles_in_rhp: bool = False

    @property
    def a_stable_evidence(self):
        return (self.poles_in_rhp and self.max_sweep_defect <= SWEEP_TOL
                and self.max_zero_residual <= ZERO_TOL * self.sweep_max_modulus)


def sweep_grid(c, y_max=None, grid=4096):
    y_max = 10.0 * c if y_max is None else y_max
    y = np.concatenate([np.geomspace(1e-3, y_max, grid), np.linspace(0.0, 2.0 * c, grid)])
    return np.unique(y)


def check_a_stability(tab, y_max=None, grid=4096, c=None):
    """Eigenvalues, unimodularity sweep, zero check and e^{iy} error.

    The eigenvalue part describes S as given; r(z) is always that of the
    [0, 1] tableau.  Negative y follow from r(z̄) = conj r(z).
    """
    c = tab.c if c is None else c
    eig = eigen_analysis(tab)
    form = ResolventForm(tab)
    y = sweep_grid(c, y_max, grid)
    defect = form.modulus_defect(1j * y)
    mod = np.abs(form.evaluate(1j * y))
    scale = 2.0 if tab.interval == "[-1,1]" else 1.0
    lam01 = eig["eigenvalues"] / scale
    zeros = -1.0 / np.conj(lam01)
    zres = np.abs(form.evaluate(zeros))
    yb = np.linspace(0.0, c, grid)
    approx = float(np.abs(form.evaluate(1j * yb) - np.exp(1j * yb)).max())
    return StabilityReport(
        method=tab.method, M=tab.M, c=float(c),
        eigenvalues=eig["eigenvalues"], min_real_part=eig["min_real_part"],
        n_complex_pairs=eig["n_complex_pairs"], n_real=eig["n_real"],
        conjugate_pair_error=eig["conjugate_pair_error"],
        sweep_y=y, sweep_defect=defect,
        max_sweep_defect=float(np.abs(defect).max()),
        sweep_max_modulus=float(mod.max()),
        zero_points=zeros, zero_residuals=zres, max_zero_residual=float(zres.max()),
        approx_error=approx, poles_in_rhp=bool(eig["min_real_part"] > 0),
    )


# -- output ---------------------------------------------------------------------

def report_to_json(rep):
    lam = rep.eigenvalues
    return json.dumps({
        "method": rep.method, "M": rep.M, "c": rep.c,
        "eigenvalues_re": lam.real.tolist(), "eigenvalues_im": lam.imag.tolist(),
        "min_real_part": rep.min_real_part,
        "n_complex_pairs": rep.n_complex_pairs, "n_real": rep.n_real,
        "conjugate_pair_error": rep.conjugate_pair_error,
        "max_sweep_defect": rep.max_sweep_defect,
        "sweep_max_modulus": rep.sweep_max_modulus,
        "max_zero_residual": rep.max_zero_residual,
        "approx_error": rep.approx_error,
        "poles_in_rhp": rep.poles_in_rhp,
        "a_stable_evidence": rep.a_stable_evidence,
    }, indent=1)


def sweep_to_csv(rep):
    buf = io.StringIO()
    wr = csv.writer(buf)
    wr.writerow(["y", "abs_r_minus_1"])
    for y, d in zip(rep.sweep_y, rep.sweep_defect):
        wr.writerow([repr(float(y)), repr(float(d))])
    return buf.getvalue()
