"""Prolate spheroidal wave functions on [-1, 1].

ψ_j^c is expanded in normalized Legendre polynomials
P̄_k = sqrt(k + 1/2) P_k.  In that basis the Sturm–Liouville operator

    L_c ψ = -((1 - x²) ψ')' + c² x² ψ

is symmetric pentadiagonal and decouples by parity, so each parity block
is a symmetric tridiagonal eigenproblem (solved with LAPACK's banded
driver).  Eigenvalues λ_j of the finite Fourier operator

    (F_c ψ)(x) = ∫ e^{icxy} ψ(y) dy

follow from the two lowest Legendre moments: at x = 0 the kernel
collapses to 1 (even j) or to icy after one derivative (odd j), giving

    λ_j ψ_j(0)  = sqrt(2) β_0,        j even,
    λ_j ψ_j'(0) = ic sqrt(2/3) β_1,   j odd.

For large j the moments β_0, β_1 are tiny and the plain eigenvector only
resolves them to absolute, not relative, accuracy.  In extended mode the
small leading components are recomputed from the three-term recurrence
(ratio form, stable in the evanescent range) in double-double, with the
eigenvalue refined by a dd Rayleigh quotient.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eig_banded

from ._accel import njit, kernel
from .xprec import _j_add, _j_sub, _j_mul, _j_div, _dd_add, _dd_sub, _dd_mul, DD

__all__ = [
    "ProlateBasis", "build_prolate_basis", "eval_psi", "eval_dpsi", "eval_phi",
    "eval_psi_all", "lambda_eigenvalue", "operator_residual",
    "legendre_clenshaw", "basis_to_json", "basis_from_json",
]

LAMBDA_EXTENDED_BELOW = 1e-13


@dataclass(frozen=True)
class ProlateBasis:
    c: float
    J: int
    K: int
    coeffs: np.ndarray          # (J, K) normalized-Legendre coefficients
    gamma: np.ndarray           # (J,) eigenvalues of L_c
    lam: np.ndarray             # (J,) complex eigenvalues of F_c
    precision: str = "standard"
    mu: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("coeffs", "gamma", "lam"):
            getattr(self, name).setflags(write=False)
        mu = self.c * np.abs(self.lam) ** 2 / (2 * np.pi)
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def __hash__(self):
        return id(self)


# -- Legendre series evaluation --------------------------------------------

@njit
def _clenshaw_jit(a, x):
    # a: (J, K) coefficients in P̄_k; x: (N,) -> (N, J)
    J, K = a.shape
    N = x.shape[0]
    s = np.empty(K); al = np.empty(K); be = np.empty(K)
    for k in range(K):
        s[k] = math.sqrt(k + 0.5)
        al[k] = (2.0 * k + 1.0) / (k + 1.0)
        be[k] = (k + 1.0) / (k + 2.0)
    sa = np.empty((K, J))
    for j in range(J):
        for k in range(K):
            sa[k, j] = a[j, k] * s[k]
    out = np.empty((N, J))
    b1 = np.empty(J)
    b2 = np.empty(J)
    for i in range(N):
        xi = x[i]
        b1[:] = 0.0
        b2[:] = 0.0
        # independent recurrences innermost so they pipeline
        for k in range(K - 1, -1, -1):
            ak = al[k] * xi
            bk = be[k]
            for j in range(J):
                t = sa[k, j] + ak * b1[j] - bk * b2[j]
                b2[j] = b1[j]
                b1[j] = t
        out[i, :] = b1
    return out


def _clenshaw_np(a, x):
    J, K = a.shape
    s = np.sqrt(np.arange(K) + 0.5)
    b1 = np.zeros((x.size, J))
    b2 = np.zeros((x.size, J))
    xx = x[:, None]
    for k in range(K - 1, -1, -1):
        bk = a[None, :, k] * s[k] + (2.0 * k + 1.0) / (k + 1.0) * xx * b1 - (k + 1.0) / (k + 2.0) * b2
        b2 = b1
        b1 = bk
    return b1


_clenshaw = kernel(_clenshaw_jit, _clenshaw_np)


@njit
def _clenshaw_dd_jit(a, x, sh, sl, ah, al, bh, bl):
    K = a.shape[0]
    N = x.shape[0]
    out = np.empty((N, 2))
    for i in range(N):
        b1h = 0.0; b1l = 0.0; b2h = 0.0; b2l = 0.0
        for k in range(K - 1, -1, -1):
            th, tl = _j_mul(a[k], 0.0, sh[k], sl[k])
            ph, pl = _j_mul(ah[k], al[k], x[i], 0.0)
            ph, pl = _j_mul(ph, pl, b1h, b1l)
            th, tl = _j_add(th, tl, ph, pl)
            ph, pl = _j_mul(bh[k], bl[k], b2h, b2l)
            th, tl = _j_sub(th, tl, ph, pl)
            b2h = b1h; b2l = b1l
            b1h = th; b1l = tl
        out[i, 0] = b1h
        out[i, 1] = b1l
    return out


def _clenshaw_dd_np(a, x, sh, sl, ah, al, bh, bl):
    N = x.shape[0]
    b1h = np.zeros(N); b1l = np.zeros(N); b2h = np.zeros(N); b2l = np.zeros(N)
    for k in range(a.shape[0] - 1, -1, -1):
        th, tl = _dd_mul(a[k], 0.0, sh[k], sl[k])
        ph, pl = _dd_mul(ah[k], al[k], x, 0.0)
        ph, pl = _dd_mul(ph, pl, b1h, b1l)
        th, tl = _dd_add(th, tl, ph, pl)
        ph, pl = _dd_mul(bh[k], bl[k], b2h, b2l)
        th, tl = _dd_sub(th, tl, ph, pl)
        b2h, b2l = b1h, b1l
        b1h, b1l = th, tl
    return np.stack([b1h, b1l], axis=1)


_clenshaw_dd = kernel(_clenshaw_dd_jit, _clenshaw_dd_np)


def legendre_clenshaw_dd(coeffs, x):
    """Double-double Clenshaw sum of one normalized-Legendre series.

    Coefficients and points are taken as exact doubles; returns ``(hi, lo)``.
    """
    a = np.ascontiguousarray(coeffs, dtype=np.float64)
    x = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    k = np.arange(a.size, dtype=float)
    s = DD(k + 0.5).sqrt()
    al = DD(2 * k + 1) / DD(k + 1)
    be = DD(k + 1) / DD(k + 2)
    out = _clenshaw_dd(a, x, s.hi, s.lo, al.hi, al.lo, be.hi, be.lo)
    return out[:, 0], out[:, 1]


def legendre_clenshaw(coeffs, x):
    """Evaluate rows of ``coeffs`` (normalized-Legendre series) at ``x``.

    Returns an array of shape ``(len(x), n_rows)``.
    """
    a = np.ascontiguousarray(np.atleast_2d(coeffs), dtype=np.float64)
    x = np.ascontiguousarray(np.atleast_1d(x), dtype=np.float64)
    return _clenshaw(a, x)


def _norm_scale(K):
    return np.sqrt(np.arange(K) + 0.5)


def _to_plain(coeffs):
    """Normalized-Legendre coefficients -> plain Legendre coefficients."""
    return coeffs * _norm_scale(coeffs.shape[-1])


def _from_plain(coeffs):
    return coeffs / _norm_scale(coeffs.shape[-1])


def _derivative_coeffs(coeffs):
    d = np.polynomial.legendre.legder(_to_plain(coeffs).T).T
    d = np.hstack([d, np.zeros((d.shape[0], 1))])
    return _from_plain(d)


def _primitive_coeffs(coeffs):
    # ∫_{-1}^x P_n = (P_{n+1} - P_{n-1}) / (2n + 1), and ∫_{-1}^x P_0 = P_1 + P_0;
    # every term vanishes at x = -1 individually.
    a = _to_plain(coeffs)
    J, K = a.shape
    out = np.zeros((J, K + 1))
    out[:, 0] += a[:, 0]
    out[:, 1] += a[:, 0]
    n = np.arange(1, K)
    out[:, 2:K + 1] += a[:, 1:] / (2 * n + 1)
    out[:, 0:K - 1] -= a[:, 1:] / (2 * n + 1)
    return _from_plain(out)


# -- construction ------------------------------------------------------------

def _pentadiagonal(c, K):
    k = np.arange(K + 2, dtype=float)
    a = np.zeros_like(k)
    a[1:] = k[1:] / np.sqrt((2 * k[1:] - 1) * (2 * k[1:] + 1))
    diag = k[:K] * (k[:K] + 1) + c * c * (a[1:K + 1] ** 2 + a[:K] ** 2)
    off = c * c * a[1:K - 1] * a[2:K]        # entry (k, k+2)
    return diag, off


def _solve_blocks(c, J, K):
    diag, off = _pentadiagonal(c, K)
    V = np.zeros((J, K))
    gam = np.zeros(J)
    blocks = {}
    for p in (0, 1):
        d = diag[p::2]
        o = off[p::2][: d.size - 1]
        n = (J - p + 1) // 2
        if n == 0:
            continue
        w, v = eig_banded(np.vstack([np.r_[0.0, o], d]), lower=False,
                          select="i", select_range=(0, n - 1))
        if not np.all(np.isfinite(w)):
            raise np.linalg.LinAlgError("prolate eigensolve did not converge")
        for i in range(n):
            V[2 * i + p, p::2] = v[:, i]
            gam[2 * i + p] = w[i]
        blocks[p] = (d, o)
    return V, gam, blocks


@njit
def _refine_leading(d, o, gh, gl, x, stop):
    # Recompute x[0..stop] from x[stop+1] with the ratio recurrence in dd.
    # Row i of the block: o[i-1] x[i-1] + (d[i] - γ) x[i] + o[i] x[i+1] = 0.
    rh = np.zeros(stop + 1)
    rl = np.zeros(stop + 1)
    for i in range(stop + 1):
        dh, dl = _j_sub(d[i], 0.0, gh, gl)
        if i > 0:
            ph, pl = _j_mul(o[i - 1], 0.0, rh[i - 1], rl[i - 1])
            dh, dl = _j_add(dh, dl, ph, pl)
        rh[i], rl[i] = _j_div(-o[i], 0.0, dh, dl)
    xh = np.zeros(stop + 2)
    xl = np.zeros(stop + 2)
    xh[stop + 1] = x[stop + 1]
    for i in range(stop, -1, -1):
        xh[i], xl[i] = _j_mul(rh[i], rl[i], xh[i + 1], xl[i + 1])
    return xh, xl


def _rayleigh_dd(d, o, x):
    # dd Rayleigh quotient xᵀTx / xᵀx for a symmetric tridiagonal T
    X = DD(x)
    Tx = DD(d) * X
    Tx[:-1] = Tx[:-1] + DD(o) * X[1:]
    Tx[1:] = Tx[1:] + DD(o) * X[:-1]
    q = (X * Tx).sum() / (X * X).sum()
    return float(q.hi), float(q.lo)


def _moment_lambda(c, beta0, beta1, j, psi0, dpsi0):
    if j % 2 == 0:
        return complex(math.sqrt(2.0) * beta0 / psi0, 0.0)
    return complex(0.0, c * math.sqrt(2.0 / 3.0) * beta1 / dpsi0)


def build_prolate_basis(c, J, precision="standard"):
    """Compute ψ_0..ψ_{J-1} at bandlimit ``c`` and their eigenvalues.

    ``precision='extended'`` recomputes the moments behind λ_j in
    double-double whenever |λ_j| < 1e-13.
    """
    if not c > 0:
        raise ValueError(f"bandlimit must be positive, got {c!r}")
    if J < 1:
        raise ValueError("J must be at least 1")
    if precision not in ("standard", "extended"):
        raise ValueError(f"unknown precision {precision!r}")
    c = float(c)
    K = 2 * J + int(math.ceil(c)) + 40
    for _ in range(20):
        V, gam, blocks = _solve_blocks(c, J, K)
        if np.abs(V[:, -6:]).max() < 1e-16:
            break
        K = int(math.ceil(1.25 * K))
    else:
        raise np.linalg.LinAlgError("Legendre expansion failed to converge")

    # ψ_j(1) > 0
    at1 = legendre_clenshaw(V, np.array([1.0]))[0]
    V *= np.where(at1 < 0, -1.0, 1.0)[:, None]

    psi0 = legendre_clenshaw(V, np.array([0.0]))[0]
    dpsi0 = legendre_clenshaw(_derivative_coeffs(V), np.array([0.0]))[0]
    lam = np.empty(J, dtype=complex)
    for j in range(J):
        lam[j] = _moment_lambda(c, V[j, 0], V[j, 1] if K > 1 else 0.0, j, psi0[j], dpsi0[j])
        den = abs(psi0[j]) if j % 2 == 0 else abs(dpsi0[j]) / max(c, 1.0)
        if den < 1e-8:
            raise ArithmeticError(f"degenerate evaluation point for λ_{j}")

    if precision == "extended":
        for j in np.nonzero(np.abs(lam) < LAMBDA_EXTENDED_BELOW)[0]:
            p = j % 2
            d, o = blocks[p]
            x = V[j, p::2].copy()
            gh, gl = _rayleigh_dd(d, o, x)
            stop = int(np.argmax(np.abs(x))) - 1
            if stop < 0:
                continue
            xh, xl = _refine_leading(np.ascontiguousarray(d), np.ascontiguousarray(o), gh, gl, x, stop)
            x[: stop + 1] = xh[: stop + 1] + xl[: stop + 1]
            V[j, p::2] = x
            lam[j] = _moment_lambda(c, V[j, 0], V[j, 1], j, psi0[j], dpsi0[j])
            gam[j] = gh + gl

    return ProlateBasis(c=c, J=J, K=K, coeffs=V, gamma=gam, lam=lam, precision=precision)


# -- evaluation ---------------------------------------------------------------

def _check_domain(x):
    x = np.asarray(x, dtype=np.float64)
    if np.any(np.abs(x) > 1.0):
        raise ValueError("x must lie in [-1, 1]")
    return x


def _check_index(basis, j):
    if not 0 <= j < basis.J:
        raise IndexError(f"order {j} outside 0..{basis.J - 1}")


def eval_psi_all(basis, x, orders=None):
    """Values ψ_j(x) for all (or selected) orders; shape ``(len(x), n)``."""
    x = _check_domain(x)
    a = basis.coeffs if orders is None else basis.coeffs[orders]
    return legendre_clenshaw(a, x.ravel())


def eval_psi(basis, j, x):
    _check_index(basis, j)
    x = _check_domain(x)
    return legendre_clenshaw(basis.coeffs[j], x.ravel())[:, 0].reshape(x.shape)


def eval_dpsi(basis, j, x):
    _check_index(basis, j)
    x = _check_domain(x)
    d = _derivative_coeffs(basis.coeffs[j:j + 1])
    return legendre_clenshaw(d, x.ravel())[:, 0].reshape(x.shape)


def eval_phi(basis, j, x):
    """Primitive Φ_j(x) = ∫_{-1}^x ψ_j, exactly zero at x = -1."""
    _check_index(basis, j)
    x = _check_domain(x)
    p = _primitive_coeffs(basis.coeffs[j:j + 1])
    out = legendre_clenshaw(p, x.ravel())[:, 0].reshape(x.shape)
    return np.where(x == -1.0, 0.0, out)


def primitive_coeffs(basis, orders=None):
    a = basis.coeffs if orders is None else basis.coeffs[orders]
    return _primitive_coeffs(np.atleast_2d(a))


def lambda_eigenvalue(basis, j):
    _check_index(basis, j)
    return complex(basis.lam[j])


def operator_residual(basis, grid=1000):
    """max_x |L_c ψ_j - γ_j ψ_j| / (|γ_j| + c²) for every j.

    L_c is applied through plain Legendre-series algebra (numpy), which is
    independent of the pentadiagonal assembly used to build the basis.
    """
    leg = np.polynomial.legendre
    x = np.linspace(-1, 1, grid)
    a = _to_plain(basis.coeffs)
    n = np.arange(a.shape[1])
    out = np.empty(basis.J)
    c2 = basis.c ** 2
    for j in range(basis.J):
        t1 = a[j] * n * (n + 1)
        t2 = c2 * leg.legmulx(leg.legmulx(a[j]))
        lhs = leg.legval(x, t1) + leg.legval(x, t2)
        res = lhs - basis.gamma[j] * leg.legval(x, a[j])
        out[j] = np.abs(res).max() / (abs(basis.gamma[j]) + c2)
    return out


# -- serialization ------------------------------------------------------------

def basis_to_json(basis):
    return json.dumps({
        "c": basis.c, "J": basis.J, "K": basis.K, "precision": basis.precision,
        "gamma": basis.gamma.tolist(),
        "lambda_re": basis.lam.real.tolist(), "lambda_im": basis.lam.imag.tolist(),
        "coeffs": basis.coeffs.tolist(),
    })


def basis_from_json(text):
    d = json.loads(text)
    lam = np.asarray(d["lambda_re"]) + 1j * np.asarray(d["lambda_im"])
    return ProlateBasis(c=float(d["c"]), J=int(d["J"]), K=int(d["K"]),
                        coeffs=np.asarray(d["coeffs"], dtype=float),
                        gamma=np.asarray(d["gamma"], dtype=float), lam=lam,
                        precision=d.get("precision", "standard"))
