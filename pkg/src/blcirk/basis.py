"""Interpolating band-limited bases R_k on quadrature nodes.

Two routes are provided.

``exact_pswf``  R_k = Σ_j α_kj ψ_j^c with α fixed by R_k(τ_l) = δ_kl.  The
                collocation matrix ψ_j(τ_l) is well conditioned, so double
                precision is enough.

``approx_pswf`` R_k = Σ_l r_kl e^{icτ_l x} with r = E⁻¹, E_lm = e^{icτ_lτ_m}.
                E is exponentially ill conditioned; r must be accurate
                in the forward sense (its error along the near-null
                direction of E shows up between the nodes), so E⁻¹ is
                taken in mpmath and rounded to double-double.  The same r is
                also assembled from the discrete eigenproblem
                Σ_l w_l E_ml Ψ_j(τ_l) = η_j Ψ_j(τ_m) for cross-checking;
                eigenpairs start from LAPACK and are polished by dd
                Rayleigh-quotient iteration.

Indices are 0-based throughout: k, l, j run over 0..M-1.
"""

from dataclasses import dataclass, field
from typing import Optional

import mpmath as mp
import numpy as np
from scipy.linalg import eig

from .prolate import eval_psi_all, primitive_coeffs, legendre_clenshaw
from . import xprec
from .xprec import DD

__all__ = [
    "InterpBasis", "build_basis_exact", "build_basis_approx", "eval_R", "eval_K",
    "eval_R_all", "eval_K_all",
]

COND_LIMIT = 1e8
_INV_DPS = 50          # cond(E)·|r| reaches ~1e28 at M = 64


@dataclass(frozen=True, eq=False)
class InterpBasis:
    route: str
    c: float
    nodes: np.ndarray
    weights: np.ndarray
    alpha: Optional[np.ndarray] = None          # exact route, (M, M)
    prolate: object = None
    r_re: Optional[DD] = None                   # approx route, E⁻¹ in dd
    r_im: Optional[DD] = None
    r_eig_re: Optional[DD] = None               # approx route, eigen formula
    r_eig_im: Optional[DD] = None
    eta: Optional[np.ndarray] = None
    Psi_disc: Optional[np.ndarray] = None
    cond: float = float("nan")
    extra: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.nodes.size

    @property
    def r(self):
        """E⁻¹ coefficients rounded to complex double."""
        return self.r_re.to_float() + 1j * self.r_im.to_float()


# -- exact route -----------------------------------------------------------------

def build_basis_exact(prolate, rule2c):
    """α with δ_kl = Σ_j α_kj ψ_j(τ_l), using ψ_0..ψ_{M-1} of ``prolate``."""
    nodes = np.asarray(rule2c.nodes, dtype=float)
    M = nodes.size
    if prolate.J < M:
        raise ValueError(f"prolate basis has {prolate.J} orders, need {M}")
    A = eval_psi_all(prolate, nodes, orders=slice(0, M))      # A[l, j] = ψ_j(τ_l)
    cond = float(np.linalg.cond(A))
    if cond > COND_LIMIT:
        raise ArithmeticError(f"collocation matrix condition {cond:.3g} exceeds {COND_LIMIT:g}; "
                              "bandlimit and rule are probably mismatched")
    alpha = np.linalg.solve(A, np.eye(M)).T                    # α A^T = I
    return InterpBasis("exact_pswf", float(prolate.c), nodes.copy(),
                       np.asarray(rule2c.weights, float).copy(), alpha=alpha,
                       prolate=prolate, cond=cond)


# -- approximate route ------------------------------------------------------------

def _cdot(xr, xi, yr, yi):
    # unconjugated complex dd inner product Σ x_l y_l
    return (xr * yr - xi * yi).sum(), (xr * yi + xi * yr).sum()


def _cdiv(ar, ai, br, bi):
    n = br * br + bi * bi
    return (ar * br + ai * bi) / n, (ai * br - ar * bi) / n


def _cmatvec(Ar, Ai, xr, xi):
    return xprec.matmul(Ar, xr) - xprec.matmul(Ai, xi), xprec.matmul(Ar, xi) + xprec.matmul(Ai, xr)


def _discrete_eigen(Er, Ei, w, iters=4):
    """Eigenpairs of D E D (D = diag sqrt w), polished in dd.

    Returns η (complex double), U (complex double, columns with uᵀu = 1)
    and the dd pieces needed for r = D U Η⁻¹ Uᵀ D.
    """
    M = w.size
    d = DD(w).sqrt()
    dd_outer = DD(np.outer(d.hi, np.ones(M)), np.outer(d.lo, np.ones(M)))
    Br = dd_outer * Er * dd_outer.T
    Bi = dd_outer * Ei * dd_outer.T
    Bc = Br.to_float() + 1j * Bi.to_float()
    eta0, U0 = eig(Bc)
    order = np.argsort(-np.abs(eta0), kind="stable")
    eta0, U0 = eta0[order], U0[:, order]
    acc_re = DD(np.zeros((M, M)))
    acc_im = DD(np.zeros((M, M)))
    eta = np.empty(M, dtype=complex)
    U = np.empty((M, M), dtype=complex)
    eye = np.eye(M)
    for j in range(M):
        yr, yi = DD(U0[:, j].real.copy()), DD(U0[:, j].imag.copy())
        sr, si = DD(eta0[j].real), DD(eta0[j].imag)
        for _ in range(iters):
            Sr = Br - DD(eye) * sr
            Si = Bi - DD(eye) * si
            yr, yi = xprec.csolve(Sr, Si, yr, yi, refine=0)
            scale = 1.0 / np.abs(yr.hi + 1j * yi.hi).max()
            yr, yi = yr * scale, yi * scale
            br_, bi_ = _cmatvec(Br, Bi, yr, yi)
            nr, ni = _cdot(yr, yi, br_, bi_)
            qr, qi = _cdot(yr, yi, yr, yi)
            sr, si = _cdiv(nr, ni, qr, qi)
        qr, qi = _cdot(yr, yi, yr, yi)              # uᵀu of the unnormalized vector
        # accumulate u uᵀ / (η uᵀu)
        fr, fi = _cdiv(DD(1.0), DD(0.0), *_cmul_s(sr, si, qr, qi))
        ur = DD(np.outer(yr.hi, np.ones(M)), np.outer(yr.lo, np.ones(M)))
        ui = DD(np.outer(yi.hi, np.ones(M)), np.outer(yi.lo, np.ones(M)))
        pr = ur * ur.T - ui * ui.T
        pi = ur * ui.T + ui * ur.T
        acc_re = acc_re + (pr * fr - pi * fi)
        acc_im = acc_im + (pr * fi + pi * fr)
        eta[j] = complex(sr.to_float(), si.to_float())
        # normalized complex-symmetric eigenvector, sign fixed by its first entry
        u = (yr.to_float() + 1j * yi.to_float()) / np.sqrt(complex(qr.to_float(), qi.to_float()))
        U[:, j] = u if u[0].real >= 0 else -u
    Dr = dd_outer
    r_re = Dr * acc_re * Dr.T
    r_im = Dr * acc_im * Dr.T
    return eta, U, r_re, r_im


def _cmul_s(ar, ai, br, bi):
    return ar * br - ai * bi, ar * bi + ai * br


def _mp_inverse(c, nodes, dps=_INV_DPS):
    with mp.workdps(dps):
        cm = mp.mpf(float(c))
        t = [mp.mpf(float(v)) for v in nodes]
        M = len(t)
        E = mp.matrix(M, M)
        for i in range(M):
            for j in range(i, M):
                E[i, j] = E[j, i] = mp.expj(cm * t[i] * t[j])
        r = mp.inverse(E).tolist()
        re = xprec.from_mp([[v.real for v in row] for row in r])
        im = xprec.from_mp([[v.imag for v in row] for row in r])
    return re, im


def build_basis_approx(rule2c, c, eigen_route=True):
    """Exponential interpolating basis from the inverse of E."""
    nodes = np.asarray(rule2c.nodes, dtype=float)
    w = np.asarray(rule2c.weights, dtype=float)
    M = nodes.size
    Er, Ei = xprec.mp_cos_sin(c, nodes, nodes)
    r_re, r_im = _mp_inverse(c, nodes)
    kw = {}
    if eigen_route:
        eta, U, rer, rei = _discrete_eigen(Er, Ei, w)
        kw = dict(r_eig_re=rer, r_eig_im=rei, eta=eta, Psi_disc=U / np.sqrt(w)[:, None])
    return InterpBasis("approx_pswf", float(c), nodes.copy(), w.copy(),
                       r_re=r_re, r_im=r_im, **kw)


# -- evaluation -------------------------------------------------------------------

def _domain(x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(np.abs(x) > 1):
        raise ValueError("x must lie in [-1, 1]")
    return x


def eval_R_all(basis, x, return_imag=False):
    """Values R_k(x) for every k; shape ``(len(x), M)``."""
    x = _domain(x)
    if basis.route == "exact_pswf":
        P = eval_psi_all(basis.prolate, x, orders=slice(0, basis.M))
        return P @ basis.alpha.T
    Cr, Ci = xprec.mp_cos_sin(basis.c, x, basis.nodes)
    re = xprec.matmul(Cr, basis.r_re.T) - xprec.matmul(Ci, basis.r_im.T)
    if return_imag:
        im = xprec.matmul(Cr, basis.r_im.T) + xprec.matmul(Ci, basis.r_re.T)
        return re.to_float(), im.to_float()
    return re.to_float()


def eval_K_all(basis, x):
    """Primitives K_k(x) = ∫_{-1}^x R_k for every k; shape ``(len(x), M)``."""
    x = _domain(x)
    M = basis.M
    if basis.route == "exact_pswf":
        pc = primitive_coeffs(basis.prolate, orders=slice(0, M))
        Phi = legendre_clenshaw(pc, x)
        Phi[x == -1.0] = 0.0
        return Phi @ basis.alpha.T
    tau = basis.nodes
    Cr, Ci = xprec.mp_cos_sin(basis.c, x, tau)            # e^{icτ_l x}
    C1r, C1i = xprec.mp_cos_sin(basis.c, [-1.0], tau)     # e^{-icτ_l}
    Nr = Cr - DD(np.ones((x.size, 1))) @ C1r
    Ni = Ci - DD(np.ones((x.size, 1))) @ C1i
    zero = tau == 0.0
    ct = DD(np.where(zero, 1.0, tau)) * DD(basis.c)
    # (a + ib) / (i cτ) = b / cτ - i a / cτ
    Fr = DD(Ni.hi, Ni.lo) / DD(np.broadcast_to(ct.hi, Ni.shape), np.broadcast_to(ct.lo, Ni.shape))
    Fi = -(DD(Nr.hi, Nr.lo) / DD(np.broadcast_to(ct.hi, Nr.shape), np.broadcast_to(ct.lo, Nr.shape)))
    if np.any(zero):
        Fr.hi[:, zero] = (x + 1.0)[:, None]
        Fr.lo[:, zero] = 0.0
        Fi.hi[:, zero] = 0.0
        Fi.lo[:, zero] = 0.0
    re = xprec.matmul(Fr, basis.r_re.T) - xprec.matmul(Fi, basis.r_im.T)
    return re.to_float()


def eval_R(basis, k, x):
    return eval_R_all(basis, x)[:, k]


def eval_K(basis, k, x):
    return eval_K_all(basis, x)[:, k]
