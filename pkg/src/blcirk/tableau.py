"""Symplectic band-limited collocation Runge–Kutta tableaus.

A tableau on [-1, 1] is (τ, w, S) with S_kj ≈ ∫_{-1}^{τ_k} R_j, where R_j
is the interpolating basis on the nodes.  Three constructions:

``collocation_split``  S = T + A·diag(w), T_kj = w_k w_j / (w_k + w_j),
                       A antisymmetric, fitted so that every exponential
                       e^{icτ_m x} is integrated exactly at the nodes.
                       The fit is a dd solve; symplecticity holds by
                       algebra once A is antisymmetrized.
``exact_pswf``         w_k S_kl = ∫ K_l R_k expanded over ψ_j, with the
                       integrals I_jj' = ∫ Φ_j ψ_j' given in closed form.
``approx_pswf``        w_k S_kl = (r G rᵀ)_kl with r = E⁻¹ and G the
                       exponential moments.

The two basis routes are projected onto the symplectic manifold at the
end (symmetric part of W S replaced by ½ w wᵀ).  Entries are held in
double-double so that serialized tableaus carry ~32 correct digits.
"""

import json
import math
from dataclasses import dataclass, field, replace

import mpmath as mp
import numpy as np

from . import xprec
from .xprec import DD
from .prolate import eval_psi_all, primitive_coeffs, legendre_clenshaw
from .quadrature import gauss_legendre

__all__ = [
    "Tableau", "build_tableau_collocation", "build_tableau_exact_pswf",
    "build_tableau_approx_pswf", "build_tableau_gauss_legendre",
    "symplectic_residual", "collocation_residual", "min_eig_real_part",
    "rescale_to_unit", "certify", "exact_integrals", "direct_integrals",
    "weight_defect", "product_rule_check", "tableau_to_json", "tableau_from_json",
    "max_difference",
]

METHODS = ("collocation_split", "exact_pswf", "approx_pswf", "gauss_legendre")
SYMPLECTIC_TOL = 1e-14
_DPS = 40


@dataclass(frozen=True, eq=False)
class Tableau:
    method: str
    interval: str               # "[-1,1]" or "[0,1]"
    c: float
    eps: float
    nodes_dd: DD
    weights_dd: DD
    S_dd: DD
    certificates: dict = field(default_factory=dict)

    @property
    def M(self):
        return self.nodes_dd.shape[0]

    @property
    def nodes(self):
        return self.nodes_dd.to_float()

    @property
    def weights(self):
        return self.weights_dd.to_float()

    @property
    def S(self):
        return self.S_dd.to_float()


# -- shared helpers ---------------------------------------------------------------

def _mpf_list(x):
    return [mp.mpf(float(h)) + mp.mpf(float(l)) for h, l in zip(x.hi.ravel(), x.lo.ravel())]


def _col(v):
    return DD(v.hi[:, None], v.lo[:, None])


def _row(v):
    return DD(v.hi[None, :], v.lo[None, :])


def _to_unit_nodes(t):
    # [0,1] -> [-1,1]; doubling is exact, the shift is done in dd
    return t * 2.0 - 1.0


def _as_symmetric_interval(tab):
    if tab.interval == "[-1,1]":
        return tab.nodes_dd, tab.weights_dd, tab.S_dd, 1.0
    return _to_unit_nodes(tab.nodes_dd), tab.weights_dd * 2.0, tab.S_dd * 2.0, 0.5


def _trig(c, tau):
    """dd cos/sin of c·τ_m·τ_j with τ given in dd."""
    ch = np.empty((tau.shape[0],) * 2)
    cl, sh, sl = np.empty_like(ch), np.empty_like(ch), np.empty_like(ch)
    with mp.workdps(_DPS):
        t = _mpf_list(tau)
        cm = mp.mpf(float(c))
        for m, tm in enumerate(t):
            a = cm * tm
            for j, tj in enumerate(t):
                cv, sv = mp.cos_sin(a * tj)
                h = float(cv); ch[m, j] = h; cl[m, j] = float(cv - h)
                h = float(sv); sh[m, j] = h; sl[m, j] = float(sv - h)
    return DD(ch, cl), DD(sh, sl)


def _sym_project(P, w):
    """Replace the symmetric part of P = W S by ½ w wᵀ and return S."""
    half = _col(w) * _row(w) * 0.5
    anti = (P - P.T) * 0.5
    return (half + anti) / _col(w)


def _make(method, c, eps, nodes, weights, S, interval="[-1,1]", certify_now=True):
    tab = Tableau(method, interval, float(c), float(eps), nodes, weights, S)
    if certify_now:
        tab = replace(tab, certificates=certify(tab))
    return tab


# -- certificates -------------------------------------------------------------------

def symplectic_residual(tab):
    """max |w_k S_kj + w_j S_jk - w_k w_j| for the tableau rounded to doubles."""
    w, S = tab.weights, tab.S
    P = w[:, None] * S
    return float(np.abs(P + P.T - np.outer(w, w)).max())


def collocation_residual(tab, c=None):
    """max_{m,k} |∫_{-1}^{τ_k} e^{icτ_m x} dx - Σ_j S_kj e^{icτ_m τ_j}| in dd.

    For a [0,1] tableau the residual of the halved equations is returned.
    """
    c = tab.c if c is None else c
    tau, _, S, scale = _as_symmetric_interval(tab)
    M = tau.shape[0]
    C, Sn = _trig(c, tau)                        # C[m, j] = cos(cτ_mτ_j)
    lhs_re = xprec.matmul(S, C.T)                 # [k, m]
    lhs_im = xprec.matmul(S, Sn.T)
    rre, rim = _exact_moments(c, tau)
    res = np.hypot((rre - lhs_re).to_float(), (rim - lhs_im).to_float())
    return float(res.max()) * scale


def _exact_moments(c, tau):
    """[k, m] entries of ∫_{-1}^{τ_k} e^{icτ_m x} dx as dd (re, im)."""
    M = tau.shape[0]
    re_h = np.empty((M, M)); re_l = np.empty_like(re_h)
    im_h = np.empty_like(re_h); im_l = np.empty_like(re_h)
    with mp.workdps(_DPS):
        t = _mpf_list(tau)
        cm = mp.mpf(float(c))
        for k, tk in enumerate(t):
            ln = tk + 1
            for m, tm in enumerate(t):
                th = cm * tm
                if th == 0:
                    vr, vi = ln, mp.mpf(0)
                else:
                    amp = ln * mp.sinc(th * ln / 2)
                    cs, sn = mp.cos_sin(th * (tk - 1) / 2)
                    vr, vi = amp * cs, amp * sn
                h = float(vr); re_h[k, m] = h; re_l[k, m] = float(vr - h)
                h = float(vi); im_h[k, m] = h; im_l[k, m] = float(vi - h)
    return DD(re_h, re_l), DD(im_h, im_l)


def min_eig_real_part(tab):
    return float(np.linalg.eigvals(tab.S).real.min())


def certify(tab):
    return {
        "symplectic_residual": symplectic_residual(tab),
        "symplectic_scale": float(np.outer(tab.weights, tab.weights).max()),
        "collocation_residual": collocation_residual(tab),
        "min_eig_real_part": min_eig_real_part(tab),
    }


# -- collocation route ----------------------------------------------------------------

def build_tableau_collocation(rule, c, eps, check=True):
    """Split construction S = T + A W on the nodes of a 2c rule.

    The antisymmetric part solves, for every node k and frequency cτ_m,

        Σ_j Ã_kj w_j (cos + sin)(cτ_m τ_j) = u_km + v_km

    (real and imaginary collocation conditions added together), in dd.
    """
    tau = DD(np.asarray(rule.nodes, dtype=float))
    w = DD(np.asarray(rule.weights, dtype=float))
    M = tau.shape[0]
    T = _col(w) * _row(w) / (_col(w) + _row(w))
    C, Sn = _trig(c, tau)                                  # [m, j]
    mre, mim = _exact_moments(c, tau)                      # [k, m]
    u = mre - xprec.matmul(T, C.T)
    v = mim - xprec.matmul(T, Sn.T)
    H = (C + Sn) * _row(w)                                 # [m, j]
    At = xprec.solve(H, (u + v).T, refine=1).T             # Ã[k, j]
    A = (At - At.T) * 0.5
    S = T + A * _row(w)
    tab = _make("collocation_split", c, eps, tau, w, S)
    # the dropped Σ T·sin term vanishes by node/weight symmetry; record its size
    tsin = float(np.abs(xprec.matmul(T, Sn.T).to_float()).max())
    cert = dict(tab.certificates, v_symmetry_term=tsin,
                solve_residual=float(np.abs((xprec.matmul(At, H.T) - (u + v)).to_float()).max()))
    tab = replace(tab, certificates=cert)
    if check and cert["collocation_residual"] > eps:
        raise ArithmeticError(f"collocation residual {cert['collocation_residual']:.3g} exceeds eps={eps:g}")
    return tab


# -- exact PSWF route -------------------------------------------------------------------

def _gl(n, a=-1.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def exact_integrals(prolate, M):
    """I_jj' = ∫ Φ_j ψ_j' from the parity case formulas (real M×M)."""
    lam = prolate.lam[:M]
    n = prolate.K + 16
    x, wx = _gl(2 * (n // 2))                              # even count, 0 excluded
    y, wy = _gl(n, 0.0, 1.0)
    Px = eval_psi_all(prolate, x, orders=slice(0, M))
    Py = eval_psi_all(prolate, y, orders=slice(0, M))
    psi0 = eval_psi_all(prolate, np.array([0.0]), orders=slice(0, M))[0]
    c = prolate.c
    I = np.zeros((M, M))
    even = np.arange(0, M, 2)
    odd = np.arange(1, M, 2)
    for j in even:
        for jp in even:
            I[j, jp] = 0.5 * (lam[j] * lam[jp]).real * psi0[j] * psi0[jp]
    over_y = (Px / x[:, None]).T @ (wx[:, None] * Px)       # [j', j] of ∫ψ_j' ψ_j / y
    int_over_y = (Py / y[:, None]).T @ wy                   # ∫_0^1 ψ_j'/y
    int_half = Py.T @ wy                                    # ∫_0^1 ψ_j'
    for j in even:
        for jp in odd:
            q = over_y[jp, j]
            if abs(lam[jp]) < abs(lam[j]):
                val = lam[jp] / (1j * c * lam[j]) * q
                I[j, jp] = val.real
                I[jp, j] = -val.real
            else:
                br = q - 2 * psi0[j] * int_over_y[jp] + 1j * c * psi0[j] * np.conj(lam[jp]) * int_half[jp]
                val = lam[j] / (1j * c * lam[jp]) * br
                I[jp, j] = val.real
                I[j, jp] = -val.real
    return I


def direct_integrals(prolate, M):
    """I_jj' = ∫ Φ_j ψ_j' by Gauss–Legendre on the Legendre expansions."""
    x, wx = _gl(prolate.K + 4)
    P = eval_psi_all(prolate, x, orders=slice(0, M))
    Phi = legendre_clenshaw(primitive_coeffs(prolate, orders=slice(0, M)), x)
    return Phi.T @ (wx[:, None] * P)


def build_tableau_exact_pswf(prolate, basis_exact, eps):
    """w_k S_kl = Σ α_lj α_kj' I_jj'; weights w_k = Σ_j α_kj λ_j ψ_j(0)."""
    M = basis_exact.M
    alpha = basis_exact.alpha
    I = exact_integrals(prolate, M)
    psi0 = eval_psi_all(prolate, np.array([0.0]), orders=slice(0, M))[0]
    w = DD(alpha) @ DD((prolate.lam[:M] * psi0).real)
    a = DD(alpha)
    P = xprec.matmul(xprec.matmul(a, DD(I.T)), a.T)         # [k, l]
    S = _sym_project(P, w)
    tau = DD(np.asarray(basis_exact.nodes, dtype=float))
    tab = _make("exact_pswf", prolate.c, eps, tau, w, S)
    cert = dict(tab.certificates, weight_defect=float(np.abs(w.to_float() - basis_exact.weights).max()))
    return replace(tab, certificates=cert)


# -- approximate PSWF route ---------------------------------------------------------

def _mp_moment(cm, a, b):
    # ∫ e^{iax} (e^{ibx} - e^{-ib}) / (ib) dx; the b = 0 limit is ∫ e^{iax}(x + 1) dx
    if b == 0:
        if a == 0:
            return mp.mpc(2)
        return 2 * mp.sinc(a) + 2j * (mp.sin(a) - a * mp.cos(a)) / a ** 2
    return 2 * (mp.sinc(a + b) - mp.expj(-b) * mp.sinc(a)) / (1j * b)


def moment_matrix(c, tau, dps=_DPS):
    """G_jj' = ∫ e^{icτ_j x} (e^{icτ_j' x} - e^{-icτ_j'}) / (icτ_j') dx (mpmath)."""
    M = len(tau)
    G = mp.matrix(M, M)
    with mp.workdps(dps):
        cm = mp.mpf(float(c))
        ct = [cm * mp.mpf(float(v)) for v in tau]
        for j in range(M):
            for jp in range(M):
                G[j, jp] = _mp_moment(cm, ct[j], ct[jp])
    return G


def _mp_to_dd(A, part):
    rows, cols = A.rows, A.cols
    h = np.empty((rows, cols)); l = np.empty_like(h)
    for i in range(rows):
        for j in range(cols):
            v = getattr(A[i, j], part) if part else A[i, j]
            h[i, j] = float(v)
            l[i, j] = float(v - h[i, j])
    return DD(h, l)


def build_tableau_approx_pswf(basis_approx, eps, dps=_DPS):
    """w_k S_kl = (r G rᵀ)_kl with r = E⁻¹.

    The product amplifies rounding in r and G by roughly cond(E)², which
    exceeds what double-double can absorb for M ≳ 40, so this route runs
    entirely in mpmath at ``dps`` digits.
    """
    tau = np.asarray(basis_approx.nodes, dtype=float)
    c = basis_approx.c
    M = tau.size
    with mp.workdps(dps):
        cm = mp.mpf(float(c))
        tm = [mp.mpf(float(v)) for v in tau]
        E = mp.matrix(M, M)
        for i in range(M):
            for j in range(i, M):
                E[i, j] = E[j, i] = mp.expj(cm * tm[i] * tm[j])
        r = mp.inverse(E)
        G = moment_matrix(c, tau, dps)
        P = r * G * r.T
        # w_k = ∫ R_k = Σ_l r_kl 2 sinc(cτ_l)
        w = r * mp.matrix([2 * mp.sinc(cm * v) for v in tm])
        Pr, Pi = _mp_to_dd(P, "real"), _mp_to_dd(P, "imag")
        wr = _mp_to_dd(w, "real")
    w = DD(wr.hi[:, 0], wr.lo[:, 0])
    S = _sym_project(Pr, w)
    tab = _make("approx_pswf", c, eps, DD(tau), w, S)
    cert = dict(tab.certificates,
                imag_residue=float(np.abs(Pi.to_float()).max()),
                weight_defect=float(np.abs(w.to_float() - basis_approx.weights).max()))
    return replace(tab, certificates=cert)


# -- Gauss–Legendre comparison tableau -------------------------------------------------

def build_tableau_gauss_legendre(M):
    """Gauss collocation tableau: S_kj = ∫_{-1}^{τ_k} ℓ_j (Lagrange)."""
    leg = np.polynomial.legendre
    x, w = gauss_legendre(M)
    n = np.arange(M)
    scale = np.sqrt(n + 0.5)
    V = leg.legvander(x, M - 1) * scale                   # P̄_n(τ_k)
    # ℓ_j = w_j Σ_n P̄_n(τ_j) P̄_n by discrete orthonormality
    Q = np.empty((M, M))
    for i in range(M):
        e = np.zeros(M); e[i] = scale[i]
        Q[:, i] = leg.legval(x, leg.legint(e, lbnd=-1))
    S = Q @ (V * w[:, None]).T
    return _make("gauss_legendre", math.nan, math.nan, DD(x), DD(w), DD(S),
                 certify_now=False)


# -- diagnostics ----------------------------------------------------------------------

def weight_defect(basis, K_all):
    """max_k |∫R_k - w_k| given K_all = K_k(1) values."""
    return float(np.abs(np.asarray(K_all) - basis.weights).max())


def product_rule_check(tab_exact, basis_exact, pairs):
    """|∫K_j R_k - w_k K_j(τ_k)| for (j, k) in ``pairs``; returns the max.

    ∫K_j R_k is taken from the exact-route tableau (it equals w_k S_kj).
    """
    from .basis import eval_K_all

    K = eval_K_all(basis_exact, basis_exact.nodes)          # [k, j] = K_j(τ_k)
    P = _col(tab_exact.weights_dd) * tab_exact.S_dd
    P = P.to_float()
    w = basis_exact.weights
    return max(abs(P[k, j] - w[k] * K[k, j]) for j, k in pairs)


def max_difference(a, b):
    if a.interval != b.interval:
        raise ValueError("tableaus live on different intervals")
    return float(np.abs((a.S_dd - b.S_dd).to_float()).max())


# -- [0,1] rescaling ------------------------------------------------------------------

def rescale_to_unit(tab):
    if tab.interval != "[-1,1]":
        raise ValueError("tableau is already on [0,1]")
    nodes = (tab.nodes_dd + 1.0) * 0.5
    out = Tableau(tab.method, "[0,1]", tab.c, tab.eps, nodes, tab.weights_dd * 0.5, tab.S_dd * 0.5)
    if tab.method == "gauss_legendre":
        return out
    cert = dict(tab.certificates)
    cert.update(certify(out))
    return replace(out, certificates=cert)


# -- serialization ------------------------------------------------------------------

def _dd_strings(x):
    with mp.workdps(40):
        return [mp.nstr(v, 36, strip_zeros=False) for v in _mpf_list(x)]


def _dd_parse(strings, shape):
    with mp.workdps(40):
        return xprec.from_mp(np.array([mp.mpf(s) for s in strings], dtype=object).reshape(shape))


def tableau_to_json(tab):
    M = tab.M
    return json.dumps({
        "method": tab.method, "interval": tab.interval, "M": M,
        # Gauss–Legendre has no bandlimit or ε; JSON carries those as null
        "c": None if math.isnan(tab.c) else tab.c,
        "eps": None if math.isnan(tab.eps) else tab.eps,
        "nodes": _dd_strings(tab.nodes_dd),
        "weights": _dd_strings(tab.weights_dd),
        "S": [_dd_strings(tab.S_dd[k]) for k in range(M)],
        "certificates": {k: None if math.isnan(v) else v for k, v in tab.certificates.items()},
    }, indent=1, allow_nan=False)


def tableau_from_json(text):
    d = json.loads(text)
    if d.get("method") not in METHODS:
        raise ValueError(f"unknown tableau method {d.get('method')!r}")
    M = int(d["M"])
    S = _dd_parse([s for row in d["S"] for s in row], (M, M))
    c, eps = (math.nan if d[k] is None else float(d[k]) for k in ("c", "eps"))
    return Tableau(d["method"], d["interval"], c, eps,
                   _dd_parse(d["nodes"], (M,)), _dd_parse(d["weights"], (M,)), S,
                   {k: math.nan if v is None else float(v)
                    for k, v in d.get("certificates", {}).items()})
