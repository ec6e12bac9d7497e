"""Spherical-harmonic gravity: potential and acceleration.

    V(r) = μ/r · (1 + Σ_{n=2}^{N} (R/r)^n Σ_{m=0}^{n} P̄_n^m(sin φ)(C̄_nm cos mλ + S̄_nm sin mλ))

with fully normalized (geodesy, 4π) associated Legendre functions, φ the
geocentric latitude and λ the longitude.  ``acceleration`` returns ∇V,
which is the attractive physical field (−μ r/r³ for the central term).

Coefficient files are whitespace separated.  '#' starts a comment, the
first data line is the header ``mu R N_max`` and every further line is
``n m Cbar Sbar``.
"""

import io
import math
from dataclasses import dataclass

import numpy as np

from ._accel import njit, kernel

__all__ = [
    "GravityModel", "load_coeffs", "dump_coeffs", "legendre_norm", "legendre_table",
    "potential", "disturbing_potential", "acceleration", "EGM96_DEGREE2",
    "synthetic_model",
]

POLE_GUARD = 1e-12
EXTERIOR = 0.9

EGM96_DEGREE2 = """\
# EGM96 degree-2 terms (normalized); mu in km^3/s^2, R in km
398600.4418 6378.137 2
2 0 -0.48e-3 0.0
2 2 0.24e-5 -0.14e-5
"""


@dataclass(frozen=True, eq=False)
class GravityModel:
    mu: float
    R: float
    N_max: int
    Cbar: np.ndarray        # (N_max+1, N_max+1), rows n, cols m
    Sbar: np.ndarray

    def __post_init__(self):
        for a in (self.Cbar, self.Sbar):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite coefficient")
            a.setflags(write=False)

    def truncated(self, N):
        if not 0 <= N <= self.N_max:
            raise ValueError(f"degree {N} outside 0..{self.N_max}")
        n = max(N, 1) + 1
        C = np.zeros((n, n)); S = np.zeros((n, n))
        if N >= 2:
            C[:, :] = self.Cbar[:n, :n]
            S[:, :] = self.Sbar[:n, :n]
        return GravityModel(self.mu, self.R, N, C, S)


# -- coefficient files ----------------------------------------------------------

def load_coeffs(source):
    """Read a model from a text stream (or a string holding the file)."""
    if isinstance(source, str):
        source = io.StringIO(source)
    header = None
    rows = []
    for lineno, raw in enumerate(source, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if header is None:
                if len(parts) != 3:
                    raise ValueError("header must be 'mu R N_max'")
                header = (float(parts[0]), float(parts[1]), int(parts[2]))
                continue
            if len(parts) != 4:
                raise ValueError("expected 'n m Cbar Sbar'")
            n, m = int(parts[0]), int(parts[1])
            c, s = float(parts[2]), float(parts[3])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        if n < 2 or m < 0 or m > n:
            raise ValueError(f"line {lineno}: invalid degree/order ({n}, {m})")
        if n > header[2]:
            raise ValueError(f"line {lineno}: degree {n} exceeds N_max={header[2]}")
        rows.append((n, m, c, s))
    if header is None:
        raise ValueError("missing header line 'mu R N_max'")
    mu, R, N = header
    size = max(N, 1) + 1
    C = np.zeros((size, size)); S = np.zeros((size, size))
    for n, m, c, s in rows:
        C[n, m] = c
        S[n, m] = s
    return GravityModel(mu, R, N, C, S)


def dump_coeffs(model):
    out = [f"{float(model.mu)!r} {float(model.R)!r} {model.N_max}"]
    for n in range(2, model.N_max + 1):
        for m in range(n + 1):
            c, s = float(model.Cbar[n, m]), float(model.Sbar[n, m])
            if c != 0.0 or s != 0.0:
                out.append(f"{n} {m} {c!r} {s!r}")
    return "\n".join(out) + "\n"


def synthetic_model(N=8, seed=8, kaula=1e-5):
    """EGM96 degree-2 terms plus seeded coefficients for n = 3..N.

    Coefficients of degree n are normal with standard deviation kaula/n²
    (Kaula's rule of thumb for terrestrial fields).
    """
    base = load_coeffs(EGM96_DEGREE2)
    rng = np.random.default_rng(seed)
    C = np.zeros((N + 1, N + 1)); S = np.zeros((N + 1, N + 1))
    C[:3, :3] = base.Cbar
    S[:3, :3] = base.Sbar
    for n in range(3, N + 1):
        C[n, :n + 1] = rng.standard_normal(n + 1) * kaula / n ** 2
        S[n, 1:n + 1] = rng.standard_normal(n) * kaula / n ** 2
    return GravityModel(base.mu, base.R, N, C, S)


# -- normalized Legendre functions ---------------------------------------------

@njit
def _plm_table(N, s, u):
    # column recursion in m, then upward in n; u = cos φ ≥ 0
    P = np.zeros((N + 2, N + 2))
    P[0, 0] = 1.0
    if N >= 1:
        P[1, 1] = math.sqrt(3.0) * u
    for m in range(2, N + 1):
        P[m, m] = u * math.sqrt((2.0 * m + 1.0) / (2.0 * m)) * P[m - 1, m - 1]
    for m in range(0, N + 1):
        if m + 1 <= N:
            P[m + 1, m] = math.sqrt(2.0 * m + 3.0) * s * P[m, m]
        for n in range(m + 2, N + 1):
            a = math.sqrt((2.0 * n - 1.0) * (2.0 * n + 1.0) / ((n - m) * (n + m)))
            b = math.sqrt((2.0 * n + 1.0) * (n + m - 1.0) * (n - m - 1.0)
                          / ((n - m) * (n + m) * (2.0 * n - 3.0)))
            P[n, m] = a * s * P[n - 1, m] - b * P[n - 2, m]
    return P


def legendre_table(N, s):
    """All P̄_n^m(s) for n, m ≤ N, shape (N+2, N+2) (last row/col zero)."""
    s = float(s)
    if abs(s) > 1.0:
        raise ValueError("argument must lie in [-1, 1]")
    return _plm_table(int(N), s, math.sqrt(max(0.0, 1.0 - s * s)))


def legendre_norm(n, m, s):
    if not 0 <= m <= n:
        raise ValueError("need 0 <= m <= n")
    return float(legendre_table(n, s)[n, m])


# -- potential and gradient kernels ----------------------------------------------

def _field_py(x, y, z, mu, R, N, C, S, want_grad):
    rho2 = x * x + y * y
    r2 = rho2 + z * z
    r = math.sqrt(r2)
    rho = math.sqrt(rho2)
    s = z / r
    u = rho / r
    lam = math.atan2(y, x)
    P = _plm_table(N, s, u)
    q = R / r
    qn = q
    V = 0.0
    dVr = 1.0                  # accumulates 1 + Σ (n+1)(R/r)^n ...
    dVphi = 0.0
    dVlam = 0.0
    tanp = s / u if u > 0.0 else 0.0
    for n in range(2, N + 1):
        qn *= q
        sn = 0.0
        sphi = 0.0
        slam = 0.0
        for m in range(0, n + 1):
            cm = math.cos(m * lam)
            sm = math.sin(m * lam)
            t = C[n, m] * cm + S[n, m] * sm
            sn += P[n, m] * t
            if want_grad:
                k = 0.5 if m == 0 else 1.0
                dP = -m * tanp * P[n, m]
                if m < n:
                    dP += math.sqrt(k * (n - m) * (n + m + 1.0)) * P[n, m + 1]
                sphi += dP * t
                slam += m * P[n, m] * (S[n, m] * cm - C[n, m] * sm)
        V += qn * sn
        dVr += (n + 1.0) * qn * sn
        dVphi += qn * sphi
        dVlam += qn * slam
    V *= mu / r                # disturbing part only; the caller adds μ/r
    if not want_grad:
        return V, 0.0, 0.0, 0.0
    dr = -mu / r2 * dVr
    dphi = mu / r * dVphi
    dlam = mu / r * dVlam
    f = dr / r - z / (r2 * rho) * dphi
    ax = f * x - dlam * y / rho2
    ay = f * y + dlam * x / rho2
    az = dr * z / r + rho / r2 * dphi
    return V, ax, ay, az


_field = kernel(njit(_field_py), _field_py)


def _check(model, r_vec, N, interior=False):
    r_vec = np.asarray(r_vec, dtype=float)
    if r_vec.shape != (3,):
        raise ValueError("position must be a 3-vector")
    if N != 0 and not 2 <= N <= model.N_max:
        raise ValueError(f"degree {N} must be 0 or within 2..{model.N_max}")
    r = float(np.linalg.norm(r_vec))
    if r == 0.0:
        raise ValueError("position at the origin")
    if r < EXTERIOR * model.R and not interior:
        raise ValueError(f"|r| = {r:g} km is inside {EXTERIOR}·R; the series is not valid there")
    return r_vec, r


def potential(model, r_vec, N, interior=False):
    r_vec, r = _check(model, r_vec, N, interior)
    return model.mu / r + disturbing_potential(model, r_vec, N, interior)


def disturbing_potential(model, r_vec, N, interior=False):
    """V^(N) - μ/r, the part carried by the harmonic coefficients."""
    r_vec, r = _check(model, r_vec, N, interior)
    if N == 0:
        return 0.0
    return _field(r_vec[0], r_vec[1], r_vec[2], model.mu, model.R, N,
                  model.Cbar, model.Sbar, False)[0]


def acceleration(model, r_vec, N, interior=False):
    """∇V^(N) in km/s², attractive (equals −μ r/r³ for N = 0).

    Points inside 0.9·R are rejected unless ``interior`` is set, in which
    case the truncated series is evaluated as the finite sum it is.
    """
    r_vec, r = _check(model, r_vec, N, interior)
    if N == 0:
        return -model.mu * r_vec / r ** 3
    rho = math.hypot(r_vec[0], r_vec[1])
    if rho < POLE_GUARD * r:
        # the spherical partials are singular on the axis; average two
        # symmetric off-axis evaluations (error O(d²) with d = 1e-6 r)
        d = 1e-6 * r
        e = np.array([d, 0.0, 0.0])
        a1 = acceleration(model, r_vec + e, N, interior)
        a2 = acceleration(model, r_vec - e, N, interior)
        return 0.5 * (a1 + a2)
    _, ax, ay, az = _field(r_vec[0], r_vec[1], r_vec[2], model.mu, model.R, N,
                           model.Cbar, model.Sbar, True)
    return np.array([ax, ay, az])
