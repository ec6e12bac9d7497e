"""Double-double ("dd") arithmetic and the dense kernels built on it.

A dd value is an unevaluated sum ``hi + lo`` of two doubles with
``|lo| <= ulp(hi)/2``, which gives roughly 32 significant decimal digits.
The scalar primitives below are written in plain arithmetic so the same
source serves two purposes: jitted by numba for the loop kernels, and
applied elementwise to numpy arrays for the vectorized fallback.

Matrix kernels (LU with partial pivoting, matmul, elimination to upper
Hessenberg form, batched complex Hessenberg solves) each come in a numba
flavour and a numpy flavour; :mod:`blcirk._accel` decides which one runs.

Transcendental entries are not computed here.  Callers evaluate them in
mpmath and convert with :func:`from_mp`.
"""

import numpy as np

from ._accel import njit, kernel

__all__ = [
    "DD", "from_mp", "to_mp", "dd_dot",
    "lu_factor", "lu_solve", "solve", "matmul",
    "hessenberg", "hess_solve_batch", "complex_embed", "complex_unembed",
    "cmatmul", "csolve", "mp_cos_sin",
]

_SPLIT = 134217729.0  # 2**27 + 1


# -- scalar primitives (also valid on numpy arrays) -------------------------

def _two_sum(a, b):
    s = a + b
    bb = s - a
    e = (a - (s - bb)) + (b - bb)
    return s, e


def _quick_two_sum(a, b):
    s = a + b
    e = b - (s - a)
    return s, e


def _split(a):
    t = _SPLIT * a
    hi = t - (t - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    t, f = _two_sum(al, bl)
    e = e + t
    s, e = _quick_two_sum(s, e)
    e = e + f
    return _quick_two_sum(s, e)


def _dd_sub(ah, al, bh, bl):
    return _dd_add(ah, al, -bh, -bl)


def _dd_mul(ah, al, bh, bl):
    p, e = _two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return _quick_two_sum(p, e)


def _dd_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _dd_mul(bh, bl, q1, 0.0 * q1)
    rh, rl = _dd_sub(ah, al, ph, pl)
    q2 = rh / bh
    ph, pl = _dd_mul(bh, bl, q2, 0.0 * q2)
    rh, rl = _dd_sub(rh, rl, ph, pl)
    q3 = rh / bh
    q1, q2 = _quick_two_sum(q1, q2)
    return _dd_add(q1, q2, q3, 0.0 * q3)


def _cdd_mul(ar, arl, ai, ail, br, brl, bi, bil):
    p1h, p1l = _dd_mul(ar, arl, br, brl)
    p2h, p2l = _dd_mul(ai, ail, bi, bil)
    p3h, p3l = _dd_mul(ar, arl, bi, bil)
    p4h, p4l = _dd_mul(ai, ail, br, brl)
    rh, rl = _dd_sub(p1h, p1l, p2h, p2l)
    ih, il = _dd_add(p3h, p3l, p4h, p4l)
    return rh, rl, ih, il


def _cdd_div(ar, arl, ai, ail, br, brl, bi, bil):
    n1h, n1l = _dd_mul(br, brl, br, brl)
    n2h, n2l = _dd_mul(bi, bil, bi, bil)
    nh, nl = _dd_add(n1h, n1l, n2h, n2l)
    rh, rl, ih, il = _cdd_mul(ar, arl, ai, ail, br, brl, -bi, -bil)
    rh, rl = _dd_div(rh, rl, nh, nl)
    ih, il = _dd_div(ih, il, nh, nl)
    return rh, rl, ih, il


# jitted scalar versions for use inside the loop kernels
_j_two_sum = njit(_two_sum)
_j_quick = njit(_quick_two_sum)
_j_split = njit(_split)


@njit
def _j_two_prod(a, b):
    p = a * b
    ah, al = _j_split(a)
    bh, bl = _j_split(b)
    e = ((ah * bh - p) + ah * bl + al * bh) + al * bl
    return p, e


@njit
def _j_add(ah, al, bh, bl):
    s, e = _j_two_sum(ah, bh)
    t, f = _j_two_sum(al, bl)
    e = e + t
    s, e = _j_quick(s, e)
    e = e + f
    return _j_quick(s, e)


@njit
def _j_sub(ah, al, bh, bl):
    return _j_add(ah, al, -bh, -bl)


@njit
def _j_mul(ah, al, bh, bl):
    p, e = _j_two_prod(ah, bh)
    e = e + (ah * bl + al * bh)
    return _j_quick(p, e)


@njit
def _j_div(ah, al, bh, bl):
    q1 = ah / bh
    ph, pl = _j_mul(bh, bl, q1, 0.0)
    rh, rl = _j_sub(ah, al, ph, pl)
    q2 = rh / bh
    ph, pl = _j_mul(bh, bl, q2, 0.0)
    rh, rl = _j_sub(rh, rl, ph, pl)
    q3 = rh / bh
    q1, q2 = _j_quick(q1, q2)
    return _j_add(q1, q2, q3, 0.0)


@njit
def _j_cmul(ar, arl, ai, ail, br, brl, bi, bil):
    p1h, p1l = _j_mul(ar, arl, br, brl)
    p2h, p2l = _j_mul(ai, ail, bi, bil)
    p3h, p3l = _j_mul(ar, arl, bi, bil)
    p4h, p4l = _j_mul(ai, ail, br, brl)
    rh, rl = _j_sub(p1h, p1l, p2h, p2l)
    ih, il = _j_add(p3h, p3l, p4h, p4l)
    return rh, rl, ih, il


@njit
def _j_cdiv(ar, arl, ai, ail, br, brl, bi, bil):
    n1h, n1l = _j_mul(br, brl, br, brl)
    n2h, n2l = _j_mul(bi, bil, bi, bil)
    nh, nl = _j_add(n1h, n1l, n2h, n2l)
    rh, rl, ih, il = _j_cmul(ar, arl, ai, ail, br, brl, -bi, -bil)
    rh, rl = _j_div(rh, rl, nh, nl)
    ih, il = _j_div(ih, il, nh, nl)
    return rh, rl, ih, il


# -- array wrapper ------------------------------------------------------------

class DD:
    """Array of double-double numbers stored as two float64 arrays."""

    __slots__ = ("hi", "lo")
    __array_priority__ = 100

    def __init__(self, hi, lo=None):
        self.hi = np.asarray(hi, dtype=np.float64)
        if lo is None:
            self.lo = np.zeros_like(self.hi)
        else:
            self.lo = np.asarray(lo, dtype=np.float64)

    @staticmethod
    def _coerce(x):
        return x if isinstance(x, DD) else DD(x)

    @property
    def shape(self):
        return self.hi.shape

    @property
    def T(self):
        return DD(self.hi.T, self.lo.T)

    def __len__(self):
        return len(self.hi)

    def __getitem__(self, idx):
        return DD(self.hi[idx], self.lo[idx])

    def __setitem__(self, idx, val):
        val = DD._coerce(val)
        self.hi[idx] = val.hi
        self.lo[idx] = val.lo

    def copy(self):
        return DD(self.hi.copy(), self.lo.copy())

    def __neg__(self):
        return DD(-self.hi, -self.lo)

    def __add__(self, o):
        o = DD._coerce(o)
        return DD(*_dd_add(self.hi, self.lo, o.hi, o.lo))

    __radd__ = __add__

    def __sub__(self, o):
        o = DD._coerce(o)
        return DD(*_dd_sub(self.hi, self.lo, o.hi, o.lo))

    def __rsub__(self, o):
        return DD._coerce(o) - self

    def __mul__(self, o):
        o = DD._coerce(o)
        return DD(*_dd_mul(self.hi, self.lo, o.hi, o.lo))

    __rmul__ = __mul__

    def __truediv__(self, o):
        o = DD._coerce(o)
        return DD(*_dd_div(self.hi, self.lo, o.hi, o.lo))

    def __rtruediv__(self, o):
        return DD._coerce(o) / self

    def __matmul__(self, o):
        return matmul(self, DD._coerce(o))

    def sqrt(self):
        x = np.sqrt(self.hi)
        safe = np.where(x > 0, x, 1.0)
        p, e = _two_prod(x, x)
        rh, _ = _dd_sub(self.hi, self.lo, p, e)
        corr = np.where(x > 0, rh / (2.0 * safe), 0.0)
        return DD(*_quick_two_sum(x, corr))

    def abs(self):
        s = np.where(self.hi < 0, -1.0, 1.0)
        return DD(s * self.hi, s * self.lo)

    def sum(self, axis=None):
        """Compensated sum along ``axis`` (sequential, dd accumulator)."""
        if axis is None:
            h, l = self.hi.ravel(), self.lo.ravel()
            axis = 0
        else:
            h, l = self.hi, self.lo
        h = np.moveaxis(h, axis, 0)
        l = np.moveaxis(l, axis, 0)
        sh, sl = np.zeros(h.shape[1:]), np.zeros(h.shape[1:])
        for i in range(h.shape[0]):
            sh, sl = _dd_add(sh, sl, h[i], l[i])
        return DD(sh, sl)

    def to_float(self):
        return self.hi + self.lo

    def __repr__(self):
        return f"DD(hi={self.hi!r}, lo={self.lo!r})"


def from_mp(values):
    """Convert a (nested) sequence or mpmath matrix of mpf to :class:`DD`."""
    import mpmath as mp

    if isinstance(values, mp.matrix):
        values = values.tolist()
    flat = np.asarray(values, dtype=object)
    hi = np.empty(flat.shape)
    lo = np.empty(flat.shape)
    for idx, v in np.ndenumerate(flat):
        v = mp.mpf(v)
        h = float(v)
        hi[idx] = h
        lo[idx] = float(v - h)
    return DD(hi, lo)


def to_mp(x):
    """Nested list of mpf values (exact sum of the two parts)."""
    import mpmath as mp

    out = np.empty(x.shape, dtype=object)
    for idx in np.ndindex(*x.shape):
        out[idx] = mp.mpf(x.hi[idx]) + mp.mpf(x.lo[idx])
    return out.tolist() if x.shape else out[()]


def dd_dot(a, b):
    """dd inner product of two 1-d :class:`DD` vectors."""
    return (a * b).sum()


def complex_embed(re, im):
    """Real 2n×2m dd matrix [[re, -im], [im, re]] representing re + i·im."""
    top = DD(np.hstack([re.hi, -im.hi]), np.hstack([re.lo, -im.lo]))
    bot = DD(np.hstack([im.hi, re.hi]), np.hstack([im.lo, re.lo]))
    return DD(np.vstack([top.hi, bot.hi]), np.vstack([top.lo, bot.lo]))


def complex_unembed(x, stacked_rows=True):
    """Inverse of the block embedding for a matrix (or stacked vector)."""
    n = x.shape[0] // 2
    if x.hi.ndim == 2 and not stacked_rows:
        return x[:n, : x.shape[1] // 2], x[n:, : x.shape[1] // 2]
    return x[:n], x[n:]


# -- matmul -------------------------------------------------------------------

@njit
def _matmul_jit(ah, al, bh, bl):
    n, k = ah.shape
    m = bh.shape[1]
    ch = np.zeros((n, m))
    cl = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            sh = 0.0
            sl = 0.0
            for p in range(k):
                ph, pl = _j_mul(ah[i, p], al[i, p], bh[p, j], bl[p, j])
                sh, sl = _j_add(sh, sl, ph, pl)
            ch[i, j] = sh
            cl[i, j] = sl
    return ch, cl


def _matmul_np(ah, al, bh, bl):
    n, k = ah.shape
    m = bh.shape[1]
    ch = np.zeros((n, m))
    cl = np.zeros((n, m))
    for p in range(k):
        ph, pl = _dd_mul(ah[:, p, None], al[:, p, None], bh[None, p, :], bl[None, p, :])
        ch, cl = _dd_add(ch, cl, ph, pl)
    return ch, cl


_matmul = kernel(_matmul_jit, _matmul_np)


def matmul(a, b):
    """dd matrix product; 1-d operands are treated as column/row vectors."""
    a = DD._coerce(a)
    b = DD._coerce(b)
    va = a.hi.ndim == 1
    vb = b.hi.ndim == 1
    ah, al = (a.hi[None, :], a.lo[None, :]) if va else (a.hi, a.lo)
    bh, bl = (b.hi[:, None], b.lo[:, None]) if vb else (b.hi, b.lo)
    ch, cl = _matmul(np.ascontiguousarray(ah), np.ascontiguousarray(al),
                     np.ascontiguousarray(bh), np.ascontiguousarray(bl))
    if va:
        ch, cl = ch[0], cl[0]
    if vb:
        ch, cl = ch[..., 0], cl[..., 0]
    return DD(ch, cl)


# -- LU with partial pivoting ------------------------------------------------

@njit
def _lu_jit(ah, al):
    n = ah.shape[0]
    piv = np.arange(n)
    for k in range(n):
        p = k
        best = abs(ah[k, k])
        for i in range(k + 1, n):
            if abs(ah[i, k]) > best:
                best = abs(ah[i, k])
                p = i
        if best == 0.0:
            return piv, False
        if p != k:
            for j in range(n):
                t = ah[k, j]
                ah[k, j] = ah[p, j]
                ah[p, j] = t
                t = al[k, j]
                al[k, j] = al[p, j]
                al[p, j] = t
            t2 = piv[k]
            piv[k] = piv[p]
            piv[p] = t2
        for i in range(k + 1, n):
            lh, ll = _j_div(ah[i, k], al[i, k], ah[k, k], al[k, k])
            ah[i, k] = lh
            al[i, k] = ll
            for j in range(k + 1, n):
                ph, pl = _j_mul(lh, ll, ah[k, j], al[k, j])
                ah[i, j], al[i, j] = _j_sub(ah[i, j], al[i, j], ph, pl)
    return piv, True


def _lu_np(ah, al):
    n = ah.shape[0]
    piv = np.arange(n)
    for k in range(n):
        p = k + int(np.argmax(np.abs(ah[k:, k])))
        if ah[p, k] == 0.0:
            return piv, False
        if p != k:
            ah[[k, p]] = ah[[p, k]]
            al[[k, p]] = al[[p, k]]
            piv[[k, p]] = piv[[p, k]]
        lh, ll = _dd_div(ah[k + 1:, k], al[k + 1:, k], ah[k, k], al[k, k])
        ah[k + 1:, k] = lh
        al[k + 1:, k] = ll
        ph, pl = _dd_mul(lh[:, None], ll[:, None], ah[None, k, k + 1:], al[None, k, k + 1:])
        ah[k + 1:, k + 1:], al[k + 1:, k + 1:] = _dd_sub(
            ah[k + 1:, k + 1:], al[k + 1:, k + 1:], ph, pl)
    return piv, True


_lu = kernel(_lu_jit, _lu_np)


@njit
def _lu_solve_jit(luh, lul, piv, bh, bl):
    n = luh.shape[0]
    m = bh.shape[1]
    xh = np.empty((n, m))
    xl = np.empty((n, m))
    for i in range(n):
        for c in range(m):
            xh[i, c] = bh[piv[i], c]
            xl[i, c] = bl[piv[i], c]
    for c in range(m):
        for i in range(n):
            sh = xh[i, c]
            sl = xl[i, c]
            for j in range(i):
                ph, pl = _j_mul(luh[i, j], lul[i, j], xh[j, c], xl[j, c])
                sh, sl = _j_sub(sh, sl, ph, pl)
            xh[i, c] = sh
            xl[i, c] = sl
        for i in range(n - 1, -1, -1):
            sh = xh[i, c]
            sl = xl[i, c]
            for j in range(i + 1, n):
                ph, pl = _j_mul(luh[i, j], lul[i, j], xh[j, c], xl[j, c])
                sh, sl = _j_sub(sh, sl, ph, pl)
            xh[i, c], xl[i, c] = _j_div(sh, sl, luh[i, i], lul[i, i])
    return xh, xl


def _lu_solve_np(luh, lul, piv, bh, bl):
    n = luh.shape[0]
    xh = bh[piv].copy()
    xl = bl[piv].copy()
    for j in range(n):
        ph, pl = _dd_mul(luh[j + 1:, j, None], lul[j + 1:, j, None], xh[None, j], xl[None, j])
        xh[j + 1:], xl[j + 1:] = _dd_sub(xh[j + 1:], xl[j + 1:], ph, pl)
    for j in range(n - 1, -1, -1):
        xh[j], xl[j] = _dd_div(xh[j], xl[j], luh[j, j], lul[j, j])
        ph, pl = _dd_mul(luh[:j, j, None], lul[:j, j, None], xh[None, j], xl[None, j])
        xh[:j], xl[:j] = _dd_sub(xh[:j], xl[:j], ph, pl)
    return xh, xl


_lu_solve = kernel(_lu_solve_jit, _lu_solve_np)


def lu_factor(a):
    """Factor a square dd matrix in place of a copy; returns (LU, piv)."""
    a = DD._coerce(a)
    h = np.array(a.hi, dtype=np.float64, order="C")
    l = np.array(a.lo, dtype=np.float64, order="C")
    piv, ok = _lu(h, l)
    if not ok:
        raise np.linalg.LinAlgError("singular matrix in dd LU")
    return DD(h, l), piv


def lu_solve(lu_piv, b):
    lu, piv = lu_piv
    b = DD._coerce(b)
    vec = b.hi.ndim == 1
    bh = b.hi[:, None] if vec else b.hi
    bl = b.lo[:, None] if vec else b.lo
    xh, xl = _lu_solve(lu.hi, lu.lo, piv, np.ascontiguousarray(bh), np.ascontiguousarray(bl))
    if vec:
        return DD(xh[:, 0], xl[:, 0])
    return DD(xh, xl)


def solve(a, b, refine=1):
    """Solve ``a x = b`` in dd with optional residual refinement steps."""
    fac = lu_factor(a)
    x = lu_solve(fac, b)
    a = DD._coerce(a)
    b = DD._coerce(b)
    for _ in range(refine):
        x = x + lu_solve(fac, b - matmul(a, x))
    return x


# -- Hessenberg reduction (stabilized elementary similarity) -----------------

@njit
def _hess_jit(ah, al, uh, ul, vh, vl):
    n = ah.shape[0]
    for m in range(1, n - 1):
        p = m
        best = abs(ah[m, m - 1])
        for i in range(m + 1, n):
            if abs(ah[i, m - 1]) > best:
                best = abs(ah[i, m - 1])
                p = i
        if p != m:
            for j in range(n):
                t = ah[p, j]; ah[p, j] = ah[m, j]; ah[m, j] = t
                t = al[p, j]; al[p, j] = al[m, j]; al[m, j] = t
            for i in range(n):
                t = ah[i, p]; ah[i, p] = ah[i, m]; ah[i, m] = t
                t = al[i, p]; al[i, p] = al[i, m]; al[i, m] = t
            t = uh[p]; uh[p] = uh[m]; uh[m] = t
            t = ul[p]; ul[p] = ul[m]; ul[m] = t
            t = vh[p]; vh[p] = vh[m]; vh[m] = t
            t = vl[p]; vl[p] = vl[m]; vl[m] = t
        if best == 0.0:
            continue
        for i in range(m + 1, n):
            yh, yl = _j_div(ah[i, m - 1], al[i, m - 1], ah[m, m - 1], al[m, m - 1])
            if yh == 0.0:
                continue
            for j in range(m - 1, n):
                ph, pl = _j_mul(yh, yl, ah[m, j], al[m, j])
                ah[i, j], al[i, j] = _j_sub(ah[i, j], al[i, j], ph, pl)
            ph, pl = _j_mul(yh, yl, uh[m], ul[m])
            uh[i], ul[i] = _j_sub(uh[i], ul[i], ph, pl)
            for j in range(n):
                ph, pl = _j_mul(yh, yl, ah[j, i], al[j, i])
                ah[j, m], al[j, m] = _j_add(ah[j, m], al[j, m], ph, pl)
            ph, pl = _j_mul(yh, yl, vh[i], vl[i])
            vh[m], vl[m] = _j_add(vh[m], vl[m], ph, pl)
    for i in range(2, n):
        for j in range(i - 1):
            ah[i, j] = 0.0
            al[i, j] = 0.0


def _hess_np(ah, al, uh, ul, vh, vl):
    n = ah.shape[0]
    for m in range(1, n - 1):
        p = m + int(np.argmax(np.abs(ah[m:, m - 1])))
        if p != m:
            ah[[m, p]] = ah[[p, m]]
            al[[m, p]] = al[[p, m]]
            ah[:, [m, p]] = ah[:, [p, m]]
            al[:, [m, p]] = al[:, [p, m]]
            uh[[m, p]] = uh[[p, m]]
            ul[[m, p]] = ul[[p, m]]
            vh[[m, p]] = vh[[p, m]]
            vl[[m, p]] = vl[[p, m]]
        if ah[m, m - 1] == 0.0:
            continue
        yh, yl = _dd_div(ah[m + 1:, m - 1], al[m + 1:, m - 1], ah[m, m - 1], al[m, m - 1])
        ph, pl = _dd_mul(yh[:, None], yl[:, None], ah[None, m, m - 1:], al[None, m, m - 1:])
        ah[m + 1:, m - 1:], al[m + 1:, m - 1:] = _dd_sub(
            ah[m + 1:, m - 1:], al[m + 1:, m - 1:], ph, pl)
        ph, pl = _dd_mul(yh, yl, uh[m], ul[m])
        uh[m + 1:], ul[m + 1:] = _dd_sub(uh[m + 1:], ul[m + 1:], ph, pl)
        # column update: col_m += sum_i y_i col_i, accumulated in index order
        for k, i in enumerate(range(m + 1, n)):
            ph, pl = _dd_mul(yh[k], yl[k], ah[:, i], al[:, i])
            ah[:, m], al[:, m] = _dd_add(ah[:, m], al[:, m], ph, pl)
            ph, pl = _dd_mul(yh[k], yl[k], vh[i], vl[i])
            vh[m], vl[m] = _dd_add(vh[m], vl[m], ph, pl)
    for i in range(2, n):
        ah[i, : i - 1] = 0.0
        al[i, : i - 1] = 0.0


_hess = kernel(_hess_jit, _hess_np)


def hessenberg(a, u, v):
    """Reduce ``a`` to upper Hessenberg ``h = X⁻¹ a X`` in dd.

    Returns ``(h, X⁻¹u, Xᵀv)`` so that ``vᵀ f(a) u = (Xᵀv)ᵀ f(h) (X⁻¹u)``
    for any rational ``f``.  This lets a resolvent ``vᵀ(αI + βa)⁻¹u`` be
    evaluated in O(n²) per shift.
    """
    a, u, v = DD._coerce(a), DD._coerce(u), DD._coerce(v)
    ah = np.array(a.hi, order="C"); al = np.array(a.lo, order="C")
    uh = u.hi.copy(); ul = u.lo.copy()
    vh = v.hi.copy(); vl = v.lo.copy()
    _hess(ah, al, uh, ul, vh, vl)
    return DD(ah, al), DD(uh, ul), DD(vh, vl)


# -- batched complex solves with an upper Hessenberg matrix ------------------

@njit
def _hsolve_jit(hh, hl, alpha, beta, rhs):
    # alpha, beta: (nb, 4) complex dd [re_hi, re_lo, im_hi, im_lo]
    # rhs: (nb, n, 4); returns solution of (alpha I + beta H) x = rhs
    nb = alpha.shape[0]
    n = hh.shape[0]
    out = np.empty((nb, n, 4))
    c = np.empty((n, n, 4))
    x = np.empty((n, 4))
    for b in range(nb):
        ar, arl, ai, ail = alpha[b, 0], alpha[b, 1], alpha[b, 2], alpha[b, 3]
        br, brl, bi, bil = beta[b, 0], beta[b, 1], beta[b, 2], beta[b, 3]
        for i in range(n):
            j0 = i - 1 if i > 0 else 0
            for j in range(n):
                c[i, j, 0] = 0.0; c[i, j, 1] = 0.0; c[i, j, 2] = 0.0; c[i, j, 3] = 0.0
            for j in range(j0, n):
                ph, pl = _j_mul(br, brl, hh[i, j], hl[i, j])
                qh, ql = _j_mul(bi, bil, hh[i, j], hl[i, j])
                c[i, j, 0] = ph; c[i, j, 1] = pl; c[i, j, 2] = qh; c[i, j, 3] = ql
            c[i, i, 0], c[i, i, 1] = _j_add(c[i, i, 0], c[i, i, 1], ar, arl)
            c[i, i, 2], c[i, i, 3] = _j_add(c[i, i, 2], c[i, i, 3], ai, ail)
            for q in range(4):
                x[i, q] = rhs[b, i, q]
        for k in range(n - 1):
            m0 = abs(c[k, k, 0]) + abs(c[k, k, 2])
            m1 = abs(c[k + 1, k, 0]) + abs(c[k + 1, k, 2])
            if m1 > m0:
                for j in range(k, n):
                    for q in range(4):
                        t = c[k, j, q]; c[k, j, q] = c[k + 1, j, q]; c[k + 1, j, q] = t
                for q in range(4):
                    t = x[k, q]; x[k, q] = x[k + 1, q]; x[k + 1, q] = t
            lr, lrl, li, lil = _j_cdiv(c[k + 1, k, 0], c[k + 1, k, 1], c[k + 1, k, 2], c[k + 1, k, 3],
                                       c[k, k, 0], c[k, k, 1], c[k, k, 2], c[k, k, 3])
            for j in range(k + 1, n):
                pr, prl, pi, pil = _j_cmul(lr, lrl, li, lil, c[k, j, 0], c[k, j, 1], c[k, j, 2], c[k, j, 3])
                c[k + 1, j, 0], c[k + 1, j, 1] = _j_sub(c[k + 1, j, 0], c[k + 1, j, 1], pr, prl)
                c[k + 1, j, 2], c[k + 1, j, 3] = _j_sub(c[k + 1, j, 2], c[k + 1, j, 3], pi, pil)
            pr, prl, pi, pil = _j_cmul(lr, lrl, li, lil, x[k, 0], x[k, 1], x[k, 2], x[k, 3])
            x[k + 1, 0], x[k + 1, 1] = _j_sub(x[k + 1, 0], x[k + 1, 1], pr, prl)
            x[k + 1, 2], x[k + 1, 3] = _j_sub(x[k + 1, 2], x[k + 1, 3], pi, pil)
        for i in range(n - 1, -1, -1):
            sr, srl, si, sil = x[i, 0], x[i, 1], x[i, 2], x[i, 3]
            for j in range(i + 1, n):
                pr, prl, pi, pil = _j_cmul(c[i, j, 0], c[i, j, 1], c[i, j, 2], c[i, j, 3],
                                           x[j, 0], x[j, 1], x[j, 2], x[j, 3])
                sr, srl = _j_sub(sr, srl, pr, prl)
                si, sil = _j_sub(si, sil, pi, pil)
            x[i, 0], x[i, 1], x[i, 2], x[i, 3] = _j_cdiv(sr, srl, si, sil,
                                                          c[i, i, 0], c[i, i, 1], c[i, i, 2], c[i, i, 3])
        for i in range(n):
            for q in range(4):
                out[b, i, q] = x[i, q]
    return out


def _hsolve_np(hh, hl, alpha, beta, rhs):
    # vectorized over the batch axis
    nb = alpha.shape[0]
    n = hh.shape[0]
    ar, arl, ai, ail = (alpha[:, q, None] for q in range(4))
    br, brl, bi, bil = (beta[:, q, None, None] for q in range(4))
    c = np.empty((4, nb, n, n))
    c[0], c[1] = _dd_mul(br, brl, hh[None], hl[None])
    c[2], c[3] = _dd_mul(bi, bil, hh[None], hl[None])
    d = np.arange(n)
    c[0][:, d, d], c[1][:, d, d] = _dd_add(c[0][:, d, d], c[1][:, d, d], ar, arl)
    c[2][:, d, d], c[3][:, d, d] = _dd_add(c[2][:, d, d], c[3][:, d, d], ai, ail)
    x = np.moveaxis(rhs, 2, 0).copy()  # (4, nb, n)
    rows = np.arange(nb)
    for k in range(n - 1):
        m0 = np.abs(c[0][:, k, k]) + np.abs(c[2][:, k, k])
        m1 = np.abs(c[0][:, k + 1, k]) + np.abs(c[2][:, k + 1, k])
        sw = rows[m1 > m0]
        if sw.size:
            tmp = c[:, sw, k, :].copy()
            c[:, sw, k, :] = c[:, sw, k + 1, :]
            c[:, sw, k + 1, :] = tmp
            tmp = x[:, sw, k].copy()
            x[:, sw, k] = x[:, sw, k + 1]
            x[:, sw, k + 1] = tmp
        l = _cdd_div(*(c[q][:, k + 1, k] for q in range(4)), *(c[q][:, k, k] for q in range(4)))
        lb = [v[:, None] for v in l]
        p = _cdd_mul(*lb, *(c[q][:, k, k + 1:] for q in range(4)))
        c[0][:, k + 1, k + 1:], c[1][:, k + 1, k + 1:] = _dd_sub(
            c[0][:, k + 1, k + 1:], c[1][:, k + 1, k + 1:], p[0], p[1])
        c[2][:, k + 1, k + 1:], c[3][:, k + 1, k + 1:] = _dd_sub(
            c[2][:, k + 1, k + 1:], c[3][:, k + 1, k + 1:], p[2], p[3])
        p = _cdd_mul(*l, *(x[q][:, k] for q in range(4)))
        x[0][:, k + 1], x[1][:, k + 1] = _dd_sub(x[0][:, k + 1], x[1][:, k + 1], p[0], p[1])
        x[2][:, k + 1], x[3][:, k + 1] = _dd_sub(x[2][:, k + 1], x[3][:, k + 1], p[2], p[3])
    for i in range(n - 1, -1, -1):
        s = [x[q][:, i] for q in range(4)]
        for j in range(i + 1, n):
            p = _cdd_mul(*(c[q][:, i, j] for q in range(4)), *(x[q][:, j] for q in range(4)))
            s[0], s[1] = _dd_sub(s[0], s[1], p[0], p[1])
            s[2], s[3] = _dd_sub(s[2], s[3], p[2], p[3])
        r = _cdd_div(*s, *(c[q][:, i, i] for q in range(4)))
        for q in range(4):
            x[q][:, i] = r[q]
    return np.moveaxis(x, 0, 2)


_hsolve = kernel(_hsolve_jit, _hsolve_np)


def hess_solve_batch(h, alpha, beta, rhs):
    """Solve ``(alpha_b I + beta_b h) x_b = rhs_b`` for every batch entry.

    ``h`` is a real upper Hessenberg :class:`DD`.  ``alpha`` and ``beta`` are
    ``(nb, 4)`` arrays of complex dd scalars laid out as
    ``[re_hi, re_lo, im_hi, im_lo]``; ``rhs`` is ``(nb, n, 4)`` in the same
    layout.  Gaussian elimination with adjacent-row pivoting, O(n²) each.
    """
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    beta = np.ascontiguousarray(beta, dtype=np.float64)
    rhs = np.ascontiguousarray(rhs, dtype=np.float64)
    hh, hl = np.ascontiguousarray(h.hi), np.ascontiguousarray(h.lo)
    # the vectorized fallback holds (4, chunk, n, n) work arrays
    chunk = max(1, 2 ** 22 // max(1, hh.size))
    if alpha.shape[0] <= chunk:
        return _hsolve(hh, hl, alpha, beta, rhs)
    return np.concatenate([_hsolve(hh, hl, alpha[i:i + chunk], beta[i:i + chunk], rhs[i:i + chunk])
                           for i in range(0, alpha.shape[0], chunk)])


# -- complex helpers and the mpmath bridge ------------------------------------

def cmatmul(ar, ai, br, bi):
    """dd complex product (ar + i·ai)(br + i·bi) -> (re, im)."""
    return matmul(ar, br) - matmul(ai, bi), matmul(ar, bi) + matmul(ai, br)


def csolve(ar, ai, br, bi, refine=1):
    """Solve a complex dd system through the real block embedding."""
    n = ar.shape[0]
    A = complex_embed(ar, ai)
    vec = br.hi.ndim == 1
    if vec:
        rhs = DD(np.concatenate([br.hi, bi.hi]), np.concatenate([br.lo, bi.lo]))
    else:
        rhs = DD(np.vstack([br.hi, bi.hi]), np.vstack([br.lo, bi.lo]))
    x = solve(A, rhs, refine=refine)
    return x[:n], x[n:]


def mp_cos_sin(scale, a, b, dps=40):
    """cos and sin of scale·a_i·b_j as dd matrices, evaluated in mpmath.

    ``scale``, ``a`` and ``b`` are taken as exact doubles.
    """
    import mpmath as mp

    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    ch = np.empty((a.size, b.size)); cl = np.empty_like(ch)
    sh = np.empty_like(ch); sl = np.empty_like(ch)
    with mp.workdps(dps):
        s = mp.mpf(float(scale))
        bm = [mp.mpf(float(v)) for v in b]
        for i, av in enumerate(a):
            sa = s * mp.mpf(float(av))
            for j, bv in enumerate(bm):
                cv, sv = mp.cos_sin(sa * bv)
                h = float(cv); ch[i, j] = h; cl[i, j] = float(cv - h)
                h = float(sv); sh[i, j] = h; sl[i, j] = float(sv - h)
    return DD(ch, cl), DD(sh, sl)
