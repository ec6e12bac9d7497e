import mpmath as mp
import numpy as np
import pytest

from blcirk import xprec
from blcirk.xprec import DD

mp.mp.dps = 50


def _mp_value(d, i=None):
    if i is None:
        return mp.mpf(float(d.hi)) + mp.mpf(float(d.lo))
    return mp.mpf(float(d.hi[i])) + mp.mpf(float(d.lo[i]))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def test_arithmetic_matches_mpmath(rng):
    a = DD(rng.standard_normal(50), rng.standard_normal(50) * 1e-17)
    b = DD(rng.standard_normal(50) + 3.0, rng.standard_normal(50) * 1e-17)
    am, bm = [_mp_value(a, i) for i in range(50)], [_mp_value(b, i) for i in range(50)]
    for op, ref in [(a + b, lambda x, y: x + y), (a - b, lambda x, y: x - y),
                    (a * b, lambda x, y: x * y), (a / b, lambda x, y: x / y)]:
        err = max(abs(_mp_value(op, i) - ref(am[i], bm[i])) / abs(ref(am[i], bm[i]))
                  for i in range(50))
        assert err < 1e-30


def test_sqrt_and_constants():
    q = DD(2.0).sqrt()
    assert abs(_mp_value(q) - mp.sqrt(2)) < 1e-31
    third = DD(1.0) / DD(3.0)
    assert abs(_mp_value(third) - mp.mpf(1) / 3) < 1e-32


def test_dense_solve_matches_mpmath(rng):
    n = 20
    A = DD(rng.standard_normal((n, n)), rng.standard_normal((n, n)) * 1e-17)
    b = DD(rng.standard_normal(n))
    x = xprec.solve(A, b)
    xm = mp.lu_solve(mp.matrix(xprec.to_mp(A)), mp.matrix(xprec.to_mp(b)))
    assert max(abs(_mp_value(x, i) - xm[i]) for i in range(n)) < 1e-26


def test_matmul_matches_mpmath(rng):
    n = 12
    A = DD(rng.standard_normal((n, n)))
    B = DD(rng.standard_normal((n, n)), rng.standard_normal((n, n)) * 1e-17)
    C = xprec.matmul(A, B)
    Cm = mp.matrix(xprec.to_mp(A)) * mp.matrix(xprec.to_mp(B))
    err = max(abs(mp.mpf(float(C.hi[i, j])) + float(C.lo[i, j]) - Cm[i, j])
              for i in range(n) for j in range(n))
    assert err < 1e-29


def test_hessenberg_resolvent(rng):
    n = 16
    A = DD(rng.standard_normal((n, n)) * 0.1)
    u = DD(np.ones(n))
    v = DD(rng.random(n))
    H, uu, vv = xprec.hessenberg(A, u, v)
    z = 0.3 + 0.7j
    alpha = np.array([[1.0, 0, 0, 0]])
    beta = np.array([[-z.real, 0, -z.imag, 0]])
    rhs = np.zeros((1, n, 4))
    rhs[0, :, 0], rhs[0, :, 1] = uu.hi, uu.lo
    y = xprec.hess_solve_batch(H, alpha, beta, rhs)[0]
    re = (vv * DD(y[:, 0], y[:, 1])).sum()
    im = (vv * DD(y[:, 2], y[:, 3])).sum()
    Am = mp.matrix(xprec.to_mp(A))
    ref = (mp.matrix(xprec.to_mp(v)).T * mp.lu_solve(mp.eye(n) - mp.mpc(z) * Am,
                                                      mp.matrix(xprec.to_mp(u))))[0]
    assert abs(_mp_value(re) - ref.real) < 1e-28
    assert abs(_mp_value(im) - ref.imag) < 1e-28


def test_singular_solve_raises():
    with pytest.raises((ZeroDivisionError, np.linalg.LinAlgError, ArithmeticError)):
        xprec.solve(DD(np.zeros((3, 3))), DD(np.ones(3)))


def test_mp_round_trip(rng):
    a = DD(rng.standard_normal(5), rng.standard_normal(5) * 1e-17)
    b = xprec.from_mp(xprec.to_mp(a))
    # equal values; the pair itself may come back renormalized
    assert all(_mp_value(a, i) == _mp_value(b, i) for i in range(5))
