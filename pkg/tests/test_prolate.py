import math

import numpy as np
import pytest

from blcirk import prolate as P

C17 = 17 * math.pi


@pytest.fixture(scope="module", params=[10.0, C17, 100.0], ids=["c10", "c17pi", "c100"])
def pb(request):
    c = request.param
    return P.build_prolate_basis(c, int(2 * c / math.pi) + 40, "extended")


def _gl(n):
    from scipy.special import roots_legendre
    return roots_legendre(n)


def test_normalized_and_parity(pb):
    assert np.abs((pb.coeffs ** 2).sum(axis=1) - 1).max() < 1e-13
    even = pb.coeffs[0::2, 1::2]
    odd = pb.coeffs[1::2, 0::2]
    assert np.abs(even).max() == 0.0 and np.abs(odd).max() == 0.0
    assert np.all(np.diff(pb.gamma) > 0)


def test_operator_residual(pb):
    assert P.operator_residual(pb).max() <= 1e-12


def _composite_gl(panels=16, n=48):
    # short panels keep every node and weight accurate to rounding, unlike a
    # single high-order rule
    t, wt = np.polynomial.legendre.leggauss(n)
    edges = np.linspace(-1, 1, panels + 1)
    half = (edges[1] - edges[0]) / 2
    x = np.concatenate([(a + b) / 2 + half * t for a, b in zip(edges[:-1], edges[1:])])
    return x, np.tile(wt * half, panels)


def test_orthonormal_by_quadrature(pb):
    x, w = _composite_gl()
    psi = P.eval_psi_all(pb, x)
    G = psi.T @ (w[:, None] * psi)
    assert np.abs(G - np.eye(pb.J)).max() < 1e-12


def test_mu_spectrum_profile(pb):
    c = pb.c
    n = int(math.floor(2 * c / math.pi))
    mu = pb.mu
    assert np.all((mu > 0) & (mu <= 1 + 1e-14))   # μ_0 rounds to 1 for large c
    assert np.all(np.diff(mu) < 1e-14)
    sep = mu[(mu > 1e-25) & (mu < 1 - 1e-12)]
    assert np.all(np.diff(sep) < 0)
    assert np.all(mu[:n] > 0.5)
    assert (mu > 0.5).sum() in (n, n + 1)
    width = int(((mu <= 0.5) & (mu > 1e-10)).sum())
    assert width <= 3 * math.log(c) + 4
    assert np.all(mu[n + width + 1:] < 1e-10)


def test_lambda_phase_and_mu_relation(pb):
    j = np.arange(pb.J)
    unit = pb.lam / (1j ** j)
    assert np.all(np.abs(unit.imag) <= 1e-12 * np.abs(unit))
    assert np.all(unit.real > 0)
    mu = pb.c * np.abs(pb.lam) ** 2 / (2 * math.pi)
    assert np.abs(mu - pb.mu).max() < 1e-12


def test_finite_fourier_eigen_relation(pb):
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, 100)
    y, w = _gl(300)
    psi_y = P.eval_psi_all(pb, y)
    psi_x = P.eval_psi_all(pb, x)
    F = np.exp(1j * pb.c * np.outer(x, y)) @ (w[:, None] * psi_y)
    assert np.abs(F - psi_x * pb.lam[None, :]).max() < 1e-11


def test_phi_endpoints_and_parity(pb):
    psi0 = P.eval_psi_all(pb, np.array([0.0]))[0]
    for j in range(0, pb.J, 7):
        assert P.eval_phi(pb, j, -1.0) == 0.0
        assert abs(P.eval_phi(pb, j, 1.0) - (pb.lam[j] * psi0[j]).real
                   - 1j * 0) < 1e-12 or abs(P.eval_phi(pb, j, 1.0) - abs(pb.lam[j] * psi0[j])) < 1e-12
    x = np.linspace(0, 1, 11)
    for j in range(0, pb.J, 2):
        total = P.eval_phi(pb, j, 1.0)
        assert np.abs(P.eval_phi(pb, j, x) + P.eval_phi(pb, j, -x) - total).max() < 1e-13


def test_phi_matches_fine_integration(pb):
    # fundamental theorem cross-check on a few orders
    t, w = _gl(200)
    for j in (0, 3, 10):
        for x in (-0.4, 0.2, 0.9):
            s = (x + 1) / 2 * t + (x - 1) / 2
            ref = (x + 1) / 2 * (w * P.eval_psi(pb, j, s)).sum()
            assert abs(P.eval_phi(pb, j, x) - ref) < 1e-13


def test_psi_parity_eval(pb):
    x = np.linspace(0, 1, 50)
    for j in range(0, pb.J, 5):
        assert np.abs(P.eval_psi(pb, j, -x) - (-1) ** j * P.eval_psi(pb, j, x)).max() < 1e-14
    assert P.eval_psi(pb, 1, 0.0) == pytest.approx(0.0, abs=1e-15)
    assert P.eval_psi(pb, 0, 1.0) > 0


def test_small_c_limit():
    pb = P.build_prolate_basis(1e-3, 8)
    lead = np.array([pb.coeffs[j, j] for j in range(8)])
    off = (pb.coeffs ** 2).sum(axis=1) - lead ** 2
    assert np.all(off < 1e-4)
    assert abs(P.eval_psi(pb, 0, 0.5) - 1 / math.sqrt(2)) < 1e-4


def test_mu_trace_at_17pi():
    pb = P.build_prolate_basis(C17, 64)
    assert abs(pb.mu.sum() - 34.0) < 0.5
    assert pb.mu[0] > 1 - 1e-10


def test_lambda_eigenvalue_accessor(pb):
    assert P.lambda_eigenvalue(pb, 2) == complex(pb.lam[2])
    with pytest.raises((IndexError, ValueError)):
        P.lambda_eigenvalue(pb, pb.J)


def test_rejects_bad_input():
    with pytest.raises(ValueError):
        P.build_prolate_basis(0.0, 4)
    with pytest.raises(ValueError):
        P.build_prolate_basis(1.0, 0)
    pb = P.build_prolate_basis(1.0, 4)
    with pytest.raises(ValueError):
        P.eval_psi(pb, 0, 1.5)


def test_json_round_trip():
    pb = P.build_prolate_basis(5.0, 10, "extended")
    back = P.basis_from_json(P.basis_to_json(pb))
    assert np.array_equal(back.coeffs, pb.coeffs)
    assert np.array_equal(back.lam, pb.lam)
    assert np.array_equal(back.gamma, pb.gamma)


def test_extended_small_lambda_beats_standard():
    # deep tail |λ| is recovered in extended precision only
    c = 10.0
    ext = P.build_prolate_basis(c, 40, "extended")
    std = P.build_prolate_basis(c, 40, "standard")
    tail = np.abs(ext.lam[-5:])
    assert np.all(tail < 1e-13) and np.all(tail > 0)
    assert np.all(np.diff(np.abs(ext.lam)) < 0)
    assert np.abs(std.lam[:10] - ext.lam[:10]).max() < 1e-13
