import json
import math

import numpy as np
import pytest

from blcirk import quadrature as Q


@pytest.fixture(scope="module")
def rule12():
    return Q.build_quadrature(40.0, 1e-12)


def test_invariants(rule12):
    r = rule12
    assert abs(r.weights.sum() - 2.0) < 1e-13
    assert np.all(r.weights > 0)
    assert np.all(np.diff(r.nodes) > 0) and np.all(np.abs(r.nodes) < 1)
    assert np.array_equal(r.nodes, -r.nodes[::-1])
    assert np.array_equal(r.weights, r.weights[::-1])
    assert r.verified_error <= 1e-12


def test_minimal_m(rule12):
    smaller = Q.rule_from_nodes_count(40.0, rule12.M - 2)
    assert smaller.verified_error > 1e-12


def test_verify_recomputes(rule12):
    assert Q.verify_quadrature(rule12) == pytest.approx(rule12.verified_error, rel=1e-12)
    with pytest.raises(ValueError):
        Q.verify_quadrature(rule12, 999)


def test_small_bandlimit_gives_gauss_legendre():
    r = Q.build_quadrature(0.1, 1e-13, M=16)
    x, _ = np.polynomial.legendre.leggauss(16)
    assert np.abs(r.nodes - x).max() < 1e-6


def test_gauss_legendre_helper():
    x, w = Q.gauss_legendre(20)
    xr, wr = np.polynomial.legendre.leggauss(20)
    assert np.abs(x - xr).max() < 1e-14 and np.abs(w - wr).max() < 1e-14


def test_corrupted_weight_detected(rule12):
    w = np.array(rule12.weights)
    w[3] += 1e-6
    assert Q.exponential_error(rule12.nodes, w, rule12.c_quad) >= 1e-7


def test_node_ratio_uniform_and_small():
    assert Q.node_ratio(np.array([-0.75, -0.25, 0.25, 0.75])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        Q.node_ratio(np.array([-0.5, 0.0, 0.5]))


def test_gauss_legendre_ratio_halves():
    r32 = Q.node_ratio(Q.gauss_legendre(32)[0])
    r64 = Q.node_ratio(Q.gauss_legendre(64)[0])
    assert abs(r32 / r64 - 2.0) <= 0.25 * 2.0


def test_oversampling(rule12):
    assert Q.oversampling_factor(rule12) == pytest.approx(math.pi * rule12.M / 40.0)
    assert Q.oversampling_factor(rule12) > 1


@pytest.mark.parametrize("M", [10, 20, 30])
def test_interlacing(M):
    c = 0.8 * M             # comparable accuracy for both sizes
    a = Q.rule_from_nodes_count(c, M).nodes
    b = Q.rule_from_nodes_count(c, M + 2).nodes
    # every gap of the larger rule holds at most one node of the smaller one
    idx = np.searchsorted(b, a)
    assert np.all(np.diff(idx) >= 1)
    assert idx[0] >= 1 and idx[-1] <= M + 1


def test_product_rule(rule12):
    rng = np.random.default_rng(5)
    half = rule12.c_quad / 2
    b1, b2 = rng.uniform(-half, half, 6), rng.uniform(-half, half, 6)
    a1, a2 = rng.standard_normal(6) / 6, rng.standard_normal(6) / 6

    def f(x, a, b):
        return np.exp(1j * np.outer(x, b)) @ a

    t, w = rule12.nodes, rule12.weights
    approx = (w * f(t, a1, b1) * f(t, a2, b2)).sum()
    # exact ∫ e^{i(b+b')x} = 2 sinc(b+b')
    s = b1[:, None] + b2[None, :]
    exact = (np.outer(a1, a2) * 2 * np.sinc(s / math.pi)).sum()
    assert abs(approx - exact) <= 4 * rule12.eps_quad


def test_paired_rule_for_17pi(rule64):
    assert rule64.M == 64
    assert rule64.verified_error <= 1e-13
    assert rule64.interp_error <= 1e-12


def test_json_round_trip(rule12):
    back = Q.rule_from_json(Q.rule_to_json(rule12))
    assert np.array_equal(back.nodes, rule12.nodes)
    assert np.array_equal(back.weights, rule12.weights)
    assert back.verified_error == rule12.verified_error
    d = json.loads(Q.rule_to_json(rule12))
    assert d["M"] == rule12.M
    # an unmeasured interpolation error is stored as null, not NaN
    if np.isnan(rule12.interp_error):
        assert d["interp_error"] is None and np.isnan(back.interp_error)


def test_bad_input():
    with pytest.raises(ValueError):
        Q.build_quadrature(0.0, 1e-10)
    with pytest.raises(ValueError):
        Q.build_quadrature(10.0, 0.0)
    with pytest.raises(ValueError):
        Q.bandlimit_for_nodes(16, 1e-10, measure="bogus")


def _gl_bandlimit(M, eps):
    # largest c a Gauss–Legendre rule integrates e^{ibx}, |b| <= c, to eps
    x, w = Q.gauss_legendre(M)
    lo, hi = 0.5 * M, 4.0 * M
    for _ in range(25):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if Q.exponential_error(x, w, mid) <= eps else (lo, mid)
    return lo


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="measured factor at M = 256 is ~1.83")
def test_gauss_legendre_oversampling_near_half_pi():
    alpha = math.pi * 256 / _gl_bandlimit(256, 1e-13)
    assert 1.5 < alpha < 1.65
