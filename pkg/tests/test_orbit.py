import math

import numpy as np
import pytest

from blcirk import gravity as G
from blcirk import orbit as O
from blcirk.solver import SolverOptions, propagate


def _energy(mu, s):
    return 0.5 * s.v @ s.v - mu / np.linalg.norm(s.r)


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


# -- structure of the first-order system ----------------------------------------------

def test_nilpotent_propagator():
    U = np.array([[1.0, 2.0, 3.0, -0.5, 0.25, 2.0], [0.1, 0.0, -7.0, 1.0, 1.0, 1.0]])
    dts = np.array([3.0, -1.5])
    out = O.nilpotent_expL(dts, U)
    assert np.array_equal(out[:, :3], U[:, :3] + dts[:, None] * U[:, 3:])
    assert np.array_equal(out[:, 3:], U[:, 3:])
    assert np.array_equal(O.nilpotent_expL(np.zeros(2), U), U)


def test_force_has_no_position_block(model8):
    sysm = O.make_orbit_system(model8, 8)
    u = np.array([7000.0, -1000.0, 2500.0, 1.0, 7.0, 0.5])
    for tag in ("central", "low", "full"):
        g = sysm.fidelities[tag](0.0, u)
        assert np.array_equal(g[:3], np.zeros(3)) and np.any(g[3:] != 0)
    assert sysm.tiers == ["central", "low", "full"]


def test_low_fidelity_is_degree_two(model8, egm2):
    sysm = O.make_orbit_system(model8, 8, 2)
    u = np.array([6900.0, 1500.0, -3100.0, 0.0, 0.0, 0.0])
    # the synthetic model shares its degree-2 block with the EGM96 file
    assert np.array_equal(sysm.fidelities["low"](0.0, u)[3:], G.acceleration(egm2, u[:3], 2))
    assert not np.array_equal(sysm.fidelities["full"](0.0, u), sysm.fidelities["low"](0.0, u))


def test_degree_validation(model8):
    for full, low in [(9, 2), (8, 1), (2, 4), (1, 0)]:
        with pytest.raises(ValueError):
            O.make_orbit_system(model8, full, low)
    O.make_orbit_system(model8, 0, 0)


def test_state_validation():
    with pytest.raises(ValueError):
        O.OrbitState([1.0, 2.0], [0.0, 1.0, 0.0])
    with pytest.raises(ValueError):
        O.OrbitState([1.0, np.nan, 0.0], [0.0, 1.0, 0.0])
    s = O.OrbitState.from_vector(np.arange(6.0), 2.0)
    assert np.array_equal(s.vector(), np.arange(6.0)) and s.t == 2.0


# -- Kepler oracle ---------------------------------------------------------------

CIRC = O.OrbitState([1.0, 0.0, 0.0], [0.0, 1.0, 0.0])


def test_circular_period_and_quarter():
    full = O.kepler_oracle(1.0, CIRC, 2 * math.pi)
    assert np.abs(full.vector() - CIRC.vector()).max() < 1e-12
    q = O.kepler_oracle(1.0, CIRC, math.pi / 2)
    assert np.abs(q.r - [0.0, 1.0, 0.0]).max() < 1e-12
    assert np.abs(q.v - [-1.0, 0.0, 0.0]).max() < 1e-12


def test_eccentric_invariants():
    # periapsis start with e = 0.3
    s0 = O.OrbitState([0.7, 0.0, 0.0], [0.0, math.sqrt(1.3 / 0.7), 0.0])
    e0, h0 = _energy(1.0, s0), np.cross(s0.r, s0.v)
    period = 2 * math.pi / (1 / 0.7 * 0.7) ** 1.5 * (1 / (2 / 0.7 - 1.3 / 0.7)) ** 1.5
    for t in np.linspace(0.0, 3 * period, 100):
        s = O.kepler_oracle(1.0, s0, t)
        assert abs(_energy(1.0, s) - e0) <= 1e-12 * abs(e0)
        assert np.abs(np.cross(s.r, s.v) - h0).max() <= 1e-12 * np.linalg.norm(h0)
    assert np.abs(O.kepler_oracle(1.0, s0, period).vector() - s0.vector()).max() < 1e-11


def test_hyperbolic_and_backward():
    s0 = O.OrbitState([1.0, 0.0, 0.0], [0.0, 1.8, 0.2])
    s1 = O.kepler_oracle(1.0, s0, 5.0)
    assert _energy(1.0, s1) == pytest.approx(_energy(1.0, s0), rel=1e-12)
    back = O.kepler_oracle(1.0, O.OrbitState(s1.r, s1.v, 5.0), 0.0)
    assert np.abs(back.vector() - s0.vector()).max() < 1e-11


def test_degenerate_orbit():
    with pytest.raises(ValueError):
        O.kepler_oracle(1.0, O.OrbitState([1.0, 0.0, 0.0], [2.0, 0.0, 0.0]), 1.0)


# -- reference integrator -------------------------------------------------------------

def _two_body(r):
    return -r / np.linalg.norm(r) ** 3


def test_rk8_against_kepler():
    ref, est = O.reference_propagate(_two_body, CIRC, 2 * math.pi, 2 * math.pi / 10000)
    assert np.linalg.norm(ref.r - CIRC.r) < 1e-9
    assert est < 1e-9


def test_rk8_order():
    s0 = O.OrbitState([0.5, 0.0, 0.0], [0.0, math.sqrt(3.0), 0.0])     # e = 0.5
    T = 2 * math.pi * 1.0 ** 1.5
    exact = O.kepler_oracle(1.0, s0, T)
    errs = []
    for n in (160, 320):
        y, _ = O.reference_propagate(_two_body, s0, T, T / n, check=False)
        errs.append(np.linalg.norm(y.r - exact.r))
    ratio = errs[0] / errs[1]
    assert 128 <= ratio <= 512


def test_rk8_zero_force():
    s0 = O.OrbitState([1.0, 2.0, 3.0], [0.5, -0.25, 0.125])
    y, _ = O.reference_propagate(lambda r: np.zeros(3), s0, 8.0, 0.5)
    assert np.abs(y.r - (s0.r + 8.0 * s0.v)).max() <= 1e-14
    assert np.array_equal(y.v, s0.v)


# -- BLC-IRK on orbits ------------------------------------------------------------------

def test_two_body_blc_vs_kepler(tab32):
    sysm = O.make_orbit_system(G.load_coeffs("1.0 1.0 2\n"), 0, 0, central=False)
    opts = SolverOptions(tol=1e-14, initial_stages=None)
    traj = propagate(sysm, tab32, CIRC.vector(), (0.0, 2 * math.pi), 20, opts)
    assert np.linalg.norm(traj.final[:3] - CIRC.r) < 1e-9


def test_frame_symmetry_zonal(tab32):
    zonal = G.load_coeffs(G.EGM96_DEGREE2.replace("2 2 0.24e-5 -0.14e-5\n", ""))
    s0 = O.OrbitState([7000.0, 300.0, 1200.0], [-0.5, 7.2, 1.1])
    opts = SolverOptions(tol=1e-13, initial_stages=O.kepler_initializer(zonal.mu))
    rot = _rz(0.7)

    def run(state):
        sysm = O.make_orbit_system(zonal, 2, 2)
        return propagate(sysm, tab32, state.vector(), (0.0, 6000.0), 4, opts).final

    a = run(s0)
    b = run(O.OrbitState(rot @ s0.r, rot @ s0.v))
    assert np.linalg.norm(b[:3] - rot @ a[:3]) <= 1e-10 * np.linalg.norm(a[:3])


def test_schedule_counts(model8, tab32):
    cfg = {"n_intervals": 3, "t_span": [0.0, 9000.0], "interior": False,
           "r0": [7000.0, 0.0, 100.0], "v0": [0.0, 7.4, 1.0]}
    rep = O.run_paper_experiment(model8, cfg, tab=tab32, reference=False)
    nodes = 3 * 32
    assert rep.n_nodes == nodes
    assert rep.counters["full"] == 2 * nodes
    assert rep.counters["low"] == 4 * nodes
    assert math.isnan(rep.max_deviation)


def test_two_fidelity_schedule_shape():
    steps = O.two_fidelity_schedule()
    full = [s for s in steps if s.fidelity == "full"]
    assert len(full) == 2 and all(s.sweeps == 1 and s.correct for s in full)
    assert sum(s.fidelity == "low" for s in steps) == 2
