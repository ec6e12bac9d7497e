"""Stage iteration for band-limited collocation Runge–Kutta schemes.

For y' = L y + g(t, y) on [t0, t0 + h] with a [0,1] tableau (τ, w, S):

    y_k = e^{hτ_k L} y0 + h Σ_j S_kj e^{h(τ_k - τ_j) L} g(t0 + hτ_j, y_j)
    y(t0 + h) = e^{hL} y0 + h Σ_j w_j e^{h(1 - τ_j) L} g_j

The stage equations are solved by fixed-point sweeps in Gauss–Seidel
order: y_k is replaced, and g re-evaluated there, before moving to k + 1.
With L = 0 this is plain discretized Picard iteration.

Forces may come in several fidelities ordered from cheap to expensive
(``tiers``).  A schedule is a list of steps; each step sweeps with one
fidelity, either a fixed number of times or until converged.  In a
``correct`` step the node value is

    g_i(y_k) + Σ_{j>i} δ_j[k],     δ_j = g_j - g_{j-1} frozen per node,

and evaluating tier i also evaluates the tiers below it at the same point
to refresh δ_1..δ_i.  Iterating the cheapest tier with corrections then
costs nothing in the expensive models.
"""

from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

__all__ = [
    "OdeSystem", "ScheduleStep", "SolverOptions", "IntervalSolution", "Trajectory",
    "DivergenceError", "solve_interval", "propagate", "set_schedule",
    "linear_propagator",
]


class DivergenceError(RuntimeError):
    def __init__(self, msg, history, interval=None):
        super().__init__(msg if interval is None else f"interval {interval}: {msg}")
        self.history = list(history)
        self.interval = interval


def linear_propagator(L):
    """apply_expL for a constant matrix L (dense expm per call)."""
    from scipy.linalg import expm

    L = np.asarray(L, dtype=float)

    def apply(dt, y):
        return expm(dt * L) @ y

    return apply


class OdeSystem:
    """y' = L y + g(t, y) with one or more fidelities of g.

    ``apply_expL(dt, y)`` applies e^{dt L}; omit it for L = 0.  A vectorized
    ``apply_expL_batch(dts, Y)`` (rows of Y advanced by matching dts) is
    used when given.
    """

    def __init__(self, dim, g=None, apply_expL=None, fidelities=None,
                 apply_expL_batch=None, default=None, tiers=None):
        self.dim = int(dim)
        fid = dict(fidelities or {})
        if g is not None:
            fid.setdefault("full", g)
        if not fid:
            raise ValueError("at least one right-hand side is required")
        self.fidelities: Dict[str, Callable] = fid
        self.default = default or ("full" if "full" in fid else next(iter(fid)))
        self._expL = apply_expL
        self._expL_batch = apply_expL_batch
        self.counters = {k: 0 for k in fid}
        self.tiers = list(tiers) if tiers is not None else list(fid)
        if sorted(self.tiers) != sorted(fid):
            raise ValueError("tiers must list every fidelity once")

    @property
    def has_linear_part(self):
        return self._expL is not None or self._expL_batch is not None

    def reset_counters(self):
        for k in self.counters:
            self.counters[k] = 0

    def g(self, tag, t, y):
        try:
            f = self.fidelities[tag]
        except KeyError:
            raise KeyError(f"unknown fidelity {tag!r}") from None
        self.counters[tag] += 1
        out = np.asarray(f(t, y), dtype=float)
        if not np.all(np.isfinite(out)):
            raise FloatingPointError(f"non-finite right-hand side ({tag}) at t={t}")
        return out

    def expL(self, dt, y):
        if self._expL is None:
            if self._expL_batch is None:
                return np.array(y, dtype=float)
            return self._expL_batch(np.array([dt]), np.asarray(y)[None, :])[0]
        return np.asarray(self._expL(dt, y), dtype=float)

    def expL_batch(self, dts, Y):
        if self._expL_batch is not None:
            return np.asarray(self._expL_batch(dts, Y), dtype=float)
        if self._expL is None:
            return np.array(Y, dtype=float)
        return np.array([self._expL(dt, y) for dt, y in zip(dts, Y)])


@dataclass
class ScheduleStep:
    fidelity: str
    sweeps: Optional[int] = None        # None: until converged
    correct: bool = False               # tier corrections on (see module notes)


@dataclass
class SolverOptions:
    tol: float = 1e-13
    max_sweeps: int = 200
    n_iter: Optional[int] = None        # fixed sweep count (default schedule only)
    schedule: Optional[List[ScheduleStep]] = None
    init_fidelity: Optional[str] = None
    diverge_after: int = 3
    initial_stages: Optional[Callable] = None    # (times, y0, t0) -> (M, dim) guess


def set_schedule(opts, schedule, system=None):
    """Return a copy of ``opts`` with a validated schedule.

    ``schedule`` items are ScheduleStep or dicts with the same keys.
    """
    steps = [s if isinstance(s, ScheduleStep) else ScheduleStep(**s) for s in schedule]
    if system is not None:
        for s in steps:
            if s.fidelity not in system.fidelities:
                raise KeyError(f"schedule references unknown fidelity {s.fidelity!r}")
    out = SolverOptions(**{**opts.__dict__, "schedule": steps})
    return out


@dataclass
class IntervalSolution:
    t0: float
    h: float
    times: np.ndarray
    stages: np.ndarray
    endpoint: np.ndarray
    n_sweeps: int
    history: List[float] = field(default_factory=list)
    converged: bool = True


def _stage_sum(system, tab_S, tau, h, k, G):
    """h Σ_j S_kj e^{h(τ_k - τ_j)L} g_j."""
    if system.has_linear_part:
        G = system.expL_batch(h * (tau[k] - tau), G)
    return h * (tab_S[k] @ G)


def _node_force(system, tiers, step, t, y, delta, k):
    g = system.g(step.fidelity, t, y)
    if not step.correct:
        return g
    i = tiers.index(step.fidelity)
    upper = g
    for j in range(i, 0, -1):
        lower = system.g(tiers[j - 1], t, y)
        delta[j, k] = upper - lower
        upper = lower
    return g + delta[i + 1:, k].sum(axis=0)


def solve_interval(system, tab, y0, t0, h, opts=None):
    if tab.interval != "[0,1]":
        raise ValueError("solve_interval expects a tableau on [0,1]")
    opts = opts or SolverOptions()
    y0 = np.asarray(y0, dtype=float)
    tau, w, S = tab.nodes, tab.weights, tab.S
    M = tau.size
    times = t0 + h * tau
    base = system.expL_batch(h * tau, np.broadcast_to(y0, (M, y0.size)).copy())
    if opts.initial_stages is None:
        Y = np.broadcast_to(y0, (M, y0.size)).copy()
    else:
        Y = np.array(opts.initial_stages(times, y0, t0), dtype=float)
        if Y.shape != (M, y0.size):
            raise ValueError(f"initial_stages returned shape {Y.shape}, expected {(M, y0.size)}")
    steps = opts.schedule
    if steps is None:
        steps = [ScheduleStep(system.default, opts.n_iter)]
    init = opts.init_fidelity or steps[0].fidelity
    G = np.array([system.g(init, times[k], Y[k]) for k in range(M)])
    tiers = system.tiers
    delta = np.zeros((len(tiers), M, y0.size))       # δ_j, row 0 unused
    history = []
    total = 0
    converged = True
    for step in steps:
        n = step.sweeps if step.sweeps is not None else opts.max_sweeps
        grow = 0
        done = False
        for _ in range(n):
            dmax = 0.0
            for k in range(M):
                yk = base[k] + _stage_sum(system, S, tau, h, k, G)
                dmax = max(dmax, float(np.abs(yk - Y[k]).max()))
                Y[k] = yk
                G[k] = _node_force(system, tiers, step, times[k], yk, delta, k)
            total += 1
            if history and dmax > history[-1]:
                grow += 1
            else:
                grow = 0
            history.append(dmax)
            if not np.isfinite(dmax) or grow >= opts.diverge_after:
                raise DivergenceError(f"sweep delta grew {grow} times in a row (last {dmax:.3g})", history)
            if step.sweeps is None and dmax <= opts.tol * (1.0 + float(np.abs(Y).max())):
                done = True
                break
        if step.sweeps is None and not done:
            converged = False
    end = system.expL(h, y0) + h * (w @ (system.expL_batch(h * (1.0 - tau), G)
                                         if system.has_linear_part else G))
    return IntervalSolution(t0, h, times, Y, end, total, history, converged)


@dataclass
class Trajectory:
    interval_times: np.ndarray
    interval_states: np.ndarray
    stage_times: np.ndarray
    stage_states: np.ndarray
    sweeps: List[int]
    counters: Dict[str, int]
    histories: List[List[float]]

    @property
    def final(self):
        return self.interval_states[-1]


def propagate(system, tab, y0, t_span, n_intervals, opts=None):
    """Chain ``n_intervals`` uniform intervals over ``t_span``.

    Counters accumulate over the whole run (reset at the start).
    """
    if n_intervals < 1:
        raise ValueError("n_intervals must be at least 1")
    t_a, t_b = map(float, t_span)
    h = (t_b - t_a) / n_intervals
    system.reset_counters()
    y = np.asarray(y0, dtype=float)
    ts, ys, st, ss, sw, hist = [t_a], [y.copy()], [], [], [], []
    for i in range(n_intervals):
        t0 = t_a + i * h
        try:
            sol = solve_interval(system, tab, y, t0, h, opts)
        except DivergenceError as exc:
            raise DivergenceError(str(exc), exc.history, interval=i) from None
        y = sol.endpoint
        ts.append(t0 + h if i < n_intervals - 1 else t_b)
        ys.append(y.copy())
        st.append(sol.times)
        ss.append(sol.stages)
        sw.append(sol.n_sweeps)
        hist.append(sol.history)
    return Trajectory(np.array(ts), np.array(ys), np.concatenate(st), np.concatenate(ss),
                      sw, dict(system.counters), hist)
