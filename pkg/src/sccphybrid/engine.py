"""Simulation of compiled automata as piecewise deterministic Markov processes.

Between jumps the mode's ODE is integrated together with the cumulative
hazard of the enabled stochastic transitions; a jump happens when the
hazard reaches an Exp(1) threshold drawn on mode entry.  Instantaneous
transitions fire as soon as their guard holds.  Modes without flows skip
the integrator entirely: the hazard is then constant and the next jump time
is drawn directly, which makes the bottom of the lattice an exact SSA.

The draw sequence per mode entry is one exponential, then one uniform when
a stochastic jump is selected; a uniform is also drawn when more than one
instantaneous transition competes.
"""
from __future__ import annotations

import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dynamic import DynamicSetup, DynamicState, ZeroTotalPriority, switch
from .integrate import DormandPrince, StepFailure
from .lang import compile_expr, compile_guard, compile_update
from .tdsha import Tdsha, mode_label, _state_order

log = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-6


class SimulationError(RuntimeError):
    pass


class ChatteringError(SimulationError):
    pass


class EnsembleError(SimulationError):
    def __init__(self, run_index, cause):
        self.run_index = run_index
        super().__init__(f"run {run_index} failed: {cause}")


@dataclass
class SimConfig:
    t_end: float
    dt_out: float | None = None
    times: Sequence[float] | None = None
    seed: int = 0
    rtol: float = 1e-6
    atol: float = 1e-9
    max_step: float = 0.1
    event_tol: float = 1e-9
    runs: int = 1
    max_instant_events: int = 10_000
    record_events: bool = True
    nonnegative: bool = True  # reject flow steps that drive store variables negative
    workers: int = 1

    def __post_init__(self):
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ValueError("t_end must be finite and nonnegative")
        for name in ("rtol", "atol", "max_step", "event_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.dt_out is not None and not self.dt_out > 0:
            raise ValueError("dt_out must be positive")
        if int(self.runs) < 1:
            raise ValueError("runs must be at least 1")
        if not 0 <= int(self.seed) < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def grid(self) -> np.ndarray:
        if self.times is not None:
            ts = np.array(sorted(float(t) for t in self.times))
            if ts.size and (ts[0] < 0 or ts[-1] > self.t_end):
                raise ValueError("output times must lie in [0, t_end]")
            return ts
        if self.t_end == 0:
            return np.array([0.0])
        dt = self.dt_out if self.dt_out is not None else self.t_end / 100
        n = int(math.floor(self.t_end / dt + 1e-9))
        return np.array([i * dt for i in range(n + 1)])


@dataclass(frozen=True)
class Event:
    t: float
    kind: str  # stochastic | instantaneous | switch
    transition: str
    pre: tuple
    post: tuple
    detail: str = ""


@dataclass
class Trajectory:
    variables: tuple
    times: np.ndarray
    values: np.ndarray
    modes: list
    events: list = field(default_factory=list)
    event_counts: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.variables.index(name)]


def make_rng(seed: int, run_index: int = 0) -> np.random.Generator:
    """Counter-based (Philox) stream for one run; depends only on (seed, run_index)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(run_index),))
    return np.random.Generator(np.random.Philox(ss))


# ---------------------------------------------------------------------------
# Compiled modes


class _Jump:
    __slots__ = ("label", "guard", "rate", "reset", "target", "detail")

    def __init__(self, label, guard, rate, reset, target, detail):
        self.label, self.guard, self.rate = label, guard, rate
        self.reset, self.target, self.detail = reset, target, detail


class _Instant:
    __slots__ = ("label", "guard", "priority", "apply", "kind", "detail")

    def __init__(self, label, guard, priority, apply, kind, detail):
        self.label, self.guard, self.priority = label, guard, priority
        self.apply, self.kind, self.detail = apply, kind, detail


class _Mode:
    def __init__(self, label, rates, stoich, jumps, groups, n):
        self.label = label
        self.rates = rates
        self.stoich = stoich
        self.jumps = jumps
        self.groups = groups  # list of lists of _Instant
        self.guards = [i.guard for g in groups for i in g]
        self.n = n

    @property
    def has_flow(self):
        return bool(self.rates)

    def jump_rates(self, y):
        out = []
        for j in self.jumps:
            if j.guard is not None and not j.guard(y):
                out.append(0.0)
                continue
            r = j.rate(y)
            out.append(r if r > 0.0 else 0.0)
        return out

    def augmented(self, z):
        y = z[:self.n].tolist()
        r = [f(y) for f in self.rates]
        dy = np.array([v if v > 0.0 else 0.0 for v in r]) @ self.stoich
        h = 0.0
        for j in self.jumps:
            if j.guard is None or j.guard(y):
                v = j.rate(y)
                if v > 0.0:
                    h += v
        return np.append(dy, h)


def _group(items, key):
    groups, index = [], {}
    for it in items:
        k = key(it)
        if k not in index:
            index[k] = len(groups)
            groups.append([])
        groups[index[k]].append(it)
    return groups


class _StaticController:
    def __init__(self, tdsha: Tdsha):
        self.tdsha = tdsha
        self.variables = tuple(tdsha.variables)
        self.slots = {v: i for i, v in enumerate(self.variables)}
        self.y0 = [float(tdsha.init[v]) for v in self.variables]
        self.initial = tdsha.init_mode
        self.counter_groups = [[self.slots[v] for v in g] for g in tdsha.counter_groups]
        counters = {v for g in tdsha.counter_groups for v in g}
        self.store_idx = np.array([i for v, i in self.slots.items() if v not in counters], dtype=int)
        self._cache = {}

    def mode(self, state) -> _Mode:
        m = self._cache.get(state)
        if m is None:
            m = self._cache[state] = self._build(state)
        return m

    def _build(self, mode):
        T, slots, params = self.tdsha, self.slots, self.tdsha.params
        flows = T.flows_in(mode)
        rates = [compile_expr(t.rate, slots, params) for t in flows]
        stoich = np.array([t.stoich for t in flows], dtype=float).reshape(len(flows), len(slots))
        jumps = [_Jump(t.label, compile_guard(t.guard, slots, params), compile_expr(t.rate, slots, params),
                       compile_update(t.reset, slots, params), t.enter, T.label(t.enter))
                 for t in T.jumps_from(mode)]
        groups = []
        for grp in _group(T.instants_from(mode), lambda t: t.group):
            insts = []
            for t in grp:
                reset = compile_update(t.reset, slots, params)
                insts.append(_Instant(t.label, compile_guard(t.guard, slots, params) or (lambda y: True),
                                      compile_expr(t.priority, slots, params),
                                      (lambda y, r=reset, s=t.enter: (s, r(y))), "instantaneous",
                                      T.label(t.enter)))
            groups.append(insts)
        return _Mode(T.label(mode), rates, stoich, jumps, groups, len(slots))


class _DynamicController:
    """Builds the mode of a DynamicState from per-component fragments, on demand."""

    CACHE_LIMIT = 4096

    def __init__(self, setup: DynamicSetup):
        from .dynamic import materialize
        self._materialize = materialize
        self.setup = setup
        ext = setup.ext
        self.ext = ext
        self.variables = tuple(ext.variables)
        self.slots = {v: i for i, v in enumerate(self.variables)}
        self.y0 = [float(ext.init[v]) for v in self.variables]
        self.initial = setup.initial_state()
        self.order = _state_order(ext)
        self.counter_groups = [[self.slots[ext.counters[s]] for s in r.states] for r in ext.rts]
        counters = set(ext.counters.values())
        self.store_idx = np.array([i for v, i in self.slots.items() if v not in counters], dtype=int)
        self._frags = {}
        self._cache = {}

    def _fragment(self, ci, kappa, cls):
        key = (ci, kappa, cls)
        f = self._frags.get(key)
        if f is None:
            if len(self._frags) > self.CACHE_LIMIT:
                self._frags.clear()
            frag = self._materialize(self.ext, ci, kappa, cls, self.setup.policy)
            slots, params = self.slots, self.ext.params
            flows = [(compile_expr(t.rate, slots, params), t.stoich) for t in frag.flows]
            jumps = [(t, compile_guard(t.guard, slots, params), compile_expr(t.rate, slots, params),
                      compile_update(t.reset, slots, params)) for t in frag.jumps]
            insts = [(t, compile_guard(t.guard, slots, params) or (lambda y: True),
                      compile_expr(t.priority, slots, params)) for t in frag.instants]
            f = self._frags[key] = (flows, jumps, insts)
        return f

    def mode(self, state: DynamicState) -> _Mode:
        m = self._cache.get(state)
        if m is None:
            if len(self._cache) > self.CACHE_LIMIT:
                self._cache.clear()
            m = self._cache[state] = self._build(state)
        return m

    def _label(self, state):
        return mode_label(state.classes, self.order)

    def _build(self, state: DynamicState):
        rates, stoich, jumps, groups = [], [], [], []
        for ci in range(len(state.components)):
            flows, cjumps, insts = self._fragment(ci, state.kappa[ci], state.classes[ci])
            for rate, nu in flows:
                rates.append(rate)
                stoich.append(nu)
            for t, guard, rate, reset in cjumps:
                target = state.replace(ci, t.enter[0])
                jumps.append(_Jump(t.label, guard, rate, reset, target, self._label(target)))
            for grp in _group(insts, lambda x: x[0].group):
                items = []
                for t, guard, prio in grp:
                    target = state.replace(ci, t.enter[0])
                    items.append(_Instant(t.label, guard, prio, self._switcher(state, t), "switch",
                                          self._label(target)))
                groups.append(items)
        n = len(self.slots)
        S = np.array(stoich, dtype=float).reshape(len(rates), n)
        return _Mode(self._label(state), rates, S, jumps, groups, n)

    def _switcher(self, state, t):
        variables = self.variables

        def apply(y):
            new_state, env = switch(self.ext, state, t, dict(zip(variables, y)))
            return new_state, [env[v] for v in variables]

        return apply


def make_controller(setup):
    if isinstance(setup, Tdsha):
        return _StaticController(setup)
    if isinstance(setup, DynamicSetup):
        return _DynamicController(setup)
    raise TypeError(f"cannot simulate {type(setup).__name__}")


# ---------------------------------------------------------------------------
# Event localization


def bisect_first_true(pred: Callable[[float], bool], lo: float, hi: float, tol: float,
                      max_iter: int = 200) -> float:
    """Smallest time (within ``tol``) at which ``pred`` holds; pred(lo) false, pred(hi) true."""
    for _ in range(max_iter):
        if hi - lo <= tol:
            return hi
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if pred(mid):
            hi = mid
        else:
            lo = mid
    raise SimulationError(f"event localization did not reach tolerance {tol:g} "
                          f"(bracket [{lo!r}, {hi!r}])")


def localize_guard_crossing(segment, guards: Sequence[Callable], tol: float, probes: int = 4):
    """Earliest time in the segment at which one of ``guards`` becomes true.

    ``segment(t)`` evaluates the dense output; guards get that state and are
    assumed false at ``segment.t0``.  Each guard is probed at a few interior
    points and bisected at its first true probe.  Returns ``(time, index)``
    or ``(None, None)``.
    """
    t0, t1 = segment.t0, segment.t1
    probe_ts = [t0 + (t1 - t0) * k / probes for k in range(1, probes)] + [t1]
    best_t, best_i = None, None
    for i, g in enumerate(guards):
        lo = t0
        for tp in probe_ts:
            if best_t is not None and lo >= best_t:
                break
            if g(segment(tp)):
                t_hit = bisect_first_true(lambda s: g(segment(s)), lo, tp, tol)
                if best_t is None or t_hit < best_t:
                    best_t, best_i = t_hit, i
                break
            lo = tp
    return best_t, best_i


def next_stochastic_jump(drift: Callable | None, hazard: Callable, y0, t0: float, t_max: float,
                         rng: np.random.Generator | None = None, threshold: float | None = None,
                         rtol=1e-8, atol=1e-10, max_step=np.inf, tol=1e-9):
    """First jump time of a process with hazard ``hazard(y)`` along ``y' = drift(y)``.

    The cumulative hazard rides as an extra ODE component and is compared
    with an Exp(1) threshold.  Returns None when no jump happens before
    ``t_max``.
    """
    u = threshold if threshold is not None else rng.standard_exponential()
    y0 = np.asarray(y0, dtype=float)
    n = y0.size
    if drift is None:
        lam = max(float(hazard(y0)), 0.0)
        if lam == 0.0:
            return None
        t = t0 + u / lam
        return t if t <= t_max else None

    def f(z):
        return np.append(drift(z[:n]), max(float(hazard(z[:n])), 0.0))

    integ = DormandPrince(f, t0, np.append(y0, 0.0), rtol, atol, max_step)
    while integ.t < t_max:
        seg = integ.step(t_max)
        if seg.z1[n] >= u:
            return bisect_first_true(lambda s: seg(s)[n] >= u, seg.t0, seg.t1, tol)
    return None


# ---------------------------------------------------------------------------
# Simulation


def _choose(weights, u):
    total = 0.0
    for w in weights:
        total += w
    x = u * total
    acc = 0.0
    last = None
    for i, w in enumerate(weights):
        if w <= 0.0:
            continue
        acc += w
        last = i
        if x < acc:
            return i
    return last


class _Run:
    def __init__(self, ctrl, config: SimConfig, rng):
        self.ctrl, self.cfg, self.rng = ctrl, config, rng
        self.grid = config.grid()
        self.gi = 0
        self.n = len(ctrl.variables)
        self.values = np.empty((len(self.grid), self.n))
        self.modes = [None] * len(self.grid)
        self.events = []
        self.counts = Counter()
        self.t = 0.0
        self.y = list(ctrl.y0)
        self.state = ctrl.initial
        self.h = None
        self._instant_time, self._instant_count = None, 0
        self.threshold = -10 * config.atol

    # samples
    def _record_const(self, t_lim, inclusive, label):
        grid, y = self.grid, self.y
        while self.gi < len(grid) and (grid[self.gi] < t_lim or (inclusive and grid[self.gi] <= t_lim)):
            self.values[self.gi] = y
            self.modes[self.gi] = label
            self.gi += 1

    def _record_seg(self, seg, t_lim, inclusive, label):
        grid, n = self.grid, self.n
        while self.gi < len(grid) and (grid[self.gi] < t_lim or (inclusive and grid[self.gi] <= t_lim)):
            self.values[self.gi] = seg(grid[self.gi])[:n]
            self.modes[self.gi] = label
            self.gi += 1

    def _log(self, kind, label, pre, post, detail):
        self.counts[kind] += 1
        if self.cfg.record_events:
            self.events.append(Event(self.t, kind, label, tuple(pre), tuple(post), detail))

    def _check_counters(self, label):
        for idx in self.ctrl.counter_groups:
            s = sum(self.y[i] for i in idx)
            if abs(s - 1.0) > NORMALIZATION_TOL:
                raise SimulationError(f"counter normalization violated after {label} at t={self.t!r}: sum={s!r}")

    # discrete events
    def _fire_instants(self):
        while True:
            M = self.ctrl.mode(self.state)
            y = self.y
            chosen = None
            for grp in M.groups:
                enabled = [it for it in grp if it.guard(y)]
                if enabled:
                    chosen = enabled
                    break
            if chosen is None:
                return M
            if self._instant_time == self.t:
                self._instant_count += 1
            else:
                self._instant_time, self._instant_count = self.t, 1
            if self._instant_count > self.cfg.max_instant_events:
                raise ChatteringError(f"more than {self.cfg.max_instant_events} instantaneous "
                                      f"events at t={self.t!r}")
            weights = [max(it.priority(y), 0.0) for it in chosen]
            positive = [w for w in weights if w > 0.0]
            if not positive:
                raise ZeroTotalPriority(f"all enabled transitions of {chosen[0].label} have zero priority")
            k = weights.index(positive[0]) if len(positive) == 1 else _choose(weights, self.rng.random())
            it = chosen[k]
            pre = y
            self.state, self.y = it.apply(list(y))
            self._log(it.kind, it.label, pre, self.y, it.detail)
            self._check_counters(it.label)

    def _take_jump(self, M, rates, total):
        j = M.jumps[_choose(rates, self.rng.random())]
        pre = self.y
        self.y = j.reset(pre)
        self.state = j.target
        self._log("stochastic", j.label, pre, self.y, j.detail)
        self._check_counters(j.label)

    def run(self) -> Trajectory:
        t_end = self.cfg.t_end
        while True:
            M = self._fire_instants()
            if self.t >= t_end:
                break
            u = self.rng.standard_exponential()
            if not M.has_flow:
                rates = M.jump_rates(self.y)
                total = sum(rates)
                tau = self.t + u / total if total > 0.0 else math.inf
                if tau > t_end:
                    break
                self._record_const(tau, False, M.label)
                self.t = tau
                self._take_jump(M, rates, total)
            elif self._flow(M, u):
                break
        self._record_const(t_end, True, self.ctrl.mode(self.state).label)
        return Trajectory(self.ctrl.variables, self.grid, self.values, self.modes,
                          self.events, dict(self.counts))

    def _flow(self, M, u) -> bool:
        """Integrate until the next event; True when t_end is reached first."""
        cfg, n, t_end = self.cfg, self.n, self.cfg.t_end
        reject = None
        if cfg.nonnegative and self.ctrl.store_idx.size:
            idx, thr = self.ctrl.store_idx, self.threshold
            start_ok = np.array(self.y)[idx] >= thr

            def veto(z):
                return bool(np.any((z[idx] < thr) & start_ok))
            reject = veto
        try:
            integ = DormandPrince(M.augmented, self.t, np.append(self.y, 0.0), cfg.rtol, cfg.atol,
                                  cfg.max_step, h0=self.h, reject=reject)
            while True:
                if integ.t >= t_end:
                    self.t, self.y = t_end, integ.z[:n].tolist()
                    return True
                seg = integ.step(t_end)
                self.h = integ.h
                t_jump = None
                if seg.z1[n] >= u:
                    t_jump = bisect_first_true(lambda s: seg(s)[n] >= u, seg.t0, seg.t1, cfg.event_tol)
                t_guard = None
                if M.guards:
                    t_guard, _ = localize_guard_crossing(seg, M.guards, cfg.event_tol)
                if t_guard is not None and (t_jump is None or t_guard <= t_jump + cfg.event_tol):
                    tau, kind = t_guard, "instant"
                elif t_jump is not None:
                    tau, kind = t_jump, "jump"
                else:
                    self._record_seg(seg, seg.t1, False, M.label)
                    continue
                self._record_seg(seg, tau, False, M.label)
                self.t, self.y = tau, seg(tau)[:n].tolist()
                if kind == "jump":
                    rates = M.jump_rates(self.y)
                    total = sum(rates)
                    if total > 0.0:
                        self._take_jump(M, rates, total)
                return False
        except StepFailure as exc:
            raise SimulationError(str(exc)) from exc


def simulate(setup, config: SimConfig, run_index: int = 0, controller=None) -> Trajectory:
    """One PDMP trajectory of a compiled Tdsha or a DynamicSetup."""
    ctrl = controller or make_controller(setup)
    return _Run(ctrl, config, make_rng(config.seed, run_index)).run()


# ---------------------------------------------------------------------------
# Ensembles


@dataclass
class EnsembleResult:
    variables: tuple
    times: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    runs: int
    event_counts: dict
    run_event_counts: list


def _run_chunk(setup, config, indices):
    ctrl = make_controller(setup)
    out = []
    for i in indices:
        try:
            tr = simulate(setup, config, i, ctrl)
        except Exception as exc:  # reported with its run index
            raise EnsembleError(i, exc) from exc
        out.append((i, tr.values, tr.event_counts))
    return out


def simulate_ensemble(setup, config: SimConfig) -> EnsembleResult:
    """Independent runs on seeded substreams, merged in run-index order."""
    runs = int(config.runs)
    cfg = SimConfig(**{**config.__dict__, "record_events": False})
    workers = max(1, int(config.workers))
    if workers == 1:
        results = _run_chunk(setup, cfg, range(runs))
    else:
        chunks = [list(range(runs))[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(workers) as pool:
            parts = pool.map(_run_chunk, [setup] * workers, [cfg] * workers, chunks)
            results = sorted((r for part in parts for r in part), key=lambda r: r[0])
    mean = m2 = None
    totals = Counter()
    per_run = []
    for k, (i, values, counts) in enumerate(results, start=1):
        if mean is None:
            mean = np.zeros_like(values)
            m2 = np.zeros_like(values)
        delta = values - mean
        mean += delta / k
        m2 += delta * (values - mean)
        totals.update(counts)
        per_run.append(dict(counts))
    return EnsembleResult(tuple(make_controller(setup).variables), cfg.grid(), mean, m2 / runs,
                          runs, dict(totals), per_run)
