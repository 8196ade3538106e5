"""Run-time repartitioning of edges between discrete and continuous treatment.

Each edge ``e`` carries a switching function ``f_e`` of the valuation.  The
edge moves to the continuous side when ``f_e >= eps`` and back when
``f_e <= -eps``; the band in between never triggers anything.  Leaving a
cluster splits it: the target sub-cluster is drawn with weight equal to the
mass of its counters, and counters are renormalized inside it.

Modes are generated on demand from the RTS, never enumerated up front,
except by :func:`compile_component_dynamic` which exists for checking.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import Mapping, Sequence

from .lang import (BinOp, Call, Cmp, FALSE, IDENTITY, Num, Ref, TRUE, Update,
                   apply_update, eval_expr)
from .rts import ExtendedProgram, stoichiometry
from .tdsha import (ContTransition, InstTransition, KappaVector, StochTransition,
                    Tdsha, check_kappa, class_of, component_flows,
                    component_jumps, edge_label, is_continuously_approximable,
                    mode_label, quotient, top_kappa, _state_order)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-3
NORMALIZATION_TOL = 1e-6


class ZeroTotalPriority(RuntimeError):
    pass


class CounterDrift(RuntimeError):
    pass


@dataclass(frozen=True)
class PartitionPolicy:
    """Switching functions keyed by ``(component, edge_id)``.

    Values are expressions over the store, or float constants (``±inf``
    pins an edge to one side).  Missing edges default to ``-inf``.
    """
    f: Mapping = field(default_factory=dict)
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be a finite positive number, got {self.epsilon!r}")

    def function(self, key):
        return self.f.get(key, -math.inf)

    def override(self, values: Mapping) -> "PartitionPolicy":
        """Copy with some switching functions replaced."""
        return PartitionPolicy({**self.f, **values}, self.epsilon)


def cont_guard(key, policy: PartitionPolicy):
    f = policy.function(key)
    if isinstance(f, (int, float)):
        return TRUE if f >= policy.epsilon else FALSE
    return Cmp(">=", f, Num(policy.epsilon))


def disc_guard(key, policy: PartitionPolicy):
    f = policy.function(key)
    if isinstance(f, (int, float)):
        return TRUE if f <= -policy.epsilon else FALSE
    return Cmp("<=", f, Num(-policy.epsilon))


def _value(f, env):
    return float(f) if isinstance(f, (int, float)) else eval_expr(f, env)


def cont_pred(key, policy: PartitionPolicy):
    f = policy.function(key)
    return lambda env: _value(f, env) >= policy.epsilon


def disc_pred(key, policy: PartitionPolicy):
    f = policy.function(key)
    return lambda env: _value(f, env) <= -policy.epsilon


# ---------------------------------------------------------------------------
# Policies


def _approximable(ext, ci, e):
    return is_continuously_approximable(ext.rts[ci].edges[e], ext.params)


def population_size_policy(K: float, ext: ExtendedProgram, epsilon=DEFAULT_EPSILON) -> PartitionPolicy:
    """f_e(x) = min over touched store variables of x_i - K |nu_i|."""
    f = {}
    for ci, r in enumerate(ext.rts):
        for e in r.edges:
            key = (r.component, e.id)
            if not _approximable(ext, ci, e.id):
                f[key] = -math.inf
                continue
            nu = stoichiometry(e, ext.store_vars, ext.params)
            terms = [(x, abs(h)) for x, h in zip(ext.store_vars, nu) if h != 0]
            if not terms:
                log.info("edge %s changes no store variable; population policy keeps it continuous",
                         edge_label(r.component, e.id))
                f[key] = math.inf
            elif math.isinf(K):
                f[key] = -math.inf
            else:
                exprs = tuple(BinOp("-", Ref(x), Num(K * h)) for x, h in terms)
                f[key] = exprs[0] if len(exprs) == 1 else Call("min", exprs)
    return PartitionPolicy(f, epsilon)


def rate_policy(Lambda: float, dt: float, ext: ExtendedProgram, epsilon=DEFAULT_EPSILON) -> PartitionPolicy:
    """f_e(x) = rate_e(x) * dt - Lambda, using the action's own rate (no counter factor)."""
    if not (Lambda > 0 and dt > 0):
        raise ValueError("rate policy needs Lambda > 0 and dt > 0")
    f = {}
    for ci, r in enumerate(ext.rts):
        for e in r.edges:
            key = (r.component, e.id)
            if _approximable(ext, ci, e.id):
                f[key] = BinOp("-", BinOp("*", e.rate, Num(dt)), Num(Lambda))
            else:
                f[key] = -math.inf
    return PartitionPolicy(f, epsilon)


def constant_policy(value: float, ext: ExtendedProgram, epsilon=DEFAULT_EPSILON) -> PartitionPolicy:
    f = {(r.component, e.id): float(value) for r in ext.rts for e in r.edges}
    return PartitionPolicy(f, epsilon)


# ---------------------------------------------------------------------------
# Dynamic modes and transitions


@dataclass(frozen=True)
class DynMode:
    """A component's class under a given kappa."""
    component: str
    kappa: tuple
    cls: frozenset


@dataclass(frozen=True)
class DynamicState:
    components: tuple
    kappa: tuple    # one 0/1 tuple per component
    classes: tuple  # current class per component

    @property
    def mode(self) -> tuple:
        return self.classes

    def local(self, ci) -> DynMode:
        return DynMode(self.components[ci], self.kappa[ci], self.classes[ci])

    def replace(self, ci, dm: DynMode) -> "DynamicState":
        kappa = self.kappa[:ci] + (dm.kappa,) + self.kappa[ci + 1:]
        classes = self.classes[:ci] + (dm.cls,) + self.classes[ci + 1:]
        return DynamicState(self.components, kappa, classes)

    def kappa_vector(self) -> KappaVector:
        return KappaVector(dict(zip(self.components, self.kappa)))


def initial_state(ext: ExtendedProgram, kappa0: Mapping[str, Sequence[int]]) -> DynamicState:
    kappas, classes = [], []
    for r in ext.rts:
        k = check_kappa(r, kappa0[r.component], ext.params)
        kappas.append(k)
        classes.append(class_of(quotient(r, k, check=False), r.component))
    return DynamicState(tuple(r.component for r in ext.rts), tuple(kappas), tuple(classes))


def _flip(kappa, e, v):
    k = list(kappa)
    k[e] = v
    return tuple(k)


def _counter_sum(ext, states):
    ordered = sorted(states, key=_state_order(ext).get)
    terms = [Ref(ext.counters[s]) for s in ordered]
    out = terms[0]
    for t in terms[1:]:
        out = BinOp("+", out, t)
    return out


def dynamic_transitions(ext: ExtendedProgram, component, kappa: Sequence[int],
                        policy: PartitionPolicy, cls: frozenset | None = None) -> list:
    """Switch transitions leaving ``cls`` (every class when None) under ``kappa``.

    A continuous edge switching off yields one transition per sub-cluster
    of the split, weighted by that sub-cluster's counter mass.  A discrete
    approximable edge switching on yields a single merge transition.
    """
    ci = component if isinstance(component, int) else ext.component_index(component)
    rts = ext.rts[ci]
    kappa = check_kappa(rts, kappa, ext.params)
    classes1 = quotient(rts, kappa, check=False)
    sources = classes1 if cls is None else (cls,)
    out = []
    for c1 in sources:
        exit_mode = DynMode(rts.component, kappa, c1)
        for e in rts.edges:
            key = (rts.component, e.id)
            group = edge_label(rts.component, e.id)
            if kappa[e.id]:
                k2 = _flip(kappa, e.id, 0)
                for c2 in quotient(rts, k2, check=False):
                    if not c2 & c1:
                        continue
                    mass = _counter_sum(ext, c2)
                    assigns = [(ext.counters[s], BinOp("/", Ref(ext.counters[s]), mass) if s in c2 else Num(0.0))
                               for s in rts.states]
                    out.append(InstTransition(exit_mode, DynMode(rts.component, k2, c2), mass,
                                              disc_guard(key, policy), Update(tuple(assigns)),
                                              f"{group}:disc", group))
            elif is_continuously_approximable(e, ext.params):
                k2 = _flip(kappa, e.id, 1)
                c2 = class_of(quotient(rts, k2, check=False), next(iter(c1)))
                out.append(InstTransition(exit_mode, DynMode(rts.component, k2, c2), Num(1.0),
                                          cont_guard(key, policy), IDENTITY, f"{group}:cont", group))
    return out


@dataclass(frozen=True)
class Fragment:
    """The part of the dynamic automaton leaving one local mode."""
    flows: tuple
    jumps: tuple
    instants: tuple


def materialize(ext: ExtendedProgram, component, kappa, cls, policy) -> Fragment:
    """On-the-fly fragment of one component's dynamic automaton at (kappa, cls)."""
    ci = component if isinstance(component, int) else ext.component_index(component)
    rts = ext.rts[ci]
    kappa = check_kappa(rts, kappa, ext.params)
    classes = quotient(rts, kappa, check=False)
    dm = lambda c: DynMode(rts.component, kappa, c)
    flows = tuple(ContTransition((dm(t.mode[0]),), t.stoich, t.rate, t.label)
                  for t in component_flows(ext, ci, kappa, classes) if t.mode[0] == cls)
    jumps = tuple(StochTransition((dm(t.exit[0]),), (dm(t.enter[0]),), t.guard, t.reset, t.rate, t.label)
                  for t in component_jumps(ext, ci, kappa, classes) if t.exit[0] == cls)
    instants = tuple(InstTransition((t.exit,), (t.enter,), t.priority, t.guard, t.reset, t.label, t.group)
                     for t in dynamic_transitions(ext, ci, kappa, policy, cls))
    return Fragment(flows, jumps, instants)


def compile_component_dynamic(ext: ExtendedProgram, component, policy: PartitionPolicy) -> Tdsha:
    """Eager dynamic automaton of one component over every consistent kappa.

    Exponential in the number of edges; meant for cross-checking
    :func:`materialize`, not for simulation.
    """
    ci = component if isinstance(component, int) else ext.component_index(component)
    rts = ext.rts[ci]
    top = top_kappa(rts, ext.params)
    kappas = [k for k in _cartesian((0, 1), repeat=len(rts.edges))
              if all(b <= t for b, t in zip(k, top))]
    modes, tc, ts, td = [], [], [], []
    for k in kappas:
        classes = quotient(rts, k, check=False)
        dm = lambda c, k=k: (DynMode(rts.component, k, c),)
        modes.extend(dm(c) for c in classes)
        tc.extend(ContTransition(dm(t.mode[0]), t.stoich, t.rate, t.label)
                  for t in component_flows(ext, ci, k, classes))
        ts.extend(StochTransition(dm(t.exit[0]), dm(t.enter[0]), t.guard, t.reset, t.rate, t.label)
                  for t in component_jumps(ext, ci, k, classes))
        td.extend(InstTransition((t.exit,), (t.enter,), t.priority, t.guard, t.reset, t.label, t.group)
                  for t in dynamic_transitions(ext, ci, k, policy))
    init = (DynMode(rts.component, (0,) * len(rts.edges), frozenset([rts.component])),)
    return Tdsha(tuple(modes), ext.variables, tuple(tc), tuple(td), tuple(ts), init,
                 dict(ext.init), dict(ext.params), _state_order(ext))


def switch(ext: ExtendedProgram, state: DynamicState, t: InstTransition, env: Mapping[str, float]):
    """Take switch transition ``t`` (already selected) from ``state`` at valuation ``env``.

    Returns the new state and valuation.  Splits check that the current
    cluster's counters still sum to one before renormalizing.
    """
    (src,), (dst,) = t.exit, t.enter
    ci = state.components.index(src.component)
    if state.local(ci) != src:
        raise ValueError(f"transition {t.label} does not leave the current mode")
    full = dict(ext.params)
    full.update(env)
    if t.reset.assignments:
        total = sum(full[ext.counters[s]] for s in src.cls)
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise CounterDrift(f"counters of cluster {sorted(src.cls)} sum to {total!r}")
        weight = eval_expr(t.priority, full)
        if weight <= 0.0:
            raise ZeroTotalPriority(f"split target of {t.label} has zero counter mass")
        new = apply_update(t.reset, full)
        env = {k: new[k] for k in env}
    return state.replace(ci, dst), dict(env)


@dataclass(frozen=True)
class DynamicSetup:
    """What the engine needs to simulate with dynamic partitioning."""
    ext: ExtendedProgram
    policy: PartitionPolicy
    kappa0: KappaVector

    def initial_state(self) -> DynamicState:
        return initial_state(self.ext, self.kappa0)

    def state_label(self, state: DynamicState) -> str:
        return mode_label(state.classes, _state_order(self.ext))
