"""Transition-driven stochastic hybrid automata and their compilation.

A component is compiled under a 0/1 vector ``kappa`` over its RTS edges:
edges with ``kappa[e] == 1`` become flows, the others stochastic jumps.
Modes are tuples of state classes, one entry per component, so that n-ary
products are flat and order-canonical.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product as _cartesian
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .lang import (And, BinOp, Call, Cmp, Expr, Guard, Neg, Num, Pow, Ref,
                   TrueG, Update, EvalError, compile_expr, eval_expr, expr_refs,
                   print_expr, print_guard, print_update)
from .rts import (ExtendedProgram, Rts, RtsEdge, is_increment_form, prepare,
                  stoichiometry)


class InconsistentKappa(ValueError):
    pass


# ---------------------------------------------------------------------------
# Data model


@dataclass(frozen=True)
class ContTransition:
    mode: tuple
    stoich: tuple
    rate: Expr
    label: str = ""


@dataclass(frozen=True)
class StochTransition:
    exit: tuple
    enter: tuple
    guard: Guard
    reset: Update
    rate: Expr
    label: str = ""


@dataclass(frozen=True)
class InstTransition:
    exit: object
    enter: object
    priority: Expr
    guard: Guard
    reset: Update
    label: str = ""
    group: str = ""  # transitions of one group compete by priority


@dataclass(frozen=True)
class Tdsha:
    modes: tuple
    variables: tuple
    tc: tuple
    td: tuple
    ts: tuple
    init_mode: tuple
    init: Mapping[str, float]
    params: Mapping[str, float] = field(default_factory=dict)
    state_order: Mapping[str, int] = field(default_factory=dict)
    counter_groups: tuple = ()  # counter variables of each component

    def __post_init__(self):
        modes = set(self.modes)
        if self.init_mode not in modes:
            raise ValueError("initial mode is not a mode of the automaton")
        for t in self.tc:
            if t.mode not in modes:
                raise ValueError(f"flow {t.label} rooted outside the mode set")
            if len(t.stoich) != len(self.variables):
                raise ValueError(f"flow {t.label} has stoichiometry of wrong length")
        for t in self.ts + self.td:
            if t.exit not in modes or t.enter not in modes:
                raise ValueError(f"jump {t.label} has an endpoint outside the mode set")

    def label(self, mode) -> str:
        return mode_label(mode, self.state_order)

    def flows_in(self, mode):
        return [t for t in self.tc if t.mode == mode]

    def jumps_from(self, mode):
        return [t for t in self.ts if t.exit == mode]

    def instants_from(self, mode):
        return [t for t in self.td if t.exit == mode]


def mode_label(mode: tuple, order: Mapping[str, int] | None = None) -> str:
    order = order or {}
    key = lambda s: (order.get(s, math.inf), s)
    return "|".join("+".join(sorted(cls, key=key)) for cls in mode)


def identity_tdsha(variables: Sequence[str], init: Mapping[str, float], params=None,
                   state_order=None) -> Tdsha:
    """One-mode automaton without transitions (unit of the product)."""
    return Tdsha(((),), tuple(variables), (), (), (), (), dict(init), dict(params or {}),
                 dict(state_order or {}))


# ---------------------------------------------------------------------------
# Kappa vectors


class KappaVector(Mapping):
    """Per-component family of 0/1 tuples indexed by RTS edge id."""

    def __init__(self, bits: Mapping[str, Sequence[int]]):
        self._bits = {}
        for k, v in bits.items():
            v = tuple(int(b) for b in v)
            if any(b not in (0, 1) for b in v):
                raise InconsistentKappa(f"kappa for {k} has entries outside {{0,1}}: {v}")
            self._bits[k] = v

    def __getitem__(self, k):
        return self._bits[k]

    def __iter__(self):
        return iter(self._bits)

    def __len__(self):
        return len(self._bits)

    def __hash__(self):
        return hash(tuple(self._bits.items()))

    def __eq__(self, other):
        if isinstance(other, KappaVector):
            return self._bits == other._bits
        return NotImplemented

    def __repr__(self):
        return f"KappaVector({self})"

    def __str__(self):
        return ",".join(f"{k}={''.join(map(str, v))}" for k, v in self._bits.items())

    def with_bit(self, component: str, edge: int, value: int) -> "KappaVector":
        bits = dict(self._bits)
        v = list(bits[component])
        v[edge] = value
        bits[component] = tuple(v)
        return KappaVector(bits)

    @classmethod
    def parse(cls, text: str) -> "KappaVector":
        """Parse ``gene0=100111,deg=1``."""
        bits = {}
        for part in filter(None, (p.strip() for p in text.replace(";", ",").split(","))):
            name, _, value = part.partition("=")
            bits[name.strip()] = tuple(int(c) for c in value.strip().strip('"'))
        return cls(bits)


def kappa_leq(k1, k2) -> bool:
    """Pointwise implication ``k1[e] = 1 => k2[e] = 1``."""
    if isinstance(k1, Mapping) or isinstance(k2, Mapping):
        if set(k1) != set(k2):
            raise ValueError("kappa families over different components")
        return all(kappa_leq(k1[c], k2[c]) for c in k1)
    k1, k2 = tuple(k1), tuple(k2)
    if len(k1) != len(k2):
        raise ValueError(f"kappa shapes differ: {len(k1)} vs {len(k2)}")
    return all(b <= a for a, b in zip(k2, k1))


# ---------------------------------------------------------------------------
# Approximability


def _factors(e: Expr) -> list:
    if isinstance(e, BinOp) and e.op == "*":
        return _factors(e.left) + _factors(e.right)
    if isinstance(e, BinOp) and e.op == "/":
        return _factors(e.left)
    if isinstance(e, Neg):
        return _factors(e.arg)
    if isinstance(e, Pow) and isinstance(e.exponent, Num):
        k = e.exponent.value
        if k >= 1 and k == int(k):
            return _factors(e.base)
    return [e]


def _constant_value(e: Expr, params: Mapping[str, float]):
    if expr_refs(e) - set(params):
        return None
    try:
        return eval_expr(e, params)
    except EvalError:
        return None


def _smooth(e: Expr, params) -> str | None:
    """None if ``e`` is rational in the store, else a reason."""
    if isinstance(e, (Num, Ref)):
        return None
    if isinstance(e, Call):
        return f"{e.fn}() is not differentiable"
    if isinstance(e, Neg):
        return _smooth(e.arg, params)
    if isinstance(e, BinOp):
        return _smooth(e.left, params) or _smooth(e.right, params)
    if isinstance(e, Pow):
        c = _constant_value(e.exponent, params)
        if c is None or c < 0 or c != int(c):
            if not (expr_refs(e.base) - set(params)):
                return None
            return "power with non-natural exponent"
        return _smooth(e.base, params)
    return "unsupported expression"


def _atom_certified(atom: Cmp, factors: list, params) -> bool:
    # normalise to  X (> | >=) c
    if atom.op in (">", ">="):
        lhs, rhs = atom.left, atom.right
    elif atom.op in ("<", "<="):
        lhs, rhs = atom.right, atom.left
    else:
        return False
    if not isinstance(lhs, Ref) or lhs.name in params:
        return False
    c = _constant_value(rhs, params)
    if c is None:
        return False
    for f in factors:
        if c == 0 and f == lhs:
            return True
        if isinstance(f, BinOp) and f.op == "-" and f.left == lhs:
            fc = _constant_value(f.right, params)
            if f.right == rhs or (fc is not None and fc == c):
                return True
    return False


def _conjuncts(g: Guard):
    if isinstance(g, And):
        return _conjuncts(g.left) + _conjuncts(g.right)
    return [g]


def approximability(e: RtsEdge, params: Mapping[str, float] | None = None) -> tuple:
    """(verdict, reason) for the continuous approximability of an edge."""
    params = params or {}
    if not is_increment_form(e.update, params):
        return False, "update is not of constant-increment form"
    reason = _smooth(e.rate, params)
    if reason:
        return False, reason
    factors = _factors(e.rate)
    for atom in _conjuncts(e.guard):
        if isinstance(atom, TrueG):
            continue
        if not isinstance(atom, Cmp) or not _atom_certified(atom, factors, params):
            return False, f"rate does not provably vanish outside guard [{print_guard(e.guard)}]"
    return True, "ok"


def is_continuously_approximable(e: RtsEdge, params: Mapping[str, float] | None = None) -> bool:
    return approximability(e, params)[0]


def bottom_kappa(rts: Rts) -> tuple:
    return (0,) * len(rts.edges)


def top_kappa(rts: Rts, params=None) -> tuple:
    return tuple(int(is_continuously_approximable(e, params)) for e in rts.edges)


def bottom_family(ext: ExtendedProgram) -> KappaVector:
    return KappaVector({r.component: bottom_kappa(r) for r in ext.rts})


def top_family(ext: ExtendedProgram) -> KappaVector:
    return KappaVector({r.component: top_kappa(r, ext.params) for r in ext.rts})


def check_kappa(rts: Rts, kappa: Sequence[int], params=None) -> tuple:
    kappa = tuple(int(b) for b in kappa)
    if len(kappa) != len(rts.edges):
        raise InconsistentKappa(f"kappa for {rts.component} has {len(kappa)} entries, "
                                f"RTS has {len(rts.edges)} edges")
    for e, b in zip(rts.edges, kappa):
        if b not in (0, 1):
            raise InconsistentKappa(f"kappa entry {b} for edge {e.id} is not 0/1")
        if b == 1 and not is_continuously_approximable(e, params):
            raise InconsistentKappa(f"edge {rts.component}:e{e.id} is not continuously "
                                    f"approximable: {approximability(e, params)[1]}")
    return kappa


def quotient(rts: Rts, kappa: Sequence[int], params=None, check=True) -> tuple:
    """Connected components of the undirected kappa=1 subgraph, as frozensets.

    Classes are ordered by their first state in declaration order.
    """
    kappa = check_kappa(rts, kappa, params) if check else tuple(kappa)
    parent = {s: s for s in rts.states}

    def find(s):
        while parent[s] != s:
            parent[s] = parent[parent[s]]
            s = parent[s]
        return s

    for e, b in zip(rts.edges, kappa):
        if b:
            ra, rb = find(e.exit), find(e.enter)
            if ra != rb:
                parent[rb] = ra
    classes = {}
    for s in rts.states:
        classes.setdefault(find(s), []).append(s)
    return tuple(frozenset(v) for v in classes.values())


def class_of(classes: Iterable[frozenset], state: str) -> frozenset:
    for c in classes:
        if state in c:
            return c
    raise KeyError(state)


# ---------------------------------------------------------------------------
# Compilation


def edge_label(component: str, edge_id: int) -> str:
    return f"{component}:e{edge_id}"


def jump_reset(ext: ExtendedProgram, rts: Rts, base_edge: RtsEdge) -> Update:
    """Store update of the edge plus counters: P_enter = 1, all other counters of the component 0."""
    assigns = list(base_edge.update.assignments)
    for s in rts.states:
        assigns.append((ext.counters[s], Num(1.0 if s == base_edge.enter else 0.0)))
    return Update(tuple(assigns))


def _state_order(ext: ExtendedProgram) -> dict:
    return {s: i for i, s in enumerate(s for r in ext.rts for s in r.states)}


def _resolve(ext: ExtendedProgram, component) -> int:
    return component if isinstance(component, int) else ext.component_index(component)


def component_flows(ext, ci, kappa, classes):
    rts, edges = ext.rts[ci], ext.edges[ci]
    out = []
    for e, b in zip(edges, kappa):
        if b:
            nu = stoichiometry(e, ext.variables, ext.params)
            out.append(ContTransition((class_of(classes, e.exit),), tuple(float(x) for x in nu),
                                      e.rate, edge_label(rts.component, e.id)))
    return out


def component_jumps(ext, ci, kappa, classes):
    rts, edges = ext.rts[ci], ext.edges[ci]
    out = []
    for base, e, b in zip(rts.edges, edges, kappa):
        if not b:
            out.append(StochTransition((class_of(classes, e.exit),), (class_of(classes, e.enter),),
                                       e.guard, jump_reset(ext, rts, base), e.rate,
                                       edge_label(rts.component, e.id)))
    return out


def compile_component(ext: ExtendedProgram, component, kappa: Sequence[int]) -> Tdsha:
    ci = _resolve(ext, component)
    rts = ext.rts[ci]
    kappa = check_kappa(rts, kappa, ext.params)
    classes = quotient(rts, kappa, check=False)
    modes = tuple((c,) for c in classes)
    return Tdsha(modes=modes, variables=ext.variables,
                 tc=tuple(component_flows(ext, ci, kappa, classes)), td=(),
                 ts=tuple(component_jumps(ext, ci, kappa, classes)),
                 init_mode=(class_of(classes, rts.component),), init=dict(ext.init),
                 params=dict(ext.params), state_order=_state_order(ext),
                 counter_groups=(tuple(ext.counters[s] for s in rts.states),))


def product(t1: Tdsha, t2: Tdsha) -> Tdsha:
    """Interleaving product over shared variables; modes are concatenated tuples."""
    if tuple(t1.variables) != tuple(t2.variables):
        raise ValueError("product of automata over different variable lists")
    modes = tuple(m1 + m2 for m1, m2 in _cartesian(t1.modes, t2.modes))

    def left(m, q2):
        return m + q2

    def right(m, q1):
        return q1 + m

    tc = [ContTransition(left(t.mode, q2), t.stoich, t.rate, t.label) for t in t1.tc for q2 in t2.modes]
    tc += [ContTransition(right(t.mode, q1), t.stoich, t.rate, t.label) for t in t2.tc for q1 in t1.modes]
    ts = [StochTransition(left(t.exit, q2), left(t.enter, q2), t.guard, t.reset, t.rate, t.label)
          for t in t1.ts for q2 in t2.modes]
    ts += [StochTransition(right(t.exit, q1), right(t.enter, q1), t.guard, t.reset, t.rate, t.label)
           for t in t2.ts for q1 in t1.modes]
    td = [InstTransition(left(t.exit, q2), left(t.enter, q2), t.priority, t.guard, t.reset, t.label, t.group)
          for t in t1.td for q2 in t2.modes]
    td += [InstTransition(right(t.exit, q1), right(t.enter, q1), t.priority, t.guard, t.reset, t.label, t.group)
           for t in t2.td for q1 in t1.modes]
    init = dict(t1.init)
    init.update(t2.init)
    params = dict(t1.params)
    params.update(t2.params)
    order = dict(t1.state_order)
    order.update(t2.state_order)
    return Tdsha(modes, t1.variables, tuple(tc), tuple(td), tuple(ts),
                 t1.init_mode + t2.init_mode, init, params, order,
                 t1.counter_groups + t2.counter_groups)


def as_extended(program) -> ExtendedProgram:
    return program if isinstance(program, ExtendedProgram) else prepare(program)


def compile_program(program, kappa: Mapping[str, Sequence[int]]) -> Tdsha:
    """Product of the component automata, in network order."""
    ext = as_extended(program)
    missing = [r.component for r in ext.rts if r.component not in kappa]
    if missing:
        raise InconsistentKappa(f"no kappa given for components {missing}")
    extra = set(kappa) - {r.component for r in ext.rts}
    if extra:
        raise InconsistentKappa(f"kappa given for unknown components {sorted(extra)}")
    result = identity_tdsha(ext.variables, ext.init, ext.params, _state_order(ext))
    for r in ext.rts:
        result = product(result, compile_component(ext, r.component, kappa[r.component]))
    return result


# ---------------------------------------------------------------------------
# Dynamics


def vector_field(tdsha: Tdsha, mode) -> Callable:
    """Drift of the mode's ODE as ``f(valuation) -> ndarray``; negative rates count as 0.

    ``valuation`` is a mapping over the automaton's variables or a sequence
    in variable order.
    """
    slots = {v: i for i, v in enumerate(tdsha.variables)}
    flows = tdsha.flows_in(mode)
    if mode not in set(tdsha.modes):
        raise KeyError("not a mode of the automaton")
    rates = [compile_expr(t.rate, slots, tdsha.params) for t in flows]
    stoich = np.array([t.stoich for t in flows], dtype=float).reshape(len(flows), len(slots))

    def field(valuation):
        if isinstance(valuation, Mapping):
            y = [valuation[v] for v in tdsha.variables]
        else:
            y = list(valuation)
        r = np.array([max(f(y), 0.0) for f in rates])
        return r @ stoich if len(rates) else np.zeros(len(slots))

    return field


# ---------------------------------------------------------------------------
# Text dumps


def _format_coef(c: float) -> str:
    return f"{c:+g}"


def ode_lines(tdsha: Tdsha, mode) -> list:
    flows = tdsha.flows_in(mode)
    lines = []
    for i, v in enumerate(tdsha.variables):
        terms = [f"{_format_coef(t.stoich[i])}*({print_expr(t.rate)})" for t in flows if t.stoich[i] != 0]
        if terms:
            lines.append(f"d{v}/dt = " + " ".join(terms))
    return lines


def format_tdsha(tdsha: Tdsha) -> str:
    index = {m: i for i, m in enumerate(tdsha.modes)}
    out = [f"variables: {' '.join(tdsha.variables)}",
           f"modes: {len(tdsha.modes)}"]
    for m in tdsha.modes:
        out.append(f"  m{index[m]}: {tdsha.label(m)}")
    out.append(f"init: m{index[tdsha.init_mode]}")
    out.append(f"continuous: {len(tdsha.tc)}")
    for m in tdsha.modes:
        out.append(f"  m{index[m]}:")
        lines = ode_lines(tdsha, m)
        out.extend(f"    {ln}" for ln in lines or ["(no flow)"])
    out.append(f"stochastic: {len(tdsha.ts)}")
    for t in tdsha.ts:
        out.append(f"  {t.label}: m{index[t.exit]} -> m{index[t.enter]} [{print_guard(t.guard)}] "
                   f"{{{print_expr(t.rate)}}} /{print_update(t.reset)}/")
    out.append(f"instantaneous: {len(tdsha.td)}")
    for t in tdsha.td:
        out.append(f"  {t.label}: m{index[t.exit]} -> m{index[t.enter]} [{print_guard(t.guard)}] "
                   f"<{print_expr(t.priority)}> /{print_update(t.reset)}/")
    return "\n".join(out) + "\n"
