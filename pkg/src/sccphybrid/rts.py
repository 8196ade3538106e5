"""Reduced transition systems of sequential agents and the extended program.

Every sequential component of the initial network gets a labelled multigraph
whose nodes are its derivative states and whose edges are the actions.  The
extended program adds one real counter ``P_s`` per agent state; counters are
incremented/decremented by the edges and multiply the edge rates, so that a
cluster of continuously approximated states carries a distribution over its
members.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .lang import (Action, BinOp, Diagnostic, Expr, Guard, Neg, Num, Ref,
                   SccpProgram, SemanticError, Update)


class NotIncrementForm(ValueError):
    pass


@dataclass(frozen=True)
class RtsEdge:
    id: int
    exit: str
    enter: str
    guard: Guard
    update: Update
    rate: Expr

    @property
    def is_self_loop(self) -> bool:
        return self.exit == self.enter


@dataclass(frozen=True)
class Rts:
    component: str
    states: tuple
    edges: tuple

    def edges_from(self, state):
        return [e for e in self.edges if e.exit == state]


def derivative_set(root: str, defs: Mapping[str, Sequence[Action]]) -> tuple:
    """Agent states reachable from ``root``, in declaration order."""
    seen = {root}
    stack = [root]
    while stack:
        for action in defs[stack.pop()]:
            if action.target not in seen:
                seen.add(action.target)
                stack.append(action.target)
    return tuple(name for name in defs if name in seen)


def check_simple(program: SccpProgram) -> None:
    """Raise SemanticError unless components in parallel have disjoint derivative sets."""
    owner = {}
    diags = []
    for comp in program.network:
        for s in derivative_set(comp, program.definitions):
            if s in owner:
                diags.append(Diagnostic(0, 0, f"program is not simple: agent state {s!r} "
                                              f"is reachable from both {owner[s]!r} and {comp!r}"))
            else:
                owner[s] = comp
    if diags:
        raise SemanticError(diags)


def build_rts(component: str, defs: Mapping[str, Sequence[Action]]) -> Rts:
    states = derivative_set(component, defs)
    edges = []
    for s in states:
        for a in defs[s]:
            edges.append(RtsEdge(len(edges), s, a.target, a.guard, a.update, a.rate))
    return Rts(component, states, tuple(edges))


def counter_name(state: str) -> str:
    return f"P_{state}"


@dataclass(frozen=True)
class ExtendedProgram:
    base: SccpProgram
    rts: tuple                 # one Rts per network component, in network order
    counters: Mapping[str, str]  # agent state -> counter variable
    variables: tuple           # Y: store variables then counters
    edges: tuple               # per component: tuple of augmented RtsEdge
    init: Mapping[str, float]  # initial valuation over Y

    @property
    def params(self):
        return self.base.params

    @property
    def store_vars(self):
        return self.base.store_vars

    def component_index(self, name: str) -> int:
        for i, r in enumerate(self.rts):
            if r.component == name:
                return i
        raise KeyError(f"no component {name!r} in the initial network")

    def env(self, values=None) -> dict:
        out = dict(self.base.params)
        out.update(self.init if values is None else values)
        return out


def extend(program: SccpProgram, rts_list: Sequence[Rts]) -> ExtendedProgram:
    """Add state counters; edge updates move one unit of counter, rates get a P_exit factor."""
    counters = {}
    for r in rts_list:
        for s in r.states:
            counters[s] = counter_name(s)
    clash = set(counters.values()) & (set(program.store_vars) | set(program.params))
    if clash:
        raise SemanticError([Diagnostic(0, 0, f"name {n!r} is reserved for a state counter")
                             for n in sorted(clash)])
    all_edges = []
    for r in rts_list:
        aug = []
        for e in r.edges:
            assigns = list(e.update.assignments)
            if not e.is_self_loop:
                pe, pn = counters[e.exit], counters[e.enter]
                assigns.append((pe, BinOp("-", Ref(pe), Num(1.0))))
                assigns.append((pn, BinOp("+", Ref(pn), Num(1.0))))
            rate = BinOp("*", Ref(counters[e.exit]), e.rate)
            aug.append(RtsEdge(e.id, e.exit, e.enter, e.guard, Update(tuple(assigns)), rate))
        all_edges.append(tuple(aug))
    init = dict(program.init)
    for r in rts_list:
        for s in r.states:
            init[counters[s]] = 1.0 if s == r.component else 0.0
    variables = tuple(program.store_vars) + tuple(counters[s] for r in rts_list for s in r.states)
    return ExtendedProgram(program, tuple(rts_list), counters, variables, tuple(all_edges), init)


def prepare(program: SccpProgram) -> ExtendedProgram:
    """check_simple, build every component's RTS and extend."""
    check_simple(program)
    return extend(program, [build_rts(c, program.definitions) for c in program.network])


# ---------------------------------------------------------------------------
# Stoichiometry


def _linear(e: Expr, params: Mapping[str, float]):
    """Return (coefficients, constant) if ``e`` is affine, else None.

    Names missing from ``params`` are treated as variables.
    """
    if isinstance(e, Num):
        return {}, e.value
    if isinstance(e, Ref):
        if e.name in params:
            return {}, params[e.name]
        return {e.name: 1.0}, 0.0
    if isinstance(e, Neg):
        r = _linear(e.arg, params)
        if r is None:
            return None
        return {k: -v for k, v in r[0].items()}, -r[1]
    if isinstance(e, BinOp):
        a, b = _linear(e.left, params), _linear(e.right, params)
        if a is None or b is None:
            return None
        if e.op in "+-":
            sign = 1.0 if e.op == "+" else -1.0
            coef = dict(a[0])
            for k, v in b[0].items():
                coef[k] = coef.get(k, 0.0) + sign * v
            return coef, a[1] + sign * b[1]
        if e.op == "*":
            if not a[0]:
                return {k: a[1] * v for k, v in b[0].items()}, a[1] * b[1]
            if not b[0]:
                return {k: b[1] * v for k, v in a[0].items()}, a[1] * b[1]
            return None
        if e.op == "/" and not b[0] and b[1] != 0:
            return {k: v / b[1] for k, v in a[0].items()}, a[1] / b[1]
    return None


def increment(var: str, rhs: Expr, params: Mapping[str, float]) -> float:
    """The constant h such that ``var' = rhs`` reads ``var' = var + h``."""
    lin = _linear(rhs, params)
    if lin is None:
        raise NotIncrementForm(f"{var}' is not affine in the store")
    coef, h = lin
    if {k: v for k, v in coef.items() if v != 0.0} != {var: 1.0}:
        raise NotIncrementForm(f"{var}' is not of the form {var} + constant")
    return h


def is_increment_form(update: Update, params: Mapping[str, float]) -> bool:
    try:
        for v, rhs in update.assignments:
            increment(v, rhs, params)
    except NotIncrementForm:
        return False
    return True


def stoichiometry(e: RtsEdge, variables: Sequence[str], params: Mapping[str, float] | None = None) -> np.ndarray:
    """Vector of constant increments over ``variables``."""
    params = params or {}
    nu = np.zeros(len(variables))
    index = {v: i for i, v in enumerate(variables)}
    for v, rhs in e.update.assignments:
        h = increment(v, rhs, params)
        if v in index:
            nu[index[v]] = h
        elif h != 0.0:
            raise NotIncrementForm(f"{v} is updated but not among the listed variables")
    return nu


def format_rts(r: Rts) -> str:
    from .lang import print_expr, print_guard, print_update
    lines = [f"component {r.component}", "states: " + " ".join(r.states), "edges:"]
    for e in r.edges:
        lines.append(f"  {e.id}: {e.exit} -> {e.enter} [{print_guard(e.guard)}] "
                     f"{{{print_expr(e.rate)}}} /{print_update(e.update)}/")
    return "\n".join(lines) + "\n"
