"""sCCP model language: AST, parser, pretty-printer and evaluators.

A model file looks like::

    sccp v1
    param
      kd = 0.1
    end
    var
      X = 0
    end
    prod = [true -> X' = X + 1]{10}.prod
    deg  = [X > 0 -> X' = X - 1]{kd * X}.deg
    system prod || deg

Newlines are not significant; ``#`` starts a comment.  ``*`` is accepted as
a synonym of ``true`` both as guard and as the identity update.
"""
from __future__ import annotations

import logging
import math
import re
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

log = logging.getLogger(__name__)

FORMAT_HEADER = "sccp v1"


# ---------------------------------------------------------------------------
# Errors


@dataclass(frozen=True)
class Diagnostic:
    line: int
    col: int
    message: str

    def __str__(self):
        return f"{self.line}:{self.col}: {self.message}"


class ModelError(Exception):
    """Base class for diagnosable model errors; carries a diagnostic list."""

    def __init__(self, diagnostics: Sequence[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class SccpSyntaxError(ModelError):
    pass


class SemanticError(ModelError):
    pass


class EvalError(ArithmeticError):
    pass


# ---------------------------------------------------------------------------
# Expressions


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Ref:
    """Reference to a store variable or a parameter."""
    name: str


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: "Expr"  # must not reference store variables


@dataclass(frozen=True)
class Call:
    fn: str  # min or max
    args: tuple


Expr = Union[Num, Ref, BinOp, Neg, Pow, Call]


# ---------------------------------------------------------------------------
# Guards


@dataclass(frozen=True)
class TrueG:
    pass


@dataclass(frozen=True)
class Cmp:
    op: str  # < <= > >= == !=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And:
    left: "Guard"
    right: "Guard"


@dataclass(frozen=True)
class Or:
    left: "Guard"
    right: "Guard"


@dataclass(frozen=True)
class Not:
    arg: "Guard"


Guard = Union[TrueG, Cmp, And, Or, Not]

TRUE = TrueG()
FALSE = Not(TRUE)


@dataclass(frozen=True)
class Update:
    """Simultaneous assignment; variables not listed keep their value."""
    assignments: tuple = ()

    def __post_init__(self):
        names = [v for v, _ in self.assignments]
        if len(set(names)) != len(names):
            dup = next(v for v in names if names.count(v) > 1)
            raise SemanticError([Diagnostic(0, 0, f"duplicate variable in update: {dup}")])

    @property
    def targets(self):
        return tuple(v for v, _ in self.assignments)

    def as_dict(self):
        return dict(self.assignments)


IDENTITY = Update()


@dataclass(frozen=True)
class Action:
    guard: Guard
    update: Update
    rate: Expr
    target: str


@dataclass(frozen=True)
class SccpProgram:
    definitions: Mapping[str, tuple]  # agent name -> tuple of Action
    network: tuple
    store_vars: tuple
    params: Mapping[str, float] = field(default_factory=dict)
    init: Mapping[str, float] = field(default_factory=dict)

    def env(self, values: Mapping[str, float] | None = None) -> dict:
        """Parameters merged with the initial valuation (or ``values``)."""
        out = dict(self.params)
        out.update(self.init if values is None else values)
        return out


# ---------------------------------------------------------------------------
# Name traversal


def expr_refs(e: Expr) -> set:
    if isinstance(e, Ref):
        return {e.name}
    if isinstance(e, Num):
        return set()
    if isinstance(e, BinOp):
        return expr_refs(e.left) | expr_refs(e.right)
    if isinstance(e, Neg):
        return expr_refs(e.arg)
    if isinstance(e, Pow):
        return expr_refs(e.base) | expr_refs(e.exponent)
    if isinstance(e, Call):
        out = set()
        for a in e.args:
            out |= expr_refs(a)
        return out
    raise TypeError(f"not an expression: {e!r}")


def guard_refs(g: Guard) -> set:
    if isinstance(g, TrueG):
        return set()
    if isinstance(g, Cmp):
        return expr_refs(g.left) | expr_refs(g.right)
    if isinstance(g, (And, Or)):
        return guard_refs(g.left) | guard_refs(g.right)
    if isinstance(g, Not):
        return guard_refs(g.arg)
    raise TypeError(f"not a guard: {g!r}")


# ---------------------------------------------------------------------------
# Tree-walking evaluation (reference semantics)


def _finite(x: float) -> float:
    if not math.isfinite(x):
        raise EvalError(f"non-finite result {x}")
    return x


def _pow(a: float, b: float) -> float:
    try:
        r = a ** b
    except ZeroDivisionError as exc:
        raise EvalError("zero raised to a negative power") from exc
    except OverflowError as exc:
        raise EvalError("overflow in power") from exc
    if isinstance(r, complex):
        raise EvalError(f"negative base {a} with fractional exponent {b}")
    return r


def eval_expr(e: Expr, env: Mapping[str, float]) -> float:
    return _finite(_eval(e, env))


def _eval(e, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Ref):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound name {e.name!r}") from None
    if isinstance(e, BinOp):
        a, b = _eval(e.left, env), _eval(e.right, env)
        if e.op == "+":
            return a + b
        if e.op == "-":
            return a - b
        if e.op == "*":
            return a * b
        if b == 0:
            raise EvalError("division by zero")
        return a / b
    if isinstance(e, Neg):
        return -_eval(e.arg, env)
    if isinstance(e, Pow):
        return _pow(_eval(e.base, env), _eval(e.exponent, env))
    if isinstance(e, Call):
        vals = [_eval(a, env) for a in e.args]
        return min(vals) if e.fn == "min" else max(vals)
    raise TypeError(f"not an expression: {e!r}")


_CMP = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def eval_guard(g: Guard, env: Mapping[str, float]) -> bool:
    if isinstance(g, TrueG):
        return True
    if isinstance(g, Cmp):
        return _CMP[g.op](eval_expr(g.left, env), eval_expr(g.right, env))
    if isinstance(g, And):
        return eval_guard(g.left, env) and eval_guard(g.right, env)
    if isinstance(g, Or):
        return eval_guard(g.left, env) or eval_guard(g.right, env)
    if isinstance(g, Not):
        return not eval_guard(g.arg, env)
    raise TypeError(f"not a guard: {g!r}")


def apply_update(u: Update, env: Mapping[str, float]) -> dict:
    """Apply ``u`` simultaneously: every right-hand side sees the pre-state."""
    new = {v: eval_expr(rhs, env) for v, rhs in u.assignments}
    out = dict(env)
    out.update(new)
    return out


def clamp_rate(value: float, what: str = "rate") -> float:
    if value < 0.0:
        log.warning("negative %s %g clamped to 0", what, value)
        return 0.0
    return value


# ---------------------------------------------------------------------------
# Compilation to Python closures over a slot vector


_NAMESPACE = {"min": min, "max": max, "_pow": _pow, "_inf": math.inf}


def _src(e: Expr, slots: Mapping[str, int], params: Mapping[str, float]) -> str:
    if isinstance(e, Num):
        v = e.value
        if math.isinf(v):
            return "_inf" if v > 0 else "(-_inf)"
        return repr(float(v))
    if isinstance(e, Ref):
        if e.name in slots:
            return f"y[{slots[e.name]}]"
        if e.name in params:
            return repr(float(params[e.name]))
        raise EvalError(f"unbound name {e.name!r}")
    if isinstance(e, BinOp):
        return f"({_src(e.left, slots, params)} {e.op} {_src(e.right, slots, params)})"
    if isinstance(e, Neg):
        return f"(-{_src(e.arg, slots, params)})"
    if isinstance(e, Pow):
        return f"_pow({_src(e.base, slots, params)}, {_src(e.exponent, slots, params)})"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(_src(a, slots, params) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


_PY_CMP = {"<": "<", "<=": "<=", ">": ">", ">=": ">=", "==": "==", "!=": "!="}


def _gsrc(g: Guard, slots, params) -> str:
    if isinstance(g, TrueG):
        return "True"
    if isinstance(g, Cmp):
        return f"({_src(g.left, slots, params)} {_PY_CMP[g.op]} {_src(g.right, slots, params)})"
    if isinstance(g, And):
        return f"({_gsrc(g.left, slots, params)} and {_gsrc(g.right, slots, params)})"
    if isinstance(g, Or):
        return f"({_gsrc(g.left, slots, params)} or {_gsrc(g.right, slots, params)})"
    if isinstance(g, Not):
        return f"(not {_gsrc(g.arg, slots, params)})"
    raise TypeError(f"not a guard: {g!r}")


def compile_expr(e: Expr, slots: Mapping[str, int], params: Mapping[str, float]) -> Callable:
    """Compile ``e`` into ``f(y)`` where ``y[slots[name]]`` holds variable values.

    Parameters are inlined as constants.
    """
    return eval(f"lambda y: {_src(e, slots, params)}", dict(_NAMESPACE))


def compile_guard(g: Guard, slots, params) -> Callable | None:
    """Like :func:`compile_expr`; returns None for the constant ``true``."""
    if isinstance(g, TrueG):
        return None
    return eval(f"lambda y: {_gsrc(g, slots, params)}", dict(_NAMESPACE))


def compile_update(u: Update, slots, params) -> Callable:
    """Compile ``u`` into ``f(y) -> list`` with simultaneous semantics."""
    if not u.assignments:
        return list
    lines = ["def _u(y):"]
    for i, (v, rhs) in enumerate(u.assignments):
        lines.append(f"    v{i} = {_src(rhs, slots, params)}")
    lines.append("    r = list(y)")
    for i, (v, _) in enumerate(u.assignments):
        lines.append(f"    r[{slots[v]}] = v{i}")
    lines.append("    return r")
    ns = dict(_NAMESPACE)
    exec("\n".join(lines), ns)
    return ns["_u"]


# ---------------------------------------------------------------------------
# Pretty printing

_ADD, _MUL, _UNARY, _POW, _ATOM = 1, 2, 3, 4, 5


def format_number(v: float) -> str:
    if v < 0 or math.copysign(1.0, v) < 0:
        return f"(-{format_number(-v)})"
    if math.isinf(v):
        raise ValueError("infinite literal has no concrete syntax")
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def _prec(e: Expr) -> int:
    if isinstance(e, BinOp):
        return _ADD if e.op in "+-" else _MUL
    if isinstance(e, Neg):
        return _UNARY
    if isinstance(e, Pow):
        return _POW
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _ATOM  # printed with its own parentheses
    return _ATOM


def _wrap(e: Expr, min_prec: int) -> str:
    s = print_expr(e)
    return f"({s})" if _prec(e) < min_prec else s


def print_expr(e: Expr) -> str:
    if isinstance(e, Num):
        return format_number(e.value)
    if isinstance(e, Ref):
        return e.name
    if isinstance(e, BinOp):
        p = _prec(e)
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, Neg):
        return f"-{_wrap(e.arg, _UNARY)}"
    if isinstance(e, Pow):
        return f"{_wrap(e.base, _ATOM)}^{_wrap(e.exponent, _UNARY)}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(print_expr(a) for a in e.args)})"
    raise TypeError(f"not an expression: {e!r}")


def _gprec(g: Guard) -> int:
    if isinstance(g, Or):
        return 1
    if isinstance(g, And):
        return 2
    if isinstance(g, Not):
        return 3
    return 4


def _gwrap(g: Guard, min_prec: int) -> str:
    s = print_guard(g)
    return f"({s})" if _gprec(g) < min_prec else s


def print_guard(g: Guard) -> str:
    if isinstance(g, TrueG):
        return "true"
    if isinstance(g, Cmp):
        return f"{print_expr(g.left)} {g.op} {print_expr(g.right)}"
    if isinstance(g, And):
        return f"{_gwrap(g.left, 2)} and {_gwrap(g.right, 3)}"
    if isinstance(g, Or):
        return f"{_gwrap(g.left, 1)} or {_gwrap(g.right, 2)}"
    if isinstance(g, Not):
        return f"not {_gwrap(g.arg, 3)}"
    raise TypeError(f"not a guard: {g!r}")


def print_update(u: Update) -> str:
    if not u.assignments:
        return "true"
    return " and ".join(f"{v}' = {print_expr(rhs)}" for v, rhs in u.assignments)


def print_action(a: Action) -> str:
    return f"[{print_guard(a.guard)} -> {print_update(a.update)}]{{{print_expr(a.rate)}}}.{a.target}"


def print_program(p: SccpProgram) -> str:
    out = [FORMAT_HEADER]
    if p.params:
        out.append("param")
        out.extend(f"  {k} = {format_number(v)}" for k, v in p.params.items())
        out.append("end")
    if p.store_vars:
        out.append("var")
        out.extend(f"  {k} = {format_number(p.init[k])}" for k in p.store_vars)
        out.append("end")
    for name, actions in p.definitions.items():
        if not actions:
            out.append(f"{name} = 0")
            continue
        pad = " " * len(name)
        first, *rest = actions
        out.append(f"{name} = {print_action(first)}")
        out.extend(f"{pad} + {print_action(a)}" for a in rest)
    if p.network:
        out.append("system " + " || ".join(p.network))
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>->|<=|>=|==|!=|\|\||&&|/\\|[\[\]{}().,+\-*/^<>=!'])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # num | name | op | eof
    text: str
    line: int
    col: int


def tokenize(text: str) -> list:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SccpSyntaxError([Diagnostic(line, pos - line_start + 1,
                                              f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(Token(kind, m.group(), line, pos - line_start + 1))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser

_KEYWORDS = {"param", "var", "end", "system", "sccp", "true", "and", "or", "not", "min", "max"}
_RELOPS = {"<", "<=", ">", ">=", "==", "!="}


class _Backtrack(Exception):
    pass


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0
        self.diags = []
        self.params = {}
        self.vars = {}
        self.pending_targets = []  # (name, token)

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k=1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text, kind=None) -> bool:
        t = self.tok
        return t.text == text and (kind is None or t.kind == kind) and t.kind != "eof"

    def error(self, msg, tok=None):
        tok = tok or self.tok
        raise SccpSyntaxError([Diagnostic(tok.line, tok.col, msg)])

    def expect(self, text) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def name(self, what="name") -> Token:
        t = self.tok
        if t.kind != "name" or t.text in _KEYWORDS:
            self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t

    def semantic(self, msg, tok):
        self.diags.append(Diagnostic(tok.line, tok.col, msg))

    # program
    def program(self) -> SccpProgram:
        self.expect("sccp")
        v = self.name("format version")
        if v.text != "v1":
            self.error(f"unsupported format version {v.text!r}", v)
        if self.at("param"):
            self.block("param", self.params, allowed=self.params)
        if self.at("var"):
            self.block("var", self.vars, allowed=self.params)
        defs = {}
        def_tokens = {}
        while self.tok.kind == "name" and not self.at("system"):
            t = self.name("agent name")
            if t.text in self.params or t.text in self.vars:
                self.semantic(f"agent name {t.text!r} clashes with a variable or parameter", t)
            self.expect("=")
            actions = self.summation()
            if self.at("||"):
                self.semantic(f"parallel composition inside definition of {t.text!r}; "
                              "'||' is only allowed in the system line", self.tok)
                raise SemanticError(self.diags)
            if t.text in defs:
                self.semantic(f"duplicate definition of agent {t.text!r}", t)
            else:
                defs[t.text] = actions
                def_tokens[t.text] = t
        network = []
        if self.at("system"):
            self.i += 1
            if self.tok.kind == "name" and self.tok.text not in _KEYWORDS:
                network.append(self.name("agent name"))
                while self.at("||"):
                    self.i += 1
                    network.append(self.name("agent name"))
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        for n, t in self.pending_targets + [(t.text, t) for t in network]:
            if n not in defs:
                self.semantic(f"undefined agent {n!r}", t)
        if self.diags:
            raise SemanticError(self.diags)
        return SccpProgram(definitions=defs, network=tuple(t.text for t in network),
                           store_vars=tuple(self.vars), params=dict(self.params),
                           init=dict(self.vars))

    def block(self, keyword, target, allowed):
        self.expect(keyword)
        while not self.at("end"):
            t = self.name("declaration name")
            self.expect("=")
            start = self.tok
            e = self.expr()
            unknown = expr_refs(e) - set(allowed)
            for n in sorted(unknown):
                self.semantic(f"{keyword} value may only reference earlier parameters (got {n!r})", start)
            if t.text in self.params or t.text in self.vars:
                self.semantic(f"duplicate declaration of {t.text!r}", t)
                continue
            if unknown:
                continue
            try:
                target[t.text] = eval_expr(e, self.params)
            except EvalError as exc:
                self.semantic(str(exc), start)
        self.expect("end")

    def summation(self) -> tuple:
        if self.tok.kind == "num" and self.tok.text in ("0", "0.0"):
            self.i += 1
            return ()
        actions = [self.action()]
        while self.at("+"):
            self.i += 1
            actions.append(self.action())
        return tuple(actions)

    def action(self) -> Action:
        self.expect("[")
        g = self.guard()
        self.expect("->")
        u = self.update()
        self.expect("]")
        self.expect("{")
        rate = self.checked_expr()
        self.expect("}")
        self.expect(".")
        t = self.name("target agent")
        self.pending_targets.append((t.text, t))
        return Action(g, u, rate, t.text)

    def update(self) -> Update:
        if self.at("true") or (self.at("*") and self.peek().text == "]"):
            self.i += 1
            return IDENTITY
        pairs = [self.assignment()]
        while self.at("and") or self.at("&&") or self.at("/\\"):
            self.i += 1
            pairs.append(self.assignment())
        seen = set()
        for (v, _), t in pairs:
            if v in seen:
                self.semantic(f"duplicate variable in update: {v}", t)
            seen.add(v)
        uniq = {}
        for (v, rhs), _ in pairs:
            uniq.setdefault(v, rhs)
        return Update(tuple(uniq.items()))

    def assignment(self):
        t = self.name("variable")
        if t.text not in self.vars:
            self.semantic(f"update assigns {t.text!r}, which is not a store variable", t)
        self.expect("'")
        self.expect("=")
        return (t.text, self.checked_expr()), t

    # guards
    def guard(self) -> Guard:
        g = self.g_and()
        while self.at("or") or self.at("||"):
            self.i += 1
            g = Or(g, self.g_and())
        return g

    def g_and(self) -> Guard:
        g = self.g_not()
        while self.at("and") or self.at("&&") or self.at("/\\"):
            self.i += 1
            g = And(g, self.g_not())
        return g

    def g_not(self) -> Guard:
        if self.at("not") or self.at("!"):
            self.i += 1
            return Not(self.g_not())
        return self.g_atom()

    def g_atom(self) -> Guard:
        if self.at("true") or (self.at("*") and (self.peek().text in ("->", ")") or self.peek().kind == "eof")):
            self.i += 1
            return TRUE
        save, ndiag = self.i, len(self.diags)
        try:
            return self.comparison()
        except SccpSyntaxError as first:
            self.i = save
            del self.diags[ndiag:]
            if not self.at("("):
                raise first
            self.i += 1
            g = self.guard()
            self.expect(")")
            return g

    def comparison(self) -> Cmp:
        left = self.checked_expr()
        if self.tok.text not in _RELOPS or self.tok.kind != "op":
            self.error(f"expected comparison operator, found {self.tok.text or 'end of input'!r}")
        op = self.tok.text
        self.i += 1
        return Cmp(op, left, self.checked_expr())

    # expressions
    def checked_expr(self) -> Expr:
        start = self.tok
        e = self.expr()
        known = set(self.params) | set(self.vars)
        for n in sorted(expr_refs(e) - known):
            self.semantic(f"undeclared name {n!r}", start)
        self._check_pow(e, start)
        return e

    def _check_pow(self, e, tok):
        if isinstance(e, Pow):
            if expr_refs(e.exponent) & set(self.vars):
                self.semantic("exponent of '^' must be constant", tok)
            self._check_pow(e.base, tok)
        elif isinstance(e, BinOp):
            self._check_pow(e.left, tok)
            self._check_pow(e.right, tok)
        elif isinstance(e, Neg):
            self._check_pow(e.arg, tok)
        elif isinstance(e, Call):
            for a in e.args:
                self._check_pow(a, tok)

    def expr(self) -> Expr:
        e = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.term())
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            e = BinOp(op, e, self.unary())
        return e

    def unary(self) -> Expr:
        if self.at("-", "op"):
            self.i += 1
            return Neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.at("^"):
            self.i += 1
            return Pow(base, self.unary())
        return base

    def atom(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            return Num(float(t.text))
        if t.kind == "name" and t.text in ("min", "max"):
            self.i += 1
            self.expect("(")
            args = [self.expr()]
            while self.at(","):
                self.i += 1
                args.append(self.expr())
            self.expect(")")
            return Call(t.text, tuple(args))
        if t.kind == "name" and t.text not in _KEYWORDS:
            self.i += 1
            return Ref(t.text)
        if self.at("("):
            self.i += 1
            e = self.expr()
            self.expect(")")
            return e
        self.error(f"expected expression, found {t.text or 'end of input'!r}")


def parse_program(text: str) -> SccpProgram:
    """Parse model source; raises SccpSyntaxError or SemanticError with positions."""
    return _Parser(text).program()


def parse_expr(text: str, names: Iterable[str] = ()) -> Expr:
    """Parse a standalone expression (no name checking beyond syntax)."""
    p = _Parser(text)
    e = p.expr()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return e


def parse_guard(text: str) -> Guard:
    p = _Parser(text)
    g = p.guard()
    if p.tok.kind != "eof":
        p.error(f"unexpected {p.tok.text!r}")
    return g


def load_program(path) -> SccpProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())
