"""EFSM model types, expression evaluation, static checks and ICS profiles."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Mapping, Union

Value = Union[int, bool, str]


class ModelError(ValueError):
    """Base class for model construction and parsing errors."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line is not None else ""
        super().__init__(where + message)
        self.detail = message


class ModelSyntaxError(ModelError):
    def __init__(self, message, line=None, column=None, expected=()):
        self.expected = tuple(expected)
        if expected:
            message = f"{message} (expected {', '.join(expected)})"
        super().__init__(message, line, column)


class DuplicateIdentifierError(ModelError):
    def __init__(self, name, line=None, column=None):
        self.name = name
        super().__init__(f"duplicate identifier {name!r}", line, column)


class UnresolvedReferenceError(ModelError):
    def __init__(self, name, line=None, column=None):
        self.name = name
        super().__init__(f"unresolved reference {name!r}", line, column)


class TypeMismatchError(ModelError):
    pass


class UnknownOptionError(ModelError):
    def __init__(self, option_id):
        self.option_id = option_id
        super().__init__(f"unknown option {option_id!r}")


# -- data domains -----------------------------------------------------------


@dataclass(frozen=True)
class IntRange:
    lo: int
    hi: int

    def __post_init__(self):
        if self.lo > self.hi:
            raise ModelError(f"empty integer range {self.lo}..{self.hi}")

    def values(self) -> tuple:
        return tuple(range(self.lo, self.hi + 1))

    def contains(self, v) -> bool:
        return type(v) is int and self.lo <= v <= self.hi

    def clamp(self, v: int) -> int:
        return min(max(v, self.lo), self.hi)

    @property
    def type(self):
        return "int"

    def __str__(self):
        return f"int[{self.lo}..{self.hi}]"


@dataclass(frozen=True)
class EnumDomain:
    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise ModelError("enumeration needs at least one symbol")
        if len(set(self.symbols)) != len(self.symbols):
            raise ModelError(f"duplicate enumeration symbols in {self.symbols}")

    def values(self) -> tuple:
        return self.symbols

    def contains(self, v) -> bool:
        return type(v) is str and v in self.symbols

    def clamp(self, v):
        return v

    @property
    def type(self):
        return ("enum", self.symbols)

    def __str__(self):
        return "enum{" + ",".join(self.symbols) + "}"


@dataclass(frozen=True)
class BoolDomain:
    def values(self) -> tuple:
        return (False, True)

    def contains(self, v) -> bool:
        return type(v) is bool

    def clamp(self, v):
        return v

    @property
    def type(self):
        return "bool"

    def __str__(self):
        return "bool"


Domain = Union[IntRange, EnumDomain, BoolDomain]


def format_value(v: Value) -> str:
    if type(v) is bool:
        return "true" if v else "false"
    return str(v)


# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class SymLit:
    value: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class ParamRef:
    name: str


@dataclass(frozen=True)
class Compare:
    op: str  # one of = != < <= > >=
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Arith:
    op: str  # + or -
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BoolOp:
    op: str  # and / or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class IfThenElse:
    cond: "Expr"
    then: "Expr"
    orelse: "Expr"


Expr = Union[IntLit, BoolLit, SymLit, VarRef, ParamRef, Compare, Arith, Not, BoolOp, IfThenElse]

TRUE = BoolLit(True)

COMPARE_OPS = ("=", "!=", "<", "<=", ">", ">=")
NEGATED_OP = {"=": "!=", "!=": "=", "<": ">=", ">=": "<", ">": "<=", "<=": ">"}

_CMP = {
    "=": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def evaluate(expr: Expr, env: Mapping[str, Value]) -> Value:
    """Evaluate ``expr``; variables and trigger parameters are both looked up in ``env``."""
    t = type(expr)
    if t is IntLit or t is BoolLit or t is SymLit:
        return expr.value
    if t is VarRef or t is ParamRef:
        return env[expr.name]
    if t is Compare:
        return _CMP[expr.op](evaluate(expr.left, env), evaluate(expr.right, env))
    if t is BoolOp:
        if expr.op == "and":
            return bool(evaluate(expr.left, env)) and bool(evaluate(expr.right, env))
        return bool(evaluate(expr.left, env)) or bool(evaluate(expr.right, env))
    if t is Not:
        return not evaluate(expr.operand, env)
    if t is Arith:
        a, b = evaluate(expr.left, env), evaluate(expr.right, env)
        return a + b if expr.op == "+" else a - b
    if t is IfThenElse:
        return evaluate(expr.then if evaluate(expr.cond, env) else expr.orelse, env)
    raise TypeError(f"not an expression: {expr!r}")


def atoms(expr: Expr) -> list:
    """Atomic conditions of a boolean expression, left to right.

    Comparisons, boolean references and boolean if-then-else are atoms;
    boolean literals are not conditions and are skipped.
    """
    t = type(expr)
    if t is BoolOp:
        return atoms(expr.left) + atoms(expr.right)
    if t is Not:
        return atoms(expr.operand)
    if t is BoolLit:
        return []
    return [expr]


def subexpressions(expr: Expr) -> Iterator[Expr]:
    yield expr
    for f in dataclasses.fields(expr):
        child = getattr(expr, f.name)
        if dataclasses.is_dataclass(child):
            yield from subexpressions(child)


def format_expr(expr: Expr) -> str:
    t = type(expr)
    if t is IntLit:
        return str(expr.value)
    if t is BoolLit:
        return format_value(expr.value)
    if t in (SymLit, VarRef, ParamRef):
        return expr.value if t is SymLit else expr.name

    def sub(e):
        s = format_expr(e)
        if type(e) in (Compare, Arith, BoolOp, IfThenElse) or (type(e) is IntLit and e.value < 0):
            return f"({s})"
        return s

    if t is Compare or t is Arith or t is BoolOp:
        return f"{sub(expr.left)} {expr.op} {sub(expr.right)}"
    if t is Not:
        return f"not {sub(expr.operand)}"
    if t is IfThenElse:
        return f"if {sub(expr.cond)} then {sub(expr.then)} else {sub(expr.orelse)}"
    raise TypeError(f"not an expression: {expr!r}")


# -- model structure --------------------------------------------------------


@dataclass(frozen=True)
class Variable:
    name: str
    domain: Domain
    initial: Value


@dataclass(frozen=True)
class Event:
    name: str
    direction: str  # "stimulus" or "observation"
    params: tuple = ()  # ((name, Domain), ...)

    @property
    def param_names(self) -> tuple:
        return tuple(p for p, _ in self.params)


@dataclass(frozen=True)
class Output:
    event: str
    args: tuple = ()


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    target: str
    trigger: str
    trigger_params: tuple = ()  # local names bound to the trigger's params, positional
    guard: Expr = TRUE
    actions: tuple = ()  # ((var, Expr), ...)
    outputs: tuple = ()  # (Output, ...)
    priority: int = 0
    req_tags: frozenset = frozenset()
    option_tags: frozenset = frozenset()

    @property
    def guarded(self) -> bool:
        return self.guard != TRUE


@dataclass(frozen=True)
class Requirement:
    id: str
    text: str = ""
    clause: str = ""


@dataclass(frozen=True)
class IcsOption:
    id: str
    description: str = ""
    default: bool = True


@dataclass(frozen=True)
class Model:
    name: str
    states: tuple
    initial_state: str
    variables: tuple = ()
    events: tuple = ()
    transitions: tuple = ()
    requirements: tuple = ()
    options: tuple = ()
    excluded_requirements: frozenset = frozenset()

    @cached_property
    def event_map(self) -> dict:
        return {e.name: e for e in self.events}

    @cached_property
    def variable_map(self) -> dict:
        return {v.name: v for v in self.variables}

    @cached_property
    def transition_map(self) -> dict:
        return {t.id: t for t in self.transitions}

    @cached_property
    def requirement_map(self) -> dict:
        return {r.id: r for r in self.requirements}

    @cached_property
    def outgoing(self) -> dict:
        """state -> transitions leaving it, in declaration order."""
        out = {s: [] for s in self.states}
        for t in self.transitions:
            out.setdefault(t.source, []).append(t)
        return out

    def replace(self, **changes) -> "Model":
        return dataclasses.replace(self, **changes)


# -- static checking --------------------------------------------------------


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    code: str
    message: str
    subject: str = ""

    def __str__(self):
        return f"{self.severity}: {self.code}: {self.message}"


def _type_name(ty) -> str:
    if isinstance(ty, tuple):
        return "enum{" + ",".join(ty[1]) + "}"
    return ty


def infer_type(expr: Expr, scope: Mapping[str, Domain], expected=None):
    """Return the type of ``expr`` ("int", "bool" or ("enum", symbols)).

    ``scope`` maps names visible in the expression to their domains.  Raises
    TypeMismatchError / UnresolvedReferenceError.  Bare symbols are typed from
    the context (``expected`` or the other side of a comparison).
    """
    t = type(expr)
    if t is IntLit:
        return "int"
    if t is BoolLit:
        return "bool"
    if t is SymLit:
        if isinstance(expected, tuple) and expr.value in expected[1]:
            return expected
        if expected is None:
            return ("sym", expr.value)
        raise TypeMismatchError(f"symbol {expr.value!r} is not a value of {_type_name(expected)}")
    if t is VarRef or t is ParamRef:
        if expr.name not in scope:
            raise UnresolvedReferenceError(expr.name)
        return scope[expr.name].type
    if t is Compare:
        lt = infer_type(expr.left, scope)
        rt = infer_type(expr.right, scope, lt if not _is_sym(lt) else None)
        if _is_sym(lt):
            lt = infer_type(expr.left, scope, rt)
        if _is_sym(lt) or _is_sym(rt):
            raise TypeMismatchError(f"cannot type symbol comparison {format_expr(expr)!r}")
        if lt != rt:
            raise TypeMismatchError(
                f"comparison between {_type_name(lt)} and {_type_name(rt)} in {format_expr(expr)!r}")
        if expr.op not in ("=", "!=") and lt != "int":
            raise TypeMismatchError(f"ordering comparison on {_type_name(lt)} in {format_expr(expr)!r}")
        return "bool"
    if t is Arith:
        for side in (expr.left, expr.right):
            if infer_type(side, scope) != "int":
                raise TypeMismatchError(f"arithmetic on non-integer in {format_expr(expr)!r}")
        return "int"
    if t is BoolOp:
        for side in (expr.left, expr.right):
            if infer_type(side, scope, "bool") != "bool":
                raise TypeMismatchError(f"'{expr.op}' on non-boolean in {format_expr(expr)!r}")
        return "bool"
    if t is Not:
        if infer_type(expr.operand, scope, "bool") != "bool":
            raise TypeMismatchError(f"'not' on non-boolean in {format_expr(expr)!r}")
        return "bool"
    if t is IfThenElse:
        if infer_type(expr.cond, scope, "bool") != "bool":
            raise TypeMismatchError(f"non-boolean condition in {format_expr(expr)!r}")
        a = infer_type(expr.then, scope, expected)
        b = infer_type(expr.orelse, scope, expected if expected is not None else a)
        if _is_sym(a):
            a = infer_type(expr.then, scope, b)
        if a != b:
            raise TypeMismatchError(f"branches differ in type in {format_expr(expr)!r}")
        return a
    raise TypeError(f"not an expression: {expr!r}")


def _is_sym(ty) -> bool:
    return isinstance(ty, tuple) and ty[0] == "sym"


def check_expr(expr: Expr, scope: Mapping[str, Domain], expected) -> None:
    """Raise unless ``expr`` has type ``expected``."""
    got = infer_type(expr, scope, expected)
    if got != expected:
        raise TypeMismatchError(
            f"expected {_type_name(expected)}, got {_type_name(got)} in {format_expr(expr)!r}")


def transition_scope(model: Model, t: Transition) -> dict:
    scope = {v.name: v.domain for v in model.variables}
    ev = model.event_map.get(t.trigger)
    if ev is not None:
        for alias, (_, dom) in zip(t.trigger_params, ev.params):
            scope[alias] = dom
    return scope


def structural_errors(model: Model) -> list:
    """All invariant violations of ``model`` as error diagnostics."""
    errs = []

    def err(code, msg, subject=""):
        errs.append(Diagnostic("error", code, msg, subject))

    def dupes(kind, names):
        seen = set()
        for n in names:
            if n in seen:
                err("duplicate-identifier", f"duplicate {kind} {n!r}", n)
            seen.add(n)

    if not model.states:
        err("no-states", "model declares no states")
    dupes("state", model.states)
    dupes("variable", [v.name for v in model.variables])
    dupes("event", [e.name for e in model.events])
    dupes("transition", [t.id for t in model.transitions])
    dupes("requirement", [r.id for r in model.requirements])
    dupes("option", [o.id for o in model.options])
    if model.initial_state not in model.states:
        err("unresolved-reference", f"initial state {model.initial_state!r} not declared", model.initial_state)
    for v in model.variables:
        if not v.domain.contains(v.initial):
            err("type-mismatch", f"initial value {format_value(v.initial)} of {v.name} not in {v.domain}", v.name)
    for e in model.events:
        if e.direction not in ("stimulus", "observation"):
            err("bad-event", f"event {e.name!r} has direction {e.direction!r}", e.name)
        dupes(f"parameter of {e.name}", e.param_names)
    if model.transitions and not any(e.direction == "stimulus" for e in model.events):
        err("no-stimulus", "model has transitions but no stimulus event")
    states = set(model.states)
    reqs = {r.id for r in model.requirements}
    opts = {o.id for o in model.options}
    var_names = {v.name for v in model.variables}
    for t in model.transitions:
        for s in (t.source, t.target):
            if s not in states:
                err("unresolved-reference", f"transition {t.id}: state {s!r} not declared", s)
        ev = model.event_map.get(t.trigger)
        if ev is None:
            err("unresolved-reference", f"transition {t.id}: event {t.trigger!r} not declared", t.trigger)
            continue
        if ev.direction != "stimulus":
            err("type-mismatch", f"transition {t.id}: trigger {t.trigger!r} is not a stimulus", t.id)
        if len(t.trigger_params) != len(ev.params):
            err("type-mismatch", f"transition {t.id}: {t.trigger} takes {len(ev.params)} argument(s)", t.id)
            continue
        for alias in t.trigger_params:
            if alias in var_names:
                err("duplicate-identifier", f"transition {t.id}: parameter {alias!r} shadows a variable", alias)
        if t.priority < 0:
            err("bad-priority", f"transition {t.id}: negative priority", t.id)
        scope = transition_scope(model, t)
        try:
            check_expr(t.guard, scope, "bool")
        except ModelError as exc:
            err(_code(exc), f"transition {t.id} guard: {exc.detail}", t.id)
        for var, rhs in t.actions:
            if var not in model.variable_map:
                err("unresolved-reference", f"transition {t.id}: variable {var!r} not declared", var)
                continue
            try:
                check_expr(rhs, scope, model.variable_map[var].domain.type)
            except ModelError as exc:
                err(_code(exc), f"transition {t.id} action {var}: {exc.detail}", t.id)
        for out in t.outputs:
            oev = model.event_map.get(out.event)
            if oev is None:
                err("unresolved-reference", f"transition {t.id}: event {out.event!r} not declared", out.event)
                continue
            if oev.direction != "observation":
                err("type-mismatch", f"transition {t.id}: output {out.event!r} is not an observation", t.id)
            if len(out.args) != len(oev.params):
                err("type-mismatch", f"transition {t.id}: {out.event} takes {len(oev.params)} argument(s)", t.id)
                continue
            for arg, (_, dom) in zip(out.args, oev.params):
                try:
                    check_expr(arg, scope, dom.type)
                except ModelError as exc:
                    err(_code(exc), f"transition {t.id} output {out.event}: {exc.detail}", t.id)
        for r in sorted(t.req_tags - reqs):
            err("unresolved-reference", f"transition {t.id}: requirement {r!r} not declared", r)
        for o in sorted(t.option_tags - opts):
            err("unresolved-reference", f"transition {t.id}: option {o!r} not declared", o)
    for r in sorted(model.excluded_requirements - reqs):
        err("unresolved-reference", f"excluded requirement {r!r} not declared", r)
    return errs


def _code(exc: ModelError) -> str:
    if isinstance(exc, UnresolvedReferenceError):
        return "unresolved-reference"
    return "type-mismatch"


def validate(model: Model) -> list:
    """Errors for broken invariants plus reachability / traceability warnings."""
    diags = structural_errors(model)
    reached = {model.initial_state}
    todo = [model.initial_state]
    while todo:
        s = todo.pop()
        for t in model.outgoing.get(s, ()):
            if t.target not in reached:
                reached.add(t.target)
                todo.append(t.target)
    for s in model.states:
        if s not in reached:
            diags.append(Diagnostic("warning", "unreachable-state", f"state {s!r} is unreachable", s))
    tagged = set()
    for t in model.transitions:
        tagged |= t.req_tags
    for r in model.requirements:
        if r.id not in tagged:
            diags.append(Diagnostic("warning", "untagged-requirement",
                                    f"requirement {r.id!r} is tagged on no transition", r.id))
    return diags


def errors_only(diags) -> list:
    return [d for d in diags if d.severity == "error"]


# -- profiles ---------------------------------------------------------------


@dataclass(frozen=True)
class Profile:
    selection: Mapping[str, bool] = field(default_factory=dict)

    def __hash__(self):
        return hash(tuple(sorted(self.selection.items())))


def apply_profile(model: Model, profile: Profile) -> Model:
    """Drop transitions requiring a deselected option; mark orphaned requirements excluded."""
    declared = {o.id: o.default for o in model.options}
    for key in profile.selection:
        if key not in declared:
            raise UnknownOptionError(key)
    chosen = {**declared, **profile.selection}
    deselected = {k for k, v in chosen.items() if not v}
    kept, removed = [], []
    for t in model.transitions:
        (removed if t.option_tags & deselected else kept).append(t)
    kept_reqs = set().union(*(t.req_tags for t in kept)) if kept else set()
    lost = set().union(*(t.req_tags for t in removed)) if removed else set()
    excluded = model.excluded_requirements | (lost - kept_reqs)
    return model.replace(transitions=tuple(kept), excluded_requirements=frozenset(excluded))


# -- runtime helpers --------------------------------------------------------


def initial_valuation(model: Model) -> tuple:
    return tuple((v.name, v.initial) for v in model.variables)


def guard_env(model: Model, t: Transition, valuation, args) -> dict:
    env = dict(valuation)
    env.update(zip(t.trigger_params, args))
    return env


def fire(model: Model, t: Transition, valuation, args) -> tuple:
    """Fire ``t``: returns ``(outputs, new_valuation)``.

    Assignments run in order, each seeing the previous ones; integer results
    saturate at the domain bounds.  Output arguments are evaluated after the
    actions, so they observe the updated variables.
    """
    env = guard_env(model, t, valuation, args)
    for var, rhs in t.actions:
        env[var] = model.variable_map[var].domain.clamp(evaluate(rhs, env))
    outs = []
    for out in t.outputs:
        doms = [d for _, d in model.event_map[out.event].params]
        outs.append((out.event, tuple(d.clamp(evaluate(a, env)) for a, d in zip(out.args, doms))))
    return tuple(outs), tuple((v.name, env[v.name]) for v in model.variables)
