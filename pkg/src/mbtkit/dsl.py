"""Line-oriented textual notation for EFSM models and ICS profiles.

Declarations (one per line, ``#`` starts a comment)::

    model <name>
    state <name> [initial]
    var <name> : int[<lo>..<hi>] | enum{a,b,...} | bool | record{f: <domain>, ...} = <initial>
    stimulus <name>(<p>:<domain>, ...)
    observation <name>(<p>:<domain>, ...)
    req <ID> "<text>" clause "<ref>"
    option <ID> "<text>" default <true|false>
    trans <id>: <src> -> <dst> on <event>(<args>) [<guard>] / <var>:=<expr>; ... ! <out>(<exprs>), ... prio <n> @<REQ> %<OPT>

Record variables are flattened into one variable per field, named
``<var>.<field>``.  Declarations may appear in any order; names are resolved
once the whole text has been read.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .model import (
    Arith, BoolDomain, BoolLit, BoolOp, Compare, EnumDomain, Event, IcsOption,
    IfThenElse, IntLit, IntRange, Model, ModelError, ModelSyntaxError, Not, Output,
    ParamRef, Profile, Requirement, SymLit, Transition, TRUE, TypeMismatchError,
    UnresolvedReferenceError, DuplicateIdentifierError, Variable, VarRef,
    check_expr, format_expr, format_value, structural_errors, transition_scope,
)

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<comment>\#.*)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<int>\d+)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*(?:\.[A-Za-z_][A-Za-z0-9_]*)*)
  | (?P<op>->|:=|\.\.|!=|<=|>=|≠|≤|≥|[=<>()\[\]{},:;/!@%+\-_*|])
""", re.VERBOSE)

_TAG = re.compile(r"[A-Za-z_][A-Za-z0-9_.\-]*")
_UNICODE_OPS = {"≠": "!=", "≤": "<=", "≥": ">="}
KEYWORDS = {"and", "or", "not", "true", "false", "if", "then", "else"}


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    column: int


class Cursor:
    """Tokenizer over a single source line."""

    def __init__(self, text: str, line: int):
        self.text = text
        self.line = line
        self.pos = 0

    def _scan(self, pos):
        while pos < len(self.text):
            m = _TOKEN.match(self.text, pos)
            if m is None:
                raise ModelSyntaxError(f"unexpected character {self.text[pos]!r}", self.line, pos + 1)
            if m.lastgroup == "comment":
                return Token("eol", "", pos + 1), len(self.text)
            if m.lastgroup != "ws":
                text = _UNICODE_OPS.get(m.group(), m.group())
                return Token(m.lastgroup, text, pos + 1), m.end()
            pos = m.end()
        return Token("eol", "", pos + 1), pos

    def peek(self) -> Token:
        return self._scan(self.pos)[0]

    def next(self) -> Token:
        tok, self.pos = self._scan(self.pos)
        return tok

    def at(self, *texts) -> bool:
        tok = self.peek()
        return tok.kind in ("op", "name") and tok.text in texts

    def at_eol(self) -> bool:
        return self.peek().kind == "eol"

    def fail(self, message, *expected, token=None):
        tok = token or self.peek()
        found = "end of line" if tok.kind == "eol" else repr(tok.text)
        raise ModelSyntaxError(f"{message}, found {found}", self.line, tok.column, expected)

    def expect(self, text) -> Token:
        tok = self.peek()
        if tok.kind in ("op", "name") and tok.text == text:
            return self.next()
        self.fail("syntax error", repr(text))

    def accept(self, text) -> bool:
        if self.at(text):
            self.next()
            return True
        return False

    def name(self, what="identifier") -> Token:
        tok = self.peek()
        if tok.kind != "name" or tok.text in KEYWORDS:
            self.fail("syntax error", what)
        return self.next()

    def tag(self, what="identifier") -> Token:
        """An identifier that may contain hyphens (requirement/option ids)."""
        pos = self.pos
        while pos < len(self.text) and self.text[pos].isspace():
            pos += 1
        m = _TAG.match(self.text, pos)
        if m is None:
            self.fail("syntax error", what)
        self.pos = m.end()
        return Token("name", m.group(), pos + 1)

    def integer(self) -> int:
        neg = self.accept("-")
        tok = self.peek()
        if tok.kind != "int":
            self.fail("syntax error", "integer")
        self.next()
        return -int(tok.text) if neg else int(tok.text)

    def string(self) -> str:
        tok = self.peek()
        if tok.kind != "string":
            self.fail("syntax error", "quoted string")
        self.next()
        return re.sub(r"\\(.)", r"\1", tok.text[1:-1])

    def end(self):
        if not self.at_eol():
            self.fail("unexpected trailing input", "end of line")


# -- raw expressions (names resolved after the whole model is read) ---------


@dataclass(frozen=True)
class _Name:
    name: str
    line: int
    column: int


def parse_expr(cur: Cursor):
    return _parse_or(cur)


def _parse_or(cur):
    left = _parse_and(cur)
    while cur.accept("or"):
        left = BoolOp("or", left, _parse_and(cur))
    return left


def _parse_and(cur):
    left = _parse_not(cur)
    while cur.accept("and"):
        left = BoolOp("and", left, _parse_not(cur))
    return left


def _parse_not(cur):
    if cur.accept("not"):
        return Not(_parse_not(cur))
    return _parse_cmp(cur)


def _parse_cmp(cur):
    left = _parse_sum(cur)
    tok = cur.peek()
    if tok.kind == "op" and tok.text in ("=", "!=", "<", "<=", ">", ">="):
        cur.next()
        return Compare(tok.text, left, _parse_sum(cur))
    return left


def _parse_sum(cur):
    left = _parse_atom(cur)
    while cur.at("+", "-"):
        op = cur.next().text
        left = Arith(op, left, _parse_atom(cur))
    return left


def _parse_atom(cur):
    tok = cur.peek()
    if tok.kind == "int" or (tok.kind == "op" and tok.text == "-"):
        return IntLit(cur.integer())
    if cur.accept("("):
        e = parse_expr(cur)
        cur.expect(")")
        return e
    if cur.accept("true"):
        return BoolLit(True)
    if cur.accept("false"):
        return BoolLit(False)
    if cur.accept("if"):
        c = parse_expr(cur)
        cur.expect("then")
        a = parse_expr(cur)
        cur.expect("else")
        return IfThenElse(c, a, parse_expr(cur))
    if tok.kind == "name" and tok.text not in KEYWORDS:
        cur.next()
        return _Name(tok.text, cur.line, tok.column)
    cur.fail("syntax error", "expression")


def _resolve(expr, params, variables, symbols):
    t = type(expr)
    if t is _Name:
        if expr.name in params:
            return ParamRef(expr.name)
        if expr.name in variables:
            return VarRef(expr.name)
        if expr.name in symbols:
            return SymLit(expr.name)
        raise UnresolvedReferenceError(expr.name, expr.line, expr.column)
    if t is Compare or t is Arith or t is BoolOp:
        return t(expr.op, _resolve(expr.left, params, variables, symbols),
                 _resolve(expr.right, params, variables, symbols))
    if t is Not:
        return Not(_resolve(expr.operand, params, variables, symbols))
    if t is IfThenElse:
        return IfThenElse(*(_resolve(e, params, variables, symbols)
                            for e in (expr.cond, expr.then, expr.orelse)))
    return expr


# -- declarations -------------------------------------------------------------


def _parse_domain(cur: Cursor):
    tok = cur.peek()
    if cur.accept("int"):
        cur.expect("[")
        lo = cur.integer()
        cur.expect("..")
        hi = cur.integer()
        cur.expect("]")
        if lo > hi:
            raise ModelSyntaxError(f"empty integer range {lo}..{hi}", cur.line, tok.column)
        return IntRange(lo, hi)
    if cur.accept("bool"):
        return BoolDomain()
    if cur.accept("enum"):
        cur.expect("{")
        symbols = [cur.name("enumeration symbol").text]
        while cur.accept(","):
            symbols.append(cur.name("enumeration symbol").text)
        cur.expect("}")
        if len(set(symbols)) != len(symbols):
            raise ModelSyntaxError("duplicate enumeration symbol", cur.line, tok.column)
        return EnumDomain(tuple(symbols))
    cur.fail("syntax error", "int[..]", "enum{..}", "bool")


def _parse_value(cur: Cursor, domain, line):
    tok = cur.peek()
    if isinstance(domain, IntRange):
        v = cur.integer()
    elif isinstance(domain, BoolDomain):
        if cur.accept("true"):
            v = True
        elif cur.accept("false"):
            v = False
        else:
            cur.fail("syntax error", "true", "false")
    else:
        v = cur.name("enumeration symbol").text
    if not domain.contains(v):
        raise TypeMismatchError(f"value {format_value(v)} not in {domain}", line, tok.column)
    return v


def _parse_params(cur: Cursor):
    params = []
    if cur.accept("("):
        if not cur.accept(")"):
            while True:
                name = cur.name("parameter name").text
                cur.expect(":")
                params.append((name, _parse_domain(cur)))
                if cur.accept(")"):
                    break
                cur.expect(",")
    return tuple(params)


class _Builder:
    def __init__(self):
        self.name = None
        self.states = []
        self.initial = None
        self.variables = []
        self.events = []
        self.raw_transitions = []
        self.requirements = []
        self.options = []
        self.positions = {}

    def declare(self, kind, name, line, column):
        key = (kind, name)
        if key in self.positions:
            raise DuplicateIdentifierError(name, line, column)
        self.positions[key] = (line, column)


def parse_model(text: str) -> Model:
    """Parse model source text.  Raises a ModelError subclass with line/column on failure."""
    b = _Builder()
    for lineno, line in enumerate(text.splitlines(), start=1):
        cur = Cursor(line, lineno)
        if cur.at_eol():
            continue
        kw = cur.peek()
        if kw.kind != "name":
            cur.fail("syntax error", "declaration keyword")
        handler = _DECLARATIONS.get(kw.text)
        if handler is None:
            cur.fail("unknown declaration", *sorted(_DECLARATIONS))
        cur.next()
        handler(cur, b)
        cur.end()
    return _finish(b)


def _decl_model(cur, b):
    tok = cur.name("model name")
    if b.name is not None:
        raise ModelSyntaxError("second model declaration", cur.line, tok.column)
    b.name = tok.text


def _decl_state(cur, b):
    tok = cur.name("state name")
    b.declare("state", tok.text, cur.line, tok.column)
    b.states.append(tok.text)
    if cur.accept("initial"):
        if b.initial is not None:
            raise ModelSyntaxError("second initial state", cur.line, tok.column)
        b.initial = tok.text


def _decl_var(cur, b):
    tok = cur.name("variable name")
    cur.expect(":")
    if cur.accept("record"):
        cur.expect("{")
        fields = []
        while True:
            ftok = cur.name("field name")
            cur.expect(":")
            fields.append((ftok, _parse_domain(cur)))
            if cur.accept("}"):
                break
            cur.expect(",")
        cur.expect("=")
        inits = {}
        if cur.accept("{"):
            while True:
                ftok = cur.name("field name")
                cur.expect("=")
                dom = dict((f.text, d) for f, d in fields).get(ftok.text)
                if dom is None:
                    raise UnresolvedReferenceError(ftok.text, cur.line, ftok.column)
                inits[ftok.text] = _parse_value(cur, dom, cur.line)
                if cur.accept("}"):
                    break
                cur.expect(",")
            missing = [f.text for f, _ in fields if f.text not in inits]
            if missing:
                raise ModelSyntaxError(f"record initialiser misses {', '.join(missing)}", cur.line, tok.column)
        else:
            vtok = cur.peek()
            for f, dom in fields:
                cur.pos = vtok.column - 1
                inits[f.text] = _parse_value(cur, dom, cur.line)
        for f, dom in fields:
            full = f"{tok.text}.{f.text}"
            b.declare("var", full, cur.line, f.column)
            b.variables.append(Variable(full, dom, inits[f.text]))
        return
    dom = _parse_domain(cur)
    cur.expect("=")
    b.declare("var", tok.text, cur.line, tok.column)
    b.variables.append(Variable(tok.text, dom, _parse_value(cur, dom, cur.line)))


def _decl_event(direction):
    def handler(cur, b):
        tok = cur.name("event name")
        b.declare("event", tok.text, cur.line, tok.column)
        params = _parse_params(cur)
        names = [p for p, _ in params]
        if len(set(names)) != len(names):
            raise ModelSyntaxError(f"duplicate parameter in {tok.text}", cur.line, tok.column)
        b.events.append(Event(tok.text, direction, params))
    return handler


def _decl_req(cur, b):
    tok = cur.tag("requirement id")
    b.declare("req", tok.text, cur.line, tok.column)
    text = cur.string()
    clause = ""
    if cur.accept("clause"):
        clause = cur.string()
    b.requirements.append(Requirement(tok.text, text, clause))


def _decl_option(cur, b):
    tok = cur.tag("option id")
    b.declare("option", tok.text, cur.line, tok.column)
    desc = cur.string() if cur.peek().kind == "string" else ""
    default = True
    if cur.accept("default"):
        if cur.accept("false"):
            default = False
        else:
            cur.expect("true")
    b.options.append(IcsOption(tok.text, desc, default))


def _decl_trans(cur, b):
    tok = cur.name("transition id")
    b.declare("trans", tok.text, cur.line, tok.column)
    cur.expect(":")
    src = cur.name("source state")
    cur.expect("->")
    dst = cur.name("target state")
    cur.expect("on")
    ev = cur.name("event name")
    aliases = None
    if cur.accept("("):
        aliases = []
        if not cur.accept(")"):
            while True:
                aliases.append(cur.name("parameter name").text)
                if cur.accept(")"):
                    break
                cur.expect(",")
    guard = TRUE
    if cur.accept("["):
        guard = parse_expr(cur)
        cur.expect("]")
    actions = []
    if cur.accept("/"):
        while True:
            var = cur.name("variable name")
            cur.expect(":=")
            actions.append((var, parse_expr(cur)))
            if not cur.accept(";"):
                break
            if cur.at_eol() or cur.at("!", "prio", "@", "%"):
                break
    outputs = []
    if cur.accept("!"):
        while True:
            otok = cur.name("observation name")
            args = []
            if cur.accept("("):
                if not cur.accept(")"):
                    while True:
                        args.append(parse_expr(cur))
                        if cur.accept(")"):
                            break
                        cur.expect(",")
            outputs.append((otok, tuple(args)))
            if not (cur.accept(",") or cur.accept("!")):
                break
    prio = 0
    if cur.accept("prio"):
        prio = cur.integer()
        if prio < 0:
            cur.fail("negative priority", "non-negative integer")
    reqs, opts = [], []
    while cur.accept("@"):
        reqs.append(cur.tag("requirement id"))
    while cur.accept("%"):
        opts.append(cur.tag("option id"))
    if not cur.at_eol():
        cur.fail("syntax error", "'['", "'/'", "'!'", "'prio'", "'@'", "'%'", "end of line")
    b.raw_transitions.append(dict(
        line=cur.line, id=tok, src=src, dst=dst, event=ev, aliases=aliases, guard=guard,
        actions=actions, outputs=outputs, prio=prio, reqs=reqs, opts=opts))


_DECLARATIONS = {
    "model": _decl_model,
    "state": _decl_state,
    "var": _decl_var,
    "stimulus": _decl_event("stimulus"),
    "observation": _decl_event("observation"),
    "req": _decl_req,
    "option": _decl_option,
    "trans": _decl_trans,
}


def _finish(b: _Builder) -> Model:
    if b.name is None:
        raise ModelSyntaxError("missing model declaration", 1, 1, ("model <name>",))
    if not b.states:
        raise ModelSyntaxError("model declares no states", 1, 1, ("state <name>",))
    initial = b.initial or b.states[0]
    states = set(b.states)
    events = {e.name: e for e in b.events}
    var_names = {v.name for v in b.variables}
    symbols = set()
    for dom in [v.domain for v in b.variables] + [d for e in b.events for _, d in e.params]:
        if isinstance(dom, EnumDomain):
            symbols.update(dom.symbols)
    req_ids = {r.id for r in b.requirements}
    opt_ids = {o.id for o in b.options}
    partial = Model(b.name, tuple(b.states), initial, tuple(b.variables), tuple(b.events))
    transitions = []
    for raw in b.raw_transitions:
        line = raw["line"]
        for st in (raw["src"], raw["dst"]):
            if st.text not in states:
                raise UnresolvedReferenceError(st.text, line, st.column)
        ev = events.get(raw["event"].text)
        if ev is None:
            raise UnresolvedReferenceError(raw["event"].text, line, raw["event"].column)
        if ev.direction != "stimulus":
            raise TypeMismatchError(f"trigger {ev.name!r} is not a stimulus", line, raw["event"].column)
        aliases = tuple(raw["aliases"]) if raw["aliases"] is not None else ev.param_names
        if len(aliases) != len(ev.params):
            raise TypeMismatchError(f"{ev.name} takes {len(ev.params)} argument(s)", line, raw["event"].column)
        if len(set(aliases)) != len(aliases):
            raise ModelSyntaxError(f"duplicate parameter name in trigger of {raw['id'].text}", line, raw["event"].column)
        for a in aliases:
            if a in var_names:
                raise DuplicateIdentifierError(a, line, raw["event"].column)
        params = set(aliases)

        def res(e):
            return _resolve(e, params, var_names, symbols)

        actions = []
        for var, rhs in raw["actions"]:
            if var.text not in var_names:
                raise UnresolvedReferenceError(var.text, line, var.column)
            actions.append((var.text, res(rhs)))
        outputs = []
        for otok, args in raw["outputs"]:
            oev = events.get(otok.text)
            if oev is None:
                raise UnresolvedReferenceError(otok.text, line, otok.column)
            if oev.direction != "observation":
                raise TypeMismatchError(f"output {otok.text!r} is not an observation", line, otok.column)
            if len(args) != len(oev.params):
                raise TypeMismatchError(f"{otok.text} takes {len(oev.params)} argument(s)", line, otok.column)
            outputs.append(Output(otok.text, tuple(res(a) for a in args)))
        for tag in raw["reqs"]:
            if tag.text not in req_ids:
                raise UnresolvedReferenceError(tag.text, line, tag.column)
        for tag in raw["opts"]:
            if tag.text not in opt_ids:
                raise UnresolvedReferenceError(tag.text, line, tag.column)
        t = Transition(
            id=raw["id"].text, source=raw["src"].text, target=raw["dst"].text, trigger=ev.name,
            trigger_params=aliases, guard=res(raw["guard"]), actions=tuple(actions),
            outputs=tuple(outputs), priority=raw["prio"],
            req_tags=frozenset(x.text for x in raw["reqs"]),
            option_tags=frozenset(x.text for x in raw["opts"]))
        scope = transition_scope(partial, t)
        try:
            check_expr(t.guard, scope, "bool")
            for var, rhs in t.actions:
                check_expr(rhs, scope, partial.variable_map[var].domain.type)
            for out in t.outputs:
                for arg, (_, dom) in zip(out.args, events[out.event].params):
                    check_expr(arg, scope, dom.type)
        except ModelError as exc:
            exc_type = type(exc)
            if exc_type is UnresolvedReferenceError:
                raise UnresolvedReferenceError(exc.name, line, raw["id"].column) from None
            raise exc_type(f"transition {t.id}: {exc.detail}", line, raw["id"].column) from None
        transitions.append(t)
    model = partial.replace(
        transitions=tuple(transitions), requirements=tuple(b.requirements), options=tuple(b.options))
    errs = structural_errors(model)
    if errs:
        raise ModelError(errs[0].message)
    return model


# -- printing -----------------------------------------------------------------


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _params(params) -> str:
    if not params:
        return ""
    return "(" + ", ".join(f"{n}: {d}" for n, d in params) + ")"


def format_transition(t: Transition) -> str:
    parts = [f"trans {t.id}: {t.source} -> {t.target} on {t.trigger}"]
    if t.trigger_params:
        parts[-1] += "(" + ", ".join(t.trigger_params) + ")"
    if t.guard != TRUE:
        parts.append(f"[{format_expr(t.guard)}]")
    if t.actions:
        parts.append("/ " + "; ".join(f"{v} := {format_expr(e)}" for v, e in t.actions))
    if t.outputs:
        outs = []
        for o in t.outputs:
            args = "(" + ", ".join(format_expr(a) for a in o.args) + ")" if o.args else ""
            outs.append(o.event + args)
        parts.append("! " + ", ".join(outs))
    if t.priority:
        parts.append(f"prio {t.priority}")
    parts.extend(f"@{r}" for r in sorted(t.req_tags))
    parts.extend(f"%{o}" for o in sorted(t.option_tags))
    return " ".join(parts)


def format_model(model: Model) -> str:
    """Render ``model`` in the DSL; ``parse_model(format_model(m)) == m`` for parsed models."""
    lines = [f"model {model.name}"]
    for s in model.states:
        lines.append(f"state {s}" + (" initial" if s == model.initial_state else ""))
    for v in model.variables:
        lines.append(f"var {v.name} : {v.domain} = {format_value(v.initial)}")
    for e in model.events:
        lines.append(f"{e.direction} {e.name}{_params(e.params)}")
    for r in model.requirements:
        lines.append(f"req {r.id} {_quote(r.text)} clause {_quote(r.clause)}")
    for o in model.options:
        lines.append(f"option {o.id} {_quote(o.description)} default {format_value(o.default)}")
    lines.extend(format_transition(t) for t in model.transitions)
    return "\n".join(lines) + "\n"


# -- profiles -----------------------------------------------------------------


def parse_profile(text: str) -> Profile:
    """Parse ``OPT-ID = true|false`` lines."""
    selection = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        cur = Cursor(line, lineno)
        if cur.at_eol():
            continue
        tok = cur.tag("option id")
        cur.expect("=")
        if cur.accept("true"):
            value = True
        elif cur.accept("false"):
            value = False
        else:
            cur.fail("syntax error", "true", "false")
        cur.end()
        if tok.text in selection:
            raise DuplicateIdentifierError(tok.text, lineno, tok.column)
        selection[tok.text] = value
    return Profile(selection)


def format_profile(profile: Profile) -> str:
    return "".join(f"{k} = {format_value(v)}\n" for k, v in sorted(profile.selection.items()))
