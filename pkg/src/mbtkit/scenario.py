"""Scenario patterns that slice exploration.

A scenario is a regular expression over steps::

    LS_REQUEST(_) ; _* ; LS_REPLY

``;`` concatenates, ``|`` alternates, ``*`` repeats, ``_`` matches any step
and ``none`` denotes the empty language.  An atom names an event, optionally
with one constraint per parameter (a literal or ``_``).  Stimulus atoms match
the step's stimulus; observation atoms match a step that emits the event.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import cached_property

from .model import Model, ModelError, ModelSyntaxError, UnresolvedReferenceError, TypeMismatchError, format_value

_TOKEN = re.compile(r"\s*(?:(?P<int>-?\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)|(?P<op>[;|*(),]))")

ANY = object()  # wildcard constraint


@dataclass(frozen=True)
class Atom:
    event: str | None  # None is the wildcard step
    constraints: tuple | None = None  # None: any arguments

    def __str__(self):
        if self.event is None:
            return "_"
        if self.constraints is None:
            return self.event
        return self.event + "(" + ", ".join("_" if c is ANY else format_value(c) for c in self.constraints) + ")"


@dataclass(frozen=True)
class Seq:
    items: tuple


@dataclass(frozen=True)
class Alt:
    items: tuple


@dataclass(frozen=True)
class Star:
    item: object


@dataclass(frozen=True)
class Empty:
    pass


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = []
        pos = 0
        while True:
            m = _TOKEN.match(text, pos)
            if m is None or m.end() == pos:
                rest = text[pos:].strip()
                if rest:
                    raise ModelSyntaxError(f"unexpected {rest[0]!r} in scenario", 1, len(text) - len(text[pos:].lstrip()) + 1)
                break
            kind = m.lastgroup
            self.tokens.append((kind, m.group(kind), m.start(kind) + 1))
            pos = m.end()
        self.i = 0

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eol", "", len(self.text) + 1)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, text):
        tok = self.take()
        if tok[1] != text:
            raise ModelSyntaxError(f"syntax error in scenario at {tok[1] or 'end'!r}", 1, tok[2], (repr(text),))

    def parse(self):
        node = self.alt()
        tok = self.peek()
        if tok[0] != "eol":
            raise ModelSyntaxError(f"unexpected {tok[1]!r} in scenario", 1, tok[2], ("';'", "'|'", "end"))
        return node

    def alt(self):
        items = [self.seq()]
        while self.peek()[1] == "|":
            self.take()
            items.append(self.seq())
        return items[0] if len(items) == 1 else Alt(tuple(items))

    def seq(self):
        items = [self.rep()]
        while self.peek()[1] == ";":
            self.take()
            items.append(self.rep())
        return items[0] if len(items) == 1 else Seq(tuple(items))

    def rep(self):
        node = self.prim()
        while self.peek()[1] == "*":
            self.take()
            node = Star(node)
        return node

    def prim(self):
        kind, text, col = self.take()
        if text == "(":
            node = self.alt()
            self.expect(")")
            return node
        if kind == "name" and text == "_":
            return Atom(None)
        if kind == "name" and text == "none":
            return Empty()
        if kind == "name":
            if self.peek()[1] != "(":
                return Atom(text)
            self.take()
            cons = []
            if self.peek()[1] != ")":
                while True:
                    cons.append(self.constraint())
                    if self.peek()[1] == ")":
                        break
                    self.expect(",")
            self.expect(")")
            return Atom(text, tuple(cons))
        raise ModelSyntaxError(f"syntax error in scenario at {text or 'end'!r}", 1, col,
                               ("event atom", "'_'", "'('", "'none'"))

    def constraint(self):
        kind, text, col = self.take()
        if kind == "int":
            return int(text)
        if kind == "name":
            if text == "_":
                return ANY
            if text in ("true", "false"):
                return text == "true"
            return text
        raise ModelSyntaxError(f"syntax error in scenario at {text or 'end'!r}", 1, col, ("literal", "'_'"))


@dataclass(frozen=True)
class Scenario:
    pattern: str

    @cached_property
    def ast(self):
        return _Parser(self.pattern).parse()

    @classmethod
    def parse(cls, text: str) -> "Scenario":
        lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
        lines = [ln for ln in lines if ln]
        if len(lines) != 1:
            raise ModelSyntaxError("scenario must be a single line", 1, 1)
        sc = cls(lines[0])
        sc.ast  # noqa: B018  parse eagerly to report errors
        return sc

    def atoms(self):
        out = []

        def walk(n):
            if isinstance(n, Atom):
                out.append(n)
            elif isinstance(n, (Seq, Alt)):
                for c in n.items:
                    walk(c)
            elif isinstance(n, Star):
                walk(n.item)

        walk(self.ast)
        return out


def check_scenario(scenario: Scenario, model: Model) -> None:
    """Raise ModelError if the scenario names unknown events or ill-typed constraints."""
    for atom in scenario.atoms():
        if atom.event is None:
            continue
        ev = model.event_map.get(atom.event)
        if ev is None:
            raise UnresolvedReferenceError(atom.event)
        if atom.constraints is None:
            continue
        if len(atom.constraints) != len(ev.params):
            raise TypeMismatchError(f"scenario atom {atom}: {ev.name} takes {len(ev.params)} argument(s)")
        for c, (pname, dom) in zip(atom.constraints, ev.params):
            if c is not ANY and not dom.contains(c):
                raise TypeMismatchError(f"scenario atom {atom}: {format_value(c)} not in {dom} of {pname}")


def _atom_matches(atom: Atom, event, args, outputs) -> bool:
    if atom.event is None:
        return True

    def args_ok(values):
        if atom.constraints is None:
            return True
        if len(values) != len(atom.constraints):
            return False
        return all(c is ANY or (type(c) is type(v) and c == v) for c, v in zip(atom.constraints, values))

    if atom.event == event and args_ok(args):
        return True
    return any(o_ev == atom.event and args_ok(o_args) for o_ev, o_args in outputs)


class ScenarioAutomaton:
    """Thompson NFA of a scenario, pruned to states that can still reach acceptance."""

    def __init__(self, scenario: Scenario):
        self.eps: dict = {}
        self.moves: dict = {}
        self._n = 0
        start, accept = self._build(scenario.ast)
        self.accept = accept
        self.viable = self._coreachable(accept)
        self.start = self._closure({start}) & self.viable

    def _new(self):
        self._n += 1
        return self._n - 1

    def _build(self, node):
        s, f = self._new(), self._new()
        if isinstance(node, Atom):
            self.moves.setdefault(s, []).append((node, f))
        elif isinstance(node, Empty):
            pass
        elif isinstance(node, Seq):
            prev = s
            for item in node.items:
                a, b = self._build(item)
                self.eps.setdefault(prev, []).append(a)
                prev = b
            self.eps.setdefault(prev, []).append(f)
        elif isinstance(node, Alt):
            for item in node.items:
                a, b = self._build(item)
                self.eps.setdefault(s, []).append(a)
                self.eps.setdefault(b, []).append(f)
        elif isinstance(node, Star):
            a, b = self._build(node.item)
            self.eps.setdefault(s, []).extend([a, f])
            self.eps.setdefault(b, []).extend([a, f])
        else:
            raise TypeError(node)
        return s, f

    def _coreachable(self, accept):
        back: dict = {}
        for src, dsts in self.eps.items():
            for d in dsts:
                back.setdefault(d, set()).add(src)
        for src, mv in self.moves.items():
            for _, d in mv:
                back.setdefault(d, set()).add(src)
        seen = {accept}
        todo = [accept]
        while todo:
            for p in back.get(todo.pop(), ()):
                if p not in seen:
                    seen.add(p)
                    todo.append(p)
        return frozenset(seen)

    def _closure(self, states):
        seen = set(states)
        todo = list(states)
        while todo:
            for d in self.eps.get(todo.pop(), ()):
                if d not in seen:
                    seen.add(d)
                    todo.append(d)
        return frozenset(seen)

    def advance(self, states: frozenset, event, args, outputs) -> frozenset:
        """States after a step; empty when the step leaves every accepted prefix."""
        nxt = set()
        for s in states:
            for atom, d in self.moves.get(s, ()):
                if _atom_matches(atom, event, args, outputs):
                    nxt.add(d)
        return self._closure(nxt) & self.viable

    def accepts(self, states: frozenset) -> bool:
        return self.accept in states


def load_scenario(text: str, model: Model | None = None) -> Scenario:
    sc = Scenario.parse(text)
    if model is not None:
        check_scenario(sc, model)
    return sc


__all__ = ["ANY", "Atom", "Scenario", "ScenarioAutomaton", "check_scenario", "load_scenario", "ModelError"]
