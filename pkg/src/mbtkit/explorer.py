"""Bounded explicit-state exploration of EFSM models.

Exploration is breadth-first from the initial concrete state.  Inputs are
enumerated per state by transition declaration order and then by argument
tuples in domain order, so every result is a pure function of its inputs.
"""

from __future__ import annotations

import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from .model import (
    Compare, IntLit, IntRange, Model, ModelError, ParamRef, Transition,
    errors_only, evaluate, fire, format_value, guard_env, initial_valuation,
    subexpressions, validate,
)
from .scenario import Scenario, ScenarioAutomaton, check_scenario

EXHAUSTIVE = "exhaustive"
BOUNDARY = "boundary"


class InvalidModelError(ModelError):
    def __init__(self, diagnostics):
        self.diagnostics = diagnostics
        super().__init__("model is invalid: " + "; ".join(d.message for d in diagnostics))


@dataclass(frozen=True)
class Bounds:
    max_depth: int = 12
    max_nodes: int = 10_000
    data_strategy: str = EXHAUSTIVE
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1 or self.max_nodes < 1:
            raise ValueError("max_depth and max_nodes must be positive")
        if self.data_strategy not in (EXHAUSTIVE, BOUNDARY):
            raise ValueError(f"unknown data strategy {self.data_strategy!r}")

    def to_json(self):
        return {"max_depth": self.max_depth, "max_nodes": self.max_nodes,
                "data_strategy": self.data_strategy, "seed": self.seed}


@dataclass(frozen=True)
class ConcreteState:
    control: str
    valuation: tuple  # ((variable, value), ...) in declaration order

    def get(self, var):
        return dict(self.valuation)[var]

    def label(self) -> str:
        vals = ", ".join(f"{k}={format_value(v)}" for k, v in self.valuation)
        return f"{self.control}[{vals}]" if vals else self.control

    def to_json(self):
        return {"control": self.control, "valuation": {k: v for k, v in self.valuation}}


@dataclass(frozen=True)
class Step:
    source: ConcreteState
    event: str
    args: tuple
    fired: str
    outputs: tuple  # ((event, args), ...)
    target: ConcreteState
    # another transition of equal priority was enabled for the same input
    nondeterministic: bool = field(default=False, compare=False)

    def stimulus_label(self) -> str:
        return call_label(self.event, self.args)


def call_label(event, args):
    if not args:
        return event
    return f"{event}({', '.join(format_value(a) for a in args)})"


@dataclass(frozen=True)
class Trace:
    start: ConcreteState
    steps: tuple = ()
    complete: bool = True

    def __len__(self):
        return len(self.steps)

    @property
    def end(self) -> ConcreteState:
        return self.steps[-1].target if self.steps else self.start

    def stimuli(self) -> list:
        return [s.stimulus_label() for s in self.steps]


@dataclass(frozen=True)
class ExplorationGraph:
    initial: ConcreteState
    nodes: tuple  # discovery order
    edges: tuple  # discovery order
    frontier: tuple = ()

    def successors(self) -> dict:
        out = {n: [] for n in self.nodes}
        for e in self.edges:
            out[e.source].append(e)
        return out

    def to_json(self) -> dict:
        index = {n: i for i, n in enumerate(self.nodes)}
        return {
            "initial": index[self.initial],
            "nodes": [dict(id=i, **n.to_json()) for i, n in enumerate(self.nodes)],
            "edges": [
                {"source": index[e.source], "event": e.event, "args": list(e.args),
                 "fired": e.fired, "outputs": [[o, list(a)] for o, a in e.outputs],
                 "target": index[e.target], "nondeterministic": e.nondeterministic}
                for e in self.edges
            ],
            "frontier": [index[n] for n in self.frontier],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def initial_state(model: Model) -> ConcreteState:
    return ConcreteState(model.initial_state, initial_valuation(model))


def boundary_values(t: Transition, pname: str, domain) -> tuple:
    """Boundary set of an integer trigger parameter under ``t``'s guard.

    lo, hi and the midpoint of the domain, plus c-1, c, c+1 (clamped) for every
    comparison of the parameter against an integer constant c.
    """
    if not isinstance(domain, IntRange):
        return domain.values()
    vals = {domain.lo, domain.hi, (domain.lo + domain.hi) // 2}
    for e in subexpressions(t.guard):
        if type(e) is not Compare:
            continue
        for a, b in ((e.left, e.right), (e.right, e.left)):
            if type(a) is ParamRef and a.name == pname and type(b) is IntLit:
                vals.update(domain.clamp(b.value + d) for d in (-1, 0, 1))
    return tuple(sorted(vals))


def _bindings(model: Model, t: Transition, strategy: str):
    params = model.event_map[t.trigger].params
    if strategy == BOUNDARY:
        pools = [boundary_values(t, alias, dom) for alias, (_, dom) in zip(t.trigger_params, params)]
    else:
        pools = [dom.values() for _, dom in params]
    return itertools.product(*pools)


def _guard_holds(model, t, valuation, args) -> bool:
    return bool(evaluate(t.guard, guard_env(model, t, valuation, args)))


def enabled_inputs(model: Model, state: ConcreteState, strategy: str = EXHAUSTIVE) -> list:
    """Enabled ``(transition, args, nondeterministic)`` triples after priority filtering."""
    out = []
    candidates = model.outgoing.get(state.control, ())
    for t in candidates:
        for args in _bindings(model, t, strategy):
            if not _guard_holds(model, t, state.valuation, args):
                continue
            rivals = [u for u in candidates
                      if u is not t and u.trigger == t.trigger and u.priority >= t.priority
                      and _guard_holds(model, u, state.valuation, args)]
            if any(u.priority > t.priority for u in rivals):
                continue
            out.append((t, args, bool(rivals)))
    return out


def enumerate_inputs(model: Model, state: ConcreteState, strategy: str = EXHAUSTIVE) -> list:
    """Enabled ``(transition id, args)`` pairs at ``state``."""
    return [(t.id, args) for t, args, _ in enabled_inputs(model, state, strategy)]


def successors(model: Model, state: ConcreteState, strategy: str = EXHAUSTIVE) -> list:
    steps = []
    for t, args, nondet in enabled_inputs(model, state, strategy):
        outputs, valuation = fire(model, t, state.valuation, args)
        steps.append(Step(state, t.trigger, args, t.id, outputs,
                          ConcreteState(t.target, valuation), nondet))
    return steps


def _check(model: Model):
    errs = errors_only(validate(model))
    if errs:
        raise InvalidModelError(errs)


def explore(model: Model, bounds: Bounds = Bounds(), scenario: Scenario | None = None) -> ExplorationGraph:
    """Breadth-first bounded exploration, optionally sliced by ``scenario``.

    With a scenario the search runs over the product with the scenario
    automaton and only steps that keep an accepted prefix alive are taken;
    the returned graph is projected back onto concrete states.  Nodes whose
    expansion was cut by the depth or node bound are listed in ``frontier``.
    """
    _check(model)
    automaton = None
    if scenario is not None:
        check_scenario(scenario, model)
        automaton = ScenarioAutomaton(scenario)
    init = initial_state(model)
    q0 = automaton.start if automaton else None
    nodes = {init: None}
    edges: dict = {}
    frontier: dict = {}
    seen = {(init, q0)}
    queue = deque([(init, q0, 0)])
    while queue:
        state, q, depth = queue.popleft()
        if automaton is not None and not q:
            continue
        moves = []
        for step in successors(model, state, bounds.data_strategy):
            nq = None
            if automaton is not None:
                nq = automaton.advance(q, step.event, step.args, step.outputs)
                if not nq:
                    continue
            moves.append((step, nq))
        if not moves:
            continue
        if depth >= bounds.max_depth:
            frontier[state] = None
            continue
        for step, nq in moves:
            if step.target not in nodes:
                if len(nodes) >= bounds.max_nodes:
                    frontier[state] = None
                    continue
                nodes[step.target] = None
            edges.setdefault(step, step)
            if (step.target, nq) not in seen:
                seen.add((step.target, nq))
                queue.append((step.target, nq, depth + 1))
    return ExplorationGraph(init, tuple(nodes), tuple(edges.values()), tuple(frontier))


def traces_of(graph: ExplorationGraph) -> Iterator[Trace]:
    """All simple-path traces from the initial node, depth-first, prefixes included.

    A trace stops after a step that returns to a state already on its path
    (the closing step is kept) or on reaching a frontier node, in which case
    it is marked incomplete.  The number of traces can be exponential in the
    graph size, so they are produced lazily.
    """
    succ = graph.successors()
    frontier = set(graph.frontier)
    yield Trace(graph.initial, (), graph.initial not in frontier)
    if graph.initial in frontier:
        return
    path_steps: list = []
    on_path = {graph.initial}
    stack = [iter(succ[graph.initial])]
    while stack:
        step = next(stack[-1], None)
        if step is None:
            stack.pop()
            if path_steps:
                on_path.discard(path_steps.pop().target)
            continue
        steps = tuple(path_steps) + (step,)
        if step.target in on_path:
            yield Trace(graph.initial, steps, True)
            continue
        at_frontier = step.target in frontier
        yield Trace(graph.initial, steps, not at_frontier)
        if at_frontier:
            continue
        path_steps.append(step)
        on_path.add(step.target)
        stack.append(iter(succ[step.target]))


def witness_traces(graph: ExplorationGraph) -> list:
    """One trace per edge: a breadth-first shortest path to its source, then the edge.

    Paths never pass through a frontier node, so each witness is also one of
    the traces produced by :func:`traces_of`.
    """
    succ = graph.successors()
    frontier = set(graph.frontier)
    parent = {graph.initial: None}
    order = [graph.initial]
    queue = deque([graph.initial])
    while queue:
        n = queue.popleft()
        if n in frontier:
            continue
        for e in succ[n]:
            if e.target not in parent:
                parent[e.target] = e
                order.append(e.target)
                queue.append(e.target)

    def path_to(n):
        steps = []
        while parent[n] is not None:
            steps.append(parent[n])
            n = parent[n].source
        return steps[::-1]

    out = []
    for n in order:
        if n in frontier:
            continue
        prefix = path_to(n)
        on_path = {graph.initial} | {s.target for s in prefix}
        for e in succ[n]:
            closes = e.target in on_path
            complete = closes or e.target not in frontier
            out.append(Trace(graph.initial, tuple(prefix) + (e,), complete))
    return out


def random_walk(model: Model, bounds: Bounds = Bounds()) -> Trace:
    """Seeded uniform random walk of at most ``max_depth`` steps."""
    _check(model)
    rng = random.Random(bounds.seed)
    state = initial_state(model)
    start = state
    steps = []
    for _ in range(bounds.max_depth):
        options = successors(model, state, bounds.data_strategy)
        if not options:
            return Trace(start, tuple(steps), True)
        step = options[rng.randrange(len(options))]
        steps.append(step)
        state = step.target
    return Trace(start, tuple(steps), not successors(model, state, bounds.data_strategy))


def slice_soundness_check(full: ExplorationGraph, sliced: ExplorationGraph) -> bool:
    """True iff every sliced step occurs in ``full`` with the same outputs and successor."""
    index = {(e.source, e.event, e.args, e.fired): (e.outputs, e.target) for e in full.edges}
    return all(index.get((e.source, e.event, e.args, e.fired)) == (e.outputs, e.target)
               for e in sliced.edges)
