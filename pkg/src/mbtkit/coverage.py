"""Coverage goals, trace coverage measurement and greedy test selection."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction

from .explorer import ExplorationGraph, Step, Trace, boundary_values, traces_of, witness_traces
from .model import IntRange, Model, atoms, evaluate, format_value, guard_env

CRITERIA = ("state", "transition", "branch", "atomic_condition", "boundary_value", "requirement")

DEFAULT_MAX_CANDIDATES = 5000


@dataclass(frozen=True, order=True)
class CoverageItem:
    criterion: str
    key: tuple

    def label(self) -> str:
        k = self.key
        if self.criterion == "branch":
            return f"{k[0]}:{k[1]}"
        if self.criterion == "atomic_condition":
            return f"{k[0]}#{k[1]}:{format_value(k[2])}"
        if self.criterion == "boundary_value":
            return f"{k[0]}.{k[1]}={format_value(k[2])}"
        return str(k[0])

    def __str__(self):
        return self.label()


def _check_criterion(criterion):
    if criterion not in CRITERIA:
        raise ValueError(f"unknown coverage criterion {criterion!r}; expected one of {', '.join(CRITERIA)}")


def goals(model: Model, criterion: str) -> tuple:
    """All coverage items of ``criterion`` for ``model``, in declaration order."""
    _check_criterion(criterion)
    items = []
    if criterion == "state":
        items = [(s,) for s in model.states]
    elif criterion == "transition":
        items = [(t.id,) for t in model.transitions]
    elif criterion == "requirement":
        items = [(r.id,) for r in model.requirements]
    elif criterion == "branch":
        for t in model.transitions:
            if t.guarded:
                items += [(t.id, "taken"), (t.id, "blocked")]
    elif criterion == "atomic_condition":
        for t in model.transitions:
            for i, _ in enumerate(atoms(t.guard)):
                items += [(t.id, i, True), (t.id, i, False)]
    elif criterion == "boundary_value":
        for t in model.transitions:
            params = model.event_map[t.trigger].params
            for alias, (pname, dom) in zip(t.trigger_params, params):
                if isinstance(dom, IntRange):
                    items += [(t.id, pname, v) for v in boundary_values(t, alias, dom)]
    return tuple(CoverageItem(criterion, k) for k in items)


def step_items(model: Model, step: Step, criterion: str) -> frozenset:
    """Items witnessed by a single step, including blocked/false arrival evaluations."""
    t = model.transition_map[step.fired]
    if criterion == "state":
        keys = {(step.source.control,), (step.target.control,)}
    elif criterion == "transition":
        keys = {(t.id,)}
    elif criterion == "requirement":
        keys = {(r,) for r in t.req_tags}
    elif criterion == "boundary_value":
        keys = set()
        params = model.event_map[t.trigger].params
        for alias, (pname, dom), v in zip(t.trigger_params, params, step.args):
            if isinstance(dom, IntRange) and v in boundary_values(t, alias, dom):
                keys.add((t.id, pname, v))
    else:
        keys = set()
        if criterion == "branch" and t.guarded:
            keys.add((t.id, "taken"))
        for u in model.outgoing.get(step.source.control, ()):
            if u.trigger != step.event:
                continue
            env = guard_env(model, u, step.source.valuation, step.args)
            if criterion == "branch":
                if u.guarded and not evaluate(u.guard, env):
                    keys.add((u.id, "blocked"))
            else:
                for i, atom in enumerate(atoms(u.guard)):
                    keys.add((u.id, i, bool(evaluate(atom, env))))
    return frozenset(CoverageItem(criterion, k) for k in keys)


def covered(trace: Trace, model: Model, criterion: str) -> frozenset:
    """Items witnessed by the steps of ``trace``."""
    _check_criterion(criterion)
    out = set()
    for step in trace.steps:
        out |= step_items(model, step, criterion)
    return frozenset(out)


def feasible(graph: ExplorationGraph, model: Model, criterion: str) -> frozenset:
    """Items witnessed by some trace of ``graph``."""
    _check_criterion(criterion)
    frontier = set(graph.frontier)
    out = set()
    for e in graph.edges:
        if e.source not in frontier:
            out |= step_items(model, e, criterion)
    return frozenset(out)


@dataclass(frozen=True)
class SelectionBudget:
    cost_per_test: Fraction = Fraction(0)
    cost_per_step: Fraction = Fraction(1)
    max_total_cost: Fraction | None = None  # None: unlimited

    def __post_init__(self):
        if self.cost_per_test < 0 or self.cost_per_step < 0:
            raise ValueError("costs must be non-negative")
        if self.max_total_cost is not None and self.max_total_cost <= 0:
            raise ValueError("max_total_cost must be positive")

    def cost(self, trace: Trace) -> Fraction:
        return Fraction(self.cost_per_test) + len(trace.steps) * Fraction(self.cost_per_step)

    def to_json(self):
        return {"cost_per_test": str(self.cost_per_test), "cost_per_step": str(self.cost_per_step),
                "max_total_cost": None if self.max_total_cost is None else str(self.max_total_cost)}


def candidate_traces(graph: ExplorationGraph, max_candidates: int | None = DEFAULT_MAX_CANDIDATES) -> list:
    """Deterministic candidate pool for selection.

    The first ``max_candidates`` traces of :func:`traces_of`, followed by one
    witness trace per edge not already in the pool, so that every feasible
    item stays coverable when the full trace set is too large to enumerate.
    """
    pool = list(itertools.islice(traces_of(graph), max_candidates))
    # steps are shared edge objects, so identity is a cheap stand-in for equality
    seen = {tuple(map(id, t.steps)) for t in pool}
    for w in witness_traces(graph):
        key = tuple(map(id, w.steps))
        if key not in seen:
            seen.add(key)
            pool.append(w)
    return pool


def select(graph: ExplorationGraph, model: Model, criterion: str,
           budget: SelectionBudget | None = None,
           max_candidates: int | None = DEFAULT_MAX_CANDIDATES) -> list:
    """Greedy (weighted) set cover over the candidate traces of ``graph``."""
    _check_criterion(criterion)
    pool = candidate_traces(graph, max_candidates)
    cache: dict = {}

    def items_of(trace):
        out = set()
        for s in trace.steps:
            k = id(s)
            if k not in cache:
                cache[k] = step_items(model, s, criterion)
            out |= cache[k]
        return frozenset(out)

    cand = [(i, t, items_of(t)) for i, t in enumerate(pool)]
    cand = [c for c in cand if c[2]]
    done: set = set()
    chosen = []
    spent = Fraction(0)
    while True:
        best = None
        for i, t, items in cand:
            gain = len(items - done)
            if not gain:
                continue
            if budget is not None:
                cost = budget.cost(t)
                if budget.max_total_cost is not None and spent + cost > budget.max_total_cost:
                    continue
                key = (0, -gain, len(t.steps), i) if cost == 0 else (1, -Fraction(gain) / cost, len(t.steps), i)
            else:
                key = (-gain, len(t.steps), i)
            if best is None or key < best[0]:
                best = (key, t, items)
        if best is None:
            break
        _, t, items = best
        chosen.append(t)
        done |= items
        if budget is not None:
            spent += budget.cost(t)
        cand = [c for c in cand if c[2] - done]
    return chosen


@dataclass(frozen=True)
class CoverageReport:
    criterion: str
    total: int
    covered: int
    ratio: float
    uncovered: tuple = ()
    infeasible: tuple = ()
    covered_items: tuple = field(default=(), repr=False)

    @property
    def feasible_ratio(self) -> float:
        denom = self.total - len(self.infeasible)
        return 1.0 if denom == 0 else self.covered / denom

    def to_json(self) -> dict:
        return {
            "criterion": self.criterion,
            "total": self.total,
            "covered": self.covered,
            "ratio": self.ratio,
            "feasible_ratio": self.feasible_ratio,
            "covered_keys": [i.label() for i in self.covered_items],
            "uncovered": [i.label() for i in self.uncovered],
            "infeasible": [i.label() for i in self.infeasible],
        }

    def table(self) -> str:
        head = ("criterion", "total", "covered", "ratio", "uncovered", "infeasible")
        row = (self.criterion, str(self.total), str(self.covered), f"{self.ratio:.3f}",
               " ".join(i.label() for i in self.uncovered) or "-",
               " ".join(i.label() for i in self.infeasible) or "-")
        widths = [max(len(a), len(b)) for a, b in zip(head, row)]
        fmt = " | ".join("{:<%d}" % w for w in widths)
        return "\n".join([fmt.format(*head), "-+-".join("-" * w for w in widths), fmt.format(*row)]) + "\n"


def report(selected, model: Model, criterion: str, graph: ExplorationGraph | None = None) -> CoverageReport:
    """Coverage accounting for ``selected`` traces.

    Goals never witnessed in ``graph`` (when given) are listed as infeasible
    instead of uncovered, so ``covered + len(uncovered) + len(infeasible) == total``.
    """
    all_goals = goals(model, criterion)
    hit = set()
    for t in selected:
        hit |= covered(t, model, criterion)
    reachable = feasible(graph, model, criterion) if graph is not None else None
    cov, unc, inf = [], [], []
    for g in all_goals:
        if g in hit:
            cov.append(g)
        elif reachable is not None and g not in reachable:
            inf.append(g)
        else:
            unc.append(g)
    total = len(all_goals)
    ratio = 1.0 if total == 0 else len(cov) / total
    return CoverageReport(criterion, total, len(cov), ratio, tuple(unc), tuple(inf), tuple(cov))
