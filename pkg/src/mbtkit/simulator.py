"""Reference SUT interpreted from a model, model mutants and mutation adequacy."""

from __future__ import annotations

import dataclasses
import itertools
import json
import random
from collections import deque
from dataclasses import dataclass, field

from .dsl import format_model
from .explorer import Bounds, ConcreteState, call_label, initial_state
from .model import (
    Arith, BoolOp, Compare, IfThenElse, IntLit, IntRange, Model, NEGATED_OP, Not,
    Output, ParamRef, VarRef, errors_only, evaluate, fire, guard_env, structural_errors,
    subexpressions, transition_scope,
)
from .testgen import EXPECT, SEND, SETTLE, Ref, TestCase, TestSuite

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"

OPERATORS = ("negate-guard-comparison", "retarget-transition", "drop-output",
             "perturb-constant", "swap-priority")


class ExecutionError(RuntimeError):
    """The executor could not drive the SUT (undeclared event, bad argument)."""


def sut_step(model: Model, state: ConcreteState, event: str, args: tuple):
    """Deterministic reaction to one stimulus: ``(outputs, next_state)``.

    The highest-priority enabled transition fires; equal priorities resolve
    to the first declared.  Without an enabled transition the stimulus is
    discarded and nothing is emitted.
    """
    best = None
    for t in model.outgoing.get(state.control, ()):
        if t.trigger != event:
            continue
        if evaluate(t.guard, guard_env(model, t, state.valuation, args)):
            if best is None or t.priority > best.priority:
                best = t
    if best is None:
        return (), state
    outputs, valuation = fire(model, best, state.valuation, args)
    return outputs, ConcreteState(best.target, valuation)


class Sut:
    """Mutable reference implementation of one model."""

    def __init__(self, model: Model):
        self.model = model
        self.state = initial_state(model)

    def reset(self):
        self.state = initial_state(self.model)

    def send(self, event: str, args: tuple = ()) -> tuple:
        ev = self.model.event_map.get(event)
        if ev is None or ev.direction != "stimulus":
            raise ExecutionError(f"{event!r} is not a stimulus of model {self.model.name}")
        if len(args) != len(ev.params) or not all(d.contains(a) for a, (_, d) in zip(args, ev.params)):
            raise ExecutionError(f"bad arguments {args!r} for {event}")
        outputs, self.state = sut_step(self.model, self.state, event, tuple(args))
        return outputs


@dataclass(frozen=True)
class ExecutionResult:
    test_id: str
    verdict: str
    failing_step: int | None = None
    reason: str = ""

    def to_json(self):
        return {"test": self.test_id, "verdict": self.verdict,
                "failing_step": self.failing_step, "reason": self.reason}


def run(tc: TestCase, sut: Sut) -> ExecutionResult:
    """Execute ``tc`` from a freshly reset SUT; the first mismatch fails the test."""
    sut.reset()
    pending: deque = deque()
    model = sut.model
    steps = tc.steps
    for i, step in enumerate(steps):
        if any(isinstance(a, Ref) for a in step.args):
            return ExecutionResult(tc.id, INCONCLUSIVE, None, f"step {i} has unbound parameters")
        if step.kind == SEND:
            if pending:
                return ExecutionResult(tc.id, FAIL, i, f"unexpected observation {pending[0][0]}")
            try:
                pending.extend(sut.send(step.event, step.args))
            except ExecutionError as exc:
                return ExecutionResult(tc.id, INCONCLUSIVE, None, str(exc))
        elif step.kind == EXPECT:
            ev = model.event_map.get(step.event)
            if ev is None or ev.direction != "observation":
                return ExecutionResult(tc.id, INCONCLUSIVE, None, f"{step.event!r} is not an observation")
            if not pending:
                return ExecutionResult(tc.id, FAIL, i, f"expected {step.event}, observed nothing")
            got = pending.popleft()
            if got != (step.event, tuple(step.args)):
                return ExecutionResult(tc.id, FAIL, i, f"expected {step.event}{tuple(step.args)}, observed {got[0]}{got[1]}")
        elif step.kind == SETTLE:
            if pending:
                return ExecutionResult(tc.id, FAIL, i, f"unexpected observation {pending[0][0]}")
        else:
            return ExecutionResult(tc.id, INCONCLUSIVE, None, f"unknown step kind {step.kind!r}")
    if pending:
        return ExecutionResult(tc.id, FAIL, len(steps), f"unexpected observation {pending[0][0]}")
    return ExecutionResult(tc.id, PASS)


# -- mutation -------------------------------------------------------------------


@dataclass(frozen=True)
class Mutation:
    operator: str
    transition: str
    detail: str

    def __str__(self):
        return f"{self.operator}({self.transition}: {self.detail})"


def _rewrite(expr, pred, fn, n):
    """Replace the n-th (preorder) subexpression satisfying ``pred`` by ``fn(node)``."""
    counter = itertools.count()

    def walk(e):
        if pred(e) and next(counter) == n:
            return fn(e)
        if not dataclasses.is_dataclass(e):
            return e
        changes = {}
        for f in dataclasses.fields(e):
            child = getattr(e, f.name)
            if dataclasses.is_dataclass(child):
                new = walk(child)
                if new is not child:
                    changes[f.name] = new
        return dataclasses.replace(e, **changes) if changes else e

    return walk(expr)


def _int_domain(expr, scope):
    for e in subexpressions(expr):
        if type(e) in (VarRef, ParamRef) and isinstance(scope.get(e.name), IntRange):
            return scope[e.name]
    return None


def _literal_contexts(expr, scope, ctx=None) -> list:
    """Domains giving each integer literal (preorder) its meaningful range, or None."""
    t = type(expr)
    if t is IntLit:
        return [ctx]
    if t is Compare:
        dl, dr = _int_domain(expr.left, scope), _int_domain(expr.right, scope)
        return _literal_contexts(expr.left, scope, dr or dl) + _literal_contexts(expr.right, scope, dl or dr)
    if t is Arith:
        return _literal_contexts(expr.left, scope, ctx) + _literal_contexts(expr.right, scope, ctx)
    if t is Not:
        return _literal_contexts(expr.operand, scope, None)
    if t is BoolOp:
        return _literal_contexts(expr.left, scope, None) + _literal_contexts(expr.right, scope, None)
    if t is IfThenElse:
        return (_literal_contexts(expr.cond, scope, None) + _literal_contexts(expr.then, scope, ctx)
                + _literal_contexts(expr.orelse, scope, ctx))
    return []


def _perturb(value, domain):
    if domain is None:
        return None
    for cand in (value + 1, value - 1):
        if domain.contains(cand):
            return cand
    return None


def _is_int_lit(e):
    return type(e) is IntLit


def _candidate_mutations(model: Model):
    trans = list(model.transitions)
    for k, t in enumerate(trans):
        def with_t(**changes):
            new = list(trans)
            new[k] = dataclasses.replace(t, **changes)
            return model.replace(transitions=tuple(new))

        scope = transition_scope(model, t)
        ncmp = sum(1 for e in subexpressions(t.guard) if type(e) is Compare)
        for i in range(ncmp):
            guard = _rewrite(t.guard, lambda e: type(e) is Compare,
                             lambda e: Compare(NEGATED_OP[e.op], e.left, e.right), i)
            yield Mutation("negate-guard-comparison", t.id, f"comparison {i}"), with_t(guard=guard)
        for s in model.states:
            if s != t.target:
                yield Mutation("retarget-transition", t.id, f"{t.target} -> {s}"), with_t(target=s)
        for i, out in enumerate(t.outputs):
            outs = t.outputs[:i] + t.outputs[i + 1:]
            yield Mutation("drop-output", t.id, f"{out.event} (output {i})"), with_t(outputs=outs)
        # integer constants in guard, actions and output arguments
        for i, ctx in enumerate(_literal_contexts(t.guard, scope)):
            lit = _nth_literal(t.guard, i)
            new = _perturb(lit, ctx)
            if new is not None:
                guard = _rewrite(t.guard, _is_int_lit, lambda e: IntLit(new), i)
                yield Mutation("perturb-constant", t.id, f"guard literal {i}: {lit} -> {new}"), with_t(guard=guard)
        for a, (var, rhs) in enumerate(t.actions):
            dom = model.variable_map[var].domain
            for i, ctx in enumerate(_literal_contexts(rhs, scope, dom if isinstance(dom, IntRange) else None)):
                lit = _nth_literal(rhs, i)
                new = _perturb(lit, ctx)
                if new is not None:
                    actions = list(t.actions)
                    actions[a] = (var, _rewrite(rhs, _is_int_lit, lambda e: IntLit(new), i))
                    yield (Mutation("perturb-constant", t.id, f"action {var} literal {i}: {lit} -> {new}"),
                           with_t(actions=tuple(actions)))
        for o, out in enumerate(t.outputs):
            doms = [d for _, d in model.event_map[out.event].params]
            for p, (arg, dom) in enumerate(zip(out.args, doms)):
                for i, ctx in enumerate(_literal_contexts(arg, scope, dom if isinstance(dom, IntRange) else None)):
                    lit = _nth_literal(arg, i)
                    new = _perturb(lit, ctx)
                    if new is not None:
                        args = list(out.args)
                        args[p] = _rewrite(arg, _is_int_lit, lambda e: IntLit(new), i)
                        outs = list(t.outputs)
                        outs[o] = Output(out.event, tuple(args))
                        yield (Mutation("perturb-constant", t.id, f"output {out.event} arg {p} literal {i}: {lit} -> {new}"),
                               with_t(outputs=tuple(outs)))
    for a, b in itertools.combinations(range(len(trans)), 2):
        ta, tb = trans[a], trans[b]
        if ta.source == tb.source and ta.trigger == tb.trigger and ta.priority != tb.priority:
            new = list(trans)
            new[a] = dataclasses.replace(ta, priority=tb.priority)
            new[b] = dataclasses.replace(tb, priority=ta.priority)
            yield Mutation("swap-priority", ta.id, f"{ta.id} <-> {tb.id}"), model.replace(transitions=tuple(new))


def _nth_literal(expr, n):
    lits = [e.value for e in subexpressions(expr) if type(e) is IntLit]
    return lits[n]


def all_mutants(model: Model) -> list:
    """Every distinct, structurally valid single-operator mutant, in a fixed order."""
    original = format_model(model)
    seen = {original}
    out = []
    for mutation, mutant in _candidate_mutations(model):
        if errors_only(structural_errors(mutant)):
            continue
        text = format_model(mutant)
        if text in seen:
            continue
        seen.add(text)
        out.append((mutation, mutant))
    return out


def mutate(model: Model, seed: int, count: int) -> list:
    """Up to ``count`` distinct mutants, sampled deterministically by ``seed``."""
    pool = all_mutants(model)
    if len(pool) <= count:
        return pool
    picked = sorted(random.Random(seed).sample(range(len(pool)), count))
    return [pool[i] for i in picked]


# -- adequacy -------------------------------------------------------------------


def _stimulus_alphabet(model: Model) -> list:
    alphabet = []
    for ev in model.events:
        if ev.direction == "stimulus":
            for args in itertools.product(*(d.values() for _, d in ev.params)):
                alphabet.append((ev.name, args))
    return alphabet


def distinguishing_sequence(model: Model, mutant: Model, bounds: Bounds = Bounds()):
    """Shortest stimulus sequence (within ``bounds``) whose outputs differ, or None.

    Breadth-first over pairs of deterministic SUT states; both models must
    share the stimulus alphabet.
    """
    alphabet = _stimulus_alphabet(model)
    start = (initial_state(model), initial_state(mutant))
    parent = {start: None}
    queue = deque([(start, 0)])
    while queue:
        pair, depth = queue.popleft()
        if depth >= bounds.max_depth:
            continue
        for ev, args in alphabet:
            out_a, na = sut_step(model, pair[0], ev, args)
            out_b, nb = sut_step(mutant, pair[1], ev, args)
            if out_a != out_b:
                seq = [(ev, args)]
                p = pair
                while parent[p] is not None:
                    p, stim = parent[p]
                    seq.append(stim)
                return seq[::-1]
            nxt = (na, nb)
            if nxt not in parent and len(parent) < bounds.max_nodes:
                parent[nxt] = (pair, (ev, args))
                queue.append((nxt, depth + 1))
    return None


@dataclass(frozen=True)
class AdequacyReport:
    total: int
    killed: int
    survived: int
    equivalent: int
    score: float
    mutants: tuple = field(default=())

    def to_json(self) -> dict:
        return {"total": self.total, "killed": self.killed, "survived": self.survived,
                "equivalent": self.equivalent, "score": self.score, "per_mutant": list(self.mutants)}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"


def adequacy(suite: TestSuite, model: Model, mutants, bounds: Bounds = Bounds()) -> AdequacyReport:
    """Classify each mutant as killed, equivalent within bounds, or survived."""
    rows = []
    killed = survived = equivalent = 0
    for mutation, mutant in mutants:
        sut = Sut(mutant)
        killer = None
        for tc in suite.cases:
            if run(tc, sut).verdict == FAIL:
                killer = tc.id
                break
        row = {"operator": mutation.operator, "mutation": str(mutation), "killing_test": killer}
        if killer is not None:
            killed += 1
            row["status"] = "killed"
        else:
            seq = distinguishing_sequence(model, mutant, bounds)
            if seq is None:
                equivalent += 1
                row["status"] = "equivalent"
            else:
                survived += 1
                row["status"] = "survived"
                row["distinguishing_sequence"] = [call_label(ev, args) for ev, args in seq]
        rows.append(row)
    total = len(rows)
    denom = total - equivalent
    score = 1.0 if denom == 0 else killed / denom
    return AdequacyReport(total, killed, survived, equivalent, score, tuple(rows))
