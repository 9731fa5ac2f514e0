"""Independent reference implementations used to check the engine.

Nothing here calls the engine's evaluator, explorer, selector or executor;
only the parsed model data structures are shared.
"""

from __future__ import annotations

import itertools
import math
from collections import deque

from mbtkit import model as M


# -- semantics --------------------------------------------------------------


def ev(expr, env):
    if isinstance(expr, (M.IntLit, M.BoolLit, M.SymLit)):
        return expr.value
    if isinstance(expr, (M.VarRef, M.ParamRef)):
        return env[expr.name]
    if isinstance(expr, M.Not):
        return not ev(expr.operand, env)
    if isinstance(expr, M.BoolOp):
        a = ev(expr.left, env)
        if expr.op == "and":
            return a and ev(expr.right, env)
        return a or ev(expr.right, env)
    if isinstance(expr, M.Arith):
        a, b = ev(expr.left, env), ev(expr.right, env)
        return a + b if expr.op == "+" else a - b
    if isinstance(expr, M.IfThenElse):
        return ev(expr.then, env) if ev(expr.cond, env) else ev(expr.orelse, env)
    if isinstance(expr, M.Compare):
        a, b = ev(expr.left, env), ev(expr.right, env)
        return {"=": a == b, "!=": a != b, "<": a < b, "<=": a <= b, ">": a > b, ">=": a >= b}[expr.op]
    raise TypeError(expr)


def clamp(domain, v):
    if isinstance(domain, M.IntRange):
        return min(max(v, domain.lo), domain.hi)
    return v


def env_of(t, valuation, args):
    env = dict(valuation)
    for name, a in zip(t.trigger_params, args):
        env[name] = a
    return env


def apply(model, t, valuation, args):
    env = env_of(t, valuation, args)
    doms = {v.name: v.domain for v in model.variables}
    for var, rhs in t.actions:
        env[var] = clamp(doms[var], ev(rhs, env))
    outs = []
    events = {e.name: e for e in model.events}
    for o in t.outputs:
        pdoms = [d for _, d in events[o.event].params]
        outs.append((o.event, tuple(clamp(d, ev(a, env)) for a, d in zip(o.args, pdoms))))
    return tuple(outs), tuple((v.name, env[v.name]) for v in model.variables)


def alphabet(model):
    out = []
    for e in model.events:
        if e.direction == "stimulus":
            doms = [list(d.values()) for _, d in e.params]
            for args in itertools.product(*doms):
                out.append((e.name, tuple(args)))
    return out


def initial(model):
    return (model.initial_state, tuple((v.name, v.initial) for v in model.variables))


def reactions(model, state, event, args):
    """All max-priority enabled transitions: ``[(tid, outputs, next_state, nondet)]``."""
    control, valuation = state
    enabled = [t for t in model.transitions
               if t.source == control and t.trigger == event and ev(t.guard, env_of(t, valuation, args))]
    if not enabled:
        return []
    top = max(t.priority for t in enabled)
    winners = [t for t in enabled if t.priority == top]
    out = []
    for t in winners:
        outs, val = apply(model, t, valuation, args)
        out.append((t.id, outs, (t.target, val), len(winners) > 1))
    return out


def det_step(model, state, event, args):
    """Deterministic SUT step: highest priority, then first declared; no transition -> unchanged."""
    r = reactions(model, state, event, args)
    if not r:
        return (), state
    _, outs, nxt, _ = r[0]
    return outs, nxt


# -- exploration ------------------------------------------------------------


def brute_force_explore(model, depth):
    """Enumerate every stimulus sequence of length <= depth.

    Returns ``(nodes, edges, frontier)`` as sets; an edge is
    ``(src, event, args, tid, outputs, dst, nondet)``.
    """
    alpha = alphabet(model)
    nodes, edges, interior = set(), set(), set()
    init = initial(model)
    nodes.add(init)

    def walk(state, remaining):
        if remaining == 0:
            return
        for event, args in alpha:
            for tid, outs, nxt, nondet in reactions(model, state, event, args):
                interior.add(state)
                edges.add((state, event, args, tid, outs, nxt, nondet))
                nodes.add(nxt)
                walk(nxt, remaining - 1)

    walk(init, depth)
    # a state is on the frontier when it has moves but is never reached early
    # enough to expand: its shortest distance equals the depth bound
    dist = {init: 0}
    level = [init]
    for d in range(1, depth + 1):
        nxt_level = []
        for s in level:
            for event, args in alpha:
                for _, _, n, _ in reactions(model, s, event, args):
                    if n not in dist:
                        dist[n] = d
                        nxt_level.append(n)
        level = nxt_level
    frontier = {s for s, d in dist.items()
                if d == depth and any(reactions(model, s, e, a) for e, a in alpha)}
    edges = {e for e in edges if dist[e[0]] < depth}
    return nodes, edges, frontier


def graph_sets(graph):
    def st(s):
        return (s.control, s.valuation)
    nodes = {st(n) for n in graph.nodes}
    edges = {(st(e.source), e.event, tuple(e.args), e.fired, tuple(e.outputs), st(e.target), e.nondeterministic)
             for e in graph.edges}
    frontier = {st(n) for n in graph.frontier}
    return nodes, edges, frontier


# -- execution --------------------------------------------------------------


def replay(model, testcase) -> bool:
    """True iff the test case passes on the deterministic interpretation of ``model``."""
    state = initial(model)
    pending = deque()
    for step in testcase.steps:
        if step.kind == "send":
            if pending:
                return False
            outs, state = det_step(model, state, step.event, tuple(step.args))
            pending.extend(outs)
        elif step.kind == "expect":
            if not pending or pending.popleft() != (step.event, tuple(step.args)):
                return False
        elif pending:
            return False
    return not pending


def bounded_equivalent(a, b, depth, max_pairs=100_000) -> bool:
    """No stimulus sequence of length <= depth makes the two models' outputs differ."""
    alpha = alphabet(a)
    start = (initial(a), initial(b))
    seen = {start}
    frontier = [start]
    for _ in range(depth):
        nxt = []
        for sa, sb in frontier:
            for event, args in alpha:
                oa, na = det_step(a, sa, event, args)
                ob, nb = det_step(b, sb, event, args)
                if oa != ob:
                    return False
                if (na, nb) not in seen and len(seen) < max_pairs:
                    seen.add((na, nb))
                    nxt.append((na, nb))
        frontier = nxt
    return True


# -- set cover --------------------------------------------------------------


def minimum_cover_size(sets, universe) -> int:
    """Exact minimum number of ``sets`` whose union is ``universe``.

    Dominated sets (proper subsets of another) are dropped first, then subsets
    are tried in increasing size.
    """
    universe = frozenset(universe)
    distinct = {frozenset(s) & universe for s in sets}
    distinct.discard(frozenset())
    kept = [s for s in distinct if not any(s < o for o in distinct)]
    kept.sort(key=lambda s: (-len(s), sorted(map(str, s))))
    if not universe:
        return 0
    if frozenset().union(*kept) != universe:
        raise ValueError("universe not coverable")
    for k in range(1, len(kept) + 1):
        for combo in itertools.combinations(kept, k):
            if frozenset().union(*combo) == universe:
                return k
    raise AssertionError("unreachable")


def greedy_bound(n_items: int) -> float:
    return math.log(n_items) + 1 if n_items else 1.0
