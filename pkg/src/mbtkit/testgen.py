"""Abstract test cases, test purposes and parameterization from selected traces."""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field

from . import __version__
from .coverage import CRITERIA, CoverageReport, SelectionBudget, covered, report, select, step_items
from .dsl import format_model
from .explorer import Bounds, ExplorationGraph, Trace
from .model import Model, format_value

log = logging.getLogger(__name__)

SEND, EXPECT, SETTLE = "send", "expect", "settle"


class TestGenerationError(ValueError):
    __test__ = False


class NondeterministicTraceError(TestGenerationError):
    def __init__(self, index, step):
        self.index = index
        self.step = step
        super().__init__(
            f"step {index} ({step.stimulus_label()} at {step.source.label()}) passes through an "
            f"equal-priority nondeterministic choice")


@dataclass(frozen=True)
class Ref:
    """Reference to a test case parameter, used in place of a literal argument."""
    name: str


@dataclass(frozen=True)
class TestStep:
    __test__ = False

    kind: str
    event: str | None = None
    args: tuple = ()

    def label(self) -> str:
        if self.kind == SETTLE:
            return "settle"
        args = ", ".join(a.name if isinstance(a, Ref) else format_value(a) for a in self.args)
        call = f"{self.event}({args})" if self.args else self.event
        return f"{'!' if self.kind == SEND else '?'}{call}"

    def to_json(self):
        d = {"kind": self.kind}
        if self.kind != SETTLE:
            d["event"] = self.event
            d["args"] = [{"param": a.name} if isinstance(a, Ref) else a for a in self.args]
        return d


@dataclass(frozen=True)
class TestCase:
    __test__ = False

    id: str
    purpose_ref: str
    preamble: tuple
    body: tuple
    postamble: tuple = ()
    req_refs: tuple = ()
    default_behavior: str = "fail"
    source_trace: Trace | None = field(default=None, compare=False)

    @property
    def steps(self) -> tuple:
        return self.preamble + self.body + self.postamble

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "purpose": self.purpose_ref,
            "req_refs": list(self.req_refs),
            "default_behavior": self.default_behavior,
            "preamble": [s.to_json() for s in self.preamble],
            "body": [s.to_json() for s in self.body],
            "postamble": [s.to_json() for s in self.postamble],
        }
        if self.source_trace is not None:
            d["source_trace"] = [
                {"event": s.event, "args": list(s.args), "fired": s.fired} for s in self.source_trace.steps]
        return d


@dataclass(frozen=True)
class TestPurpose:
    __test__ = False

    id: str
    test_case: str
    summary: str
    initial_condition: str
    stimulus_reaction: tuple
    req_refs: tuple

    @property
    def untraced(self) -> bool:
        return not self.req_refs

    def to_json(self) -> dict:
        return {"id": self.id, "test_case": self.test_case, "summary": self.summary,
                "initial_condition": self.initial_condition,
                "stimulus_reaction": list(self.stimulus_reaction),
                "req_refs": list(self.req_refs), "untraced": self.untraced}


def model_tag(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", name).upper()


def testcase_id(model: Model, criterion: str, number: int) -> str:
    return f"TC_{model_tag(model.name)}_{criterion.upper()}_{number:03d}"


def purpose_id(tc_id: str) -> str:
    """``TC_<MODEL>_<CRITERION>_<NNN>`` -> ``TP_<MODEL>_<NNN>``."""
    for crit in sorted(CRITERIA, key=len, reverse=True):
        marker = f"_{crit.upper()}_"
        if marker in tc_id:
            head, num = tc_id.removeprefix("TC_").rsplit(marker, 1)
            return f"TP_{head}_{num}"
    return "TP_" + tc_id.removeprefix("TC_")


def _expand(steps) -> list:
    out = []
    for s in steps:
        out.append(TestStep(SEND, s.event, s.args))
        if s.outputs:
            out.extend(TestStep(EXPECT, ev, args) for ev, args in s.outputs)
        else:
            out.append(TestStep(SETTLE))
    return out


def trace_to_testcase(trace: Trace, model: Model, id: str, criterion: str | None = None,
                      already_covered=frozenset(), purpose_ref: str | None = None) -> TestCase:
    """Turn a trace into a test case.

    With ``criterion`` given, the steps before the first one that covers an
    item outside ``already_covered`` form the preamble.
    """
    if not trace.steps:
        raise TestGenerationError(f"{id}: empty trace gives an empty test body")
    for i, s in enumerate(trace.steps):
        if s.nondeterministic:
            raise NondeterministicTraceError(i, s)
    split = 0
    if criterion is not None:
        for i, s in enumerate(trace.steps):
            if step_items(model, s, criterion) - already_covered:
                split = i
                break
    reqs = sorted(i.key[0] for i in covered(trace, model, "requirement"))
    return TestCase(
        id=id,
        purpose_ref=purpose_ref or purpose_id(id),
        preamble=tuple(_expand(trace.steps[:split])),
        body=tuple(_expand(trace.steps[split:])),
        postamble=(),
        req_refs=tuple(reqs),
        default_behavior="fail",
        source_trace=trace,
    )


def _describe_state(state, initial: bool) -> str:
    where = f"its initial state {state.control}" if initial else f"state {state.control}"
    if state.valuation:
        vals = ", ".join(f"{k} = {format_value(v)}" for k, v in state.valuation)
        return f"the IUT is in {where} with {vals}"
    return f"the IUT is in {where}"


def _sentences(steps) -> list:
    lines = []
    for s in steps:
        if s.kind == SEND:
            lines.append([f"when the IUT receives {TestStep(SEND, s.event, s.args).label()[1:]}", []])
        elif s.kind == EXPECT:
            lines[-1][1].append(TestStep(EXPECT, s.event, s.args).label()[1:])
    return [f"{w} then the IUT sends {', '.join(r) if r else 'nothing'}" for w, r in lines]


def derive_test_purpose(tc: TestCase, model: Model) -> TestPurpose:
    trace = tc.source_trace
    n_pre = sum(1 for s in tc.preamble if s.kind == SEND)
    if trace is not None:
        state = trace.steps[n_pre - 1].target if n_pre else trace.start
        initial = _describe_state(state, n_pre == 0)
    else:
        initial = "the IUT is in its initial state"
    stimuli = [TestStep(SEND, s.event, s.args).label()[1:] for s in tc.body if s.kind == SEND]
    reactions = [TestStep(EXPECT, s.event, s.args).label()[1:] for s in tc.body if s.kind == EXPECT]
    summary = f"Check that the IUT reacts to {', '.join(stimuli)} with {', '.join(reactions) or 'no output'}"
    if tc.req_refs:
        summary += f" as required by {', '.join(tc.req_refs)}."
    else:
        summary += " (untraced)."
    return TestPurpose(
        id=tc.purpose_ref, test_case=tc.id, summary=summary, initial_condition=initial,
        stimulus_reaction=tuple(_sentences(tc.body)), req_refs=tc.req_refs)


# -- parameterization ---------------------------------------------------------


@dataclass(frozen=True)
class TestParameter:
    __test__ = False

    name: str
    domain: object
    default: object

    def to_json(self):
        return {"name": self.name, "domain": str(self.domain), "default": self.default}


@dataclass(frozen=True)
class ParameterizedTestCase:
    base: TestCase
    params: tuple
    preamble: tuple
    body: tuple
    postamble: tuple = ()

    def instantiate(self, values: dict | None = None) -> TestCase:
        env = {p.name: p.default for p in self.params}
        env.update(values or {})

        def sub(steps):
            return tuple(TestStep(s.kind, s.event, tuple(env[a.name] if isinstance(a, Ref) else a for a in s.args))
                         for s in steps)

        return TestCase(self.base.id, self.base.purpose_ref, sub(self.preamble), sub(self.body),
                        sub(self.postamble), self.base.req_refs, self.base.default_behavior,
                        self.base.source_trace)

    def to_json(self) -> dict:
        return {"id": self.base.id, "params": [p.to_json() for p in self.params],
                "preamble": [s.to_json() for s in self.preamble],
                "body": [s.to_json() for s in self.body],
                "postamble": [s.to_json() for s in self.postamble]}


def parameterize(tc: TestCase, model: Model) -> ParameterizedTestCase:
    """Lift stimulus arguments to parameters ``P1, P2, ...``.

    Equal stimulus values of the same domain share one parameter; expected
    observation arguments equal to a lifted value refer to that parameter.
    """
    params = []
    by_value: dict = {}

    def lift(steps):
        out = []
        for s in steps:
            if s.kind == SEND:
                doms = [d for _, d in model.event_map[s.event].params]
                args = []
                for v, d in zip(s.args, doms):
                    key = (type(v), v, d)
                    if key not in by_value:
                        p = TestParameter(f"P{len(params) + 1}", d, v)
                        params.append(p)
                        by_value[key] = p
                    args.append(Ref(by_value[key].name))
                out.append(TestStep(s.kind, s.event, tuple(args)))
            elif s.kind == EXPECT:
                args = []
                for v in s.args:
                    match = next((p for (ty, pv, _), p in by_value.items() if ty is type(v) and pv == v), None)
                    args.append(Ref(match.name) if match else v)
                out.append(TestStep(s.kind, s.event, tuple(args)))
            else:
                out.append(s)
        return tuple(out)

    pre, body, post = lift(tc.preamble), lift(tc.body), lift(tc.postamble)
    return ParameterizedTestCase(tc, tuple(params), pre, body, post)


# -- suites -------------------------------------------------------------------


@dataclass(frozen=True)
class TestSuite:
    __test__ = False

    name: str
    criterion: str
    cases: tuple
    purposes: tuple
    metadata: dict = field(default_factory=dict, compare=False)

    def to_json(self, model: Model | None = None) -> dict:
        d = {
            "suite": {"name": self.name, "criterion": self.criterion, "metadata": self.metadata},
            "cases": [c.to_json() for c in self.cases],
            "purposes": [p.to_json() for p in self.purposes],
        }
        if model is not None:
            d["parameterized"] = [parameterize(c, model).to_json() for c in self.cases]
        return d

    def dumps(self, model: Model | None = None) -> str:
        return json.dumps(self.to_json(model), indent=2, sort_keys=True) + "\n"


def model_hash(model: Model) -> str:
    return hashlib.sha256(format_model(model).encode("utf-8")).hexdigest()


def build_suite(model: Model, graph: ExplorationGraph, criterion: str, bounds: Bounds,
                budget: SelectionBudget | None = None, extra_metadata: dict | None = None,
                **select_kwargs) -> tuple:
    """Select traces and generate a suite; returns ``(TestSuite, CoverageReport)``.

    Traces through nondeterministic choice points are rejected and listed in
    the suite metadata rather than silently dropped.
    """
    traces = select(graph, model, criterion, budget, **select_kwargs)
    cases, purposes, kept, rejected = [], [], [], []
    done: frozenset = frozenset()
    for trace in traces:
        tc_id = testcase_id(model, criterion, len(cases) + 1)
        try:
            tc = trace_to_testcase(trace, model, tc_id, criterion, done)
        except NondeterministicTraceError as exc:
            log.warning("rejected trace %s: %s", " ".join(trace.stimuli()), exc)
            rejected.append({"trace": trace.stimuli(), "reason": str(exc)})
            continue
        done = done | covered(trace, model, criterion)
        kept.append(trace)
        cases.append(tc)
        purposes.append(derive_test_purpose(tc, model))
    rep: CoverageReport = report(kept, model, criterion, graph)
    metadata = {
        "model": model.name,
        "model_sha256": model_hash(model),
        "criterion": criterion,
        "bounds": bounds.to_json(),
        "seed": bounds.seed,
        "budget": None if budget is None else budget.to_json(),
        "tool": "mbtkit",
        "tool_version": __version__,
        "graph": {"nodes": len(graph.nodes), "edges": len(graph.edges), "frontier": len(graph.frontier)},
        "rejected": rejected,
    }
    metadata.update(extra_metadata or {})
    suite = TestSuite(model.name, criterion, tuple(cases), tuple(purposes), metadata)
    return suite, rep
