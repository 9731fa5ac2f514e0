"""ETSI-style test documentation: TSS, TP, TD and TC documents plus traceability."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .model import Model
from .testgen import EXPECT, SEND, SETTLE, TestSuite, model_tag

UNTRACED = "UNTRACED"
DOCUMENTS = ("TSS", "TP", "TD", "TC", "traceability")


class DanglingReferenceError(RuntimeError):
    """A rendered document cites an identifier no document defines."""


@dataclass(frozen=True)
class Group:
    name: str
    description: str
    cases: tuple = ()
    children: tuple = ()

    def leaves(self):
        if not self.children:
            yield self
        for c in self.children:
            yield from c.leaves()

    def to_json(self):
        return {"name": self.name, "description": self.description, "cases": list(self.cases),
                "children": [c.to_json() for c in self.children]}


@dataclass(frozen=True)
class TestSuiteStructure:
    __test__ = False

    root: Group

    def leaf_groups(self) -> list:
        if not self.root.children:
            return []
        return list(self.root.leaves())


def _first_body_requirement(tc, model: Model):
    """First requirement witnessed in the body, else the first one overall."""
    trace = tc.source_trace
    if trace is not None:
        n_pre = sum(1 for s in tc.preamble if s.kind == SEND)
        for step in trace.steps[n_pre:]:
            tags = sorted(model.transition_map[step.fired].req_tags)
            if tags:
                return tags[0]
    return tc.req_refs[0] if tc.req_refs else None


def _group_path(clause: str) -> tuple:
    """Group path of a clause reference: all ``/`` segments but the last one."""
    parts = [p for p in clause.split("/") if p]
    if len(parts) > 1:
        parts = parts[:-1]
    return tuple(parts) or (UNTRACED,)


def build_tss(suite: TestSuite, model: Model) -> TestSuiteStructure:
    """Group cases by the clause of their first body-covered requirement.

    The top level is the clause text before the first ``/``; deeper clause
    segments (except the final, clause-specific one) become subgroups.
    """
    tree: dict = {}
    for tc in suite.cases:
        req = _first_body_requirement(tc, model)
        clause = model.requirement_map[req].clause if req else ""
        path = _group_path(clause) if req else (UNTRACED,)
        node = tree
        for part in path:
            node = node.setdefault(part, {"cases": [], "children": {}})
            last = node
            node = node["children"]
        last["cases"].append(tc.id)

    def build(name, prefix, node):
        full = f"{prefix}/{name}" if prefix else name
        children = tuple(build(k, full, v) for k, v in sorted(node["children"].items()))
        desc = "Test cases without requirement references" if full == UNTRACED else \
            f"Test cases for requirements with clause prefix {full}"
        return Group(full, desc, tuple(node["cases"]), children)

    children = tuple(build(k, "", v) for k, v in sorted(tree.items()))
    return TestSuiteStructure(Group(model.name, f"Test suite structure of {model.name}", (), children))


@dataclass(frozen=True)
class MatrixRow:
    requirement: str
    clause: str
    status: str  # covered | uncovered | excluded-by-profile
    cases: tuple = ()


def traceability(suite: TestSuite, model: Model) -> tuple:
    rows = []
    for r in model.requirements:
        cases = tuple(tc.id for tc in suite.cases if r.id in tc.req_refs)
        if r.id in model.excluded_requirements:
            status = "excluded-by-profile"
        elif cases:
            status = "covered"
        else:
            status = "uncovered"
        rows.append(MatrixRow(r.id, r.clause, status, cases))
    return tuple(rows)


@dataclass(frozen=True)
class DocumentBundle:
    texts: dict = field(default_factory=dict)  # name -> markdown
    sidecars: dict = field(default_factory=dict)  # name -> json-able
    matrix: tuple = ()
    warnings: tuple = ()

    def files(self) -> dict:
        out = {}
        for name in DOCUMENTS:
            out[f"{name}.md"] = self.texts[name]
            out[f"{name}.json"] = json.dumps(self.sidecars[name], indent=2, sort_keys=True) + "\n"
        return out

    def write(self, outdir) -> list:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        written = []
        for fname, text in self.files().items():
            path = outdir / fname
            path.write_text(text, encoding="utf-8")
            written.append(path)
        return written


def _args(step) -> str:
    return ", ".join(str(a).lower() if isinstance(a, bool) else str(a) for a in step.args)


def _call(step) -> str:
    return f"{step.event}({_args(step)})" if step.args else step.event


def _render_tss(structure: TestSuiteStructure, model: Model) -> str:
    lines = [f"# Test Suite Structure: {model.name}", ""]

    def emit(group, number, level):
        lines.append(f"{'#' * min(level, 6)} {number} {group.name}")
        lines.append("")
        lines.append(group.description + ".")
        lines.append("")
        for cid in group.cases:
            lines.append(f"- {cid}")
        if group.cases:
            lines.append("")
        for i, child in enumerate(group.children, start=1):
            emit(child, f"{number}.{i}", level + 1)

    if not structure.root.children:
        lines += ["The suite contains no test cases.", ""]
    for i, g in enumerate(structure.root.children, start=1):
        emit(g, str(i), 2)
    return "\n".join(lines)


def _render_tp(suite: TestSuite, model: Model) -> str:
    lines = [f"# Test Purposes: {model.name}", ""]
    if not suite.purposes:
        lines += ["No test purposes.", ""]
    for p in suite.purposes:
        lines += [f"## {p.id}", "",
                  "| Field | Value |", "|---|---|",
                  f"| Test case | {p.test_case} |",
                  f"| Summary | {p.summary} |",
                  f"| Requirements | {', '.join(p.req_refs) if p.req_refs else 'none (untraced)'} |",
                  f"| Initial condition | with {{ {p.initial_condition} }} |", ""]
        lines.append("Expected behaviour:")
        lines.append("")
        lines.append("```")
        lines.append("ensure that {")
        for s in p.stimulus_reaction:
            lines.append(f"    {s}")
        lines.append("}")
        lines.append("```")
        lines.append("")
    return "\n".join(lines)


def _td_id(tc_id: str, suite: TestSuite) -> str:
    p = next(p for p in suite.purposes if p.test_case == tc_id)
    return "TD_" + p.id.removeprefix("TP_")


def _render_td(suite: TestSuite, model: Model) -> str:
    lines = [f"# Test Descriptions: {model.name}", ""]
    if not suite.cases:
        lines += ["No test descriptions.", ""]
    for tc in suite.cases:
        lines += [f"## {_td_id(tc.id, suite)}", "",
                  f"Test purpose: {tc.purpose_ref}. Test case: {tc.id}.", "",
                  "| Step | Direction and event | Verdict contribution |",
                  "|---|---|---|"]
        n = 0
        for part, steps in (("preamble", tc.preamble), ("body", tc.body), ("postamble", tc.postamble)):
            for s in steps:
                n += 1
                if s.kind == SEND:
                    row = (f"stimulus: tester sends {_call(s)}", f"none ({part})")
                elif s.kind == EXPECT:
                    row = (f"observation: IUT sends {_call(s)}",
                           "pass if received, fail otherwise" if part == "body" else f"fail if absent ({part})")
                else:
                    row = ("observation: no further output", "fail on any output")
                lines.append(f"| {n} | {row[0]} | {row[1]} |")
        lines.append("")
    return "\n".join(lines)


def _render_tc(suite: TestSuite, model: Model) -> str:
    lines = [f"# Test Cases: {model.name}", "",
             f"Selection criterion: {suite.criterion}.", ""]
    if not suite.cases:
        lines += ["No test cases.", ""]
    for tc in suite.cases:
        lines += [f"## {tc.id}", "",
                  f"- Test purpose: {tc.purpose_ref}",
                  f"- Requirements: {', '.join(tc.req_refs) if tc.req_refs else 'none'}",
                  f"- Default behaviour: any unexpected observation gives {tc.default_behavior}",
                  ""]
        for part, steps in (("Preamble", tc.preamble), ("Body", tc.body), ("Postamble", tc.postamble)):
            lines.append(f"{part}:")
            lines.append("")
            if not steps:
                lines.append("- (empty)")
            for s in steps:
                if s.kind == SEND:
                    lines.append(f"- send {_call(s)}")
                elif s.kind == EXPECT:
                    lines.append(f"- expect {_call(s)}")
                else:
                    lines.append("- settle")
            lines.append("")
    return "\n".join(lines)


def _render_matrix(matrix, model: Model) -> str:
    lines = [f"# Requirements Traceability: {model.name}", "",
             "| Requirement | Clause | Status | Test cases |", "|---|---|---|---|"]
    for row in matrix:
        lines.append(f"| {row.requirement} | {row.clause or '-'} | {row.status} | "
                     f"{', '.join(row.cases) if row.cases else '-'} |")
    lines.append("")
    return "\n".join(lines)


_ID = re.compile(r"\bT[CPD]_[A-Z0-9_]+_\d{3}\b")
_HEADING = re.compile(r"^#{2,6} (?:[\d.]+ )?(\S+)\s*$", re.M)


def check_bundle(bundle: DocumentBundle, model: Model) -> list:
    """Cross-reference and matrix-completeness problems of ``bundle`` (empty when sound)."""
    problems = []
    defined = set()
    for name in ("TP", "TD", "TC"):
        defined |= set(_HEADING.findall(bundle.texts[name]))
    for name in DOCUMENTS:
        for cited in sorted(set(_ID.findall(bundle.texts[name])) - defined):
            problems.append(f"{name}.md cites undefined {cited}")
    req_ids = [r.id for r in model.requirements]
    rows = [r.requirement for r in bundle.matrix]
    if rows != req_ids:
        problems.append("traceability rows differ from declared requirements")
    for row in bundle.matrix:
        if row.status == "covered" and not row.cases:
            problems.append(f"{row.requirement} marked covered without test cases")
    for p in bundle.sidecars["TP"]["purposes"]:
        for r in p["req_refs"]:
            if r not in req_ids:
                problems.append(f"{p['id']} cites undeclared requirement {r}")
    for c in bundle.sidecars["TC"]["cases"]:
        for r in c["req_refs"]:
            if r not in req_ids:
                problems.append(f"{c['id']} cites undeclared requirement {r}")
    return problems


def emit_bundle(suite: TestSuite, model: Model, structure: TestSuiteStructure | None = None) -> DocumentBundle:
    """Render the four documents and the traceability matrix."""
    if structure is None:
        structure = build_tss(suite, model)
    matrix = traceability(suite, model)
    texts = {
        "TSS": _render_tss(structure, model),
        "TP": _render_tp(suite, model),
        "TD": _render_td(suite, model),
        "TC": _render_tc(suite, model),
        "traceability": _render_matrix(matrix, model),
    }
    sidecars = {
        "TSS": {"model": model.name, "structure": structure.root.to_json()},
        "TP": {"model": model.name, "purposes": [p.to_json() for p in suite.purposes]},
        "TD": {"model": model.name, "descriptions": [
            {"id": _td_id(tc.id, suite), "purpose": tc.purpose_ref, "test_case": tc.id,
             "steps": [s.to_json() for s in tc.steps]} for tc in suite.cases]},
        "TC": {"model": model.name, "criterion": suite.criterion,
               "cases": [tc.to_json() for tc in suite.cases]},
        "traceability": {"model": model.name, "rows": [
            {"requirement": r.requirement, "clause": r.clause, "status": r.status, "cases": list(r.cases)}
            for r in matrix]},
    }
    warnings = tuple(f"requirement {r.requirement} is not covered by any test case"
                     for r in matrix if r.status == "uncovered")
    bundle = DocumentBundle(texts, sidecars, matrix, warnings)
    problems = check_bundle(bundle, model)
    if problems:
        raise DanglingReferenceError("; ".join(problems))
    return bundle


__all__ = ["DanglingReferenceError", "DocumentBundle", "Group", "MatrixRow", "TestSuiteStructure",
           "build_tss", "check_bundle", "emit_bundle", "traceability", "model_tag"]
