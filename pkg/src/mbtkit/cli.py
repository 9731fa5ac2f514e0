"""Command-line driver: validate, explore, generate, docs, adequacy, all."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

from . import __version__
from .corpus import resolve_path
from .coverage import CRITERIA, SelectionBudget
from .docgen import DanglingReferenceError, emit_bundle
from .dsl import parse_model, parse_profile
from .explorer import BOUNDARY, EXHAUSTIVE, Bounds, explore
from .model import ModelError, apply_profile, errors_only, validate
from .scenario import load_scenario
from .simulator import PASS, Sut, adequacy, mutate, run
from .testgen import build_suite

log = logging.getLogger("mbtkit")

EXIT_OK, EXIT_INVALID, EXIT_USAGE, EXIT_INTERNAL = 0, 1, 2, 3
COMMANDS = ("validate", "explore", "generate", "docs", "adequacy", "all")


class InternalInconsistency(RuntimeError):
    """A pipeline self-check failed (e.g. a generated test fails on its own model)."""


@dataclass(frozen=True)
class RunConfig:
    command: str
    model: str
    profile: str | None
    scenario: str | None
    criterion: str
    bounds: Bounds
    budget: SelectionBudget | None
    out: str | None
    mutants: int

    def replay(self) -> dict:
        """Everything needed to rerun the command, minus the output directory."""
        return {
            "command": self.command, "model": self.model, "profile": self.profile,
            "scenario": self.scenario, "criterion": self.criterion, "bounds": self.bounds.to_json(),
            "budget": None if self.budget is None else self.budget.to_json(), "mutants": self.mutants,
        }


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("model", help="model file (.mbt); corpus/<name>/model.mbt resolves to bundled data")
    common.add_argument("--profile", help="ICS/IFS profile file")
    common.add_argument("--out", help="output directory (default: standard output where possible)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to standard error")

    run_opts = argparse.ArgumentParser(add_help=False)
    run_opts.add_argument("--criterion", choices=CRITERIA, default="transition",
                          help="coverage criterion (default: transition)")
    run_opts.add_argument("--depth", type=_positive, default=Bounds.max_depth, help="exploration depth bound")
    run_opts.add_argument("--max-nodes", type=_positive, default=Bounds.max_nodes, help="exploration node bound")
    run_opts.add_argument("--data", choices=(EXHAUSTIVE, BOUNDARY), default=EXHAUSTIVE,
                          help="argument enumeration strategy")
    run_opts.add_argument("--seed", type=int, default=0, help="seed for mutant sampling and random walks")
    run_opts.add_argument("--scenario", help="scenario file, or an inline pattern if no such file exists")
    run_opts.add_argument("--budget-test", type=_fraction, help="cost per selected test")
    run_opts.add_argument("--budget-step", type=_fraction, help="cost per test step")
    run_opts.add_argument("--budget-max", type=_fraction, help="maximum total cost")
    run_opts.add_argument("--mutants", type=int, default=40, help="number of sampled mutants (default: 40)")

    parser = argparse.ArgumentParser(prog="mbtkit", description="Model-based conformance test generation.")
    parser.add_argument("--version", action="version", version=f"mbtkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    sub.add_parser("validate", parents=[common], help="parse and check a model")
    helps = {
        "explore": "write the bounded exploration graph",
        "generate": "select traces and write the test suite and coverage report",
        "docs": "write TSS, TP, TD, TC documents and the traceability matrix",
        "adequacy": "run the suite against seeded mutants",
        "all": "run the whole pipeline",
    }
    for name in COMMANDS[1:]:
        sub.add_parser(name, parents=[common, run_opts], help=helps[name])
    return parser


def _config(ns) -> RunConfig:
    budget = None
    if getattr(ns, "budget_test", None) is not None or getattr(ns, "budget_step", None) is not None \
            or getattr(ns, "budget_max", None) is not None:
        budget = SelectionBudget(
            ns.budget_test if ns.budget_test is not None else Fraction(0),
            ns.budget_step if ns.budget_step is not None else Fraction(1),
            ns.budget_max)
    bounds = Bounds(getattr(ns, "depth", Bounds.max_depth), getattr(ns, "max_nodes", Bounds.max_nodes),
                    getattr(ns, "data", EXHAUSTIVE), getattr(ns, "seed", 0))
    return RunConfig(ns.command, ns.model, ns.profile, getattr(ns, "scenario", None),
                     getattr(ns, "criterion", "transition"), bounds, budget, ns.out,
                     getattr(ns, "mutants", 40))


def _read(path: str) -> str:
    return resolve_path(path).read_text(encoding="utf-8")


def _load(cfg: RunConfig):
    model = parse_model(_read(cfg.model))
    if cfg.profile:
        model = apply_profile(model, parse_profile(_read(cfg.profile)))
    return model


def _scenario(cfg: RunConfig, model):
    if cfg.scenario is None:
        return None
    p = resolve_path(cfg.scenario)
    text = p.read_text(encoding="utf-8") if p.is_file() else cfg.scenario
    return load_scenario(text.strip(), model)


class _Sink:
    """Writes named outputs under ``--out`` or, without it, the primary one to stdout."""

    def __init__(self, out: str | None, primary: tuple):
        self.dir = Path(out) if out else None
        self.primary = primary
        if self.dir is not None:
            self.dir.mkdir(parents=True, exist_ok=True)

    def put(self, name: str, text: str):
        if self.dir is not None:
            (self.dir / name).write_text(text, encoding="utf-8")
            log.info("wrote %s", self.dir / name)
        elif name in self.primary:
            sys.stdout.write(text)
        elif name == "coverage.txt":
            sys.stderr.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _cmd_validate(cfg: RunConfig) -> int:
    model = _load(cfg)
    diags = validate(model)
    for d in diags:
        print(f"{d.severity}: {d.code}: {d.message}", file=sys.stderr)
    errs = errors_only(diags)
    print(f"{model.name}: {len(errs)} error(s), {len(diags) - len(errs)} warning(s)")
    return EXIT_INVALID if errs else EXIT_OK


def _pipeline(cfg: RunConfig, sink: _Sink, steps: set) -> int:
    model = _load(cfg)
    errs = errors_only(validate(model))
    if errs:
        for d in errs:
            print(f"error: {d.code}: {d.message}", file=sys.stderr)
        return EXIT_INVALID
    scenario = _scenario(cfg, model)
    graph = explore(model, cfg.bounds, scenario)
    log.info("explored %d nodes, %d edges, %d frontier", len(graph.nodes), len(graph.edges), len(graph.frontier))
    if "explore" in steps:
        sink.put("graph.json", graph.dumps())
    if not steps & {"generate", "docs", "adequacy"}:
        return EXIT_OK
    suite, rep = build_suite(model, graph, cfg.criterion, cfg.bounds, cfg.budget,
                             extra_metadata={"run": cfg.replay()})
    log.info("selected %d test cases, %s coverage %.3f", len(suite.cases), cfg.criterion, rep.ratio)
    for tc in suite.cases:
        res = run(tc, Sut(model))
        if res.verdict != PASS:
            raise InternalInconsistency(f"{tc.id} gives {res.verdict} on the unmutated model: {res.reason}")
    if "generate" in steps:
        sink.put("suite.json", suite.dumps(model))
        sink.put("coverage.json", _dump(rep.to_json()))
        sink.put("coverage.txt", rep.table())
    if "docs" in steps:
        bundle = emit_bundle(suite, model)
        for w in bundle.warnings:
            log.warning("%s", w)
        for name, text in bundle.files().items():
            sink.put(name, text)
    if "adequacy" in steps:
        mutants = mutate(model, cfg.bounds.seed, cfg.mutants)
        result = adequacy(suite, model, mutants, cfg.bounds)
        log.info("mutation score %.3f (%d killed, %d survived, %d equivalent)",
                 result.score, result.killed, result.survived, result.equivalent)
        sink.put("adequacy.json", result.dumps())
    return EXIT_OK


_PRIMARY = {
    "explore": ("graph.json",),
    "generate": ("suite.json",),
    "docs": ("TC.md",),
    "adequacy": ("adequacy.json",),
    "all": (),
}
_STEPS = {
    "explore": {"explore"},
    "generate": {"generate"},
    "docs": {"docs"},
    "adequacy": {"adequacy"},
    "all": {"explore", "generate", "docs", "adequacy"},
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        cfg = _config(ns)
    except ValueError as exc:
        parser.print_usage(sys.stderr)
        print(f"mbtkit: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for label, path in (("model", cfg.model), ("profile", cfg.profile)):
        if path is not None and not resolve_path(path).is_file():
            print(f"mbtkit: error: {label} file not found: {path}", file=sys.stderr)
            return EXIT_USAGE
    if cfg.command == "all" and not cfg.out:
        print("mbtkit: error: the all command needs --out", file=sys.stderr)
        return EXIT_USAGE
    try:
        if cfg.command == "validate":
            return _cmd_validate(cfg)
        return _pipeline(cfg, _Sink(cfg.out, _PRIMARY[cfg.command]), _STEPS[cfg.command])
    except ModelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InternalInconsistency, DanglingReferenceError) as exc:
        print(f"internal inconsistency: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
