"""Bundled models: the GeoNetworking location service, Diameter Rx, a toy ATM and the ping fixture."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from ..coverage import covered
from ..dsl import parse_model, parse_profile
from ..model import Model, Profile
from ..scenario import Scenario

ENTRIES = ("geonet_ls", "rx", "atm", "ping")


@dataclass(frozen=True)
class Purpose:
    id: str
    summary: str
    requirements: tuple
    scenario: str

    @property
    def sketch(self) -> Scenario:
        return Scenario.parse(self.scenario)

    def covered_by(self, traces, model: Model) -> bool:
        """True iff a single trace covers every requirement of the purpose."""
        want = set(self.requirements)
        for t in traces:
            if want <= {i.key[0] for i in covered(t, model, "requirement")}:
                return True
        return False


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    path: Path
    model_text: str
    purposes: tuple = ()
    profiles: dict = field(default_factory=dict)
    readme: str = ""

    @property
    def model(self) -> Model:
        return parse_model(self.model_text)

    @property
    def model_path(self) -> Path:
        return self.path / "model.mbt"


def corpus_root() -> Path:
    return Path(str(resources.files(__name__)))


def load_entry(name: str) -> CorpusEntry:
    root = corpus_root() / name
    if not (root / "model.mbt").is_file():
        raise KeyError(f"no corpus entry {name!r}; available: {', '.join(ENTRIES)}")
    purposes = ()
    if (root / "purposes.json").is_file():
        data = json.loads((root / "purposes.json").read_text(encoding="utf-8"))
        purposes = tuple(Purpose(p["id"], p["summary"], tuple(p["requirements"]), p["scenario"])
                         for p in data["purposes"])
    profiles = {}
    if (root / "profiles").is_dir():
        for f in sorted((root / "profiles").glob("*.profile")):
            profiles[f.stem] = parse_profile(f.read_text(encoding="utf-8"))
    readme = (root / "README.md").read_text(encoding="utf-8") if (root / "README.md").is_file() else ""
    return CorpusEntry(name, root, (root / "model.mbt").read_text(encoding="utf-8"),
                       purposes, profiles, readme)


def corpus_geonet_ls() -> CorpusEntry:
    return load_entry("geonet_ls")


def corpus_rx() -> CorpusEntry:
    return load_entry("rx")


def corpus_atm() -> CorpusEntry:
    return load_entry("atm")


def corpus_ping() -> CorpusEntry:
    return load_entry("ping")


def resolve_path(path: str) -> Path:
    """Map ``corpus/...`` paths onto the bundled data when they do not exist locally.

    ``corpus/ping.mbt`` names the ping fixture and ``corpus/geonet-ls/...``
    accepts a hyphen in place of the underscore.
    """
    p = Path(path)
    if p.exists():
        return p
    parts = p.parts
    if "corpus" not in parts:
        return p
    rest = list(parts[parts.index("corpus") + 1:])
    if not rest:
        return corpus_root()
    rest[0] = rest[0].replace("-", "_")
    if len(rest) == 1 and rest[0].endswith(".mbt"):
        rest = [rest[0][:-4], "model.mbt"]
    return corpus_root().joinpath(*rest)


__all__ = ["CorpusEntry", "ENTRIES", "Purpose", "Profile", "corpus_atm", "corpus_geonet_ls", "corpus_ping",
           "corpus_root", "corpus_rx", "load_entry", "resolve_path"]
