"""Bundled example specifications and scenarios with their expected verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Dict, List, Tuple

VIOLATION = "violation"
NO_VIOLATION = "no-violation"


@dataclass(frozen=True)
class CorpusEntry:
    spec_file: Path
    scenario_files: Tuple[Path, ...]
    expected: Dict[str, str]          # scenario file name -> verdict kind
    provenance: Tuple[str, ...]
    variant: str = ""

    def pairs(self) -> List[Tuple[Path, Path, str]]:
        return [(self.spec_file, s, self.expected[s.name]) for s in self.scenario_files]


def corpus_dir(name: str = "pacemaker") -> Path:
    return Path(str(resources.files(__name__).joinpath(name)))


def build_corpus(name: str = "pacemaker") -> List[CorpusEntry]:
    root = corpus_dir(name)
    index = json.loads((root / "index.json").read_text(encoding="utf-8"))
    entries = []
    for e in index["entries"]:
        scenarios = tuple(root / s for s in e["scenarios"])
        entries.append(CorpusEntry(root / e["spec"], scenarios, dict(e["scenarios"]),
                                   tuple(e.get("provenance", ())), e.get("variant", "")))
    return entries


def scenario_notes(name: str = "pacemaker") -> Dict[str, str]:
    index = json.loads((corpus_dir(name) / "index.json").read_text(encoding="utf-8"))
    return dict(index.get("scenarios", {}))
