"""Title-injection benchmarks built from unannotated corpora.

Each report's title is inserted as an extra reporter comment at a uniformly
random turn boundary after the description. Placement uses numpy's PCG64
generator seeded from ``(seed, sha256(report_id))`` so results do not
depend on report order or worker count.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .corpus import COMMENT, DESCRIPTION, BugReport, Turn, dump_corpus, load_corpus, make_sentence, report_to_record

log = logging.getLogger(__name__)

MANIFEST_FORMAT = "bugsum-benchmark/1"


@dataclass(frozen=True)
class InjectedBenchmark:
    seed: int
    reports: list[BugReport]
    injected: dict[str, str]
    corpus_hash: str = ""

    def manifest(self) -> dict:
        return {
            "format": MANIFEST_FORMAT,
            "seed": self.seed,
            "corpus_hash": self.corpus_hash,
            "rng": "numpy.PCG64",
            "entries": [{"report_id": r.report_id, "injected_id": self.injected[r.report_id]} for r in self.reports],
        }

    def save(self, directory: str | Path) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "manifest.json").write_text(json.dumps(self.manifest(), indent=1) + "\n", encoding="utf-8")
        dump_corpus(self.reports, d / "corpus.jsonl")

    @classmethod
    def load(cls, directory: str | Path) -> "InjectedBenchmark":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text(encoding="utf-8"))
        if manifest.get("format") != MANIFEST_FORMAT:
            raise ValueError(f"{d}: not a {MANIFEST_FORMAT} manifest")
        reports = load_corpus(d / "corpus.jsonl")
        injected = {e["report_id"]: e["injected_id"] for e in manifest["entries"]}
        return cls(int(manifest["seed"]), reports, injected, manifest.get("corpus_hash", ""))


def report_rng(seed: int, report_id: str) -> np.random.Generator:
    digest = hashlib.sha256(report_id.encode("utf-8")).digest()
    return np.random.Generator(np.random.PCG64([seed, int.from_bytes(digest[:8], "little")]))


def _renumber(turn: Turn, turn_no: int) -> Turn:
    sentences = tuple(replace(s, id=f"{turn_no}.{s.index}") for s in turn.sentences)
    return replace(turn, turn_no=turn_no, sentences=sentences, kind=DESCRIPTION if turn_no == 1 else COMMENT)


def insert_turn(T: BugReport, position: int, text: str, author: str) -> BugReport:
    """Insert a one-sentence turn so that it becomes turn ``position`` (>= 2).

    The new turn copies the preceding turn's timestamp, so reports with real
    times keep them.
    """
    if not 2 <= position <= len(T.turns) + 1:
        raise ValueError(f"insertion position {position} outside 2..{len(T.turns) + 1}")
    stamp = T.turns[position - 2].timestamp
    new = Turn(position, author, (make_sentence(f"{position}.1", text),), COMMENT, stamp)
    turns = list(T.turns[: position - 1]) + [new] + [_renumber(t, t.turn_no + 1) for t in T.turns[position - 1:]]
    return replace(T, turns=tuple(turns))


def inject_title(T: BugReport, seed: int | np.random.Generator) -> tuple[BugReport, str]:
    """Insert the title as a reporter comment at a uniformly random slot after turn 1."""
    if not T.title.strip():
        raise ValueError(f"report {T.report_id} has an empty title")
    rng = seed if isinstance(seed, np.random.Generator) else report_rng(seed, T.report_id)
    position = int(rng.integers(2, len(T.turns) + 2))
    return insert_turn(T, position, T.title, T.reporter), f"{position}.1"


def remove_injected(T: BugReport, injected_id: str) -> BugReport:
    """Inverse of :func:`inject_title`."""
    turn_no = int(injected_id.split(".")[0])
    turns = list(T.turns[: turn_no - 1]) + [_renumber(t, t.turn_no - 1) for t in T.turns[turn_no:]]
    return replace(T, turns=tuple(turns))


def is_fixed(T: BugReport) -> bool:
    return T.status is not None and "FIXED" in T.status.upper()


def corpus_hash(reports: Iterable[BugReport]) -> str:
    h = hashlib.sha256()
    for r in reports:
        h.update(json.dumps(report_to_record(r), sort_keys=True, ensure_ascii=False).encode("utf-8"))
        h.update(b"\n")
    return h.hexdigest()


def build_benchmark(
    reports: Iterable[BugReport],
    seed: int,
    keep: Callable[[BugReport], bool] | None = None,
) -> InjectedBenchmark:
    reports = list(reports)
    revised, injected = [], {}
    for T in reports:
        if keep is not None and not keep(T):
            continue
        if not T.title.strip():
            log.warning("report %s has no title; excluded from benchmark", T.report_id)
            continue
        new, sid = inject_title(T, seed)
        revised.append(new)
        injected[T.report_id] = sid
    return InjectedBenchmark(seed, revised, injected, corpus_hash(reports))
