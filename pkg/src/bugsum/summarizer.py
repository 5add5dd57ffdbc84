"""Budgeted extractive summaries and method dispatch."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

from .baselines import WalkConfig, centroid_rank, divrank_rank, grasshopper_rank, hurried_rank, mmr_rank
from .corpus import BugReport
from .features import DUP_THRESHOLD, extract_matrix
from .ranking import RankModel, rank_report
from .vsm import CorpusStats

BUDGET_FRACTION = 0.25

SUPERVISED = {"LRCA": "LRCA11", "BRC": "BRC24", "COMBINE": "COMBINE27"}
UNSUPERVISED = ("CENTROID", "MMR", "GRASSHOPPER", "DIVRANK", "HURRIED")
METHODS = tuple(SUPERVISED) + UNSUPERVISED


class SchemaMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Summary:
    report_id: str
    selected: tuple[str, ...]
    word_budget: float
    words_used: int
    method: str = ""
    budget_fraction: float = BUDGET_FRACTION
    include_crossing: bool = True
    meta: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "report_id": self.report_id,
            "method": self.method,
            "budget_fraction": self.budget_fraction,
            "selected": list(self.selected),
            "words_used": self.words_used,
            "word_budget": self.word_budget,
            "include_crossing_sentence": self.include_crossing,
            **self.meta,
        }

    def render(self, report: BugReport) -> str:
        lines = [f"Report {report.report_id}: {report.title}",
                 f"[{self.method}] {len(self.selected)} sentences, {self.words_used}/{self.word_budget:g} words"]
        lines += [f"  {sid}  {report.sentence(sid).raw_text}" for sid in self.selected]
        return "\n".join(lines)


def select_budgeted(
    ranked: Sequence[tuple[str, float]] | Sequence[str],
    T: BugReport,
    budget_fraction: float = BUDGET_FRACTION,
    method: str = "",
) -> Summary:
    """Take sentences in rank order until the word budget is reached.

    The sentence that reaches or crosses the budget is kept, so summaries
    are never empty for non-empty reports. Output is in document order.
    """
    ids = [r[0] if isinstance(r, tuple) else r for r in ranked]
    by_id = {s.id: (i, s) for i, s in enumerate(T.sentences)}
    if sorted(ids, key=lambda x: by_id[x][0]) != [s.id for s in T.sentences]:
        raise ValueError(f"ranking is not a permutation of report {T.report_id}'s sentences")
    budget = budget_fraction * T.total_words
    chosen: list[str] = []
    used = 0
    for sid in ids:
        if chosen and used >= budget:
            break
        chosen.append(sid)
        used += by_id[sid][1].word_count
    chosen.sort(key=lambda x: by_id[x][0])
    return Summary(T.report_id, tuple(chosen), budget, used, method, budget_fraction)


def rank(
    T: BugReport,
    method: str,
    stats: CorpusStats,
    model: RankModel | None = None,
    dup_threshold: float = DUP_THRESHOLD,
    walk: WalkConfig | None = None,
    lambda_mmr: float = 0.5,
) -> list[tuple[str, float]]:
    method = method.upper()
    if method in SUPERVISED:
        schema = SUPERVISED[method]
        if model is None:
            raise SchemaMismatch(f"method {method} needs a trained {schema} model")
        if model.schema != schema:
            raise SchemaMismatch(f"method {method} expects schema {schema}, model has {model.schema}")
        return rank_report(model, extract_matrix(T, stats, schema, dup_threshold))
    if method == "CENTROID":
        return centroid_rank(T, stats)
    if method == "MMR":
        return mmr_rank(T, stats, lambda_mmr)
    if method == "GRASSHOPPER":
        return grasshopper_rank(T, stats, walk)
    if method == "DIVRANK":
        return divrank_rank(T, stats, walk)
    if method == "HURRIED":
        return hurried_rank(T, stats, walk)
    raise ValueError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")


def summarize(
    T: BugReport,
    method: str,
    stats: CorpusStats,
    model: RankModel | None = None,
    budget_fraction: float = BUDGET_FRACTION,
    **kwargs,
) -> Summary:
    if not T.sentences:
        return Summary(T.report_id, (), 0.0, 0, method.upper(), budget_fraction)
    ranked = rank(T, method, stats, model, **kwargs)
    return select_budgeted(ranked, T, budget_fraction, method.upper())


def dump_summaries(summaries: Sequence[Summary], path, config: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in summaries:
            rec = s.to_json()
            if config is not None:
                rec["config"] = config
            fh.write(json.dumps(rec) + "\n")
