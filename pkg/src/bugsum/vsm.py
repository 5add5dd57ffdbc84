"""TF-IDF vector space model over sentence-level text units."""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import sparse

STATS_FORMAT = "bugsum-corpus-stats/1"

TfIdfVector = dict[str, float]


@dataclass(frozen=True)
class CorpusStats:
    n_units: int
    doc_freq: Mapping[str, int] = field(repr=False)
    granularity: str = "sentence"

    def idf(self, term: str) -> float:
        # unseen terms count as appearing in a single unit
        return math.log(self.n_units / self.doc_freq.get(term, 1))

    def save(self, path: str | Path) -> None:
        payload = {"format": STATS_FORMAT, "granularity": self.granularity, "n_units": self.n_units,
                   "doc_freq": dict(sorted(self.doc_freq.items()))}
        Path(path).write_text(json.dumps(payload), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "CorpusStats":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("format") != STATS_FORMAT:
            raise ValueError(f"{path}: not a {STATS_FORMAT} file")
        return cls(int(payload["n_units"]), dict(payload["doc_freq"]), payload.get("granularity", "sentence"))


def build_stats(units: Iterable[Sequence[str]]) -> CorpusStats:
    """Count units (N) and per-term document frequencies (n_t)."""
    n = 0
    df: Counter[str] = Counter()
    for tokens in units:
        n += 1
        df.update(set(tokens))
    if n == 0:
        raise ValueError("cannot build corpus statistics from an empty corpus")
    return CorpusStats(n, dict(df))


def stats_for_reports(reports) -> CorpusStats:
    return build_stats(s.tokens for r in reports for s in r.sentences)


def vectorize(tokens: Iterable[str], stats: CorpusStats) -> TfIdfVector:
    return {t: f * stats.idf(t) for t, f in Counter(tokens).items()}


def aggregate_unit(token_lists: Iterable[Sequence[str]], stats: CorpusStats) -> TfIdfVector:
    """Vector for a larger unit (comment, description, report) built from its sentences."""
    return vectorize((t for tokens in token_lists for t in tokens), stats)


def norm(u: Mapping[str, float]) -> float:
    return math.sqrt(sum(w * w for w in u.values()))


def cosine(u: Mapping[str, float], v: Mapping[str, float]) -> float:
    nu, nv = norm(u), norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    if len(u) > len(v):
        u, v = v, u
    dot = sum(w * v.get(t, 0.0) for t, w in u.items())
    return min(1.0, max(0.0, dot / (nu * nv)))


def to_matrix(vectors: Sequence[Mapping[str, float]]) -> sparse.csr_matrix:
    """Stack sparse vectors as rows of a CSR matrix over their joint vocabulary."""
    vocab: dict[str, int] = {}
    rows, cols, vals = [], [], []
    for i, vec in enumerate(vectors):
        for t, w in vec.items():
            rows.append(i)
            cols.append(vocab.setdefault(t, len(vocab)))
            vals.append(w)
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(vectors), max(len(vocab), 1)))


def cosine_matrix(vectors: Sequence[Mapping[str, float]]) -> np.ndarray:
    """Dense pairwise cosine matrix; rows with zero norm are all-zero."""
    m = to_matrix(vectors)
    norms = np.sqrt(np.asarray(m.multiply(m).sum(axis=1)).ravel())
    inv = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    m = sparse.diags(inv) @ m
    sims = np.asarray((m @ m.T).todense())
    # exact self-similarity, and rounding kept inside [0, 1]
    np.fill_diagonal(sims, (norms > 0).astype(float))
    return np.clip(sims, 0.0, 1.0)
