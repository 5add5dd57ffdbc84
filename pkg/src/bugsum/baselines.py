"""Unsupervised sentence rankers: Centroid, MMR, Grasshopper, DivRank and Hurried.

Each ranker returns ``[(sentence_id, score), ...]`` covering every sentence
of the report once, best first. Ties go to the earlier sentence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import BugReport
from .features import des, sentiment
from .ranking import rank_by_scores
from .vsm import CorpusStats, cosine, cosine_matrix, vectorize

RankedList = list[tuple[str, float]]

HURRIED_EPS = 1e-6


@dataclass(frozen=True)
class WalkConfig:
    damping: float = 0.85
    tol: float = 1e-10
    max_iters: int = 10_000
    divrank_alpha: float = 0.25

    def __post_init__(self):
        if not 0.0 < self.damping < 1.0:
            raise ValueError("damping must lie in (0, 1)")
        if self.tol <= 0 or self.max_iters <= 0:
            raise ValueError("tol and max_iters must be positive")
        if not 0.0 < self.divrank_alpha <= 1.0:
            raise ValueError("divrank_alpha must lie in (0, 1]")


@dataclass(frozen=True)
class SentenceGraph:
    ids: tuple[str, ...]
    W: np.ndarray

    @property
    def n(self) -> int:
        return len(self.ids)

    @classmethod
    def from_report(cls, T: BugReport, stats: CorpusStats) -> "SentenceGraph":
        vecs = [vectorize(s.tokens, stats) for s in T.sentences]
        W = cosine_matrix(vecs) if vecs else np.zeros((0, 0))
        np.fill_diagonal(W, 0.0)
        W = (W + W.T) / 2
        return cls(tuple(s.id for s in T.sentences), W)


def transition_matrix(W: np.ndarray) -> np.ndarray:
    """Row-normalise; all-zero rows become uniform."""
    n = W.shape[0]
    rows = W.sum(axis=1, keepdims=True)
    P = np.divide(W, rows, out=np.full_like(W, 1.0 / n), where=rows > 0)
    return P


def teleport_matrix(W: np.ndarray, damping: float, prior: np.ndarray | None = None) -> np.ndarray:
    n = W.shape[0]
    r = np.full(n, 1.0 / n) if prior is None else prior / prior.sum()
    return damping * transition_matrix(W) + (1.0 - damping) * np.outer(np.ones(n), r)


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    """Solve pi P = pi, sum(pi) = 1 directly."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _vectors(T: BugReport, stats: CorpusStats):
    return [vectorize(s.tokens, stats) for s in T.sentences]


def _centroid(vecs) -> dict[str, float]:
    pseudo: dict[str, float] = {}
    for v in vecs:
        for t, w in v.items():
            pseudo[t] = pseudo.get(t, 0.0) + w
    n = max(len(vecs), 1)
    return {t: w / n for t, w in pseudo.items()}


def centroid_rank(T: BugReport, stats: CorpusStats) -> RankedList:
    vecs = _vectors(T, stats)
    pseudo = _centroid(vecs)
    ids = [s.id for s in T.sentences]
    if len(ids) == 1:
        return [(ids[0], 1.0)]
    return rank_by_scores(ids, [cosine(v, pseudo) for v in vecs])


def mmr_rank(T: BugReport, stats: CorpusStats, lambda_mmr: float = 0.5) -> RankedList:
    """Greedy relevance-minus-redundancy selection against the centroid."""
    if not 0.0 <= lambda_mmr <= 1.0:
        raise ValueError("lambda_mmr must lie in [0, 1]")
    vecs = _vectors(T, stats)
    ids = [s.id for s in T.sentences]
    pseudo = _centroid(vecs)
    relevance = np.array([cosine(v, pseudo) for v in vecs])
    sims = cosine_matrix(vecs) if vecs else np.zeros((0, 0))
    remaining = list(range(len(ids)))
    picked: list[int] = []
    out: RankedList = []
    while remaining:
        if picked:
            redundancy = sims[np.ix_(remaining, picked)].max(axis=1)
        else:
            redundancy = np.zeros(len(remaining))
        scores = lambda_mmr * relevance[remaining] - (1 - lambda_mmr) * redundancy
        # np.argmax returns the first maximum, i.e. the earliest sentence
        j = int(np.argmax(scores))
        idx = remaining.pop(j)
        picked.append(idx)
        out.append((ids[idx], float(scores[j])))
    return out


def grasshopper_rank(T: BugReport, stats: CorpusStats, cfg: WalkConfig | None = None) -> RankedList:
    graph = SentenceGraph.from_report(T, stats)
    return grasshopper(graph, cfg)


def grasshopper(graph: SentenceGraph, cfg: WalkConfig | None = None, prior: np.ndarray | None = None) -> RankedList:
    """Absorbing random walk ranking.

    The first item is the stationary-distribution peak; each following item
    maximises the expected number of visits before absorption once all
    earlier items are made absorbing.
    """
    cfg = cfg or WalkConfig()
    n = graph.n
    if n == 0:
        return []
    if n == 1:
        return [(graph.ids[0], 1.0)]
    P = teleport_matrix(graph.W, cfg.damping, prior)
    pi = stationary_distribution(P)
    first = int(np.argmax(pi))
    picked = [first]
    out = [(graph.ids[first], float(pi[first]))]
    while len(picked) < n:
        rest = [i for i in range(n) if i not in picked]
        Q = P[np.ix_(rest, rest)]
        # N = (I - Q)^-1; column sums averaged over uniform starts
        N = np.linalg.solve(np.eye(len(rest)) - Q, np.eye(len(rest)))
        visits = N.sum(axis=0) / len(rest)
        j = int(np.argmax(visits))
        picked.append(rest[j])
        out.append((graph.ids[rest[j]], float(visits[j])))
    return out


def divrank_rank(T: BugReport, stats: CorpusStats, cfg: WalkConfig | None = None) -> RankedList:
    graph = SentenceGraph.from_report(T, stats)
    scores = divrank_scores(graph.W, cfg)
    return rank_by_scores(graph.ids, scores)


def divrank_scores(W: np.ndarray, cfg: WalkConfig | None = None, history: list | None = None) -> np.ndarray:
    """Vertex-reinforced random walk (pointwise DivRank).

    The organic walk stays put with probability ``1 - cfg.divrank_alpha`` and
    otherwise follows similarity edges; a sentence with no similar neighbour
    only stays put. At every step the transition into node j is scaled by
    its current visit estimate and rows are renormalised, so mass gathers on
    one representative per group of similar sentences. Starting from the
    uniform vector equals starting every visit count at 1. ``history``
    receives the score vector of every iteration.
    """
    cfg = cfg or WalkConfig()
    n = W.shape[0]
    if n == 0:
        return np.zeros(0)
    if n == 1:
        return np.ones(1)
    rows = W.sum(axis=1, keepdims=True)
    moves = np.divide(W, rows, out=np.zeros_like(W), where=rows > 0)
    alpha = np.where(rows.ravel() > 0, cfg.divrank_alpha, 0.0)[:, None]
    P0 = alpha * moves + (1.0 - alpha) * np.eye(n)
    p = np.full(n, 1.0 / n)
    for _ in range(cfg.max_iters):
        Pt = P0 * p[None, :]
        Pt /= Pt.sum(axis=1, keepdims=True)
        nxt = cfg.damping * (p @ Pt) + (1.0 - cfg.damping) / n
        nxt /= nxt.sum()
        if history is not None:
            history.append(nxt)
        done = np.abs(nxt - p).sum() < cfg.tol
        p = nxt
        if done:
            break
    return p


def pagerank(W: np.ndarray, personalization: np.ndarray, damping: float = 0.85) -> np.ndarray:
    """Personalised PageRank by direct linear solve."""
    n = W.shape[0]
    v = personalization / personalization.sum()
    P = transition_matrix(W)
    pi = np.linalg.solve(np.eye(n) - damping * P.T, (1.0 - damping) * v)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def hurried_personalization(T: BugReport, stats: CorpusStats) -> np.ndarray:
    from .corpus import preprocess

    title = vectorize(preprocess(T.title), stats)
    return np.array(
        [
            cosine(vectorize(s.tokens, stats), title) + des(s) + max(sentiment(s), 0) + HURRIED_EPS
            for s in T.sentences
        ]
    )


def hurried_rank(T: BugReport, stats: CorpusStats, cfg: WalkConfig | None = None) -> RankedList:
    cfg = cfg or WalkConfig()
    graph = SentenceGraph.from_report(T, stats)
    if graph.n == 0:
        return []
    scores = pagerank(graph.W, hurried_personalization(T, stats), cfg.damping)
    return rank_by_scores(graph.ids, scores)
