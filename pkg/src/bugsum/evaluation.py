"""Gold standards, summary metrics, diagnostics and the volunteer ablation."""

from __future__ import annotations

import csv
import itertools
import json
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage
from scipy.spatial.distance import squareform
from scipy.stats import norm, rankdata

from .features import LRCA11

METRICS = ("precision", "recall", "f_score", "pyramid")


@dataclass(frozen=True)
class GoldStandard:
    report_id: str
    votes: Mapping[str, int]
    gss: frozenset[str]
    n_annotators: int


def gold_standard(annotations: Sequence[tuple[str, Iterable[str]]], report_id: str = "") -> GoldStandard:
    """Tally annotator picks; sentences chosen by a strict majority form the GSS."""
    k = len(annotations)
    if k == 0:
        raise ValueError("gold standard needs at least one annotator")
    votes = Counter(sid for _, selected in annotations for sid in set(selected))
    gss = frozenset(sid for sid, v in votes.items() if v > k / 2)
    return GoldStandard(report_id, dict(votes), gss, k)


def precision(summary: Iterable[str], gss: Iterable[str]) -> float:
    summary = set(summary)
    return len(summary & set(gss)) / len(summary) if summary else 0.0


def recall(summary: Iterable[str], gss: Iterable[str]) -> float:
    gss = set(gss)
    if not gss:
        raise ValueError("recall is undefined for an empty gold standard")
    return len(set(summary) & gss) / len(gss)


def f_score(p: float, r: float) -> float:
    return 2 * p * r / (p + r) if p + r > 0 else 0.0


def max_links_by_count(votes: Mapping[str, int], size: int) -> int:
    return sum(sorted(votes.values(), reverse=True)[:size])


def max_links_by_words(votes: Mapping[str, int], word_counts: Mapping[str, int], budget: int) -> int:
    """Largest vote total of any sentence set using at most ``budget`` words (0/1 knapsack)."""
    best = np.zeros(budget + 1, dtype=np.int64)
    for sid, v in votes.items():
        w = word_counts[sid]
        if v <= 0 or w > budget:
            continue
        best[w:] = np.maximum(best[w:], best[: budget + 1 - w] + v)
    return int(best[budget])


def pyramid(
    summary: Iterable[str],
    votes: Mapping[str, int],
    mode: str = "sentences",
    word_counts: Mapping[str, int] | None = None,
) -> float:
    """Votes captured by the summary over the best achievable for its size.

    ``mode="sentences"`` compares against the best summary with the same
    number of sentences; ``mode="words"`` against the best with no more words.
    """
    total, best = _links(summary, votes, mode, word_counts)
    return total / best if best > 0 else 1.0


def _links(summary, votes, mode, word_counts) -> tuple[int, int]:
    summary = list(dict.fromkeys(summary))
    total = sum(votes.get(s, 0) for s in summary)
    if mode == "sentences":
        best = max_links_by_count(votes, len(summary))
    elif mode == "words":
        if word_counts is None:
            raise ValueError("words mode needs sentence word counts")
        best = max_links_by_words(votes, word_counts, sum(word_counts[s] for s in summary))
    else:
        raise ValueError(f"unknown pyramid mode {mode!r}")
    return total, best


def hit_rate(results: Mapping[str, Iterable[str]], injected: Mapping[str, str]) -> float:
    if not injected:
        return 0.0
    hits = sum(1 for rid, sid in injected.items() if sid in set(results.get(rid, ())))
    return hits / len(injected)


# Evaluation reports


@dataclass
class EvalReport:
    method: str
    per_report: dict[str, dict[str, float]]
    aggregate: dict[str, float]
    config: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"method": self.method, "aggregate": self.aggregate, "per_report": self.per_report, "config": self.config}


def evaluate(
    method: str,
    summaries: Mapping[str, Sequence[str]],
    golds: Mapping[str, GoldStandard],
    averaging: str = "macro",
    pyramid_mode: str = "sentences",
    word_counts: Mapping[str, Mapping[str, int]] | None = None,
    config: dict | None = None,
) -> EvalReport:
    per: dict[str, dict[str, float]] = {}
    sums = Counter()
    for rid, gold in golds.items():
        sel = list(summaries[rid])
        hits = len(set(sel) & gold.gss)
        p = precision(sel, gold.gss)
        r = recall(sel, gold.gss) if gold.gss else 0.0
        wc = word_counts.get(rid) if word_counts else None
        total, best = _links(sel, gold.votes, pyramid_mode, wc)
        per[rid] = {"precision": p, "recall": r, "f_score": f_score(p, r), "pyramid": total / best if best > 0 else 1.0}
        sums.update(hit=hits, sel=len(sel), gss=len(gold.gss), links=total, max_links=best)
    if averaging == "macro":
        agg = {m: float(np.mean([v[m] for v in per.values()])) if per else 0.0 for m in METRICS}
    elif averaging == "micro":
        p = sums["hit"] / sums["sel"] if sums["sel"] else 0.0
        r = sums["hit"] / sums["gss"] if sums["gss"] else 0.0
        agg = {"precision": p, "recall": r, "f_score": f_score(p, r),
               "pyramid": sums["links"] / sums["max_links"] if sums["max_links"] else 1.0}
    else:
        raise ValueError(f"averaging must be 'macro' or 'micro', not {averaging!r}")
    cfg = {"averaging": averaging, "pyramid_mode": pyramid_mode, **(config or {})}
    return EvalReport(method, per, agg, cfg)


def format_table(reports: Sequence[EvalReport]) -> str:
    """Fixed-width method x metric table, percentages to two decimals."""
    head = f"{'Method':<12}" + "".join(f"{h:>11}" for h in ("Precision", "Recall", "F-score", "Pyramid"))
    lines = [head, "-" * len(head)]
    for rep in reports:
        lines.append(f"{rep.method:<12}" + "".join(f"{100 * rep.aggregate[m]:>11.2f}" for m in METRICS))
    return "\n".join(lines)


# Statistics


def fisher_score(values: Sequence[float], labels: Sequence[int]) -> float:
    """Squared class-mean gap over the sum of unbiased within-class variances."""
    x = np.asarray(values, dtype=float)
    y = np.asarray(labels)
    pos, neg = x[y == 1], x[y == 0]
    if len(pos) < 2 or len(neg) < 2:
        raise ValueError("fisher score needs at least two instances of each class")
    num = (pos.mean() - neg.mean()) ** 2
    den = pos.var(ddof=1) + neg.var(ddof=1)
    if den == 0:
        return math.inf if num > 0 else 0.0
    return float(num / den)


def fisher_ranking(X: np.ndarray, y: Sequence[int], names: Sequence[str]) -> list[tuple[str, float]]:
    scores = [(n, fisher_score(X[:, j], y)) for j, n in enumerate(names)]
    # inf sorts first, ties keep schema order
    return sorted(scores, key=lambda t: -t[1])


def spearman_rho(x: Sequence[float], y: Sequence[float]) -> float:
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    den = math.sqrt(float(rx @ rx) * float(ry @ ry))
    return float(rx @ ry / den) if den > 0 else 0.0


@dataclass(frozen=True)
class Dendrogram:
    names: tuple[str, ...]
    merges: tuple[tuple[tuple[str, ...], tuple[str, ...], float], ...]

    def to_json(self) -> dict:
        return {"names": list(self.names),
                "merges": [{"left": list(a), "right": list(b), "similarity": h} for a, b, h in self.merges]}

    def render(self) -> str:
        return "\n".join(f"|rho|={h:.3f}  {{{', '.join(a)}}} + {{{', '.join(b)}}}" for a, b, h in self.merges)


def spearman_matrix(X: np.ndarray) -> np.ndarray:
    d = X.shape[1]
    R = np.eye(d)
    for i, j in itertools.combinations(range(d), 2):
        R[i, j] = R[j, i] = spearman_rho(X[:, i], X[:, j])
    return R


def attribute_cluster(X: np.ndarray, names: Sequence[str]) -> Dendrogram:
    """Average-linkage clustering of attributes on |Spearman rho| similarity.

    Merge heights are reported as similarities, so the first merge has the
    largest value.
    """
    d = X.shape[1]
    if d < 2:
        return Dendrogram(tuple(names), ())
    sim = np.abs(spearman_matrix(X))
    dist = np.clip(1.0 - sim, 0.0, None)
    np.fill_diagonal(dist, 0.0)
    Z = linkage(squareform(dist, checks=False), method="average")
    members: list[tuple[str, ...]] = [(n,) for n in names]
    merges = []
    for a, b, h, _ in Z:
        left, right = members[int(a)], members[int(b)]
        members.append(left + right)
        merges.append((left, right, float(1.0 - h)))
    return Dendrogram(tuple(names), tuple(merges))


def _signed_rank_counts(ranks2: Sequence[int]) -> np.ndarray:
    """Number of sign assignments giving each positive rank sum (in doubled ranks)."""
    total = int(sum(ranks2))
    counts = np.zeros(total + 1, dtype=object)
    counts[0] = 1
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[: total + 1 - r]
        counts = counts + shifted
    return counts


def wilcoxon_signed_rank(a: Sequence[float], b: Sequence[float], exact_max: int = 20) -> tuple[float, float]:
    """Paired signed-rank test; returns (W+, two-sided p).

    Zero differences are dropped, tied magnitudes get mid-ranks. For up to
    ``exact_max`` pairs the p-value comes from the exact permutation
    distribution of the (tie-adjusted) ranks; above that a normal
    approximation with continuity and tie corrections is used.
    """
    d = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    d = d[d != 0]
    n = len(d)
    if n == 0:
        return 0.0, 1.0
    ranks = rankdata(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    if n <= exact_max:
        ranks2 = [int(round(2 * r)) for r in ranks]
        counts = _signed_rank_counts(ranks2)
        total = 2 ** n
        w2 = int(round(2 * w_plus))
        lower = sum(counts[: w2 + 1]) / total
        upper = sum(counts[w2:]) / total
        return w_plus, float(min(1.0, 2 * min(lower, upper)))
    mean = n * (n + 1) / 4
    _, tie_counts = np.unique(ranks, return_counts=True)
    var = n * (n + 1) * (2 * n + 1) / 24 - float((tie_counts ** 3 - tie_counts).sum()) / 48
    if var <= 0:
        return w_plus, 1.0
    z = (abs(w_plus - mean) - 0.5) / math.sqrt(var)
    return w_plus, float(min(1.0, 2 * norm.sf(max(z, 0.0))))


# Volunteer ablation


@dataclass(frozen=True)
class VolunteerMatrix:
    volunteers: tuple[str, ...]
    attributes: tuple[str, ...]
    flags: np.ndarray  # volunteers x attributes, bool

    def __post_init__(self):
        uncovered = [a for j, a in enumerate(self.attributes) if not self.flags[:, j].any()]
        if uncovered:
            raise ValueError(f"attributes contributed by no volunteer: {', '.join(uncovered)}")

    def contributions(self) -> list[frozenset[str]]:
        return [frozenset(a for a, f in zip(self.attributes, row) if f) for row in self.flags]

    @classmethod
    def from_csv(cls, path: str | Path | None = None) -> "VolunteerMatrix":
        if path is None:
            text = resources.files("bugsum.data").joinpath("volunteers.csv").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        rows = [r for r in csv.reader(line for line in text.splitlines() if line and not line.startswith("#"))]
        header, body = rows[0], rows[1:]
        volunteers = tuple(header[1:])
        attributes = tuple(r[0] for r in body)
        flags = np.array([[c.strip() in ("1", "x", "X", "true", "True") for c in r[1:]] for r in body], dtype=bool).T
        return cls(volunteers, attributes, flags)


def _union_masks(masks: Sequence[int]) -> np.ndarray:
    """Attribute bitmask of the union for every volunteer subset, indexed by subset bitmask."""
    out = np.zeros(1 << len(masks), dtype=np.int64)
    for i, m in enumerate(masks):
        size = 1 << i
        out[size: 2 * size] = out[:size] | m
    return out


def _popcount(x: np.ndarray) -> np.ndarray:
    x = x.astype(np.int64)
    c = np.zeros_like(x)
    while x.any():
        c += x & 1
        x = x >> 1
    return c


@dataclass(frozen=True)
class Census:
    distinct_sets: tuple[frozenset[str], ...]
    combinations_by_size: dict[int, int]
    set_counts_by_size: dict[int, dict[frozenset[str], int]]


def volunteer_census(matrix: VolunteerMatrix) -> Census:
    """Enumerate all non-empty volunteer subsets and the attribute sets they induce."""
    attrs = matrix.attributes
    vmasks = [sum(1 << j for j, f in enumerate(row) if f) for row in matrix.flags]
    unions = _union_masks(vmasks)[1:]
    sizes = _popcount(np.arange(1, len(unions) + 1))
    by_size: dict[int, dict[frozenset[str], int]] = {}
    for k in range(1, len(vmasks) + 1):
        vals, counts = np.unique(unions[sizes == k], return_counts=True)
        by_size[k] = {_mask_to_set(int(v), attrs): int(c) for v, c in zip(vals, counts)}
    distinct = sorted({s for d in by_size.values() for s in d}, key=lambda s: (len(s), sorted(s)))
    return Census(tuple(distinct), {k: sum(d.values()) for k, d in by_size.items()}, by_size)


def _mask_to_set(mask: int, attrs: Sequence[str]) -> frozenset[str]:
    return frozenset(a for j, a in enumerate(attrs) if mask >> j & 1)


def winning_tables(
    census: Census,
    set_metrics: Mapping[frozenset[str], Mapping[str, float]],
    baselines: Mapping[str, Mapping[str, float]],
) -> dict[str, dict[str, list[float]]]:
    """``tables[metric][baseline][k-1]``: share of k-combinations that beat the baseline."""
    tables: dict[str, dict[str, list[float]]] = {}
    for metric in METRICS:
        tables[metric] = {}
        for name, base in baselines.items():
            row = []
            for k in sorted(census.set_counts_by_size):
                counts = census.set_counts_by_size[k]
                wins = sum(c for s, c in counts.items() if set_metrics[s][metric] > base[metric])
                row.append(wins / census.combinations_by_size[k])
            tables[metric][name] = row
    return tables


def ablate_volunteers(
    matrix: VolunteerMatrix,
    score_set: Callable[[frozenset[str]], Mapping[str, float]],
    baselines: Mapping[str, Mapping[str, float]],
) -> tuple[Census, dict[frozenset[str], Mapping[str, float]], dict]:
    """Score every distinct attribute set once and build the winning tables.

    ``score_set`` maps an attribute set to aggregate metrics, typically an
    LRCA leave-one-out run restricted to those columns.
    """
    census = volunteer_census(matrix)
    scores = {s: score_set(s) for s in census.distinct_sets}
    return census, scores, winning_tables(census, scores, baselines)


def lrca_columns(attribute_set: Iterable[str]) -> list[int]:
    return [j for j, a in enumerate(LRCA11.attributes) if a in set(attribute_set)]


def write_winning_csv(table: Mapping[str, Sequence[float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        k = len(next(iter(table.values()))) if table else 0
        w.writerow(["baseline", *range(1, k + 1)])
        for name, row in table.items():
            w.writerow([name, *(f"{100 * v:.1f}" for v in row)])


def dump_json(obj, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, default=_jsonable), encoding="utf-8")


def _jsonable(o):
    if isinstance(o, (frozenset, set)):
        return sorted(o)
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
