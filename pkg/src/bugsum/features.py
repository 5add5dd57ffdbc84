"""Sentence attribute extraction for the LRCA, BRC, Hurried and Combine schemas.

Every public per-attribute function takes ``(s, T, stats)`` (or a subset)
and is a direct, unoptimised computation. :func:`extract_matrix` computes
whole reports at once through a :class:`ReportView` that caches vectors
and the pairwise similarity matrix.
"""

from __future__ import annotations

import csv
import math
import re
from collections import Counter
from dataclasses import dataclass
from functools import cached_property, lru_cache
from importlib import resources
from typing import Iterable, Sequence

import numpy as np

from .corpus import BugReport, Sentence, preprocess
from .vsm import CorpusStats, aggregate_unit, cosine, cosine_matrix, vectorize


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    attributes: tuple[str, ...]

    @property
    def width(self) -> int:
        return len(self.attributes)


LRCA11 = FeatureSchema(
    "LRCA11", ("SWT", "SWD", "DUP", "SLEN", "SI", "SLOC", "CLEN", "DES", "CCW", "CODE", "REP")
)
BRC24 = FeatureSchema(
    "BRC24",
    (
        "MXS", "MNS", "SMS", "MXT", "MNT", "SMT", "TLOC", "CLOC", "SLEN", "SLEN2", "TPOS1", "TPOS2",
        "PPAU", "SPAU", "COS1", "COS2", "CENT1", "CENT2", "PENT", "SENT", "THISENT", "DOM", "BEGAUTH", "CWS",
    ),
)
HURRIED3 = FeatureSchema("HURRIED3", ("TITLE", "DES", "SENTIMENT"))
COMBINE27 = FeatureSchema("COMBINE27", BRC24.attributes + HURRIED3.attributes)

SCHEMAS: dict[str, FeatureSchema] = {s.name: s for s in (LRCA11, BRC24, HURRIED3, COMBINE27)}

DUP_THRESHOLD = 0.8

_LINK_PREFIXES = ("http://", "https://", "www.", "ftp://")
_CODE_STARTS = ("db2", "proc", "public", ">", "/*", "//")
_CODE_CONTAINS = ("<", "sql", "{", "}", "public static", "=")
_CODE_IF_RE = re.compile(r"if.*\(.*")


def get_schema(name: str | FeatureSchema) -> FeatureSchema:
    if isinstance(name, FeatureSchema):
        return name
    try:
        return SCHEMAS[name.upper()]
    except KeyError:
        raise ValueError(f"unknown feature schema {name!r}; expected one of {sorted(SCHEMAS)}") from None


@lru_cache(maxsize=None)
def _lexicon(name: str) -> frozenset[str]:
    text = resources.files("bugsum.data").joinpath(name).read_text(encoding="utf-8")
    words = [w.strip() for w in text.splitlines() if w.strip() and not w.startswith("#")]
    return frozenset(t for w in words for t in preprocess(w))


def positive_lexicon() -> frozenset[str]:
    return _lexicon("sentiment_positive.txt")


def negative_lexicon() -> frozenset[str]:
    return _lexicon("sentiment_negative.txt")


def _sentence_vec(s: Sentence, stats: CorpusStats) -> dict[str, float]:
    return vectorize(s.tokens, stats)


def _position(s: Sentence, T: BugReport) -> int:
    for i, other in enumerate(T.sentences):
        if other.id == s.id:
            return i
    raise KeyError(f"sentence {s.id} not in report {T.report_id}")


# LRCA attributes


def swt(s: Sentence, T: BugReport, stats: CorpusStats) -> float:
    return cosine(_sentence_vec(s, stats), aggregate_unit((x.tokens for x in T.sentences), stats))


def swd(s: Sentence, T: BugReport, stats: CorpusStats) -> float:
    if s.turn_no == 1:
        return 1.0
    return cosine(_sentence_vec(s, stats), aggregate_unit((x.tokens for x in T.turns[0].sentences), stats))


def dup(s: Sentence, T: BugReport, stats: CorpusStats, threshold: float = DUP_THRESHOLD) -> int:
    """1 if some earlier sentence has cosine similarity above ``threshold``."""
    v = _sentence_vec(s, stats)
    for other in T.sentences[: _position(s, T)]:
        if cosine(v, _sentence_vec(other, stats)) > threshold:
            return 1
    return 0


def slen(s: Sentence, T: BugReport) -> float:
    longest = max(x.char_len for x in T.sentences)
    return s.char_len / longest if longest else 0.0


def _importance(s: Sentence, stats: CorpusStats) -> float:
    return sum(_sentence_vec(s, stats).values())


def si(s: Sentence, T: BugReport, stats: CorpusStats) -> float:
    top = max(_importance(x, stats) for x in T.sentences)
    return _importance(s, stats) / top if top > 0 else 0.0


def sloc(s: Sentence, T: BugReport) -> float:
    return (_position(s, T) + 1) / len(T.sentences)


def clen(s: Sentence, T: BugReport) -> float:
    longest = max(t.char_len for t in T.turns)
    return T.turn_of(s).char_len / longest if longest else 0.0


def des(s: Sentence, T: BugReport | None = None) -> int:
    return int(s.turn_no == 1)


def has_hyperlink(text: str) -> bool:
    low = text.lower()
    return any(p in low for p in _LINK_PREFIXES)


def ccw(s: Sentence) -> float:
    if has_hyperlink(s.raw_text):
        return 0.0
    if "problem" in s.tokens:
        return 1.0
    return 0.5


def is_code(text: str) -> bool:
    t = text.strip()
    low = t.lower()
    if low.startswith(_CODE_STARTS):
        return True
    if any(p in low for p in _CODE_CONTAINS) or _CODE_IF_RE.search(low):
        return True
    return t.endswith(";")


def code(s: Sentence) -> int:
    return int(is_code(s.raw_text))


def rep(s: Sentence, T: BugReport) -> int:
    return int(T.turn_of(s).author.strip() == T.reporter.strip())


# Hurried attributes


def sentiment(s: Sentence | str) -> int:
    tokens = preprocess(s) if isinstance(s, str) else s.tokens
    pos, neg = positive_lexicon(), negative_lexicon()
    p = sum(t in pos for t in tokens)
    n = sum(t in neg for t in tokens)
    return (p > n) - (p < n)


def title_similarity(s: Sentence, T: BugReport, stats: CorpusStats) -> float:
    return cosine(_sentence_vec(s, stats), vectorize(preprocess(T.title), stats))


# BRC attributes


def sprob(word: str, participant: str, T: BugReport) -> float:
    """Share of the report's occurrences of ``word`` written by ``participant``."""
    total = by = 0
    for turn in T.turns:
        n = sum(tok == word for s in turn.sentences for tok in s.tokens)
        total += n
        if turn.author == participant:
            by += n
    return by / total if total else 0.0


def tprob(word: str, turn_no: int, T: BugReport) -> float:
    """Share of the report's occurrences of ``word`` that fall in one turn."""
    total = inside = 0
    for turn in T.turns:
        n = sum(tok == word for s in turn.sentences for tok in s.tokens)
        total += n
        if turn.turn_no == turn_no:
            inside += n
    return inside / total if total else 0.0


def entropy(tokens: Iterable[str]) -> float:
    counts = Counter(tokens)
    n = sum(counts.values())
    if n == 0:
        return 0.0
    return -sum(c / n * math.log(c / n) for c in counts.values())


def _weighted_cos(a: Counter, b: Counter, weight) -> float:
    return cosine({w: c * weight(w) for w, c in a.items()}, {w: c * weight(w) for w, c in b.items()})


def turn_times(T: BugReport) -> tuple[list[float], bool]:
    """Per-turn times and whether the turn-index proxy was used."""
    stamps = [t.timestamp for t in T.turns]
    if all(x is not None for x in stamps):
        return [float(x) for x in stamps], False
    return [float(t.turn_no - 1) for t in T.turns], True


def _time_attributes(turn_no: int, T: BugReport) -> tuple[float, float, float, float]:
    times, _ = turn_times(T)
    if len(times) < 2:
        return 0.0, 0.0, 0.0, 0.0
    first, last = min(times), max(times)
    span = last - first
    if span <= 0:
        return 0.0, 0.0, 0.0, 0.0
    k = turn_no - 1
    tpos1 = (times[k] - first) / span
    ppau = (times[k] - times[k - 1]) / span if k > 0 else 0.0
    spau = (times[k + 1] - times[k]) / span if k + 1 < len(times) else 0.0
    return tpos1, 1.0 - tpos1, ppau, spau


def extract_brc(s: Sentence, T: BugReport, stats: CorpusStats | None = None) -> "SentenceFeatures":
    pos = _position(s, T)
    sentences = T.sentences
    turn = T.turn_of(s)
    author = turn.author
    tokens = s.tokens

    sp = {w: sprob(w, author, T) for w in set(tokens)}
    tp = {w: tprob(w, turn.turn_no, T) for w in set(tokens)}
    sp_vals = [sp[w] for w in tokens]
    tp_vals = [tp[w] for w in tokens]

    def agg(vals):
        return (max(vals), sum(vals) / len(vals), sum(vals)) if vals else (0.0, 0.0, 0.0)

    mxs, mns, sms = agg(sp_vals)
    mxt, mnt, smt = agg(tp_vals)

    tloc = s.index / len(turn.sentences)
    cloc = sloc(s, T)
    max_words = max(x.word_count for x in sentences)
    slen_w = s.word_count / max_words if max_words else 0.0
    max_turn_words = max(x.word_count for x in turn.sentences)
    slen2 = s.word_count / max_turn_words if max_turn_words else 0.0
    tpos1, tpos2, ppau, spau = _time_attributes(turn.turn_no, T)

    before = Counter(t for x in sentences[:pos] for t in x.tokens)
    after = Counter(t for x in sentences[pos + 1:] for t in x.tokens)
    whole = Counter(t for x in sentences for t in x.tokens)
    own = Counter(tokens)

    def sw(w):
        return sprob(w, author, T)

    def tw(w):
        return tprob(w, turn.turn_no, T)

    cos1 = _weighted_cos(before, after, sw)
    cos2 = _weighted_cos(before, after, tw)
    cent1 = _weighted_cos(own, whole, sw)
    cent2 = _weighted_cos(own, whole, tw)
    pent = entropy(before.elements())
    sent = entropy(after.elements())
    thisent = entropy(tokens)

    total_words = sum(x.word_count for x in sentences)
    author_words = sum(x.word_count for t in T.turns if t.author == author for x in t.sentences)
    dom = author_words / total_words if total_words else 0.0
    begauth = rep(s, T)

    k = turn.turn_no - 1
    neighbours = set()
    for j in (k - 1, k + 1):
        if 0 <= j < len(T.turns):
            neighbours.update(t for x in T.turns[j].sentences for t in x.tokens)
    cws = sum(1 for w in set(tokens) if w in neighbours)

    values = (
        mxs, mns, sms, mxt, mnt, smt, tloc, cloc, slen_w, slen2, tpos1, tpos2,
        ppau, spau, cos1, cos2, cent1, cent2, pent, sent, thisent, dom, begauth, cws,
    )
    return SentenceFeatures(s.id, BRC24.name, tuple(float(v) for v in values))


@dataclass(frozen=True)
class SentenceFeatures:
    sentence_id: str
    schema: str
    values: tuple[float, ...]

    def __getitem__(self, attribute: str) -> float:
        return self.values[SCHEMAS[self.schema].attributes.index(attribute)]


def extract_lrca(s: Sentence, T: BugReport, stats: CorpusStats, dup_threshold: float = DUP_THRESHOLD) -> SentenceFeatures:
    values = (
        swt(s, T, stats), swd(s, T, stats), dup(s, T, stats, dup_threshold), slen(s, T), si(s, T, stats),
        sloc(s, T), clen(s, T), des(s, T), ccw(s), code(s), rep(s, T),
    )
    return SentenceFeatures(s.id, LRCA11.name, tuple(float(v) for v in values))


def extract_hurried(s: Sentence, T: BugReport, stats: CorpusStats) -> SentenceFeatures:
    values = (title_similarity(s, T, stats), des(s, T), sentiment(s))
    return SentenceFeatures(s.id, HURRIED3.name, tuple(float(v) for v in values))


def extract_combine(s: Sentence, T: BugReport, stats: CorpusStats) -> SentenceFeatures:
    values = extract_brc(s, T, stats).values + extract_hurried(s, T, stats).values
    return SentenceFeatures(s.id, COMBINE27.name, values)


def extract(s: Sentence, T: BugReport, stats: CorpusStats, schema, dup_threshold: float = DUP_THRESHOLD) -> SentenceFeatures:
    schema = get_schema(schema)
    if schema is LRCA11:
        return extract_lrca(s, T, stats, dup_threshold)
    if schema is BRC24:
        return extract_brc(s, T, stats)
    if schema is HURRIED3:
        return extract_hurried(s, T, stats)
    return extract_combine(s, T, stats)


# Whole-report extraction


class ReportView:
    """Cached per-report quantities shared by the batch extractors."""

    def __init__(self, report: BugReport, stats: CorpusStats):
        self.report = report
        self.stats = stats
        self.sentences = report.sentences
        self.vectors = [vectorize(s.tokens, stats) for s in self.sentences]

    @cached_property
    def similarities(self) -> np.ndarray:
        return cosine_matrix(self.vectors)

    @cached_property
    def report_vector(self) -> dict[str, float]:
        return aggregate_unit((s.tokens for s in self.sentences), self.stats)

    @cached_property
    def description_vector(self) -> dict[str, float]:
        return aggregate_unit((s.tokens for s in self.report.turns[0].sentences), self.stats)

    @cached_property
    def title_vector(self) -> dict[str, float]:
        return vectorize(preprocess(self.report.title), self.stats)

    def lrca(self, dup_threshold: float = DUP_THRESHOLD) -> np.ndarray:
        T = self.report
        n = len(self.sentences)
        out = np.zeros((n, LRCA11.width))
        if n == 0:
            return out
        sims = self.similarities
        importance = np.array([sum(v.values()) for v in self.vectors])
        top_importance = importance.max()
        longest = max(s.char_len for s in self.sentences)
        turn_len = [t.char_len for t in T.turns]
        longest_turn = max(turn_len)
        for i, s in enumerate(self.sentences):
            earlier = sims[i, :i]
            out[i] = (
                cosine(self.vectors[i], self.report_vector),
                1.0 if s.turn_no == 1 else cosine(self.vectors[i], self.description_vector),
                float(bool((earlier > dup_threshold).any())),
                s.char_len / longest if longest else 0.0,
                importance[i] / top_importance if top_importance > 0 else 0.0,
                (i + 1) / n,
                turn_len[s.turn_no - 1] / longest_turn if longest_turn else 0.0,
                des(s),
                ccw(s),
                code(s),
                rep(s, T),
            )
        return out

    def hurried(self) -> np.ndarray:
        return np.array(
            [(cosine(v, self.title_vector), des(s), sentiment(s)) for s, v in zip(self.sentences, self.vectors)],
            dtype=float,
        ).reshape(len(self.sentences), HURRIED3.width)

    def brc(self) -> np.ndarray:
        return _brc_matrix(self.report)


def _brc_matrix(T: BugReport) -> np.ndarray:
    sentences = T.sentences
    n = len(sentences)
    out = np.zeros((n, BRC24.width))
    if n == 0:
        return out
    total = Counter(t for s in sentences for t in s.tokens)
    by_author: dict[str, Counter] = {}
    by_turn: list[Counter] = []
    for turn in T.turns:
        c = Counter(t for s in turn.sentences for t in s.tokens)
        by_turn.append(c)
        by_author.setdefault(turn.author, Counter()).update(c)
    total_words = sum(s.word_count for s in sentences)
    words_by_author: Counter[str] = Counter()
    for turn in T.turns:
        words_by_author[turn.author] += sum(s.word_count for s in turn.sentences)
    max_words = max(s.word_count for s in sentences)
    turn_terms = [set(c) for c in by_turn]

    prefix = [Counter()]
    for s in sentences:
        nxt = prefix[-1].copy()
        nxt.update(s.tokens)
        prefix.append(nxt)

    for i, s in enumerate(sentences):
        k = s.turn_no - 1
        turn = T.turns[k]
        author = turn.author
        ac, tc = by_author[author], by_turn[k]

        def sw(w, ac=ac):
            return ac[w] / total[w] if total[w] else 0.0

        def tw(w, tc=tc):
            return tc[w] / total[w] if total[w] else 0.0

        sp_vals = [sw(w) for w in s.tokens]
        tp_vals = [tw(w) for w in s.tokens]
        if s.tokens:
            agg_s = (max(sp_vals), sum(sp_vals) / len(sp_vals), sum(sp_vals))
            agg_t = (max(tp_vals), sum(tp_vals) / len(tp_vals), sum(tp_vals))
        else:
            agg_s = agg_t = (0.0, 0.0, 0.0)
        max_turn_words = max(x.word_count for x in turn.sentences)
        tpos1, tpos2, ppau, spau = _time_attributes(turn.turn_no, T)
        before = prefix[i]
        after = total - prefix[i + 1]
        own = Counter(s.tokens)
        neighbours = set()
        for j in (k - 1, k + 1):
            if 0 <= j < len(T.turns):
                neighbours |= turn_terms[j]
        out[i] = (
            *agg_s,
            *agg_t,
            s.index / len(turn.sentences),
            (i + 1) / n,
            s.word_count / max_words if max_words else 0.0,
            s.word_count / max_turn_words if max_turn_words else 0.0,
            tpos1,
            tpos2,
            ppau,
            spau,
            _weighted_cos(before, after, sw),
            _weighted_cos(before, after, tw),
            _weighted_cos(own, total, sw),
            _weighted_cos(own, total, tw),
            entropy(before.elements()),
            entropy(after.elements()),
            entropy(s.tokens),
            words_by_author[author] / total_words if total_words else 0.0,
            int(author.strip() == T.reporter.strip()),
            sum(1 for w in own if w in neighbours),
        )
    return out


@dataclass(frozen=True)
class FeatureMatrix:
    report_id: str
    schema: str
    sentence_ids: tuple[str, ...]
    values: np.ndarray
    time_fallback: bool = False

    def rows(self) -> list[SentenceFeatures]:
        return [SentenceFeatures(sid, self.schema, tuple(map(float, row))) for sid, row in zip(self.sentence_ids, self.values)]


def extract_matrix(T: BugReport, stats: CorpusStats, schema="LRCA11", dup_threshold: float = DUP_THRESHOLD) -> FeatureMatrix:
    """Feature vectors for every sentence of ``T``, in document order."""
    schema = get_schema(schema)
    view = ReportView(T, stats)
    fallback = False
    if schema is LRCA11:
        values = view.lrca(dup_threshold)
    elif schema is HURRIED3:
        values = view.hurried()
    else:
        values = view.brc()
        fallback = turn_times(T)[1] and len(T.turns) > 1
        if schema is COMBINE27:
            values = np.hstack([values, view.hurried()])
    ids = tuple(s.id for s in T.sentences)
    if not np.isfinite(values).all():
        bad = ids[int(np.argwhere(~np.isfinite(values))[0][0])]
        raise ValueError(f"non-finite feature for sentence {bad} of report {T.report_id}")
    return FeatureMatrix(T.report_id, schema.name, ids, values, fallback)


def write_feature_csv(path, matrices: Sequence[FeatureMatrix], labels: dict[tuple[str, str], int] | None = None) -> None:
    """Dump feature rows: ``sentence_id``, optional ``label``, then attribute columns."""
    if not matrices:
        raise ValueError("no feature matrices to write")
    schema = get_schema(matrices[0].schema)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        header = ["report_id", "sentence_id"] + (["label"] if labels is not None else []) + list(schema.attributes)
        w.writerow(header)
        for fm in matrices:
            for sid, row in zip(fm.sentence_ids, fm.values):
                lab = [labels.get((fm.report_id, sid), 0)] if labels is not None else []
                w.writerow([fm.report_id, sid, *lab, *(repr(float(v)) for v in row)])
