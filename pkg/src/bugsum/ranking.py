"""Logistic-regression sentence ranker and the leave-one-out harness."""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from .corpus import AnnotatedCorpus, BugReport
from .features import DUP_THRESHOLD, FeatureMatrix, extract_matrix, get_schema
from .vsm import CorpusStats, stats_for_reports

log = logging.getLogger(__name__)


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    l2_lambda: float = 1e-4
    max_iters: int = 500
    tol: float = 1e-8

    def __post_init__(self):
        if self.l2_lambda < 0 or self.max_iters <= 0 or self.tol <= 0:
            raise ValueError(f"invalid training configuration {self}")

    @property
    def hash(self) -> str:
        blob = json.dumps({"optimizer": "gd-bb-armijo/1", **asdict(self)}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class RankModel:
    schema: str
    weights: np.ndarray
    bias: float
    means: np.ndarray
    stds: np.ndarray
    config_hash: str = ""
    columns: tuple[int, ...] | None = None

    def to_json(self) -> dict:
        out = {
            "schema": self.schema,
            "weights": [float(w) for w in self.weights],
            "bias": float(self.bias),
            "means": [float(m) for m in self.means],
            "stds": [float(s) for s in self.stds],
            "config_hash": self.config_hash,
        }
        if self.columns is not None:
            out["columns"] = list(self.columns)
        return out

    @classmethod
    def from_json(cls, payload: dict) -> "RankModel":
        cols = payload.get("columns")
        return cls(
            schema=payload["schema"],
            weights=np.array(payload["weights"], dtype=float),
            bias=float(payload["bias"]),
            means=np.array(payload["means"], dtype=float),
            stds=np.array(payload["stds"], dtype=float),
            config_hash=payload.get("config_hash", ""),
            columns=tuple(cols) if cols is not None else None,
        )

    def save(self, path: str | Path) -> None:
        # json emits repr() floats, which round-trip exactly
        Path(path).write_text(json.dumps(self.to_json(), indent=1), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "RankModel":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))

    def select(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return X[:, list(self.columns)] if self.columns is not None else X

    def standardize(self, X: np.ndarray) -> np.ndarray:
        return (self.select(X) - self.means) / self.stds


def sigmoid(z):
    z = np.asarray(z, dtype=float)
    # split by sign to avoid overflow in exp
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def log_likelihood(theta: np.ndarray, X: np.ndarray, y: np.ndarray) -> float:
    """Mean Bernoulli log-likelihood; ``theta[0]`` is the bias."""
    z = theta[0] + X @ theta[1:]
    return float(np.mean(y * z - np.logaddexp(0.0, z)))


def objective(theta: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> float:
    """Penalized negative mean log-likelihood (the quantity minimised)."""
    w = theta[1:]
    return -log_likelihood(theta, X, y) + 0.5 * lam * float(w @ w)


def gradient(theta: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    p = sigmoid(theta[0] + X @ theta[1:])
    r = (p - y) / len(y)
    g = np.empty_like(theta)
    g[0] = r.sum()
    g[1:] = X.T @ r + lam * theta[1:]
    return g


def _minimise(X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> tuple[np.ndarray, list[float]]:
    theta = np.zeros(X.shape[1] + 1)
    f = objective(theta, X, y, cfg.l2_lambda)
    g = gradient(theta, X, y, cfg.l2_lambda)
    history = [f]
    step = 1.0
    prev_theta = prev_g = None
    for _ in range(cfg.max_iters):
        if prev_theta is not None:
            # Barzilai-Borwein trial step, then Armijo backtracking
            s, dg = theta - prev_theta, g - prev_g
            sy = float(s @ dg)
            step = float(s @ s) / sy if sy > 0 else 1.0
        gg = float(g @ g)
        if gg == 0.0:
            break
        while True:
            cand = theta - step * g
            fc = objective(cand, X, y, cfg.l2_lambda)
            if fc <= f - 1e-4 * step * gg or step < 1e-20:
                break
            step *= 0.5
        if fc > f:
            break
        prev_theta, prev_g = theta, g
        theta, g = cand, gradient(cand, X, y, cfg.l2_lambda)
        rel = (f - fc) / max(abs(f), 1e-300)
        f = fc
        history.append(f)
        if rel < cfg.tol:
            break
    return theta, history


def train(
    X: np.ndarray,
    y: Sequence[int],
    cfg: TrainConfig | None = None,
    schema: str = "LRCA11",
    sentence_ids: Sequence[str] | None = None,
    columns: Sequence[int] | None = None,
) -> RankModel:
    """Fit L2-penalised logistic regression on standardized columns.

    ``columns`` restricts the model to a subset of the schema's attributes;
    prediction then accepts full-width vectors.
    """
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if X.shape[0] != y.shape[0] or X.shape[0] < 2:
        raise TrainingError(f"need matching X/y with at least 2 rows, got {X.shape[0]} and {y.shape[0]}")
    if not np.isfinite(X).all():
        row = int(np.argwhere(~np.isfinite(X))[0][0])
        name = sentence_ids[row] if sentence_ids is not None else f"row {row}"
        raise TrainingError(f"non-finite feature value for sentence {name}")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise TrainingError("training labels must contain both classes 0 and 1")
    if columns is not None:
        X = X[:, list(columns)]
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    theta, _ = _minimise((X - means) / stds, y, cfg)
    return RankModel(schema, theta[1:], float(theta[0]), means, stds, cfg.hash,
                     tuple(columns) if columns is not None else None)


def training_history(X, y, cfg: TrainConfig | None = None) -> list[float]:
    """Objective value after every accepted step (standardized inputs)."""
    cfg = cfg or TrainConfig()
    X = np.atleast_2d(np.asarray(X, dtype=float))
    stds = X.std(axis=0)
    stds[stds == 0] = 1.0
    return _minimise((X - X.mean(axis=0)) / stds, np.asarray(y, dtype=float), cfg)[1]


def predict_proba(model: RankModel, X: np.ndarray) -> np.ndarray:
    Z = model.standardize(X)
    if Z.shape[1] != len(model.weights):
        raise ValueError(f"feature width {Z.shape[1]} does not match model width {len(model.weights)}")
    return sigmoid(Z @ model.weights + model.bias)


def predict(model: RankModel, x: Sequence[float]) -> float:
    return float(predict_proba(model, np.asarray(x, dtype=float).reshape(1, -1))[0])


def model_log_likelihood(model: RankModel, X: np.ndarray, y: Sequence[int]) -> float:
    """Mean training log-likelihood of ``model`` on raw (unstandardized) data."""
    Z = model.standardize(X)
    theta = np.concatenate([[model.bias], model.weights])
    return log_likelihood(theta, Z, np.asarray(y, dtype=float))


def rank_by_scores(ids: Sequence[str], scores: Sequence[float]) -> list[tuple[str, float]]:
    """Descending score, ties broken by document position."""
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], i))
    return [(ids[i], float(scores[i])) for i in order]


def rank_report(model: RankModel, fm: FeatureMatrix) -> list[tuple[str, float]]:
    if fm.schema != model.schema:
        raise ValueError(f"model schema {model.schema} does not match features {fm.schema}")
    return rank_by_scores(fm.sentence_ids, predict_proba(model, fm.values))


# Leave-one-out


def labels_for(report: BugReport, gss: Iterable[str]) -> np.ndarray:
    gold = set(gss)
    return np.array([int(s.id in gold) for s in report.sentences])


@dataclass(frozen=True)
class FoldData:
    """Features for one leave-one-out fold: test report plus the training rows."""

    held_out: str
    test: FeatureMatrix
    train_X: np.ndarray
    train_y: np.ndarray
    train_ids: tuple[str, ...]


def _gold_sets(corpus: AnnotatedCorpus) -> dict[str, frozenset[str]]:
    from .evaluation import gold_standard

    return {rid: gold_standard(entries).gss for rid, entries in corpus.annotations.items()}


def _fold_features(args) -> FoldData:
    reports, golds, held, schema, dup_threshold, idf_scope = args
    train_reports = [r for r in reports if r.report_id != held]
    test_report = next(r for r in reports if r.report_id == held)
    stats = stats_for_reports(train_reports if idf_scope == "train" else reports)
    mats = [extract_matrix(r, stats, schema, dup_threshold) for r in train_reports]
    X = np.vstack([m.values for m in mats])
    y = np.concatenate([labels_for(r, golds[r.report_id]) for r in train_reports])
    ids = tuple(f"{m.report_id}:{sid}" for m in mats for sid in m.sentence_ids)
    return FoldData(held, extract_matrix(test_report, stats, schema, dup_threshold), X, y, ids)


def _parallel_map(fn: Callable, items: list, threads: int) -> list:
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def loo_folds(
    corpus: AnnotatedCorpus,
    schema="LRCA11",
    dup_threshold: float = DUP_THRESHOLD,
    idf_scope: str = "train",
    threads: int = 1,
) -> list[FoldData]:
    """Per-fold feature matrices, computed once so several models can reuse them."""
    schema = get_schema(schema)
    reports = corpus.annotated_reports
    if len(reports) < 2:
        raise TrainingError("leave-one-out needs at least 2 annotated reports")
    if idf_scope not in ("train", "corpus"):
        raise ValueError(f"idf_scope must be 'train' or 'corpus', not {idf_scope!r}")
    golds = _gold_sets(corpus)
    jobs = [(reports, golds, r.report_id, schema.name, dup_threshold, idf_scope) for r in reports]
    return _parallel_map(_fold_features, jobs, threads)


def loo_rank(folds: Sequence[FoldData], cfg: TrainConfig | None = None, columns: Sequence[int] | None = None,
             schema: str | None = None) -> dict[str, list[tuple[str, float]]]:
    out = {}
    for fold in folds:
        model = train(fold.train_X, fold.train_y, cfg, fold.test.schema, fold.train_ids, columns)
        out[fold.held_out] = rank_report(model, fold.test)
    return out


def leave_one_out(
    corpus: AnnotatedCorpus,
    schema="LRCA11",
    cfg: TrainConfig | None = None,
    dup_threshold: float = DUP_THRESHOLD,
    idf_scope: str = "train",
    threads: int = 1,
    columns: Sequence[int] | None = None,
) -> dict[str, list[tuple[str, float]]]:
    """Rank each annotated report with a model trained on all the others."""
    folds = loo_folds(corpus, schema, dup_threshold, idf_scope, threads)
    log.info("leave-one-out: %d folds, schema %s", len(folds), get_schema(schema).name)
    return loo_rank(folds, cfg, columns)


def train_on_corpus(
    corpus: AnnotatedCorpus,
    schema="LRCA11",
    cfg: TrainConfig | None = None,
    dup_threshold: float = DUP_THRESHOLD,
    stats: CorpusStats | None = None,
) -> RankModel:
    schema = get_schema(schema)
    reports = corpus.annotated_reports
    stats = stats or stats_for_reports(reports)
    golds = _gold_sets(corpus)
    mats = [extract_matrix(r, stats, schema, dup_threshold) for r in reports]
    X = np.vstack([m.values for m in mats])
    y = np.concatenate([labels_for(r, golds[r.report_id]) for r in reports])
    ids = [f"{m.report_id}:{sid}" for m in mats for sid in m.sentence_ids]
    return train(X, y, cfg, schema.name, ids)
