"""Weighted ensembles over per-model class probabilities and their accuracy/fairness trade-off.

The ensemble score of an instance is ``sum_i alpha_i * o_i(x)`` taken per
class; the predicted class is the arg-max, with exact ties going to the lowest
class index (class 0, the negative class). A sweep evaluates every weight
vector on a regular grid and the Pareto frontier keeps the candidates that no
other candidate beats on both accuracy (higher) and gap (lower).
"""

from __future__ import annotations

import itertools
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .data import LabelChannel, PredictionMatrix, _read_records, _write_csv, _number
from .errors import ConfigError, CoverageError, SchemaError, ShapeError, ValidationError
from .fairness import Confusion, FairnessReport, GroupedConfusion, report_from_confusion

WeightVector = tuple  # tuple[float, ...], each in [0, 1], not all zero

GAP_METRICS = ("eoo", "disc")
_CHUNK_CELLS = 1 << 21


@dataclass(frozen=True)
class EnsembleCandidate:
    weights: WeightVector
    accuracy: float | None
    gap: float | None
    report: FairnessReport | None = None

    @property
    def defined(self) -> bool:
        return self.gap is not None and self.accuracy is not None


@dataclass(frozen=True)
class ParetoFrontier:
    points: tuple[EnsembleCandidate, ...]

    def __iter__(self):
        return iter(self.points)

    def __len__(self):
        return len(self.points)

    def weights(self) -> set:
        return {p.weights for p in self.points}


def check_weights(weights: Sequence[float], n_models: int) -> WeightVector:
    w = tuple(float(a) for a in weights)
    if len(w) != n_models:
        raise ShapeError(f"{len(w)} weights for {n_models} models")
    if any(not 0.0 <= a <= 1.0 for a in w):
        raise ValidationError(f"weights must lie in [0, 1]: {w}")
    if not any(w):
        raise ValidationError("weights must not all be zero")
    return w


def ensemble_scores(weights: np.ndarray, probs: np.ndarray) -> np.ndarray:
    """Per-class weighted sums: (G, M) weights and (N, M, C) probabilities -> (G, N, C).

    Models are accumulated one at a time in index order so that every caller
    gets bit-identical scores for the same weight vector.
    """
    g = weights.shape[0]
    n, m, c = probs.shape
    scores = np.zeros((g, n, c))
    for i in range(m):
        scores += weights[:, i, None, None] * probs[None, :, i, :]
    return scores


def combine(weights: Sequence[float], preds: PredictionMatrix) -> dict[str, int]:
    w = check_weights(weights, preds.n_models)
    scores = ensemble_scores(np.array([w]), preds.probs)[0]
    # argmax returns the first maximum, so exact ties go to the lowest class
    return {id_: int(k) for id_, k in zip(preds.ids, scores.argmax(axis=1))}


def weight_grid(n_models: int, step: float) -> list[WeightVector]:
    """All vectors in {0, step, ..., 1}^M except all-zero, in lexicographic order."""
    if n_models < 1:
        raise ConfigError("need at least one model")
    if not step > 0 or step > 1:
        raise ConfigError(f"step must lie in (0, 1], got {step!r}")
    n = round(1 / step)
    if abs(n * step - 1) > 1e-9:
        raise ConfigError(f"step {step!r} does not divide 1")
    levels = [k / n for k in range(n + 1)]
    return [w for w in itertools.product(levels, repeat=n_models) if any(w)]


def _align(preds: PredictionMatrix, truth, groups: Mapping[str, int]):
    truth = truth.labels if isinstance(truth, LabelChannel) else truth
    ids = sorted(preds.ids)
    for name, m in (("truth", truth), ("groups", groups)):
        diff = sorted(set(ids) ^ set(m))
        if diff:
            raise CoverageError(f"{name} and predictions cover different ids: {', '.join(diff[:10])}", diff)
    t = np.array([truth[i] for i in ids])
    g = np.array([groups[i] for i in ids])
    if not (np.isin(t, (0, 1)).all() and np.isin(g, (0, 1)).all()):
        raise ValidationError("truth and groups must be binary")
    return preds.reindex(ids), t.astype(np.int64), g.astype(np.int64)


def _evaluate_chunk(weights: np.ndarray, probs: np.ndarray, masks) -> list[GroupedConfusion]:
    pred = ensemble_scores(weights, probs).argmax(axis=2).astype(np.int64)
    per_group = []
    for pos_mask, neg_mask in masks:
        tp = pred @ pos_mask
        fp = pred @ neg_mask
        per_group.append((tp, pos_mask.sum() - tp, fp, neg_mask.sum() - fp))
    out = []
    for k in range(len(weights)):
        (tp0, fn0, fp0, tn0), (tp1, fn1, fp1, tn1) = [[int(a[k]) for a in grp] for grp in per_group]
        out.append(GroupedConfusion(Confusion(tp0, fp0, tn0, fn0), Confusion(tp1, fp1, tn1, fn1)))
    return out


def sweep(preds: PredictionMatrix, truth, groups: Mapping[str, int], grid: Sequence[WeightVector],
          gap_metric: str = "eoo", threads: int = 1) -> list[EnsembleCandidate]:
    """Evaluate every weight vector of ``grid``; output order is grid order.

    Candidates whose gap is undefined carry ``gap=None`` and are skipped by
    :func:`pareto_frontier`.
    """
    if gap_metric not in GAP_METRICS:
        raise ConfigError(f"gap metric must be one of {GAP_METRICS}")
    if preds.n_classes != 2:
        raise ShapeError(f"fairness sweeps need binary predictions, got {preds.n_classes} classes")
    grid = [check_weights(w, preds.n_models) for w in grid]
    preds, t, g = _align(preds, truth, groups)
    masks = [(((t == 1) & (g == grp)).astype(np.int64), ((t == 0) & (g == grp)).astype(np.int64))
             for grp in (0, 1)]
    size = max(1, _CHUNK_CELLS // max(1, preds.probs.shape[0] * 2))
    chunks = [np.array(grid[i:i + size], dtype=float).reshape(-1, preds.n_models)
              for i in range(0, len(grid), size)]
    work = lambda w: _evaluate_chunk(w, preds.probs, masks)  # noqa: E731
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(threads) as pool:
            confusions = [c for part in pool.map(work, chunks) for c in part]
    else:
        confusions = [c for w in chunks for c in work(w)]
    out = []
    for w, conf in zip(grid, confusions):
        rep = report_from_confusion(conf)
        out.append(EnsembleCandidate(w, rep.accuracy_overall, rep.gap(gap_metric), rep))
    return out


def dominates(a: EnsembleCandidate, b: EnsembleCandidate) -> bool:
    return (a.accuracy >= b.accuracy and a.gap <= b.gap) and (a.accuracy > b.accuracy or a.gap < b.gap)


def pareto_frontier(candidates: Iterable[EnsembleCandidate]) -> ParetoFrontier:
    """Non-dominated candidates, sorted by accuracy descending.

    Candidates with identical (accuracy, gap) collapse to the one with the
    lexicographically smallest weight vector.
    """
    pool = sorted((c for c in candidates if c.defined), key=lambda c: (-c.accuracy, c.gap, c.weights))
    kept = []
    best_gap = math.inf
    for acc, group in itertools.groupby(pool, key=lambda c: c.accuracy):
        first = next(group)
        if first.gap < best_gap:
            kept.append(first)
            best_gap = first.gap
    return ParetoFrontier(tuple(kept))


def select_top_k_intersection(frontiers: Sequence[ParetoFrontier], k: int) -> list[EnsembleCandidate]:
    """Weight vectors on every frontier, lowest gap first, at most ``k`` of them.

    Candidates are returned as they appear on the first frontier.
    """
    if not frontiers:
        raise ValidationError("need at least one frontier")
    common = set.intersection(*(f.weights() for f in frontiers))
    picked = sorted((p for p in frontiers[0] if p.weights in common),
                    key=lambda c: (c.gap, -c.accuracy, c.weights))
    if not picked:
        warnings.warn("Pareto frontiers share no weight vector", stacklevel=2)
    return picked[:k]


def one_hot_index(weights: WeightVector) -> int | None:
    """Model index when ``weights`` selects exactly one model with weight 1."""
    nonzero = [i for i, a in enumerate(weights) if a != 0]
    if len(nonzero) == 1 and weights[nonzero[0]] == 1.0:
        return nonzero[0]
    return None


# ---------------------------------------------------------------- candidate files


def write_candidates(candidates: Sequence[EnsembleCandidate], model_names: Sequence[str], path,
                     extra: Mapping[str, Sequence] | None = None):
    header = [f"alpha_{n}" for n in model_names] + ["accuracy", "gap", "defined"]
    extra = extra or {}
    header += list(extra)
    rows = []
    for k, c in enumerate(candidates):
        row = [*c.weights, "" if c.accuracy is None else c.accuracy, "" if c.gap is None else c.gap, int(c.defined)]
        rows.append(row + [col[k] for col in extra.values()])
    _write_csv(path, header, rows)


def load_candidates(path) -> tuple[list[str], list[EnsembleCandidate]]:
    header, records = _read_records(path)
    names = [h[len("alpha_"):] for h in header if h.startswith("alpha_")]
    for col in ("accuracy", "gap", "defined"):
        if col not in header:
            raise SchemaError(f"{path}: missing column {col}")
    if not names:
        raise SchemaError(f"{path}: no alpha_<model> columns")
    out = []
    for k, rec in enumerate(records, start=2):
        w = tuple(_number(rec[f"alpha_{n}"], k, f"alpha_{n}") for n in names)
        acc = None if rec["accuracy"] == "" else _number(rec["accuracy"], k, "accuracy")
        gap = None if rec["gap"] == "" else _number(rec["gap"], k, "gap")
        out.append(EnsembleCandidate(w, acc, gap))
    return names, out
