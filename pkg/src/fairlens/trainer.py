"""Binary logistic regression trained by full-batch gradient descent.

A small, fully deterministic stand-in for the deep classifiers: the ensemble
layer only needs each model's class probabilities, so any learner producing
them can be swapped in through prediction files.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import AUFrame, LabelChannel, PredictionMatrix
from .errors import ConfigError, ShapeError, ValidationError
from .expressions import DEFAULT_TAXONOMY, ExpressionTaxonomy
from .geometry import AttractivenessScores

log = logging.getLogger(__name__)

ATTRACTIVENESS_FEATURES = ("golden_ratio", "symmetry", "neocanons")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 100
    seed: int = 0
    l2: float = 0.0
    # multiply the learning rate by decay_factor every decay_every epochs (0 = never)
    decay_factor: float = 1.0
    decay_every: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.l2 < 0:
            raise ConfigError("l2 must be >= 0")
        if self.decay_every < 0 or not self.decay_factor > 0:
            raise ConfigError("invalid learning-rate decay")


@dataclass(frozen=True)
class Standardizer:
    mean: tuple[float, ...]
    scale: tuple[float, ...]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - np.array(self.mean)) / np.array(self.scale)


@dataclass(eq=False)
class LinearModel:
    """Weights ``w_1..w_D`` followed by the bias."""

    weights: np.ndarray
    feature_names: tuple[str, ...] = ()
    standardizer: Standardizer | None = None
    classes: int = field(default=2, init=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.ndim != 1 or self.weights.size < 1 or not np.isfinite(self.weights).all():
            raise ValidationError("model weights must be a finite, non-empty vector")

    @property
    def n_features(self) -> int:
        return self.weights.size - 1

    def to_json(self) -> dict:
        out = {"classes": self.classes, "weights": [float(w) for w in self.weights],
               "feature_names": list(self.feature_names)}
        if self.standardizer is not None:
            out["standardizer"] = {"mean": list(self.standardizer.mean), "scale": list(self.standardizer.scale)}
        return out

    @classmethod
    def from_json(cls, data: dict) -> "LinearModel":
        std = data.get("standardizer")
        return cls(np.array(data["weights"], dtype=float), tuple(data.get("feature_names", ())),
                   Standardizer(tuple(std["mean"]), tuple(std["scale"])) if std else None)

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "LinearModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def _design(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def sigmoid(z):
    # exp(-log(1 + exp(-z))) never overflows
    return np.exp(-np.logaddexp(0.0, -z))


def loss_and_grad(weights: np.ndarray, x: np.ndarray, y: np.ndarray, l2: float = 0.0):
    """Mean cross-entropy plus ``l2/2 * |w|^2`` (bias excluded), and its gradient."""
    xb = _design(x)
    z = xb @ weights
    loss = np.mean(np.logaddexp(0.0, z) - y * z)
    grad = xb.T @ (sigmoid(z) - y) / len(y)
    w = weights.copy()
    w[-1] = 0.0
    return loss + 0.5 * l2 * float(w @ w), grad + l2 * w


def _matrix(features: Mapping[str, Sequence[float]], ids: Sequence[str]) -> np.ndarray:
    lengths = {len(features[i]) for i in ids}
    if len(lengths) > 1:
        raise ShapeError(f"feature vectors have different lengths: {sorted(lengths)}")
    x = np.array([features[i] for i in ids], dtype=float).reshape(len(ids), -1)
    if not np.isfinite(x).all():
        raise ValidationError("non-finite feature value")
    return x


def train(features: Mapping[str, Sequence[float]], labels, cfg: TrainConfig = TrainConfig(),
          feature_names: Sequence[str] = (), standardizer: Standardizer | None = None,
          history: list | None = None) -> LinearModel:
    """Fit from all-zero weights; ids are visited in sorted order so runs are bit-identical.

    When ``history`` is a list, the training loss before every update is appended to it.
    """
    labels = labels.labels if isinstance(labels, LabelChannel) else labels
    ids = sorted(features)
    missing = [i for i in ids if i not in labels]
    if missing:
        raise ValidationError(f"no label for ids: {', '.join(missing[:10])}")
    x = _matrix(features, ids)
    y = np.array([labels[i] for i in ids], dtype=float)
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValidationError("labels must be binary")
    weights = np.zeros(x.shape[1] + 1)
    lr = cfg.learning_rate
    for epoch in range(cfg.epochs):
        if cfg.decay_every and epoch and epoch % cfg.decay_every == 0:
            lr *= cfg.decay_factor
        loss, grad = loss_and_grad(weights, x, y, cfg.l2)
        if history is not None:
            history.append(float(loss))
        weights = weights - lr * grad
    return LinearModel(weights, tuple(feature_names), standardizer)


def predict_proba(model: LinearModel, features: Mapping[str, Sequence[float]], name: str = "model",
                  ids: Sequence[str] | None = None) -> PredictionMatrix:
    """One-model prediction matrix with columns (p0, p1), p1 = sigmoid(w.x + b)."""
    ids = list(features) if ids is None else list(ids)
    x = _matrix(features, ids) if ids else np.zeros((0, model.n_features))
    if x.shape[1] != model.n_features:
        raise ShapeError(f"model expects {model.n_features} features, got {x.shape[1]}")
    if model.standardizer is not None:
        x = model.standardizer.apply(x)
    p1 = sigmoid(_design(x) @ model.weights)
    probs = np.stack([1.0 - p1, p1], axis=1)[:, None, :]
    return PredictionMatrix((name,), tuple(ids), probs)


def fit_standardizer(x: np.ndarray, names: Sequence[str] = ()) -> Standardizer:
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.where(std > 0, std, 1.0)
    for k in np.flatnonzero(std == 0):
        label = names[k] if k < len(names) else str(k)
        warnings.warn(f"feature {label} has zero variance; passing it through centered", stacklevel=3)
    return Standardizer(tuple(map(float, mean)), tuple(map(float, scale)))


def feature_extract(items: Sequence, standardizer: Standardizer | None = None,
                    tax: ExpressionTaxonomy = DEFAULT_TAXONOMY, intensity_normalizer: float = 5.0):
    """Feature vectors keyed by id, plus the standardizer used (``None`` for AU frames).

    Attractiveness scores give (golden_ratio, symmetry, neocanons), standardized
    to zero mean and unit variance with statistics fitted on ``items`` unless a
    ``standardizer`` is passed; non-frontal faces are skipped. AU frames give
    normalized intensities in taxonomy AU order, with inactive AUs at 0.
    """
    if items and isinstance(items[0], AUFrame):
        codes = tax.au_codes
        feats = {f.id: [f.scored_intensity(c) / intensity_normalizer for c in codes] for f in items}
        return feats, None
    frontal = [s for s in items if isinstance(s, AttractivenessScores) and s.frontal]
    if len(frontal) != len([s for s in items if getattr(s, "frontal", False)]):
        raise ValidationError("unsupported item type for feature extraction")
    x = np.array([[s.golden_ratio, s.symmetry, s.neocanons] for s in frontal], dtype=float).reshape(-1, 3)
    if standardizer is None:
        if not len(frontal):
            raise ValidationError("no frontal faces to fit feature statistics on")
        standardizer = fit_standardizer(x, ATTRACTIVENESS_FEATURES)
    z = standardizer.apply(x)
    return {s.id: [float(v) for v in row] for s, row in zip(frontal, z)}, standardizer
