"""End-to-end bias-mitigation run on synthetic faces.

Human-style labels are generated from a latent beauty score plus a shift that
favours group 1; the objective GR/S/NC labels come from geometry alone. Every
model sees the same features, including a noisy proxy of group membership, so
only the model trained on the biased labels learns to lean on it. The
ensemble sweep then shows how much of that gap the objective models remove.

The golden-ratio feature is the distance to 1.618 rather than the raw ratio,
since the GR label is a band around the ideal and the learner is linear.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import LabelChannel, PredictionMatrix, merge_predictions
from .ensemble import EnsembleCandidate, ParetoFrontier, pareto_frontier, sweep, weight_grid
from .geometry import GOLDEN_RATIO, GeometryConfig, binarize_attractiveness, score_faces
from .synthetic import biased_labels, random_faces
from .trainer import TrainConfig, fit_standardizer, predict_proba, train

MODEL_NAMES = ("H", "GR", "S", "NC")


@dataclass
class DemoResult:
    preds: PredictionMatrix
    truth: LabelChannel
    groups: dict[str, int]
    candidates: list[EnsembleCandidate]
    frontier: ParetoFrontier

    @property
    def subjective(self) -> EnsembleCandidate:
        return next(c for c in self.candidates if c.weights == (1.0, 0.0, 0.0, 0.0))


def _split(n: int, rng: np.random.Generator, prefix: str, cfg: GeometryConfig, bias: float, noise: float):
    scores = [s for s in score_faces(random_faces(n, rng, prefix=prefix), cfg) if s.frontal]
    ids = [s.id for s in scores]
    sens = np.array([s.sensitive for s in scores])
    gr_dev = np.array([abs(s.golden_ratio - GOLDEN_RATIO) for s in scores])
    sym = np.array([s.symmetry for s in scores])
    neo = np.array([s.neocanons for s in scores])
    beauty = -gr_dev / 0.2 - sym / 4.0 - neo / 0.3
    beauty = (beauty - beauty.mean()) / beauty.std()
    labels = {"H": dict(zip(ids, biased_labels(beauty, sens, rng, bias, noise).tolist()))}
    for s in scores:
        for key, value in binarize_attractiveness(s, cfg).items():
            labels.setdefault(key, {})[s.id] = value
    proxy = sens + rng.normal(0.0, 0.5, len(ids))
    x = np.column_stack([gr_dev, sym, neo, proxy])
    return ids, x, dict(zip(ids, sens.tolist())), labels


def bias_mitigation_demo(seed: int = 0, n_train: int = 1500, n_test: int = 1000, bias: float = 1.2,
                         noise: float = 0.5, step: float = 0.1, metric: str = "eoo",
                         train_cfg: TrainConfig = TrainConfig(learning_rate=0.5, epochs=500),
                         threads: int = 1) -> DemoResult:
    rng = np.random.default_rng(seed)
    cfg = GeometryConfig()
    ids, x, _, labels = _split(n_train, rng, "train_", cfg, bias, noise)
    test_ids, test_x, groups, test_labels = _split(n_test, rng, "test_", cfg, bias, noise)
    std = fit_standardizer(x)
    feats = dict(zip(ids, std.apply(x).tolist()))
    test_feats = dict(zip(test_ids, std.apply(test_x).tolist()))
    columns = [predict_proba(train(feats, labels[name], train_cfg), test_feats, name) for name in MODEL_NAMES]
    preds = merge_predictions(columns)
    truth = LabelChannel("H", test_labels["H"])
    candidates = sweep(preds, truth, groups, weight_grid(len(MODEL_NAMES), step), metric, threads)
    return DemoResult(preds, truth, groups, candidates, pareto_frontier(candidates))
