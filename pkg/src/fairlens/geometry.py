"""Objective attractiveness scores from 68-point landmarks.

Three notions are computed on frontal faces: a golden-ratio score (mean of
landmark distance ratios, ideal 1.618), a bilateral symmetry score and a
neoclassical-canon deviation score (both ideal 0). Each score is binarized
against a tolerance band around its ideal.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import LabelChannel, LandmarkFace
from .errors import ConfigError, GeometryError

GOLDEN_RATIO = 1.618

LEFT_EYE = tuple(range(36, 42))
RIGHT_EYE = tuple(range(42, 48))
NOSE_TIP = 30

# An anchor is a tuple of landmark indices whose centroid is the point used.
Anchor = tuple
Segment = tuple  # (Anchor, Anchor)


@dataclass(frozen=True)
class Ratio:
    name: str
    numerator: Segment
    denominator: Segment


@dataclass(frozen=True)
class Canon:
    """``|measured|`` should equal ``factor * |reference|``."""

    name: str
    measured: Segment
    reference: Segment
    factor: float = 1.0


DEFAULT_RATIOS = (
    Ratio("face_height_over_width", ((21, 22), (8,)), ((0,), (16,))),
    Ratio("eyes_chin_over_nose_chin", (LEFT_EYE + RIGHT_EYE, (8,)), ((33,), (8,))),
)

DEFAULT_CANONS = (
    Canon("intercanthal_eq_nose_width", ((39,), (42,)), ((31,), (35,)), 1.0),
    Canon("mouth_eq_1.5_nose_width", ((48,), (54,)), ((31,), (35,)), 1.5),
    Canon("nose_eq_quarter_face_width", ((31,), (35,)), ((0,), (16,)), 0.25),
)

DEFAULT_MIRROR_PAIRS = (
    # jaw
    (0, 16), (1, 15), (2, 14), (3, 13), (4, 12), (5, 11), (6, 10), (7, 9),
    # brows
    (17, 26), (18, 25), (19, 24), (20, 23), (21, 22),
    # eyes
    (36, 45), (37, 44), (38, 43), (39, 42), (40, 47), (41, 46),
    # nose wings
    (31, 35), (32, 34),
    # outer and inner lips
    (48, 54), (49, 53), (50, 52), (59, 55), (58, 56),
    (60, 64), (61, 63), (67, 65),
)

DEFAULT_MIDLINE = (27, 28, 29, 30, 33, 51, 57, 8)

# Value sets swept for each notion.
DELTA_GR_VALUES = (0.17, 0.18, 0.19, 0.20, 0.21)
T_SYM_VALUES = (4.0, 4.2, 4.4, 4.6, 4.8)
T_NEO_VALUES = (0.26, 0.27, 0.28, 0.29, 0.30)


@dataclass(frozen=True)
class GeometryConfig:
    beta_frontal: float = 10.0
    delta_gr: float = 0.19
    t_sym: float = 4.2
    t_neo: float = 0.29
    ratio_set: Sequence[Ratio] = DEFAULT_RATIOS
    canon_set: Sequence[Canon] = DEFAULT_CANONS
    mirror_pairs: Sequence[tuple[int, int]] = DEFAULT_MIRROR_PAIRS
    midline_indices: Sequence[int] = DEFAULT_MIDLINE
    # False inverts the frontality test (drop faces whose eye asymmetry is small).
    keep_if_small: bool = True

    def __post_init__(self):
        for name in ("beta_frontal", "delta_gr", "t_sym", "t_neo"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)!r}")
        flat = [i for pair in self.mirror_pairs for i in pair]
        if any(not 0 <= i <= 67 for i in flat + list(self.midline_indices)):
            raise ConfigError("landmark indices must lie in [0, 67]")
        overlap = set(flat) & set(self.midline_indices)
        if overlap:
            raise ConfigError(f"mirror pairs overlap midline indices: {sorted(overlap)}")
        if not self.mirror_pairs or not self.midline_indices:
            raise ConfigError("mirror_pairs and midline_indices must be non-empty")
        if not self.ratio_set or not self.canon_set:
            raise ConfigError("ratio_set and canon_set must be non-empty")


@dataclass(frozen=True)
class AttractivenessScores:
    id: str
    frontal: bool
    golden_ratio: float | None = None
    symmetry: float | None = None
    neocanons: float | None = None
    sensitive: int | None = field(default=None, compare=False)


def _point(face: LandmarkFace, anchor: Anchor) -> np.ndarray:
    return face.points[list(anchor)].mean(axis=0)


def _length(face: LandmarkFace, seg: Segment) -> float:
    a, b = seg
    return float(np.hypot(*(_point(face, a) - _point(face, b))))


def eye_nose_distances(face: LandmarkFace) -> tuple[float, float]:
    tip = face.points[NOSE_TIP]
    d_left = float(np.hypot(*(_point(face, LEFT_EYE) - tip)))
    d_right = float(np.hypot(*(_point(face, RIGHT_EYE) - tip)))
    return d_left, d_right


def frontality_filter(face: LandmarkFace, cfg: GeometryConfig = GeometryConfig()) -> bool:
    """True when the face is frontal enough to score.

    Compares the distances from each eye centroid to the nose tip; the face
    is kept when they differ by at most ``beta_frontal`` pixels.
    """
    if np.ptp(face.points, axis=0).max() == 0:
        raise GeometryError(f"face {face.id}: degenerate landmarks (all points identical)")
    d_left, d_right = eye_nose_distances(face)
    small = abs(d_left - d_right) <= cfg.beta_frontal
    return small if cfg.keep_if_small else not small


def golden_ratio_score(face: LandmarkFace, cfg: GeometryConfig = GeometryConfig()) -> float:
    ratios = []
    for r in cfg.ratio_set:
        den = _length(face, r.denominator)
        if den == 0:
            raise GeometryError(f"face {face.id}: ratio {r.name} has a zero-length denominator")
        ratios.append(_length(face, r.numerator) / den)
    return sum(ratios) / len(ratios)


def inter_ocular_distance(face: LandmarkFace) -> float:
    return _length(face, (LEFT_EYE, RIGHT_EYE))


def symmetry_score(face: LandmarkFace, cfg: GeometryConfig = GeometryConfig()) -> float:
    """Mirror-pair asymmetry about the vertical midline, in percent of the inter-ocular distance.

    For each pair (i, j), the horizontal offsets of i and j from the axis are
    compared, as are their heights. The sum is scaled by
    ``100 / (n_pairs * IOD)``.
    """
    iod = inter_ocular_distance(face)
    if iod == 0:
        raise GeometryError(f"face {face.id}: zero inter-ocular distance")
    pts = face.points
    x_mid = pts[list(cfg.midline_indices), 0].mean()
    left = pts[[i for i, _ in cfg.mirror_pairs]]
    right = pts[[j for _, j in cfg.mirror_pairs]]
    dx = np.abs((x_mid - left[:, 0]) - (right[:, 0] - x_mid))
    dy = np.abs(left[:, 1] - right[:, 1])
    return float(100.0 / (len(cfg.mirror_pairs) * iod) * (dx + dy).sum())


def neocanons_score(face: LandmarkFace, cfg: GeometryConfig = GeometryConfig()) -> float:
    """Mean relative deviation of the canon measurements from their targets."""
    devs = []
    for c in cfg.canon_set:
        target = c.factor * _length(face, c.reference)
        if target == 0:
            raise GeometryError(f"face {face.id}: canon {c.name} has a zero target")
        devs.append(abs(_length(face, c.measured) - target) / target)
    return sum(devs) / len(devs)


def score_face(face: LandmarkFace, cfg: GeometryConfig = GeometryConfig()) -> AttractivenessScores:
    if not frontality_filter(face, cfg):
        return AttractivenessScores(face.id, False, sensitive=face.sensitive)
    return AttractivenessScores(
        face.id,
        True,
        golden_ratio_score(face, cfg),
        symmetry_score(face, cfg),
        neocanons_score(face, cfg),
        sensitive=face.sensitive,
    )


def score_faces(faces: Sequence[LandmarkFace], cfg: GeometryConfig = GeometryConfig(),
                threads: int = 1) -> list[AttractivenessScores]:
    """Score a batch; output order follows input order for any thread count."""
    if threads <= 1:
        return [score_face(f, cfg) for f in faces]
    with ThreadPoolExecutor(threads) as pool:
        return list(pool.map(lambda f: score_face(f, cfg), faces))


def binarize_attractiveness(scores: AttractivenessScores, cfg: GeometryConfig = GeometryConfig()) -> dict[str, int]:
    """GR, S and NC labels; 1 means the score lies in the (inclusive) attractive band."""
    if not scores.frontal:
        raise GeometryError(f"face {scores.id}: non-frontal faces have no labels")
    return {
        "GR": int(GOLDEN_RATIO - cfg.delta_gr <= scores.golden_ratio <= GOLDEN_RATIO + cfg.delta_gr),
        "S": int(0 <= scores.symmetry <= cfg.t_sym),
        "NC": int(0 <= scores.neocanons <= cfg.t_neo),
    }


def attractiveness_channels(scores: Sequence[AttractivenessScores],
                            cfg: GeometryConfig = GeometryConfig()) -> list[LabelChannel]:
    """GR/S/NC label channels over the frontal faces, named with their band parameter."""
    labels = {"GR": {}, "S": {}, "NC": {}}
    for s in scores:
        if s.frontal:
            for key, value in binarize_attractiveness(s, cfg).items():
                labels[key][s.id] = value
    return [
        LabelChannel(f"GR:{cfg.delta_gr:g}", labels["GR"]),
        LabelChannel(f"S:{cfg.t_sym:g}", labels["S"]),
        LabelChannel(f"NC:{cfg.t_neo:g}", labels["NC"]),
    ]


def keep_rate(scores: Sequence[AttractivenessScores]) -> float | None:
    if not scores:
        return None
    return sum(s.frontal for s in scores) / len(scores)
