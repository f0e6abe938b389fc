"""Objective facial-expression labels from action units.

Two annotators are provided. ``obj_base_label`` assigns an expression only when
all of its AUs are active. ``obj_lcs_label`` picks the expression whose AU
sequence shares the longest common subsequence with the detected AUs, breaks
ties by intensity distance to a reference profile and falls back to neutral
when the winner's mean intensity is below a threshold.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .data import AU_INTENSITY_MAX, AUFrame, LabelChannel
from .errors import ConfigError, ValidationError

OBJ_BASE = "objbase"
OBJ_LCS = "objlcs"
NEUTRAL_T_VALUES = (0.3, 0.4, 0.5)


@dataclass(frozen=True)
class Expression:
    name: str
    aus: tuple[int, ...]
    reference: tuple[float, ...] = ()

    def __post_init__(self):
        aus = tuple(int(a) for a in self.aus)
        if not aus or any(b <= a for a, b in zip(aus, aus[1:])):
            raise ConfigError(f"expression {self.name}: AU codes must be non-empty and strictly increasing")
        ref = tuple(float(r) for r in self.reference) or (1.0,) * len(aus)
        if len(ref) != len(aus):
            raise ConfigError(f"expression {self.name}: reference has {len(ref)} values for {len(aus)} AUs")
        object.__setattr__(self, "aus", aus)
        object.__setattr__(self, "reference", ref)


@dataclass(frozen=True)
class ExpressionTaxonomy:
    expressions: tuple[Expression, ...]
    neutral: str = "neutral"
    positive: str = "happiness"

    def __post_init__(self):
        names = [e.name for e in self.expressions]
        if not names or len(set(names)) != len(names) or self.neutral in names:
            raise ConfigError(f"expression names must be unique, non-empty and exclude {self.neutral!r}")

    @property
    def names(self) -> list[str]:
        return [e.name for e in self.expressions] + [self.neutral]

    @property
    def au_codes(self) -> list[int]:
        return sorted({a for e in self.expressions for a in e.aus})

    def __getitem__(self, name: str) -> Expression:
        for e in self.expressions:
            if e.name == name:
                return e
        raise KeyError(name)

    @classmethod
    def from_json(cls, path) -> "ExpressionTaxonomy":
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            exprs = tuple(
                Expression(e["name"], tuple(e["aus"]), tuple(e.get("reference", ())))
                for e in raw["expressions"]
            )
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: malformed taxonomy ({exc})") from None
        return cls(exprs, raw.get("neutral", "neutral"), raw.get("positive", "happiness"))

    def to_json(self, path):
        data = {
            "neutral": self.neutral,
            "positive": self.positive,
            "expressions": [
                {"name": e.name, "aus": list(e.aus), "reference": list(e.reference)}
                for e in self.expressions
            ],
        }
        Path(path).write_text(json.dumps(data, indent=1) + "\n", encoding="utf-8")


DEFAULT_TAXONOMY = ExpressionTaxonomy((
    Expression("happiness", (6, 12)),
    Expression("sadness", (1, 4, 15)),
    Expression("surprise", (1, 2, 5, 26)),
    Expression("fear", (1, 2, 4, 5, 7, 20, 26)),
    Expression("anger", (4, 5, 7, 23)),
    Expression("disgust", (9, 15, 16)),
))


@dataclass(frozen=True)
class ExpressionConfig:
    algorithm: str = OBJ_LCS
    neutral_t: float = 0.3
    intensity_normalizer: float = AU_INTENSITY_MAX

    def __post_init__(self):
        if self.algorithm not in (OBJ_BASE, OBJ_LCS):
            raise ConfigError(f"unknown algorithm {self.algorithm!r}")
        if not self.neutral_t > 0:
            raise ConfigError("neutral_t must be positive")
        if not self.intensity_normalizer > 0:
            raise ConfigError("intensity_normalizer must be positive")


def _mean_intensity(frame: AUFrame, aus: Sequence[int]) -> float:
    return sum(frame.scored_intensity(a) for a in aus) / len(aus)


def base_candidates(frame: AUFrame, tax: ExpressionTaxonomy = DEFAULT_TAXONOMY) -> list[Expression]:
    """Expressions whose every AU is active in the frame, in taxonomy order."""
    active = set(frame.active())
    return [e for e in tax.expressions if active.issuperset(e.aus)]


def obj_base_label(frame: AUFrame, tax: ExpressionTaxonomy = DEFAULT_TAXONOMY) -> str:
    candidates = base_candidates(frame, tax)
    if not candidates:
        return tax.neutral
    # max() keeps the first of equal keys, i.e. taxonomy order on ties
    return max(candidates, key=lambda e: _mean_intensity(frame, e.aus)).name


def _check_increasing(seq: Sequence[int], what: str):
    for a, b in zip(seq, seq[1:]):
        if b <= a:
            raise ValidationError(f"{what} must be strictly increasing, got {list(seq)}")


def lcs_length(a: Sequence[int], b: Sequence[int]) -> int:
    """Length of the longest common subsequence of two strictly increasing AU sequences."""
    _check_increasing(a, "first sequence")
    _check_increasing(b, "second sequence")
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def obj_lcs_label(frame: AUFrame, tax: ExpressionTaxonomy = DEFAULT_TAXONOMY,
                  cfg: ExpressionConfig = ExpressionConfig()) -> str:
    detected = frame.active()
    if not detected:
        return tax.neutral
    scores = [lcs_length(detected, e.aus) for e in tax.expressions]
    best = max(scores)
    winners = [e for e, s in zip(tax.expressions, scores) if s == best]
    norm = cfg.intensity_normalizer

    def distance(e: Expression) -> float:
        return math.sqrt(math.fsum(
            (frame.scored_intensity(a) / norm - r) ** 2 for a, r in zip(e.aus, e.reference)
        ))

    winner = min(winners, key=distance) if len(winners) > 1 else winners[0]
    if _mean_intensity(frame, winner.aus) / norm < cfg.neutral_t:
        return tax.neutral
    return winner.name


def label_frame(frame: AUFrame, tax: ExpressionTaxonomy = DEFAULT_TAXONOMY,
                cfg: ExpressionConfig = ExpressionConfig()) -> str:
    if cfg.algorithm == OBJ_BASE:
        return obj_base_label(frame, tax)
    return obj_lcs_label(frame, tax, cfg)


def binarize_happiness(expression: str, positive: str = "happiness") -> int:
    return int(expression == positive)


@dataclass
class ExpressionAnnotation:
    channel: LabelChannel
    expressions: dict[str, str]
    histogram: dict[int, dict[str, int]]
    # frames where more than one expression had all of its AUs active
    collisions: int = 0
    names: list[str] = field(default_factory=list)

    def as_json(self) -> dict:
        return {
            "channel": self.channel.name,
            "frames": len(self.expressions),
            "collisions": self.collisions,
            "histogram": {str(g): counts for g, counts in sorted(self.histogram.items())},
        }


def annotate_expressions(frames: Sequence[AUFrame], tax: ExpressionTaxonomy = DEFAULT_TAXONOMY,
                         cfg: ExpressionConfig = ExpressionConfig(), threads: int = 1) -> ExpressionAnnotation:
    """Label every frame, binarize to happy/unhappy and count expressions per group."""
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            labels = list(pool.map(lambda f: label_frame(f, tax, cfg), frames))
    else:
        labels = [label_frame(f, tax, cfg) for f in frames]
    expressions = {f.id: lab for f, lab in zip(frames, labels)}
    counts = Counter((f.sensitive, lab) for f, lab in zip(frames, labels))
    histogram = {g: {name: counts[(g, name)] for name in tax.names} for g in sorted({f.sensitive for f in frames})}
    collisions = sum(len(base_candidates(f, tax)) > 1 for f in frames) if cfg.algorithm == OBJ_BASE else 0
    suffix = "ObjBase" if cfg.algorithm == OBJ_BASE else f"ObjLCS:{cfg.neutral_t:g}"
    channel = LabelChannel(suffix, {i: binarize_happiness(lab, tax.positive) for i, lab in expressions.items()})
    return ExpressionAnnotation(channel, expressions, histogram, collisions, tax.names)
