"""Group-conditioned confusion counts and fairness gaps for binary predictions.

Rates whose denominator is zero are undefined and reported as ``None``; they
are never coerced to 0. Group 1 is treated as the non-protected group in the
signed discrimination score, and prediction 1 is the advantageous decision.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Mapping

from .data import LabelChannel
from .errors import CoverageError, ValidationError

GROUPS = (0, 1)


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def positives(self) -> int:
        return self.tp + self.fn

    @property
    def negatives(self) -> int:
        return self.fp + self.tn

    @property
    def predicted_positive(self) -> int:
        return self.tp + self.fp


@dataclass(frozen=True)
class GroupedConfusion:
    g0: Confusion
    g1: Confusion

    def __getitem__(self, group: int) -> Confusion:
        if group == 0:
            return self.g0
        if group == 1:
            return self.g1
        raise KeyError(group)

    @property
    def total(self) -> int:
        return self.g0.total + self.g1.total


def _as_mapping(x) -> Mapping:
    return x.labels if isinstance(x, LabelChannel) else x


def _aligned(*maps: Mapping) -> list:
    ids = set(maps[0])
    for m in maps[1:]:
        if set(m) != ids:
            diff = sorted(ids ^ set(m))
            raise CoverageError(f"id sets differ: {', '.join(map(str, diff[:10]))}", diff)
    return sorted(ids)


def _bit(value, what: str) -> int:
    if value not in (0, 1):
        raise ValidationError(f"{what} must be 0 or 1, got {value!r}")
    return int(value)


def grouped_confusion(pred: Mapping[str, int], truth, groups: Mapping[str, int]) -> GroupedConfusion:
    truth = _as_mapping(truth)
    counts = {g: {"tp": 0, "fp": 0, "tn": 0, "fn": 0} for g in GROUPS}
    for id_ in _aligned(pred, truth, groups):
        p, t, g = _bit(pred[id_], "prediction"), _bit(truth[id_], "label"), _bit(groups[id_], "group")
        key = ("t" if p == t else "f") + ("p" if p == 1 else "n")
        counts[g][key] += 1
    return GroupedConfusion(Confusion(**counts[0]), Confusion(**counts[1]))


def _rate(num: int, den: int) -> float | None:
    return num / den if den else None


def _gap(a: float | None, b: float | None) -> float | None:
    if a is None or b is None:
        return None
    return abs(a - b)


def false_negative_rate(c: Confusion) -> float | None:
    return _rate(c.fn, c.fn + c.tp)


def true_positive_rate(c: Confusion) -> float | None:
    return _rate(c.tp, c.tp + c.fn)


def false_positive_rate(c: Confusion) -> float | None:
    return _rate(c.fp, c.fp + c.tn)


def delta_eoo(c: GroupedConfusion) -> float | None:
    """Absolute gap between the groups' false negative rates."""
    return _gap(false_negative_rate(c.g0), false_negative_rate(c.g1))


def delta_tpr_fpr(c: GroupedConfusion) -> tuple[float | None, float | None]:
    return (
        _gap(true_positive_rate(c.g0), true_positive_rate(c.g1)),
        _gap(false_positive_rate(c.g0), false_positive_rate(c.g1)),
    )


def _disc_from_counts(pos0: int, n0: int, pos1: int, n1: int) -> tuple[float, float] | None:
    if n0 == 0 or n1 == 0:
        return None
    signed = pos1 / n1 - pos0 / n0
    return signed, abs(signed)


def delta_disc(pred: Mapping[str, int], groups: Mapping[str, int]) -> tuple[float, float] | None:
    """Signed and absolute difference in positive-prediction rate, group 1 minus group 0.

    Labels are not involved. ``None`` when either group is empty.
    """
    pos = {0: 0, 1: 0}
    size = {0: 0, 1: 0}
    for id_ in _aligned(pred, groups):
        g = _bit(groups[id_], "group")
        size[g] += 1
        pos[g] += _bit(pred[id_], "prediction")
    return _disc_from_counts(pos[0], size[0], pos[1], size[1])


@dataclass(frozen=True)
class FairnessReport:
    accuracy_overall: float | None
    accuracy_per_group: tuple[float | None, float | None]
    delta_tpr: float | None
    delta_fpr: float | None
    delta_eoo: float | None
    delta_disc: float | None
    signed_disc: float | None
    confusion: GroupedConfusion | None = None

    def gap(self, metric: str) -> float | None:
        if metric == "eoo":
            return self.delta_eoo
        if metric == "disc":
            return self.delta_disc
        raise ValueError(f"unknown gap metric {metric!r}")

    def as_json(self) -> dict:
        out = asdict(self)
        out["accuracy_per_group"] = {"0": self.accuracy_per_group[0], "1": self.accuracy_per_group[1]}
        if self.confusion is not None:
            out["confusion"] = {"0": asdict(self.confusion.g0), "1": asdict(self.confusion.g1)}
        return out


def report_from_confusion(c: GroupedConfusion) -> FairnessReport:
    """All metrics from the grouped counts alone (positive predictions are tp + fp)."""
    correct = c.g0.tp + c.g0.tn + c.g1.tp + c.g1.tn
    tpr, fpr = delta_tpr_fpr(c)
    disc = _disc_from_counts(c.g0.predicted_positive, c.g0.total, c.g1.predicted_positive, c.g1.total)
    return FairnessReport(
        accuracy_overall=_rate(correct, c.total),
        accuracy_per_group=(_rate(c.g0.tp + c.g0.tn, c.g0.total), _rate(c.g1.tp + c.g1.tn, c.g1.total)),
        delta_tpr=tpr,
        delta_fpr=fpr,
        delta_eoo=delta_eoo(c),
        delta_disc=None if disc is None else disc[1],
        signed_disc=None if disc is None else disc[0],
        confusion=c,
    )


def fairness_report(pred: Mapping[str, int], truth, groups: Mapping[str, int]) -> FairnessReport:
    return report_from_confusion(grouped_confusion(pred, truth, groups))
