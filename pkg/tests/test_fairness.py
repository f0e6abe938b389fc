import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairlens.data import LabelChannel
from fairlens.errors import CoverageError, ValidationError
from fairlens.fairness import (
    Confusion,
    GroupedConfusion,
    delta_disc,
    delta_eoo,
    delta_tpr_fpr,
    fairness_report,
    grouped_confusion,
)

from fairness_oracle import as_maps, oracle_metrics

TRIPLES = list(itertools.product((0, 1), repeat=3))


def maps(g0_truth, g0_pred, g1_truth, g1_pred):
    rows = [(p, t, 0) for t, p in zip(g0_truth, g0_pred)] + [(p, t, 1) for t, p in zip(g1_truth, g1_pred)]
    return as_maps(rows)


def test_confusion_example():
    pred, truth, groups = maps([1, 0], [1, 1], [1, 0], [0, 0])
    c = grouped_confusion(pred, LabelChannel("H", truth), groups)
    assert c.g0 == Confusion(tp=1, fp=1, tn=0, fn=0)
    assert c.g1 == Confusion(tp=0, fp=0, tn=1, fn=1)
    assert c.total == 4


def test_confusion_perfect_and_empty():
    pred, truth, groups = maps([1, 0, 1], [1, 0, 1], [0, 1], [0, 1])
    c = grouped_confusion(pred, truth, groups)
    assert c.g0.fp == c.g0.fn == c.g1.fp == c.g1.fn == 0
    assert grouped_confusion({}, {}, {}) == GroupedConfusion(Confusion(), Confusion())


def test_confusion_errors():
    with pytest.raises(CoverageError) as err:
        grouped_confusion({"a": 1, "b": 0}, {"a": 1}, {"a": 0, "b": 1})
    assert err.value.missing == ("b",)
    with pytest.raises(ValidationError):
        grouped_confusion({"a": 2}, {"a": 1}, {"a": 0})
    with pytest.raises(ValidationError):
        grouped_confusion({"a": 1}, {"a": 1}, {"a": 3})


def test_delta_eoo_examples():
    c = grouped_confusion(*maps([1, 1], [0, 1], [1, 1], [1, 1]))
    assert delta_eoo(c) == 0.5
    same = grouped_confusion(*maps([1, 0], [1, 1], [1, 0], [1, 1]))
    assert delta_eoo(same) == 0
    no_pos = grouped_confusion(*maps([1, 0], [1, 1], [0, 0], [1, 0]))
    assert delta_eoo(no_pos) is None


def test_delta_tpr_fpr_examples():
    perfect = grouped_confusion(*maps([1, 0], [1, 0], [1, 0], [1, 0]))
    assert delta_tpr_fpr(perfect) == (0, 0)
    g0_truth = [1, 1, 1, 1, 0, 0, 0, 0, 0]
    g0_pred = [1, 1, 1, 1, 1, 0, 0, 0, 0]
    g1_truth = [1, 1, 1, 1, 0, 0, 0, 0, 0]
    g1_pred = [1, 1, 1, 0, 1, 0, 0, 0, 0]
    c = grouped_confusion(*maps(g0_truth, g0_pred, g1_truth, g1_pred))
    assert delta_tpr_fpr(c) == (0.25, 0.0)
    no_neg = grouped_confusion(*maps([1, 1], [1, 0], [1, 0], [1, 0]))
    assert delta_tpr_fpr(no_neg)[1] is None and delta_tpr_fpr(no_neg)[0] is not None


def test_delta_disc_examples():
    groups = {"a": 0, "b": 0, "c": 1, "d": 1}
    assert delta_disc({k: 1 for k in groups}, groups) == (0, 0)
    g = {f"x{k}": 1 for k in range(4)} | {f"y{k}": 0 for k in range(4)}
    p = {"x0": 1, "x1": 1, "x2": 0, "x3": 0, "y0": 1, "y1": 0, "y2": 0, "y3": 0}
    assert delta_disc(p, g) == (0.25, 0.25)
    assert delta_disc({"a": 1}, {"a": 1}) is None


def test_report_examples():
    pred, truth, groups = maps([1, 0], [1, 0], [1, 0], [1, 0])
    r = fairness_report(pred, truth, groups)
    assert r.accuracy_overall == 1.0 and r.accuracy_per_group == (1.0, 1.0)
    assert (r.delta_eoo, r.delta_tpr, r.delta_fpr, r.delta_disc) == (0, 0, 0, 0)
    r = fairness_report(*maps([1, 1], [0, 1], [1, 1], [1, 1]))
    assert r.delta_eoo == 0.5
    pred, truth, groups = maps([1, 0, 0], [1, 1, 1], [1, 0], [1, 1])
    r = fairness_report(pred, truth, groups)
    assert r.delta_eoo == 0 and r.delta_disc == 0
    assert r.gap("eoo") == r.delta_eoo and r.gap("disc") == r.delta_disc
    with pytest.raises(ValueError):
        r.gap("other")


def test_report_json_shape():
    r = fairness_report(*maps([1, 0], [1, 1], [1], [0]))
    js = r.as_json()
    assert set(js["accuracy_per_group"]) == {"0", "1"}
    assert js["confusion"]["1"] == {"tp": 0, "fp": 0, "tn": 0, "fn": 1}
    assert js["delta_fpr"] is None


def _compare(rows):
    expected = oracle_metrics(rows)
    r = fairness_report(*as_maps(rows))
    for key, value in expected.items():
        assert getattr(r, key) == value, (key, rows)
    disc = delta_disc(as_maps(rows)[0], as_maps(rows)[2])
    assert disc == (None if expected["delta_disc"] is None else (expected["signed_disc"], expected["delta_disc"]))


def test_against_oracle_all_small_datasets():
    # every ordered dataset up to size 4; larger sizes are covered by the acceptance suite
    for n in range(5):
        for rows in itertools.product(TRIPLES, repeat=n):
            _compare(list(rows))


rows_strategy = st.lists(st.sampled_from(TRIPLES), max_size=40)


@settings(max_examples=200, deadline=None)
@given(rows=rows_strategy, seed=st.randoms())
def test_permutation_and_relabel_invariance(rows, seed):
    r = fairness_report(*as_maps(rows))
    shuffled = list(rows)
    seed.shuffle(shuffled)
    pred, truth, groups = as_maps(shuffled)
    renamed = {f"z{k}": v for k, v in pred.items()}, {f"z{k}": v for k, v in truth.items()}, \
        {f"z{k}": v for k, v in groups.items()}
    other = fairness_report(*renamed)
    for key in ("delta_eoo", "delta_tpr", "delta_fpr", "delta_disc", "signed_disc", "accuracy_overall"):
        assert getattr(other, key) == getattr(r, key)


@settings(max_examples=200, deadline=None)
@given(rows=rows_strategy)
def test_group_swap_and_bounds(rows):
    r = fairness_report(*as_maps(rows))
    s = fairness_report(*as_maps([(p, t, 1 - g) for p, t, g in rows]))
    assert (r.delta_eoo, r.delta_tpr, r.delta_fpr, r.delta_disc) == (s.delta_eoo, s.delta_tpr, s.delta_fpr, s.delta_disc)
    assert r.signed_disc is None or r.signed_disc == -s.signed_disc
    for v in (r.delta_eoo, r.delta_tpr, r.delta_fpr, r.delta_disc, r.accuracy_overall):
        assert v is None or 0 <= v <= 1
