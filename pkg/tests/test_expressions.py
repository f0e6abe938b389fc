import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairlens.data import AUFrame
from fairlens.errors import ConfigError, ValidationError
from fairlens.expressions import (
    DEFAULT_TAXONOMY,
    NEUTRAL_T_VALUES,
    OBJ_BASE,
    Expression,
    ExpressionConfig,
    ExpressionTaxonomy,
    annotate_expressions,
    base_candidates,
    binarize_happiness,
    label_frame,
    lcs_length,
    obj_base_label,
    obj_lcs_label,
)
from fairlens.synthetic import random_frames

CODES = DEFAULT_TAXONOMY.au_codes


def frame(active: dict, id_="a", sensitive=0, codes=CODES):
    """Frame over ``codes``; ``active`` maps AU code to its raw intensity."""
    presence = {c: int(c in active) for c in codes}
    intensity = {c: float(active.get(c, 0.0)) for c in codes}
    return AUFrame(id_, presence, intensity, sensitive)


def lcs_oracle(a, b):
    """Plain recursion with memoisation, no assumption about ordering."""
    memo = {}

    def go(i, j):
        if i == len(a) or j == len(b):
            return 0
        if (i, j) not in memo:
            memo[i, j] = 1 + go(i + 1, j + 1) if a[i] == b[j] else max(go(i + 1, j), go(i, j + 1))
        return memo[i, j]

    return go(0, 0)


ascending = st.sets(st.integers(1, 45), max_size=10).map(sorted)


def test_default_taxonomy():
    assert DEFAULT_TAXONOMY.names == ["happiness", "sadness", "surprise", "fear", "anger", "disgust", "neutral"]
    assert DEFAULT_TAXONOMY["fear"].aus == (1, 2, 4, 5, 7, 20, 26)
    assert CODES == [1, 2, 4, 5, 6, 7, 9, 12, 15, 16, 20, 23, 26]


@pytest.mark.parametrize("a,b,expected", [
    ([1, 2, 4], [1, 2, 4], 3),
    ([9, 15], [6, 12], 0),
    ([1, 2, 5, 26], [1, 2, 4, 5, 7, 20, 26], 4),
    ([], [1, 2], 0),
])
def test_lcs_examples(a, b, expected):
    assert lcs_length(a, b) == expected


@pytest.mark.parametrize("bad", [[2, 1], [1, 1], [5, 3, 9]])
def test_lcs_rejects_unordered(bad):
    with pytest.raises(ValidationError):
        lcs_length(bad, [1, 2])
    with pytest.raises(ValidationError):
        lcs_length([1, 2], bad)


@settings(max_examples=300, deadline=None)
@given(a=ascending, b=ascending)
def test_lcs_matches_oracles(a, b):
    n = lcs_length(a, b)
    assert n == lcs_oracle(a, b) == len(set(a) & set(b))
    assert n == lcs_length(b, a)


def test_obj_base_examples():
    assert obj_base_label(frame({})) == "neutral"
    assert obj_base_label(frame({6: 2.0, 12: 2.0})) == "happiness"
    both = frame({6: 2.5, 12: 2.5, 1: 4.0, 4: 4.0, 15: 4.0})
    assert [e.name for e in base_candidates(both)] == ["happiness", "sadness"]
    assert obj_base_label(both) == "sadness"


def test_obj_base_tie_goes_to_taxonomy_order():
    tied = frame({6: 3.0, 12: 3.0, 1: 3.0, 4: 3.0, 15: 3.0})
    assert obj_base_label(tied) == "happiness"


def test_obj_base_partial_set_is_neutral():
    # six of the seven fear AUs
    assert obj_base_label(frame({c: 4.0 for c in (1, 2, 4, 5, 7, 20)})) != "fear"
    fear = {1: 3.0, 2: 3.0, 4: 5.0, 5: 3.0, 7: 5.0, 20: 5.0, 26: 3.0}
    assert obj_base_label(frame(fear)) == "fear"
    # at equal intensities the surprise subset ties and wins on taxonomy order
    assert obj_base_label(frame({c: 4.0 for c in fear})) == "surprise"


def test_obj_base_ignores_inactive_intensity():
    f = AUFrame("a", {6: 1, 12: 0}, {6: 5.0, 12: 5.0}, 0)
    assert obj_base_label(f) == "neutral"
    assert f.scored_intensity(12) == 0.0


def test_obj_lcs_examples():
    cfg = ExpressionConfig(neutral_t=0.3)
    assert obj_lcs_label(frame({}), cfg=cfg) == "neutral"
    assert obj_lcs_label(frame({6: 4.5, 12: 4.5}), cfg=cfg) == "happiness"
    assert obj_lcs_label(frame({6: 1.0, 12: 1.0}), cfg=cfg) == "neutral"


def test_obj_lcs_tie_broken_by_reference_distance():
    tax = ExpressionTaxonomy((
        Expression("b", (3, 4)),
        Expression("a", (1, 2), (0.4, 0.6)),
    ), positive="a")
    f = frame({1: 2.0, 2: 3.0, 3: 1.0, 4: 1.0}, codes=[1, 2, 3, 4])
    assert obj_lcs_label(f, tax) == "a"
    # without a reference advantage, taxonomy order decides
    plain = ExpressionTaxonomy((Expression("b", (3, 4)), Expression("a", (1, 2))))
    g = frame({1: 2.0, 2: 2.0, 3: 2.0, 4: 2.0}, codes=[1, 2, 3, 4])
    assert obj_lcs_label(g, plain) == "b"


def test_obj_lcs_partial_match():
    # three of the four surprise AUs beat the two-AU overlap with fear's neighbours
    assert obj_lcs_label(frame({1: 4.0, 2: 4.0, 26: 4.0})) == "surprise"


def test_label_frame_dispatch():
    f = frame({6: 4.0})
    assert label_frame(f, cfg=ExpressionConfig(algorithm=OBJ_BASE)) == "neutral"
    assert label_frame(f) == "happiness"  # half the happiness AUs, mean 0.4 >= 0.3


def test_binarize_happiness():
    assert binarize_happiness("happiness") == 1
    assert [binarize_happiness(n) for n in ("neutral", "sadness", "disgust")] == [0, 0, 0]


@pytest.mark.parametrize("kwargs", [{"algorithm": "other"}, {"neutral_t": 0}, {"intensity_normalizer": -1}])
def test_config_invariants(kwargs):
    with pytest.raises(ConfigError):
        ExpressionConfig(**kwargs)


def test_taxonomy_invariants():
    with pytest.raises(ConfigError):
        Expression("x", (4, 2))
    with pytest.raises(ConfigError):
        Expression("x", (1, 2), (1.0,))
    with pytest.raises(ConfigError):
        ExpressionTaxonomy((Expression("neutral", (1,)),))
    with pytest.raises(ConfigError):
        ExpressionTaxonomy((Expression("x", (1,)), Expression("x", (2,))))


def test_taxonomy_json_roundtrip(tmp_path):
    DEFAULT_TAXONOMY.to_json(tmp_path / "tax.json")
    assert ExpressionTaxonomy.from_json(tmp_path / "tax.json") == DEFAULT_TAXONOMY
    (tmp_path / "bad.json").write_text('{"expressions": [{"aus": [1]}]}')
    with pytest.raises(ConfigError):
        ExpressionTaxonomy.from_json(tmp_path / "bad.json")


def test_annotate_histogram_and_channel():
    frames = [
        frame({6: 4.0, 12: 4.0}, "x1", 0),
        frame({}, "x2", 0),
        frame({6: 4.0, 12: 4.0, 1: 5.0, 4: 5.0, 15: 5.0}, "x3", 1),
    ]
    ann = annotate_expressions(frames, cfg=ExpressionConfig(algorithm=OBJ_BASE))
    assert ann.channel.name == "ObjBase"
    assert ann.channel.labels == {"x1": 1, "x2": 0, "x3": 0}
    assert ann.histogram[0]["happiness"] == 1 and ann.histogram[0]["neutral"] == 1
    assert ann.histogram[1]["sadness"] == 1 and sum(ann.histogram[1].values()) == 1
    assert ann.collisions == 1
    assert annotate_expressions(frames, cfg=ExpressionConfig(neutral_t=0.4)).channel.name == "ObjLCS:0.4"


def test_annotate_threads_agree(rng):
    frames = random_frames(300, rng)
    one = annotate_expressions(frames)
    four = annotate_expressions(frames, threads=4)
    assert one.expressions == four.expressions and one.histogram == four.histogram


def test_strictness_and_monotonicity_sample(rng):
    frames = random_frames(2000, rng, p_active=0.5)
    cfgs = [ExpressionConfig(neutral_t=t) for t in NEUTRAL_T_VALUES]
    for f in frames:
        name = obj_base_label(f)
        if name != "neutral":
            assert set(DEFAULT_TAXONOMY[name].aus) <= set(f.active())
        neutral = [obj_lcs_label(f, cfg=c) == "neutral" for c in cfgs]
        assert neutral == sorted(neutral)


def test_exhaustive_activation_patterns_for_base():
    # every subset of the AU codes, all active at equal intensity
    codes = CODES
    for mask in range(1 << len(codes)):
        active = {c: 3.0 for k, c in enumerate(codes) if mask >> k & 1}
        name = obj_base_label(frame(active))
        candidates = [e.name for e in DEFAULT_TAXONOMY.expressions if set(e.aus) <= set(active)]
        assert name == (candidates[0] if candidates else "neutral")


def test_random_frames_shape(rng):
    frames = random_frames(5, rng, codes=[6, 12])
    assert all(sorted(f.presence) == [6, 12] for f in frames)
    assert len({f.id for f in frames}) == 5
    assert all(0 <= v <= 5 for f in frames for v in f.intensity.values())
    assert np.isfinite([v for f in frames for v in f.intensity.values()]).all()
    assert list(itertools.islice((f.id for f in frames), 1)) == ["a00000"]
