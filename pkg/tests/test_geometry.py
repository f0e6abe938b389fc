import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairlens.data import LandmarkFace, load_landmarks
from fairlens.errors import ConfigError, GeometryError
from fairlens.geometry import (
    DEFAULT_MIDLINE,
    DEFAULT_MIRROR_PAIRS,
    DELTA_GR_VALUES,
    T_NEO_VALUES,
    T_SYM_VALUES,
    AttractivenessScores,
    GeometryConfig,
    attractiveness_channels,
    binarize_attractiveness,
    frontality_filter,
    golden_ratio_score,
    inter_ocular_distance,
    keep_rate,
    neocanons_score,
    score_face,
    score_faces,
    symmetry_score,
)
from fairlens.synthetic import FaceShape, random_faces, shaped_points, template_points

from geometry_oracle import oracle_scores

FIXTURES = Path(__file__).parent / "fixtures"


def face(points, id_="f"):
    return LandmarkFace(id_, points, 0)


def test_defaults():
    cfg = GeometryConfig()
    assert cfg.beta_frontal == 10
    assert len(cfg.mirror_pairs) == 29
    assert set(DEFAULT_MIDLINE) == {27, 28, 29, 30, 33, 51, 57, 8}
    assert cfg.delta_gr in DELTA_GR_VALUES and cfg.t_sym in T_SYM_VALUES and cfg.t_neo in T_NEO_VALUES


@pytest.mark.parametrize("kwargs", [
    {"beta_frontal": 0}, {"delta_gr": -0.1}, {"t_sym": 0}, {"t_neo": -1},
    {"mirror_pairs": ((0, 16), (8, 9))}, {"mirror_pairs": ((0, 68),)},
])
def test_config_invariants(kwargs):
    with pytest.raises(ConfigError):
        GeometryConfig(**kwargs)


def test_template_fixed_points(template_face):
    assert frontality_filter(template_face)
    assert golden_ratio_score(template_face) == pytest.approx(1.618, abs=1e-9)
    assert symmetry_score(template_face) == 0.0
    assert neocanons_score(template_face) == pytest.approx(0.0, abs=1e-12)


def test_frontality_threshold():
    pts = template_points()
    # moving the nose tip sideways by u changes |d_L - d_R|; find the shift giving exactly 15
    f0 = face(pts)
    assert frontality_filter(f0, GeometryConfig(beta_frontal=10))
    lo, hi = 0.0, 40.0
    for _ in range(80):
        mid = (lo + hi) / 2
        p = pts.copy()
        p[30, 0] += mid
        gap = oracle_scores(p.tolist())["eye_nose_gap"]
        lo, hi = (mid, hi) if gap < 15 else (lo, mid)
    p = pts.copy()
    p[30, 0] += hi
    assert oracle_scores(p.tolist())["eye_nose_gap"] == pytest.approx(15, abs=1e-9)
    assert not frontality_filter(face(p), GeometryConfig(beta_frontal=10))
    assert frontality_filter(face(p), GeometryConfig(beta_frontal=10, keep_if_small=False))
    assert frontality_filter(face(p), GeometryConfig(beta_frontal=16))


def test_degenerate_face_rejected():
    with pytest.raises(GeometryError):
        frontality_filter(face(np.full((68, 2), 3.0)))


def test_golden_ratio_is_mean_of_ratios():
    # ratios 1.5 and 1.7: scale the face width so the first ratio is 1.5, move the nose for the second
    pts = template_points()
    height = 161.8 + 64.72
    pts[0, 0], pts[16, 0] = -height / 1.5 / 2, height / 1.5 / 2
    pts[33, 1] = 161.8 - 161.8 / 1.7
    assert golden_ratio_score(face(pts)) == pytest.approx(1.6, abs=1e-12)


def test_golden_ratio_zero_denominator():
    pts = template_points()
    pts[16] = pts[0]
    with pytest.raises(GeometryError, match="face_height_over_width"):
        golden_ratio_score(face(pts))


def test_symmetry_single_displacement():
    pts = template_points()
    f = face(pts)
    iod = inter_ocular_distance(f)
    moved = pts.copy()
    moved[3, 0] -= iod / 100  # jaw point on the left, moved away from the axis
    delta = symmetry_score(face(moved)) - symmetry_score(f)
    assert delta == pytest.approx(1 / len(DEFAULT_MIRROR_PAIRS), abs=1e-12)


def test_symmetry_zero_iod():
    pts = template_points()
    pts[36:48] = 0.0
    with pytest.raises(GeometryError):
        symmetry_score(face(pts))


def test_neocanons_single_violation():
    pts = template_points()
    pts[[48, 54], 0] *= 1.5  # mouth 50% wider than its target
    assert neocanons_score(face(pts)) == pytest.approx(0.5 / 3, abs=1e-12)


def test_neocanons_zero_target():
    pts = template_points()
    pts[35] = pts[31]
    with pytest.raises(GeometryError):
        neocanons_score(face(pts))


def test_fixture_faces_match_oracle():
    expected = json.loads((FIXTURES / "faces10_expected.json").read_text())
    faces = load_landmarks(FIXTURES / "faces10.csv")
    assert len(faces) == 10
    for f in faces:
        exp = expected[f.id]
        assert golden_ratio_score(f) == pytest.approx(exp["golden_ratio"], abs=1e-9)
        assert symmetry_score(f) == pytest.approx(exp["symmetry"], abs=1e-9)
        assert neocanons_score(f) == pytest.approx(exp["neocanons"], abs=1e-9)
        assert frontality_filter(f) == (exp["eye_nose_gap"] <= 10)


def test_random_faces_match_live_oracle(rng):
    for f in random_faces(50, rng):
        exp = oracle_scores(f.points.tolist())
        assert golden_ratio_score(f) == pytest.approx(exp["golden_ratio"], abs=1e-9)
        assert symmetry_score(f) == pytest.approx(exp["symmetry"], abs=1e-9)
        assert neocanons_score(f) == pytest.approx(exp["neocanons"], abs=1e-9)


def _similarity(pts, scale, shift):
    return pts * scale + np.asarray(shift)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), scale=st.floats(0.05, 20.0),
       dx=st.floats(-500, 500), dy=st.floats(-500, 500))
def test_translation_scale_invariance(seed, scale, dx, dy):
    f = random_faces(1, np.random.default_rng(seed))[0]
    g = face(_similarity(f.points, scale, (dx, dy)))
    assert golden_ratio_score(g) == pytest.approx(golden_ratio_score(f), abs=1e-9)
    assert symmetry_score(g) == pytest.approx(symmetry_score(f), abs=1e-9)
    assert neocanons_score(g) == pytest.approx(neocanons_score(f), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_reflection_about_axis(seed):
    f = random_faces(1, np.random.default_rng(seed))[0]
    x_mid = f.points[list(DEFAULT_MIDLINE), 0].mean()
    mirrored = f.points.copy()
    mirrored[:, 0] = 2 * x_mid - mirrored[:, 0]
    assert symmetry_score(face(mirrored)) == pytest.approx(symmetry_score(f), abs=1e-9)
    assert symmetry_score(f) >= 0 and neocanons_score(f) >= 0


def test_score_face_non_frontal_has_no_scores():
    s = score_face(face(shaped_points(FaceShape(yaw=30.0))))
    assert s == AttractivenessScores("f", False)
    with pytest.raises(GeometryError):
        binarize_attractiveness(s)


def test_score_faces_order_independent_of_threads(rng):
    faces = random_faces(40, rng)
    assert score_faces(faces, threads=1) == score_faces(faces, threads=4)
    assert [s.id for s in score_faces(faces, threads=4)] == [f.id for f in faces]


def _scores(gr, sym, neo):
    return AttractivenessScores("x", True, gr, sym, neo)


def test_binarize_examples():
    assert binarize_attractiveness(_scores(1.518, 0, 0), GeometryConfig(delta_gr=0.1))["GR"] == 1
    for d in DELTA_GR_VALUES:
        assert binarize_attractiveness(_scores(1.618, 0, 0), GeometryConfig(delta_gr=d))["GR"] == 1
    assert binarize_attractiveness(_scores(1.618, 3.2, 0), GeometryConfig(t_sym=4.0))["S"] == 1
    assert binarize_attractiveness(_scores(1.618, 4.5, 0), GeometryConfig(t_sym=4.0))["S"] == 0
    assert binarize_attractiveness(_scores(1.618, 4.0, 0.3), GeometryConfig(t_sym=4.0, t_neo=0.3)) == \
        {"GR": 1, "S": 1, "NC": 1}
    assert binarize_attractiveness(_scores(1.9, 9, 0.5)) == {"GR": 0, "S": 0, "NC": 0}


@settings(max_examples=200, deadline=None)
@given(gr=st.floats(0.5, 3.0), sym=st.floats(0, 20), neo=st.floats(0, 2))
def test_label_nesting(gr, sym, neo):
    s = _scores(gr, sym, neo)
    cfgs = [GeometryConfig(delta_gr=d, t_sym=t, t_neo=n) for d, t, n in zip(DELTA_GR_VALUES, T_SYM_VALUES, T_NEO_VALUES)]
    labels = [binarize_attractiveness(s, c) for c in cfgs]
    for a, b in zip(labels, labels[1:]):
        assert all(a[k] <= b[k] for k in a)


def test_channels_skip_non_frontal():
    scores = [_scores(1.6, 1, 0.1), replace(_scores(1.6, 1, 0.1), id="y"), AttractivenessScores("z", False)]
    scores[1] = AttractivenessScores("y", True, 1.0, 9.0, 0.9)
    gr, s, nc = attractiveness_channels(scores)
    assert gr.name == "GR:0.19" and s.name == "S:4.2" and nc.name == "NC:0.29"
    assert gr.labels == {"x": 1, "y": 0}
    assert keep_rate(scores) == pytest.approx(2 / 3)
    assert keep_rate([]) is None
