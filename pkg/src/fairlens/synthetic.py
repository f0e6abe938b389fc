"""Synthetic fixtures: landmark faces, AU frames and a biased-label dataset.

The template face is exactly mirror-symmetric, satisfies every default canon
and has both default golden ratios equal to 1.618. Random faces perturb its
shape parameters so that scores spread around the default label bands.

Run ``python -m fairlens.synthetic --out DIR`` to write a fixture set usable
with the command-line pipeline.
"""

from __future__ import annotations

import argparse
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import AU_INTENSITY_MAX, AUFrame, LabelChannel, LandmarkFace, write_au_frames, write_channel, write_landmarks
from .expressions import DEFAULT_TAXONOMY

# Left half of the template (x < 0), plus midline points with x = 0. Image
# coordinates: y grows downwards, eye centroids sit on y = 0.
_LEFT = {
    0: (-70.0, 0.0), 1: (-69.0, 25.0), 2: (-66.0, 50.0), 3: (-60.0, 75.0),
    4: (-52.0, 100.0), 5: (-42.0, 122.0), 6: (-30.0, 141.0), 7: (-16.0, 155.0),
    17: (-60.0, -50.0), 18: (-50.0, -58.0), 19: (-38.0, -62.0), 20: (-25.0, -64.0), 21: (-12.0, -64.72),
    31: (-17.5, 58.0), 32: (-9.0, 60.0),
    36: (-45.0, 0.0), 37: (-37.0, -6.0), 38: (-26.0, -6.0), 39: (-17.5, 0.0), 40: (-26.0, 6.0), 41: (-37.0, 6.0),
    48: (-26.25, 110.0), 49: (-16.0, 104.0), 50: (-6.0, 101.0), 59: (-16.0, 117.0), 58: (-6.0, 120.0),
    60: (-20.0, 110.0), 61: (-8.0, 107.0), 67: (-8.0, 113.0),
}
_MIDLINE = {
    8: 161.8, 27: -5.0, 28: 15.0, 29: 35.0, 30: 52.0, 33: 61.8,
    51: 102.0, 57: 121.0, 62: 107.0, 66: 114.0,
}
_MIRROR = {
    0: 16, 1: 15, 2: 14, 3: 13, 4: 12, 5: 11, 6: 10, 7: 9,
    17: 26, 18: 25, 19: 24, 20: 23, 21: 22, 31: 35, 32: 34,
    36: 45, 37: 44, 38: 43, 39: 42, 40: 47, 41: 46,
    48: 54, 49: 53, 50: 52, 59: 55, 58: 56, 60: 64, 61: 63, 67: 65,
}

NOSE_WINGS = (31, 32, 34, 35)
MOUTH = tuple(range(48, 68))
LEFT_EYE = tuple(range(36, 42))
RIGHT_EYE = tuple(range(42, 48))


def template_points() -> np.ndarray:
    pts = np.full((68, 2), np.nan)
    for i, (x, y) in _LEFT.items():
        pts[i] = (x, y)
        pts[_MIRROR[i]] = (-x, y)
    for i, y in _MIDLINE.items():
        pts[i] = (0.0, y)
    assert not np.isnan(pts).any()
    return pts


def mirror_pairs() -> list[tuple[int, int]]:
    return sorted(_MIRROR.items())


@dataclass(frozen=True)
class FaceShape:
    aspect: float = 1.0        # vertical stretch, moves the face height/width ratio
    nose_width: float = 1.0    # horizontal scale of the nose wings
    mouth_width: float = 1.0   # horizontal scale of the mouth
    eye_spread: float = 0.0    # horizontal shift of each eye away from the midline
    yaw: float = 0.0           # horizontal shift of the nose tip, breaks frontality
    jitter: float = 0.0        # std of isotropic landmark noise


def shaped_points(shape: FaceShape, rng: np.random.Generator | None = None) -> np.ndarray:
    pts = template_points()
    pts[:, 1] *= shape.aspect
    pts[list(NOSE_WINGS), 0] *= shape.nose_width
    pts[list(MOUTH), 0] *= shape.mouth_width
    pts[list(LEFT_EYE), 0] -= shape.eye_spread
    pts[list(RIGHT_EYE), 0] += shape.eye_spread
    pts[30, 0] += shape.yaw
    if shape.jitter and rng is not None:
        pts += rng.normal(0.0, shape.jitter, pts.shape)
    return pts


def random_shape(rng: np.random.Generator) -> FaceShape:
    return FaceShape(
        aspect=float(rng.normal(1.0, 0.36)),
        nose_width=float(rng.normal(1.0, 0.4)),
        mouth_width=float(rng.normal(1.0, 0.2)),
        eye_spread=float(rng.normal(0.0, 3.0)),
        yaw=float(rng.normal(0.0, 6.0)),
        jitter=float(rng.uniform(0.3, 1.7)),
    )


def random_faces(n: int, rng: np.random.Generator, sensitive: np.ndarray | None = None,
                 prefix: str = "f") -> list[LandmarkFace]:
    """Faces with random shapes, then a random uniform scale and translation."""
    if sensitive is None:
        sensitive = rng.integers(0, 2, n)
    faces = []
    for k in range(n):
        pts = shaped_points(random_shape(rng), rng)
        pts = pts * rng.uniform(0.5, 1.2) + rng.uniform(60.0, 200.0, 2)
        faces.append(LandmarkFace(f"{prefix}{k:05d}", pts, int(sensitive[k])))
    return faces


def random_frames(n: int, rng: np.random.Generator, codes=None, p_active: float = 0.3,
                  prefix: str = "a") -> list[AUFrame]:
    """Independent Bernoulli presences with uniform intensities (inactive AUs get low intensities)."""
    codes = DEFAULT_TAXONOMY.au_codes if codes is None else codes
    frames = []
    for k in range(n):
        presence = {c: int(rng.random() < p_active) for c in codes}
        intensity = {
            c: float(np.round(rng.uniform(0.0, AU_INTENSITY_MAX) if presence[c] else rng.uniform(0.0, 1.0), 3))
            for c in codes
        }
        frames.append(AUFrame(f"{prefix}{k:05d}", presence, intensity, int(rng.integers(0, 2))))
    return frames


def biased_labels(beauty: np.ndarray, sensitive: np.ndarray, rng: np.random.Generator,
                  bias: float = 1.2, noise: float = 0.5) -> np.ndarray:
    """Human-style labels: a noisy beauty threshold shifted in favour of group 1."""
    z = beauty + bias * (2 * sensitive - 1) + rng.normal(0.0, noise, len(beauty))
    return (z > np.median(z)).astype(int)


def _frontal_faces(n: int, rng: np.random.Generator, prefix: str) -> list[LandmarkFace]:
    """Exactly ``n`` faces that pass the default frontality filter, numbered consecutively."""
    from .geometry import GeometryConfig, frontality_filter

    kept = []
    while len(kept) < n:
        kept += [f for f in random_faces(n, rng, prefix=prefix) if frontality_filter(f, GeometryConfig())]
    return [LandmarkFace(f"{prefix}{k:05d}", f.points, f.sensitive) for k, f in enumerate(kept[:n])]


def write_fixture_set(out, seed: int = 0, n_train: int = 400, n_test: int = 200,
                      frontal_only: bool = False) -> dict[str, Path]:
    """Landmarks, human labels and AU frames for a train and a test split.

    With ``frontal_only`` every split holds exactly the requested number of
    frontal faces, so downstream predictions cover the whole split.
    """
    from .geometry import GeometryConfig, score_faces

    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    paths = {}
    for split, n in (("train", n_train), ("test", n_test)):
        if frontal_only:
            faces = _frontal_faces(n, rng, f"{split}_")
        else:
            faces = random_faces(n, rng, prefix=f"{split}_")
        scores = score_faces(faces, GeometryConfig())
        beauty = np.array([
            -abs(s.golden_ratio - 1.618) / 0.2 - s.symmetry / 4.0 - s.neocanons / 0.3 if s.frontal else 0.0
            for s in scores
        ])
        sens = np.array([f.sensitive for f in faces])
        human = biased_labels(beauty, sens, rng)
        paths[f"{split}_landmarks"] = out / f"{split}_landmarks.csv"
        write_landmarks(faces, paths[f"{split}_landmarks"])
        paths[f"{split}_human"] = out / f"{split}_human.csv"
        write_channel(LabelChannel("H", {f.id: int(h) for f, h in zip(faces, human)}), paths[f"{split}_human"])
        paths[f"{split}_aus"] = out / f"{split}_aus.csv"
        write_au_frames(random_frames(n, rng, prefix=f"{split}_"), paths[f"{split}_aus"])
    return paths


def main(argv=None):
    parser = argparse.ArgumentParser(description="write a synthetic fixture set")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--n-train", type=int, default=400)
    parser.add_argument("--n-test", type=int, default=200)
    parser.add_argument("--frontal-only", action="store_true", help="draw faces until every split is all frontal")
    args = parser.parse_args(argv)
    paths = write_fixture_set(args.out, args.seed, args.n_train, args.n_test, args.frontal_only)
    for name, path in paths.items():
        print(f"{name}: {path}")


if __name__ == "__main__":
    main()
