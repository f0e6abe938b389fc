"""Dataset types and their CSV/JSON ingestion.

Landmarks, action units, label channels and per-model probability matrices all
arrive as pre-extracted tables. Loaders validate on the way in and never drop
or invent rows; every writer here emits a format its loader reads back to an
identical structure (floats are written with ``repr`` so they round-trip).
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import CoverageError, DuplicateKeyError, ParseError, SchemaError, ValidationError

log = logging.getLogger(__name__)

N_LANDMARKS = 68
AU_INTENSITY_MAX = 5.0
SIMPLEX_TOL = 1e-6
SIMPLEX_LOAD_TOL = 1e-4


@dataclass(frozen=True)
class Schema:
    """Column naming for landmark and AU tables. Templates take one index/code."""

    id_column: str = "id"
    sensitive_column: str = "sensitive"
    x_column: str = "x_{}"
    y_column: str = "y_{}"
    presence_column: str = "AU{:02d}_presence"
    intensity_column: str = "AU{:02d}_intensity"

    def x(self, i: int) -> str:
        return self.x_column.format(i)

    def y(self, i: int) -> str:
        return self.y_column.format(i)

    def presence(self, code: int) -> str:
        return self.presence_column.format(code)

    def intensity(self, code: int) -> str:
        return self.intensity_column.format(code)

    def au_codes_in(self, header: Iterable[str]) -> list[int]:
        """AU codes that have a presence column in ``header``."""
        head, _, tail = re.split(r"(\{[^}]*\})", self.presence_column, maxsplit=1)
        pattern = re.compile(re.escape(head) + r"(\d+)" + re.escape(tail))
        codes = set()
        for col in header:
            m = pattern.fullmatch(col)
            if m:
                codes.add(int(m.group(1)))
        return sorted(codes)


DEFAULT_SCHEMA = Schema()


def _check_sensitive(value, where: str) -> int:
    if value in (0, 1) and not isinstance(value, bool):
        return int(value)
    raise ValidationError(f"{where}: sensitive attribute must be 0 or 1, got {value!r}")


@dataclass(frozen=True, eq=False)
class LandmarkFace:
    id: str
    points: np.ndarray
    sensitive: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.shape != (N_LANDMARKS, 2):
            raise ValidationError(f"face {self.id}: expected ({N_LANDMARKS}, 2) points, got {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValidationError(f"face {self.id}: non-finite landmark coordinate")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "sensitive", _check_sensitive(self.sensitive, f"face {self.id}"))

    def __eq__(self, other):
        if not isinstance(other, LandmarkFace):
            return NotImplemented
        return (
            self.id == other.id
            and self.sensitive == other.sensitive
            and np.array_equal(self.points, other.points)
        )

    __hash__ = None


@dataclass(frozen=True)
class AUFrame:
    id: str
    presence: Mapping[int, int]
    intensity: Mapping[int, float]
    sensitive: int

    def __post_init__(self):
        if set(self.presence) != set(self.intensity):
            raise ValidationError(f"frame {self.id}: presence and intensity cover different AUs")
        presence, intensity = {}, {}
        for code in sorted(self.presence):
            p = self.presence[code]
            if p not in (0, 1):
                raise ValidationError(f"frame {self.id}: AU{code} presence must be 0 or 1, got {p!r}")
            v = float(self.intensity[code])
            if not math.isfinite(v) or v < 0 or v > AU_INTENSITY_MAX:
                raise ValidationError(f"frame {self.id}: AU{code} intensity {v!r} outside [0, {AU_INTENSITY_MAX}]")
            presence[int(code)] = int(p)
            intensity[int(code)] = v
        object.__setattr__(self, "presence", presence)
        object.__setattr__(self, "intensity", intensity)
        object.__setattr__(self, "sensitive", _check_sensitive(self.sensitive, f"frame {self.id}"))

    def active(self) -> list[int]:
        return [code for code, p in self.presence.items() if p == 1]

    def scored_intensity(self, code: int) -> float:
        """Raw intensity used for scoring; absent or inactive AUs count as 0."""
        if self.presence.get(code, 0) == 0:
            return 0.0
        return self.intensity[code]


@dataclass(frozen=True)
class LabelChannel:
    name: str
    labels: Mapping[str, object]

    def __post_init__(self):
        object.__setattr__(self, "labels", dict(self.labels))

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, id_):
        return self.labels[id_]

    def __contains__(self, id_):
        return id_ in self.labels

    @property
    def ids(self) -> list[str]:
        return list(self.labels)

    def is_binary(self) -> bool:
        return all(v in (0, 1) for v in self.labels.values())


@dataclass(frozen=True, eq=False)
class PredictionMatrix:
    """Per-instance, per-model class probabilities, stored as an (N, M, C) array."""

    model_names: tuple[str, ...]
    ids: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        names = tuple(self.model_names)
        ids = tuple(self.ids)
        probs = np.array(self.probs, dtype=float)
        if probs.ndim != 3:
            raise ValidationError(f"probabilities must be (N, M, C), got shape {probs.shape}")
        n, m, c = probs.shape
        if len(ids) != n or len(names) != m:
            raise ValidationError(f"{len(ids)} ids and {len(names)} models do not match shape {probs.shape}")
        if len(set(names)) != m:
            raise ValidationError("model names must be unique")
        _check_unique(ids, "prediction id")
        if n and c == 0:
            raise ValidationError("need at least one class")
        if not np.isfinite(probs).all() or (probs < 0).any():
            raise ValidationError("probabilities must be finite and non-negative")
        bad = np.abs(probs.sum(axis=2) - 1.0) > SIMPLEX_TOL
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValidationError(f"id {ids[i]}, model {names[j]}: probabilities sum to {probs[i, j].sum()!r}")
        probs.flags.writeable = False
        object.__setattr__(self, "model_names", names)
        object.__setattr__(self, "ids", ids)
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_rows(cls, model_names: Sequence[str], rows: Mapping[str, Sequence[Sequence[float]]]):
        ids = list(rows)
        if not ids:
            return cls(tuple(model_names), (), np.zeros((0, len(model_names), 0)))
        try:
            probs = np.array([rows[i] for i in ids], dtype=float)
        except ValueError as exc:
            raise ValidationError(f"ragged prediction rows: {exc}") from None
        return cls(tuple(model_names), tuple(ids), probs)

    @property
    def n_models(self) -> int:
        return self.probs.shape[1]

    @property
    def n_classes(self) -> int:
        return self.probs.shape[2]

    @property
    def rows(self) -> dict[str, np.ndarray]:
        return {id_: self.probs[k] for k, id_ in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, PredictionMatrix):
            return NotImplemented
        return (
            self.model_names == other.model_names
            and self.ids == other.ids
            and np.array_equal(self.probs, other.probs)
        )

    __hash__ = None

    def column(self, model: str) -> np.ndarray:
        return self.probs[:, self.model_names.index(model), :]

    def reindex(self, ids: Sequence[str]) -> "PredictionMatrix":
        """Rows in the order of ``ids``; every id must be present."""
        pos = {id_: k for k, id_ in enumerate(self.ids)}
        missing = sorted(set(ids) - set(pos))
        if missing:
            raise CoverageError(f"predictions missing ids: {', '.join(missing)}", missing)
        return PredictionMatrix(self.model_names, tuple(ids), self.probs[[pos[i] for i in ids]])


@dataclass(frozen=True)
class LabelTable:
    ids: tuple[str, ...]
    columns: dict[str, tuple] = field(default_factory=dict)


class LoadedFrames(list):
    """List of AUFrames that also remembers how many intensities were clamped."""

    clamped: int = 0


# ---------------------------------------------------------------- raw tables


def _check_unique(ids: Iterable[str], what: str):
    seen = set()
    for id_ in ids:
        if id_ in seen:
            raise DuplicateKeyError(f"duplicate {what}: {id_}")
        seen.add(id_)


def _read_records(path) -> tuple[list[str], list[dict]]:
    """Header and records of a CSV file or a JSON array of objects."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such file: {path}")
    if path.suffix.lower() == ".json":
        with open(path, encoding="utf-8") as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: invalid JSON: {exc}") from None
        if not isinstance(data, list) or not all(isinstance(r, dict) for r in data):
            raise ParseError(f"{path}: expected a top-level array of objects")
        header = list(data[0]) if data else []
        for k, rec in enumerate(data, start=1):
            if set(rec) != set(header):
                raise SchemaError(f"{path}: record {k} has fields {sorted(rec)}, expected {sorted(header)}")
        return header, data
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: missing header row") from None
        records = []
        for k, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: row {k} has {len(row)} fields, header has {len(header)}")
            records.append(dict(zip(header, row)))
    return header, records


def _require(header: Sequence[str], columns: Iterable[str], path):
    have = set(header)
    for col in columns:
        if col not in have:
            raise SchemaError(f"{path}: missing column {col}")


def _number(value, row: int, col: str) -> float:
    if isinstance(value, bool):
        raise ParseError(f"row {row}: column {col}: expected a number, got {value!r}")
    try:
        out = float(value)
    except (TypeError, ValueError):
        raise ParseError(f"row {row}: column {col}: expected a number, got {value!r}") from None
    if not math.isfinite(out):
        raise ParseError(f"row {row}: column {col}: non-finite value {value!r}")
    return out


def _binary(value, row: int, col: str) -> int:
    v = _number(value, row, col)
    if v not in (0.0, 1.0):
        raise ParseError(f"row {row}: column {col}: expected 0 or 1, got {value!r}")
    return int(v)


def _label(value):
    """Labels are ints when they look like ints, otherwise kept as strings."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return int(value) if float(value).is_integer() else value
    text = str(value).strip()
    try:
        num = float(text)
    except ValueError:
        return text
    return int(num) if num.is_integer() else num


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path, header: Sequence[str], rows: Iterable[Sequence]):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path, records: list):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(records, fh, indent=1)
        fh.write("\n")


def _is_json(path) -> bool:
    return Path(path).suffix.lower() == ".json"


# ---------------------------------------------------------------- landmarks


def load_landmarks(path, schema: Schema = DEFAULT_SCHEMA) -> list[LandmarkFace]:
    """Read faces from CSV (``id, sensitive, x_0..x_67, y_0..y_67``) or JSON.

    JSON records carry ``id``, ``sensitive`` and a nested ``points`` list of
    68 ``[x, y]`` pairs.
    """
    header, records = _read_records(path)
    nested = _is_json(path) and "points" in header
    if nested:
        _require(header, [schema.id_column, schema.sensitive_column, "points"], path)
    else:
        coords = [schema.x(i) for i in range(N_LANDMARKS)] + [schema.y(i) for i in range(N_LANDMARKS)]
        _require(header, [schema.id_column, schema.sensitive_column, *coords], path)
    faces = []
    seen = set()
    for k, rec in enumerate(records, start=2 if not _is_json(path) else 1):
        id_ = str(rec[schema.id_column])
        if id_ in seen:
            raise DuplicateKeyError(f"{path}: duplicate id {id_} at row {k}")
        seen.add(id_)
        if nested:
            pts = rec["points"]
            if not isinstance(pts, list) or len(pts) != N_LANDMARKS:
                raise ParseError(f"row {k}: points must be a list of {N_LANDMARKS} pairs")
            points = [[_number(v, k, f"points[{i}]") for v in p] for i, p in enumerate(pts)]
        else:
            points = [
                (_number(rec[schema.x(i)], k, schema.x(i)), _number(rec[schema.y(i)], k, schema.y(i)))
                for i in range(N_LANDMARKS)
            ]
        sensitive = _binary(rec[schema.sensitive_column], k, schema.sensitive_column)
        try:
            faces.append(LandmarkFace(id_, points, sensitive))
        except ValidationError as exc:
            raise ParseError(f"row {k}: {exc}") from None
    return faces


def write_landmarks(faces: Sequence[LandmarkFace], path, schema: Schema = DEFAULT_SCHEMA):
    if _is_json(path):
        _write_json(path, [
            {schema.id_column: f.id, schema.sensitive_column: f.sensitive,
             "points": [[float(x), float(y)] for x, y in f.points]}
            for f in faces
        ])
        return
    header = [schema.id_column, schema.sensitive_column]
    header += [schema.x(i) for i in range(N_LANDMARKS)] + [schema.y(i) for i in range(N_LANDMARKS)]
    rows = (
        [f.id, f.sensitive, *map(float, f.points[:, 0]), *map(float, f.points[:, 1])]
        for f in faces
    )
    _write_csv(path, header, rows)


# ---------------------------------------------------------------- action units


def load_au_frames(path, schema: Schema = DEFAULT_SCHEMA, required_codes: Iterable[int] = ()) -> LoadedFrames:
    """Read AU frames.

    Every AU with a presence column must also have an intensity column, and
    every code in ``required_codes`` (normally the taxonomy's codes) must be
    present. Intensities above 5 are clamped and counted in ``.clamped``;
    negative intensities and presence values other than 0/1 are parse errors.
    """
    header, records = _read_records(path)
    json_nested = _is_json(path) and "presence" in header
    _require(header, [schema.id_column, schema.sensitive_column], path)
    if json_nested:
        _require(header, ["intensity"], path)
        codes = None
    else:
        codes = sorted(set(schema.au_codes_in(header)) | set(required_codes))
        _require(header, [c for code in codes for c in (schema.presence(code), schema.intensity(code))], path)
    frames = LoadedFrames()
    seen = set()
    start = 1 if _is_json(path) else 2
    for k, rec in enumerate(records, start=start):
        id_ = str(rec[schema.id_column])
        if id_ in seen:
            raise DuplicateKeyError(f"{path}: duplicate id {id_} at row {k}")
        seen.add(id_)
        if json_nested:
            raw_p = {int(c): v for c, v in rec["presence"].items()}
            raw_i = {int(c): v for c, v in rec["intensity"].items()}
            missing = sorted(set(required_codes) - set(raw_p))
            if missing or set(raw_p) != set(raw_i):
                raise SchemaError(f"{path}: record {k} AU sets incomplete (missing {missing})")
            row_codes = sorted(raw_p)
        else:
            raw_p = {c: rec[schema.presence(c)] for c in codes}
            raw_i = {c: rec[schema.intensity(c)] for c in codes}
            row_codes = codes
        presence, intensity = {}, {}
        for code in row_codes:
            presence[code] = _binary(raw_p[code], k, schema.presence(code))
            v = _number(raw_i[code], k, schema.intensity(code))
            if v < 0:
                raise ParseError(f"row {k}: column {schema.intensity(code)}: negative intensity {v!r}")
            if v > AU_INTENSITY_MAX:
                frames.clamped += 1
                v = AU_INTENSITY_MAX
            intensity[code] = v
        sensitive = _binary(rec[schema.sensitive_column], k, schema.sensitive_column)
        frames.append(AUFrame(id_, presence, intensity, sensitive))
    if frames.clamped:
        log.warning("%s: clamped %d intensity values above %s", path, frames.clamped, AU_INTENSITY_MAX)
    return frames


def write_au_frames(frames: Sequence[AUFrame], path, schema: Schema = DEFAULT_SCHEMA):
    if _is_json(path):
        _write_json(path, [
            {schema.id_column: f.id, schema.sensitive_column: f.sensitive,
             "presence": {str(c): p for c, p in f.presence.items()},
             "intensity": {str(c): v for c, v in f.intensity.items()}}
            for f in frames
        ])
        return
    codes = sorted({c for f in frames for c in f.presence})
    header = [schema.id_column, schema.sensitive_column]
    for code in codes:
        header += [schema.presence(code), schema.intensity(code)]
    rows = []
    for f in frames:
        if sorted(f.presence) != codes:
            raise ValidationError(f"frame {f.id}: AU set differs from the other frames")
        row = [f.id, f.sensitive]
        for code in codes:
            row += [f.presence[code], f.intensity[code]]
        rows.append(row)
    _write_csv(path, header, rows)


# ---------------------------------------------------------------- predictions

_PROB_COLUMN = re.compile(r"(.+)_p(\d+)")


def load_predictions(path, n_models: int | None = None, n_classes: int | None = None) -> PredictionMatrix:
    """Read a prediction matrix.

    CSV columns are ``id`` followed by ``<model>_p<class>`` for every model and
    class. JSON records are ``{"id": ..., "probs": {model: [p0, p1, ...]}}``.
    Per-model rows summing to within 1e-4 of one are renormalised; anything
    further off, or any negative entry, is a validation error.
    """
    header, records = _read_records(path)
    _require(header, ["id"], path)
    if _is_json(path):
        _require(header, ["probs"], path)
        names = list(records[0]["probs"]) if records else []
        rows = {}
        for k, rec in enumerate(records, start=1):
            if list(rec["probs"]) != names:
                raise SchemaError(f"{path}: record {k} has models {list(rec['probs'])}, expected {names}")
            rows[_unique_id(rows, rec["id"], path, k)] = [
                [_number(v, k, name) for v in rec["probs"][name]] for name in names
            ]
    else:
        names, layout = _prediction_layout([h for h in header if h != "id"], path)
        rows = {}
        for k, rec in enumerate(records, start=2):
            rows[_unique_id(rows, rec["id"], path, k)] = [
                [_number(rec[col], k, col) for col in cols] for cols in layout
            ]
    if n_models is not None and len(names) != n_models:
        raise SchemaError(f"{path}: expected {n_models} models, found {len(names)}")
    for k, (id_, vectors) in enumerate(rows.items(), start=1):
        for name, vec in zip(names, vectors):
            if n_classes is not None and len(vec) != n_classes:
                raise SchemaError(f"{path}: model {name} has {len(vec)} classes, expected {n_classes}")
            if any(v < 0 for v in vec):
                raise ValidationError(f"{path}: id {id_}, model {name}: negative probability")
            total = math.fsum(vec)
            if abs(total - 1.0) > SIMPLEX_LOAD_TOL:
                raise ValidationError(f"{path}: id {id_}, model {name}: probabilities sum to {total!r}")
            if abs(total - 1.0) > SIMPLEX_TOL:
                vec[:] = [v / total for v in vec]
    return PredictionMatrix.from_rows(names, rows)


def _unique_id(rows, id_, path, k) -> str:
    id_ = str(id_)
    if id_ in rows:
        raise DuplicateKeyError(f"{path}: duplicate id {id_} at row {k}")
    return id_


def _prediction_layout(columns: Sequence[str], path) -> tuple[list[str], list[list[str]]]:
    by_model: dict[str, dict[int, str]] = {}
    for col in columns:
        m = _PROB_COLUMN.fullmatch(col)
        if not m:
            raise SchemaError(f"{path}: column {col} is not of the form <model>_p<class>")
        by_model.setdefault(m.group(1), {})[int(m.group(2))] = col
    names = list(by_model)
    layout = []
    for name in names:
        classes = by_model[name]
        if sorted(classes) != list(range(len(classes))):
            raise SchemaError(f"{path}: model {name} has non-contiguous class columns {sorted(classes)}")
        layout.append([classes[c] for c in range(len(classes))])
    return names, layout


def write_predictions(preds: PredictionMatrix, path):
    if _is_json(path):
        _write_json(path, [
            {"id": id_, "probs": {name: [float(v) for v in preds.probs[k, j]]
                                  for j, name in enumerate(preds.model_names)}}
            for k, id_ in enumerate(preds.ids)
        ])
        return
    header = ["id"] + [f"{name}_p{c}" for name in preds.model_names for c in range(preds.n_classes)]
    rows = ([id_, *map(float, preds.probs[k].ravel())] for k, id_ in enumerate(preds.ids))
    _write_csv(path, header, rows)


def merge_predictions(matrices: Sequence[PredictionMatrix]) -> PredictionMatrix:
    """Stack the models of several matrices over the same id set."""
    if not matrices:
        raise ValidationError("nothing to merge")
    ids = sorted(matrices[0].ids)
    for pm in matrices[1:]:
        diff = sorted(set(pm.ids) ^ set(ids))
        if diff:
            raise CoverageError(f"prediction files cover different ids: {', '.join(diff[:10])}", diff)
    aligned = [pm.reindex(ids) for pm in matrices]
    names = tuple(n for pm in aligned for n in pm.model_names)
    return PredictionMatrix(names, tuple(ids), np.concatenate([pm.probs for pm in aligned], axis=1))


# ---------------------------------------------------------------- channels


def load_channel(path, column: str | None = None, name: str | None = None, id_column: str = "id") -> LabelChannel:
    """Read one label column keyed by id. Blank cells (e.g. non-frontal faces) are skipped."""
    header, records = _read_records(path)
    _require(header, [id_column], path)
    if column is None:
        others = [h for h in header if h != id_column]
        if len(others) != 1:
            raise SchemaError(f"{path}: pick a label column among {others}")
        column = others[0]
    _require(header, [column], path)
    labels = {}
    for k, rec in enumerate(records, start=2):
        value = rec[column]
        if value is None or (isinstance(value, str) and not value.strip()):
            continue
        labels[_unique_id(labels, rec[id_column], path, k)] = _label(value)
    return LabelChannel(name or column, labels)


def write_channel(channel: LabelChannel, path, id_column: str = "id"):
    if _is_json(path):
        _write_json(path, [{id_column: i, channel.name: v} for i, v in channel.labels.items()])
    else:
        _write_csv(path, [id_column, channel.name], channel.labels.items())


def load_groups(path, column: str = "sensitive", id_column: str = "id") -> dict[str, int]:
    header, records = _read_records(path)
    _require(header, [id_column, column], path)
    groups = {}
    for k, rec in enumerate(records, start=2):
        groups[_unique_id(groups, rec[id_column], path, k)] = _binary(rec[column], k, column)
    return groups


def join_channels(ids: Iterable[str], channels: Sequence[LabelChannel]) -> LabelTable:
    """Align channels over ``ids`` (sorted lexicographically), one column per channel."""
    ordered = tuple(sorted(set(ids)))
    missing = sorted({i for ch in channels for i in ordered if i not in ch})
    if missing:
        names = [ch.name for ch in channels if any(i not in ch for i in missing)]
        raise CoverageError(f"ids missing from channel(s) {', '.join(names)}: {', '.join(missing)}", missing)
    names = [ch.name for ch in channels]
    if len(set(names)) != len(names):
        raise ValidationError(f"duplicate channel names: {names}")
    return LabelTable(ordered, {ch.name: tuple(ch[i] for i in ordered) for ch in channels})
