"""CSV dataset ingestion and versioned JSON model files."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    UNLABELED,
    Dataset,
    Hyperbox,
    InvariantError,
    ModelParams,
    TrainedModel,
    find_overlaps,
)
from .ensemble import EnsembleModel
from .harness import ScalerState

FORMAT_VERSION = 1
DEFAULT_MISSING = frozenset({"", "NaN", "nan", "?"})


class ModelFormatError(ValueError):
    pass


@dataclass
class DatasetSchema:
    feature_names: list
    label_column: str
    class_ids: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    def class_names(self) -> dict:
        return {v: k for k, v in self.class_ids.items()}

    def to_dict(self) -> dict:
        return {"feature_names": list(self.feature_names), "label_column": self.label_column, "class_ids": dict(self.class_ids)}

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetSchema":
        return cls(list(d["feature_names"]), d["label_column"], {str(k): int(v) for k, v in d["class_ids"].items()})


def read_csv(path, label_column: Optional[str], missing_tokens=DEFAULT_MISSING, schema: Optional[DatasetSchema] = None):
    """Read a headed CSV into a point :class:`Dataset`.

    Class ids are assigned from 1 in order of first appearance, unless an
    existing ``schema`` is passed, in which case its ids are reused and any
    unknown class name is an error. An empty label cell is UNLABELED.
    """
    missing_tokens = set(missing_tokens)
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        rows = [r for r in reader if r]
    if len(set(header)) != len(header):
        raise ValueError(f"{path}: duplicate column names in header")
    if label_column is not None and label_column not in header:
        raise ValueError(f"{path}: label column {label_column!r} not found")
    label_idx = header.index(label_column) if label_column is not None else None
    feature_idx = [i for i in range(len(header)) if i != label_idx]
    feature_names = [header[i] for i in feature_idx]
    if schema is not None:
        if feature_names != list(schema.feature_names):
            raise ValueError(f"{path}: feature columns {feature_names} do not match the model's {schema.feature_names}")
        class_ids = dict(schema.class_ids)
    else:
        class_ids = {}
    X = np.empty((len(rows), len(feature_idx)))
    y = np.zeros(len(rows), dtype=int)
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}:{r}: expected {len(header)} cells, found {len(row)}")
        for out_j, j in enumerate(feature_idx):
            cell = row[j].strip()
            if cell in missing_tokens:
                X[r - 2, out_j] = np.nan
                continue
            try:
                X[r - 2, out_j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}:{r}: non-numeric value {cell!r} in column {header[j]!r}") from None
        if label_idx is None:
            continue
        name = row[label_idx].strip()
        if name == "":
            y[r - 2] = UNLABELED
        elif name in class_ids:
            y[r - 2] = class_ids[name]
        elif schema is not None:
            raise ValueError(f"{path}:{r}: class {name!r} is unknown to the model")
        else:
            class_ids[name] = len(class_ids) + 1
            y[r - 2] = class_ids[name]
    if schema is None:
        schema = DatasetSchema(feature_names, label_column or "", class_ids)
    return Dataset.from_points(X, y), schema


def write_csv(path, X, y, schema: DatasetSchema) -> None:
    names = schema.class_names()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(schema.feature_names) + [schema.label_column])
        for row, label in zip(X, y):
            cells = ["" if np.isnan(v) else repr(float(v)) for v in row]
            writer.writerow(cells + [names.get(int(label), "")])


# ---------------------------------------------------------------------------
# model documents

def _params_doc(p: ModelParams) -> dict:
    gamma = list(p.gamma) if isinstance(p.gamma, tuple) else p.gamma
    return {"theta": p.theta, "gamma": gamma, "membership_kind": p.membership_kind}


def _scaler_doc(s: Optional[ScalerState]):
    if s is None:
        return None
    return {"min": s.min.tolist(), "range": s.range.tolist()}


def _single_doc(m: TrainedModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "single",
        "algorithm": m.algorithm,
        "params": _params_doc(m.params),
        "n_features": m.n_features,
        "classes": list(m.classes),
        "scaler": _scaler_doc(m.scaler),
        "schema": m.schema.to_dict() if m.schema is not None else None,
        "boxes": [
            {"id": b.id, "label": b.label, "V": b.V.tolist(), "W": b.W.tolist(), "count": b.count}
            for b in m.boxes
        ],
    }


def _ensemble_doc(e: EnsembleModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "kind": "ensemble",
        "ensemble_kind": e.kind,
        "aggregation": e.aggregation,
        "seed": e.seed,
        "n_features": e.n_features,
        "classes": list(e.classes),
        "scaler": _scaler_doc(e.scaler),
        "schema": e.schema.to_dict() if e.schema is not None else None,
        "feature_subsets": [list(s) for s in e.feature_subsets],
        "members": [_single_doc(m) for m in e.members],
    }


def model_to_json(model) -> str:
    doc = _ensemble_doc(model) if isinstance(model, EnsembleModel) else _single_doc(model)
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


def save_model(model, path) -> None:
    Path(path).write_text(model_to_json(model))


def _need(doc: dict, key: str, kind=None):
    if key not in doc:
        raise ModelFormatError(f"missing field {key!r}")
    value = doc[key]
    if kind is not None and not isinstance(value, kind):
        raise ModelFormatError(f"field {key!r} has the wrong type")
    return value


def _floats(values, n: int, what: str) -> np.ndarray:
    if not isinstance(values, list) or len(values) != n:
        raise ModelFormatError(f"{what} must be a list of {n} numbers")
    if not all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values):
        raise ModelFormatError(f"{what} must contain finite numbers")
    return np.array(values, dtype=float)


def _load_scaler(doc, n: int):
    if doc is None:
        return None
    s = ScalerState(_floats(doc.get("min"), n, "scaler.min"), _floats(doc.get("range"), n, "scaler.range"))
    return s


def _load_single(doc: dict, check_overlap: bool = True) -> TrainedModel:
    if _need(doc, "kind") != "single":
        raise ModelFormatError("expected a single-model document")
    n = _need(doc, "n_features", int)
    p = _need(doc, "params", dict)
    gamma = p.get("gamma")
    try:
        params = ModelParams(float(p["theta"]), gamma, p["membership_kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid params: {exc}") from None
    if isinstance(params.gamma, tuple) and len(params.gamma) != n:
        raise ModelFormatError("gamma length does not match n_features")
    boxes, seen = [], set()
    for bd in _need(doc, "boxes", list):
        box = Hyperbox(
            _floats(bd.get("V"), n, "V"),
            _floats(bd.get("W"), n, "W"),
            int(_need(bd, "label", int)),
            int(_need(bd, "count", int)),
            int(_need(bd, "id", int)),
        )
        box.validate()
        if box.id in seen:
            raise InvariantError(f"duplicate box id {box.id}")
        seen.add(box.id)
        boxes.append(box)
    classes = _need(doc, "classes", list)
    schema = DatasetSchema.from_dict(doc["schema"]) if doc.get("schema") else None
    model = TrainedModel(
        boxes, params, n, classes, scaler=_load_scaler(doc.get("scaler"), n),
        algorithm=doc.get("algorithm", "onln-gfmm"), schema=schema,
    )
    if check_overlap:
        clashes = find_overlaps(model)
        if clashes:
            i, j = clashes[0]
            raise InvariantError(f"boxes {boxes[i].id} and {boxes[j].id} of different classes overlap")
    return model


def model_from_json(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not a JSON document: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported format_version {version!r}")
    kind = doc.get("kind")
    if kind == "single":
        return _load_single(doc)
    if kind != "ensemble":
        raise ModelFormatError(f"unknown model kind {kind!r}")
    n = _need(doc, "n_features", int)
    members = [_load_single(m) for m in _need(doc, "members", list)]
    schema = DatasetSchema.from_dict(doc["schema"]) if doc.get("schema") else None
    return EnsembleModel(
        members,
        _need(doc, "feature_subsets", list),
        n,
        aggregation=_need(doc, "aggregation", str),
        seed=_need(doc, "seed", int),
        scaler=_load_scaler(doc.get("scaler"), n),
        schema=schema,
        kind=doc.get("ensemble_kind", "bagging"),
        classes=_need(doc, "classes", list),
    )


def load_model(path):
    return model_from_json(Path(path).read_text())
