"""Prediction explanations and plot-ready exports (no rendering)."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .core import (
    UNLABELED,
    Dataset,
    IntervalSample,
    TrainedModel,
    _priority,
    membership_matrix,
    predict,
    predict_batch,
)


@dataclass
class ClassEvidence:
    label: int
    box_id: int
    membership: float
    V: list
    W: list
    distance: list

    def to_dict(self) -> dict:
        return {
            "class": self.label,
            "box_id": self.box_id,
            "membership": self.membership,
            "V": self.V,
            "W": self.W,
            "per_feature_distance": self.distance,
        }


@dataclass
class Explanation:
    sample: IntervalSample
    predicted: int
    per_class: list

    def to_dict(self) -> dict:
        return {
            "sample": {"lower": _floats(self.sample.lower), "upper": _floats(self.sample.upper)},
            "predicted": self.predicted,
            "per_class": [row.to_dict() for row in self.per_class],
        }


def _floats(a):
    return [None if np.isnan(v) else float(v) for v in np.asarray(a, dtype=float)]


def _distances(v, w, x):
    unset = v > w
    d = np.maximum(0.0, np.maximum(x - w, v - x))
    d = np.where(unset, 0.0, d)
    return [None if np.isnan(val) else float(val) for val in d]


def explain(model: TrainedModel, x: IntervalSample) -> Explanation:
    """Winning box of every class for ``x``, strongest class first."""
    if not model.boxes:
        raise ValueError("cannot explain with an empty model")
    predicted, _ = predict(model, x)
    V, W, labels, counts, ids = model.arrays()
    data = Dataset(x.lower[None, :], x.upper[None, :], [UNLABELED])
    mem = membership_matrix(model, data, V, W)[0]
    rank = _priority(V, W, counts, ids)
    # distances are shown against the interval midpoint; memberships use the full interval
    centre = (x.lower + x.upper) / 2
    rows = []
    for c in np.unique(labels):
        pos = np.nonzero(labels == c)[0]
        best = pos[np.lexsort((rank[pos], -mem[pos]))[0]]
        rows.append((mem[best], rank[best], ClassEvidence(
            int(c), int(ids[best]), float(mem[best]), V[best].tolist(), W[best].tolist(), _distances(V[best], W[best], centre)
        )))
    rows.sort(key=lambda r: (-r[0], r[1]))
    per_class = [r[2] for r in rows]
    labelled = [r for r in per_class if r.label != UNLABELED]
    # the predicted class always leads, as it does under predict's rules
    lead = next(r for r in (labelled or per_class) if r.label == predicted)
    per_class.remove(lead)
    return Explanation(x, predicted, [lead] + per_class)


def parallel_coordinates_rows(expl: Explanation):
    """Rows ``(series, feature, value)``: the sample, then min and max vertex per class."""
    if not expl.sample.is_point:
        raise ValueError("parallel coordinates export supports point samples only")
    rows = [("sample", j, None if np.isnan(v) else float(v)) for j, v in enumerate(expl.sample.lower)]
    for ev in expl.per_class:
        rows.extend((f"class_{ev.label}_min", j, v) for j, v in enumerate(ev.V))
        rows.extend((f"class_{ev.label}_max", j, v) for j, v in enumerate(ev.W))
    return rows


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["series", "feature", "value"])
    for series, feature, value in rows:
        writer.writerow([series, feature, "" if value is None else repr(value)])
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps([{"series": s, "feature": f, "value": v} for s, f, v in rows], indent=1)


def export_parallel_coordinates(expl: Explanation):
    """CSV and JSON renderings of :func:`parallel_coordinates_rows`."""
    rows = parallel_coordinates_rows(expl)
    return rows_to_csv(rows), rows_to_json(rows)


def decision_boundary_grid(model: TrainedModel, resolution: int = 50) -> dict:
    """Class labels on a ``resolution x resolution`` lattice of cell centres over the unit square.

    ``labels`` is row-major: entry ``r * resolution + c`` holds the prediction
    at ``((c + 0.5) / resolution, (r + 0.5) / resolution)``.
    """
    if model.n_features != 2:
        raise ValueError("decision boundaries are only exported for two-feature models")
    if resolution < 2:
        raise ValueError("resolution must be >= 2")
    centres = (np.arange(resolution) + 0.5) / resolution
    xx, yy = np.meshgrid(centres, centres)
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    labels, _ = predict_batch(model, Dataset.from_points(pts))
    return {
        "resolution": resolution,
        "labels": labels.astype(int).tolist(),
        "boxes": [{"id": b.id, "label": b.label, "V": b.V.tolist(), "W": b.W.tolist()} for b in model.boxes],
    }
