"""Hyperbox data model, membership functions and geometric predicates.

Conventions used throughout the package:

* A missing feature value is ``nan`` (``MISSING``).
* An *unset* hyperbox dimension, produced when a box is created from a
  sample whose feature is missing, is encoded as ``V_j = 1, W_j = 0``.
* Class labels are positive integers; ``UNLABELED`` is ``0``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

MISSING = float("nan")
UNLABELED = 0
GFMM = "gfmm"
FMNN = "fmnn"

# width used for zero-width dimensions when comparing box volumes
ZERO_WIDTH = 1e-12

GammaLike = Union[float, Sequence[float], np.ndarray]


class DimensionError(ValueError):
    pass


class InvariantError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class IntervalSample:
    """A sample given as per-feature ``[lower, upper]`` bounds.

    A point sample has ``lower == upper``. A missing feature is ``nan`` in
    both bounds.
    """

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lower = np.asarray(self.lower, dtype=float).reshape(-1)
        upper = np.asarray(self.upper, dtype=float).reshape(-1)
        if lower.shape != upper.shape:
            raise DimensionError("lower and upper bounds differ in length")
        check_bounds(lower[None, :], upper[None, :])
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def point(cls, x) -> "IntervalSample":
        x = np.asarray(x, dtype=float)
        return cls(x, x.copy())

    @property
    def n_features(self) -> int:
        return self.lower.shape[0]

    @property
    def missing(self) -> np.ndarray:
        return np.isnan(self.lower)

    @property
    def is_point(self) -> bool:
        present = ~self.missing
        return bool(np.all(self.lower[present] == self.upper[present]))


def check_bounds(lower: np.ndarray, upper: np.ndarray) -> None:
    """Validate interval data: ``0 <= lower <= upper <= 1`` where present."""
    lo_nan = np.isnan(lower)
    if not np.array_equal(lo_nan, np.isnan(upper)):
        raise InvariantError("a feature must be missing in both bounds or in neither")
    present = ~lo_nan
    lo, up = lower[present], upper[present]
    if np.any(lo < 0) or np.any(up > 1):
        raise InvariantError("feature values must lie in [0, 1]; normalise the data first")
    if np.any(lo > up):
        raise InvariantError("lower bound exceeds upper bound")


@dataclass(frozen=True, eq=False)
class Hyperbox:
    """Min-max hyperbox. Treated as immutable: every operation returns a new box."""

    V: np.ndarray
    W: np.ndarray
    label: int = UNLABELED
    count: int = 1
    id: int = 0

    def __post_init__(self):
        V = np.asarray(self.V, dtype=float).reshape(-1)
        W = np.asarray(self.W, dtype=float).reshape(-1)
        if V.shape != W.shape:
            raise DimensionError("V and W differ in length")
        V.setflags(write=False)
        W.setflags(write=False)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "W", W)

    @property
    def n_features(self) -> int:
        return self.V.shape[0]

    @property
    def unset(self) -> np.ndarray:
        return unset_mask(self.V, self.W)

    def validate(self) -> None:
        V, W = self.V, self.W
        if np.any(np.isnan(V)) or np.any(np.isnan(W)):
            raise InvariantError(f"box {self.id}: nan vertex")
        unset = (V == 1.0) & (W == 0.0)
        bad = (V > W) & ~unset
        if np.any(bad):
            raise InvariantError(f"box {self.id}: V > W outside the unset sentinel")
        set_ = ~unset
        if np.any(V[set_] < 0) or np.any(W[set_] > 1):
            raise InvariantError(f"box {self.id}: vertex outside [0, 1]")
        if self.count < 0:
            raise InvariantError(f"box {self.id}: negative sample count")
        if self.label < 0:
            raise InvariantError(f"box {self.id}: negative label")

    def same_geometry(self, other: "Hyperbox") -> bool:
        return (
            self.label == other.label
            and self.count == other.count
            and np.array_equal(self.V, other.V)
            and np.array_equal(self.W, other.W)
        )

    def __repr__(self):
        return f"Hyperbox(id={self.id}, label={self.label}, count={self.count}, V={self.V.tolist()}, W={self.W.tolist()})"


@dataclass(frozen=True)
class ModelParams:
    theta: float = 0.1
    gamma: GammaLike = 1.0
    membership_kind: str = GFMM

    def __post_init__(self):
        if not (0 < self.theta <= 1):
            raise ValueError(f"theta must lie in (0, 1], got {self.theta}")
        g = np.asarray(self.gamma, dtype=float)
        if g.size == 0 or np.any(~(g > 0)):
            raise ValueError("gamma must be positive")
        if g.ndim > 0:
            object.__setattr__(self, "gamma", tuple(float(v) for v in g.reshape(-1)))
        else:
            object.__setattr__(self, "gamma", float(g))
        if self.membership_kind not in (GFMM, FMNN):
            raise ValueError(f"unknown membership kind {self.membership_kind!r}")

    def gamma_vector(self, n: int) -> np.ndarray:
        return as_gamma(self.gamma, n)

    def project(self, features) -> "ModelParams":
        if isinstance(self.gamma, tuple):
            g = tuple(self.gamma[i] for i in features)
            return ModelParams(self.theta, g, self.membership_kind)
        return self


@dataclass
class TrainedModel:
    boxes: list
    params: ModelParams
    n_features: int
    classes: list = field(default_factory=list)
    scaler: Optional[object] = None
    algorithm: str = "onln-gfmm"
    schema: Optional[object] = None

    def __post_init__(self):
        for b in self.boxes:
            if b.n_features != self.n_features:
                raise DimensionError("box dimensionality does not match the model")
        self.classes = sorted(set(int(c) for c in self.classes) - {UNLABELED})

    def __len__(self):
        return len(self.boxes)

    def arrays(self):
        """Stacked ``(V, W, labels, counts, ids)`` arrays of the model's boxes."""
        n = self.n_features
        if not self.boxes:
            return (np.empty((0, n)), np.empty((0, n)), np.empty(0, int), np.empty(0, int), np.empty(0, int))
        V = np.stack([b.V for b in self.boxes])
        W = np.stack([b.W for b in self.boxes])
        labels = np.array([b.label for b in self.boxes], dtype=int)
        counts = np.array([b.count for b in self.boxes], dtype=int)
        ids = np.array([b.id for b in self.boxes], dtype=int)
        return V, W, labels, counts, ids

    def next_id(self) -> int:
        return max((b.id for b in self.boxes), default=-1) + 1


@dataclass
class Dataset:
    """Interval dataset: ``lower``/``upper`` are ``(N, n)``; ``labels`` is ``(N,)``."""

    lower: np.ndarray
    upper: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.lower = np.atleast_2d(np.asarray(self.lower, dtype=float))
        self.upper = np.atleast_2d(np.asarray(self.upper, dtype=float))
        self.labels = np.asarray(self.labels, dtype=int).reshape(-1)
        if self.lower.shape != self.upper.shape:
            raise DimensionError("lower and upper arrays differ in shape")
        if self.labels.shape[0] != self.lower.shape[0]:
            raise DimensionError("label count does not match sample count")

    @classmethod
    def from_points(cls, X, y=None) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if y is None:
            y = np.full(X.shape[0], UNLABELED)
        return cls(X, X.copy(), y)

    def __len__(self):
        return self.lower.shape[0]

    @property
    def n_features(self) -> int:
        return self.lower.shape[1]

    @property
    def is_point(self) -> bool:
        return bool(np.array_equal(self.lower, self.upper, equal_nan=True))

    def sample(self, i: int) -> IntervalSample:
        return IntervalSample(self.lower[i], self.upper[i])

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(int)
        return Dataset(self.lower[idx], self.upper[idx], self.labels[idx])

    def project(self, features) -> "Dataset":
        features = list(features)
        return Dataset(self.lower[:, features], self.upper[:, features], self.labels)

    def validate(self) -> None:
        if len(self) == 0:
            raise ValueError("empty dataset")
        check_bounds(self.lower, self.upper)
        if np.any(self.labels < 0):
            raise ValueError("class labels must be non-negative integers")


def as_gamma(gamma: GammaLike, n: int) -> np.ndarray:
    g = np.asarray(gamma, dtype=float)
    if g.ndim == 0:
        g = np.full(n, float(g))
    if g.shape != (n,):
        raise DimensionError(f"gamma has length {g.size}, expected {n}")
    if np.any(~(g > 0)):
        raise ValueError("gamma must be positive")
    return g


def unset_mask(V: np.ndarray, W: np.ndarray) -> np.ndarray:
    return V > W


def ramp(r: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Ramp threshold: 0 below zero, ``r * gamma`` in between, saturating at 1."""
    return np.clip(r * gamma, 0.0, 1.0)


# ---------------------------------------------------------------------------
# vectorised kernels over stacked boxes

def gfmm_memberships(V, W, xl, xu, gamma) -> np.ndarray:
    """Membership of one interval sample in every box of ``(V, W)`` (shape ``(m, n)``)."""
    V = np.atleast_2d(V)
    W = np.atleast_2d(W)
    neutral = (V > W) | np.isnan(xl)
    with np.errstate(invalid="ignore"):
        upper_fit = 1.0 - ramp(xu - W, gamma)
        lower_fit = 1.0 - ramp(V - xl, gamma)
    fit = np.minimum(upper_fit, lower_fit)
    fit = np.where(neutral, 1.0, fit)
    if fit.shape[1] == 0:
        return np.ones(fit.shape[0])
    return fit.min(axis=1)


def gfmm_membership_matrix(V, W, XL, XU, gamma) -> np.ndarray:
    """Memberships of ``N`` samples in ``m`` boxes, shape ``(N, m)``."""
    V = np.atleast_2d(V)[None, :, :]
    W = np.atleast_2d(W)[None, :, :]
    XL = np.atleast_2d(XL)[:, None, :]
    XU = np.atleast_2d(XU)[:, None, :]
    neutral = (V > W) | np.isnan(XL)
    with np.errstate(invalid="ignore"):
        fit = np.minimum(1.0 - ramp(XU - W, gamma), 1.0 - ramp(V - XL, gamma))
    fit = np.where(neutral, 1.0, fit)
    if fit.shape[2] == 0:
        return np.ones(fit.shape[:2])
    return fit.min(axis=2)


def fmnn_memberships(V, W, x, gamma) -> np.ndarray:
    V = np.atleast_2d(V)
    W = np.atleast_2d(W)
    n = V.shape[1]
    above = np.maximum(0.0, 1.0 - np.maximum(0.0, gamma * np.minimum(1.0, x - W)))
    below = np.maximum(0.0, 1.0 - np.maximum(0.0, gamma * np.minimum(1.0, V - x)))
    return (above + below).sum(axis=1) / (2 * n)


def fmnn_membership_matrix(V, W, X, gamma) -> np.ndarray:
    V = np.atleast_2d(V)[None, :, :]
    W = np.atleast_2d(W)[None, :, :]
    X = np.atleast_2d(X)[:, None, :]
    n = V.shape[2]
    above = np.maximum(0.0, 1.0 - np.maximum(0.0, gamma * np.minimum(1.0, X - W)))
    below = np.maximum(0.0, 1.0 - np.maximum(0.0, gamma * np.minimum(1.0, V - X)))
    return (above + below).sum(axis=2) / (2 * n)


def overlap_mask(v, w, P, Q) -> np.ndarray:
    """Which rows of ``(P, Q)`` overlap box ``(v, w)``.

    Per dimension, two intervals overlap when ``v < Q`` and ``P < w``; a
    degenerate interval therefore overlaps only when strictly inside the
    other one. Dimensions unset in both boxes are skipped, a dimension unset
    in exactly one box separates them.
    """
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    a_unset = v > w
    b_unset = P > Q
    both = a_unset & b_unset
    one = a_unset ^ b_unset
    dim_overlap = (v < Q) & (P < w)
    dim_ok = np.where(both, True, dim_overlap & ~one)
    has_set = ~both
    return dim_ok.all(axis=1) & has_set.any(axis=1)


def interior_overlap_mask(v, w, P, Q) -> np.ndarray:
    """Which rows of ``(P, Q)`` share positive interior volume with box ``(v, w)``.

    This is the weaker relation behind the inter-class invariant: unlike
    :func:`overlap_mask`, a box that is degenerate on some compared dimension
    never intersects anything, so a point box lying inside a box of another
    class is allowed. Unset dimensions follow the same rules as there.
    """
    P = np.atleast_2d(P)
    Q = np.atleast_2d(Q)
    a_unset = v > w
    b_unset = P > Q
    both = a_unset & b_unset
    one = a_unset ^ b_unset
    dim_overlap = np.maximum(v, P) < np.minimum(w, Q)
    dim_ok = np.where(both, True, dim_overlap & ~one)
    return dim_ok.all(axis=1) & (~both).any(axis=1)


def box_volumes(V, W) -> np.ndarray:
    V = np.atleast_2d(V)
    W = np.atleast_2d(W)
    width = W - V
    width = np.where(width == 0, ZERO_WIDTH, width)
    width = np.where(V > W, 1.0, width)
    return width.prod(axis=1)


# ---------------------------------------------------------------------------
# single-box operations

def _check_dims(box: Hyperbox, x: IntervalSample) -> None:
    if box.n_features != x.n_features:
        raise DimensionError(f"box has {box.n_features} features, sample has {x.n_features}")


def gfmm_membership(box: Hyperbox, x: IntervalSample, gamma: GammaLike = 1.0) -> float:
    _check_dims(box, x)
    g = as_gamma(gamma, box.n_features)
    return float(gfmm_memberships(box.V, box.W, x.lower, x.upper, g)[0])


def fmnn_membership(box: Hyperbox, x: IntervalSample, gamma: float = 1.0) -> float:
    _check_dims(box, x)
    if not x.is_point or np.any(x.missing):
        raise ValueError("FMNN membership is defined for fully observed point samples only")
    if np.any(box.unset):
        raise ValueError("FMNN membership is undefined for boxes with unset dimensions")
    g = as_gamma(gamma, box.n_features)
    return float(fmnn_memberships(box.V, box.W, x.lower, g)[0])


def membership(box: Hyperbox, x: IntervalSample, params: ModelParams) -> float:
    if params.membership_kind == FMNN:
        return fmnn_membership(box, x, params.gamma)
    return gfmm_membership(box, x, params.gamma)


def can_expand(v, w, xl, xu, theta) -> bool:
    """Array form of :func:`is_expandable` for one box and one sample."""
    active = ~((v > w) | np.isnan(xl))
    span = np.maximum(w, xu) - np.minimum(v, xl)
    return bool(np.all(span[active] <= theta))


def is_expandable(box: Hyperbox, x: IntervalSample, theta: float) -> bool:
    _check_dims(box, x)
    return can_expand(box.V, box.W, x.lower, x.upper, theta)


def hull(v, w, xl, xu):
    """Coordinate-wise hull of a box and an interval sample (array form)."""
    missing = np.isnan(xl)
    unset = v > w
    new_v = np.where(unset, xl, np.minimum(v, xl))
    new_w = np.where(unset, xu, np.maximum(w, xu))
    new_v = np.where(missing, v, new_v)
    new_w = np.where(missing, w, new_w)
    return new_v, new_w


def expand(box: Hyperbox, x: IntervalSample, label: int = UNLABELED) -> Hyperbox:
    _check_dims(box, x)
    V, W = hull(box.V, box.W, x.lower, x.upper)
    new_label = box.label if box.label != UNLABELED else label
    return Hyperbox(V, W, new_label, box.count + 1, box.id)


def box_from_sample(x: IntervalSample, label: int = UNLABELED, box_id: int = 0) -> Hyperbox:
    V = np.where(x.missing, 1.0, x.lower)
    W = np.where(x.missing, 0.0, x.upper)
    return Hyperbox(V, W, label, 1, box_id)


def overlap_case(v, w, p, q):
    """Overlap resolution ``(dim, delta, case)`` for boxes ``a=(v, w)``, ``b=(p, q)``.

    Returns ``None`` when the boxes do not overlap (see :func:`overlap_mask`).
    Cases: 1 ``a`` left of ``b``; 2 ``a`` right of ``b``; 3 ``b`` within ``a``;
    4 ``a`` within ``b``. The dimension with the smallest overlap wins, ties to
    the lowest index.
    """
    if not overlap_mask(v, w, p[None, :], q[None, :])[0]:
        return None
    best = None
    for j in range(v.shape[0]):
        if v[j] > w[j]:
            continue
        case, delta = _dim_case(v[j], w[j], p[j], q[j])
        if best is None or delta < best[1]:
            best = (j, delta, case)
    return best


def _dim_case(v, w, p, q):
    if v < p and w < q:
        return 1, w - p
    if p < v and q < w:
        return 2, q - v
    if v <= p and q <= w:
        return 3, min(q - v, w - p)
    return 4, min(q - v, w - p)


def contract_arrays(va, wa, vb, wb, dim: int, case: int) -> None:
    """In-place contraction of boxes ``a`` and ``b`` along ``dim``."""
    v, w, p, q = va[dim], wa[dim], vb[dim], wb[dim]
    if not (v < q and p < w) or _dim_case(v, w, p, q)[0] != case:
        raise ValueError(f"case {case} does not describe the overlap on dimension {dim}")
    if case == 1:
        wa[dim] = vb[dim] = (w + p) / 2
    elif case == 2:
        wb[dim] = va[dim] = (q + v) / 2
    elif case == 3:
        if q - v < w - p:
            va[dim] = q
        else:
            wa[dim] = p
    else:
        if q - v < w - p:
            wb[dim] = v
        else:
            vb[dim] = w


def overlap_test(a: Hyperbox, b: Hyperbox):
    if a.n_features != b.n_features:
        raise DimensionError("boxes differ in dimensionality")
    return overlap_case(a.V, a.W, b.V, b.W)


def contract(a: Hyperbox, b: Hyperbox, dim: int, case: int):
    va, wa, vb, wb = a.V.copy(), a.W.copy(), b.V.copy(), b.W.copy()
    contract_arrays(va, wa, vb, wb, dim, case)
    return (
        Hyperbox(va, wa, a.label, a.count, a.id),
        Hyperbox(vb, wb, b.label, b.count, b.id),
    )


def conflicting(label_a: int, labels_b: np.ndarray) -> np.ndarray:
    """Label pairs subject to the inter-class non-overlap rule."""
    labels_b = np.asarray(labels_b)
    if label_a == UNLABELED:
        return np.zeros(labels_b.shape, dtype=bool)
    return (labels_b != UNLABELED) & (labels_b != label_a)


def find_overlaps(model: TrainedModel):
    """Inter-class box pairs ``(i, j)``, ``i < j``, sharing positive interior volume."""
    V, W, labels, _, _ = model.arrays()
    pairs = []
    for i in range(len(model.boxes) - 1):
        rest = slice(i + 1, None)
        hit = interior_overlap_mask(V[i], W[i], V[rest], W[rest]) & conflicting(labels[i], labels[rest])
        pairs.extend((i, i + 1 + int(j)) for j in np.nonzero(hit)[0])
    return pairs


# ---------------------------------------------------------------------------
# prediction

def _priority(V, W, counts, ids) -> np.ndarray:
    """Rank of each box in the tie-break chain: count desc, volume asc, id asc."""
    order = np.lexsort((ids, box_volumes(V, W), -counts))
    rank = np.empty(len(order), dtype=int)
    rank[order] = np.arange(len(order))
    return rank


def membership_matrix(model: TrainedModel, data: Dataset, V=None, W=None) -> np.ndarray:
    if V is None:
        V, W, *_ = model.arrays()
    gamma = model.params.gamma_vector(model.n_features)
    if model.params.membership_kind == FMNN:
        if np.any(np.isnan(data.lower)) or not data.is_point:
            raise ValueError("FMNN models accept fully observed point samples only")
        return fmnn_membership_matrix(V, W, data.lower, gamma)
    return gfmm_membership_matrix(V, W, data.lower, data.upper, gamma)


def predict_winners(model: TrainedModel, data: Dataset):
    """Winning box position and membership for every sample in ``data``."""
    if not model.boxes:
        raise ValueError("cannot predict with an empty model")
    if data.n_features != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {data.n_features}")
    V, W, labels, counts, ids = model.arrays()
    eligible = labels != UNLABELED
    if not eligible.any():
        eligible[:] = True
    pos = np.nonzero(eligible)[0]
    mem = membership_matrix(model, data, V[pos], W[pos])
    rank = _priority(V[pos], W[pos], counts[pos], ids[pos])
    best = mem.max(axis=1, keepdims=True)
    masked = np.where(mem == best, rank[None, :], np.iinfo(int).max)
    winner = masked.argmin(axis=1)
    return pos[winner], best[:, 0]


def predict_batch(model: TrainedModel, data: Dataset):
    """Predicted labels and winning memberships for a dataset."""
    win, mem = predict_winners(model, data)
    labels = np.array([model.boxes[i].label for i in win], dtype=int)
    return labels, mem


def predict(model: TrainedModel, x: IntervalSample):
    """Label of the highest-membership box and that membership."""
    data = Dataset(x.lower[None, :], x.upper[None, :], [UNLABELED])
    labels, mem = predict_batch(model, data)
    return int(labels[0]), float(mem[0])
