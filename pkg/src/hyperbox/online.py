"""Instance-incremental trainers: Onln-GFMM, IOL-GFMM and Simpson's FMNN."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    FMNN,
    GFMM,
    UNLABELED,
    Dataset,
    DimensionError,
    Hyperbox,
    IntervalSample,
    ModelParams,
    TrainedModel,
    can_expand,
    conflicting,
    contract_arrays,
    fmnn_memberships,
    gfmm_memberships,
    hull,
    overlap_case,
    overlap_mask,
)

ONLN_GFMM = "onln-gfmm"
IOL_GFMM = "iol-gfmm"
FMNN_ALGO = "fmnn"
ONLINE_ALGORITHMS = (ONLN_GFMM, IOL_GFMM, FMNN_ALGO)


@dataclass(frozen=True)
class OnlineFitConfig:
    params: ModelParams = field(default_factory=ModelParams)
    algorithm: str = ONLN_GFMM
    epochs: int = 1
    shuffle_seed: Optional[int] = None
    theta_min: Optional[float] = None
    theta_decay: Optional[float] = None

    def __post_init__(self):
        if self.algorithm not in ONLINE_ALGORITHMS:
            raise ValueError(f"unknown online algorithm {self.algorithm!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.theta_decay is not None and not (0 < self.theta_decay <= 1):
            raise ValueError("theta_decay must lie in (0, 1]")
        if self.theta_min is not None and self.theta_min > self.params.theta:
            raise ValueError("theta_min must not exceed theta")
        kind = FMNN if self.algorithm == FMNN_ALGO else GFMM
        if self.params.membership_kind != kind:
            object.__setattr__(
                self, "params", ModelParams(self.params.theta, self.params.gamma, kind)
            )

    def epoch_thetas(self):
        theta = self.params.theta
        for _ in range(self.epochs):
            yield theta
            if self.theta_decay is not None:
                theta = theta * self.theta_decay
                if self.theta_min is not None:
                    theta = max(theta, self.theta_min)


class BoxSet:
    """Growable array storage for hyperboxes used while training."""

    def __init__(self, n_features: int, capacity: int = 16):
        self.n = n_features
        self.size = 0
        self.V = np.empty((capacity, n_features))
        self.W = np.empty((capacity, n_features))
        self.labels = np.empty(capacity, dtype=int)
        self.counts = np.empty(capacity, dtype=int)
        self.ids = np.empty(capacity, dtype=int)
        self.next_id = 0

    @classmethod
    def from_boxes(cls, boxes, n_features: int) -> "BoxSet":
        bs = cls(n_features, max(16, 2 * len(boxes)))
        for b in boxes:
            bs.add(b.V, b.W, b.label, b.count, b.id)
        return bs

    def add(self, v, w, label, count=1, box_id=None) -> int:
        if self.size == self.V.shape[0]:
            cap = 2 * self.size
            for name in ("V", "W"):
                arr = getattr(self, name)
                grown = np.empty((cap, self.n))
                grown[: self.size] = arr[: self.size]
                setattr(self, name, grown)
            for name in ("labels", "counts", "ids"):
                arr = getattr(self, name)
                grown = np.empty(cap, dtype=int)
                grown[: self.size] = arr[: self.size]
                setattr(self, name, grown)
        if box_id is None:
            box_id = self.next_id
        i = self.size
        self.V[i] = v
        self.W[i] = w
        self.labels[i] = label
        self.counts[i] = count
        self.ids[i] = box_id
        self.next_id = max(self.next_id, box_id + 1)
        self.size += 1
        return i

    def view(self):
        s = self.size
        return self.V[:s], self.W[:s], self.labels[:s], self.counts[:s], self.ids[:s]

    def conflicting_overlaps(self, v, w, label, skip=()):
        """Positions of boxes of another class overlapping ``(v, w)``."""
        V, W, labels, _, _ = self.view()
        hit = conflicting(label, labels) & overlap_mask(v, w, V, W)
        for s in skip:
            hit[s] = False
        return np.nonzero(hit)[0]

    def resolve_overlaps(self, i: int) -> None:
        """Contract box ``i`` against every overlapping box of another class."""
        for k in self.conflicting_overlaps(self.V[i], self.W[i], self.labels[i], skip=(i,)):
            found = overlap_case(self.V[i], self.W[i], self.V[k], self.W[k])
            if found is None:
                # an earlier contraction of box i already separated them
                continue
            dim, _, case = found
            contract_arrays(self.V[i], self.W[i], self.V[k], self.W[k], dim, case)

    def to_boxes(self, previous=()):
        """Materialise :class:`Hyperbox` objects, reusing unchanged ``previous`` ones."""
        old = {b.id: b for b in previous}
        out = []
        V, W, labels, counts, ids = self.view()
        for i in range(self.size):
            b = old.get(int(ids[i]))
            if (
                b is not None
                and b.label == labels[i]
                and b.count == counts[i]
                and np.array_equal(b.V, V[i])
                and np.array_equal(b.W, W[i])
            ):
                out.append(b)
            else:
                out.append(Hyperbox(V[i].copy(), W[i].copy(), int(labels[i]), int(counts[i]), int(ids[i])))
        return out


def _candidates(bs: BoxSet, label: int, mem_fn, strict_label: bool):
    V, W, labels, _, ids = bs.view()
    if strict_label:
        compat = labels == label
    elif label == UNLABELED:
        compat = np.ones(bs.size, dtype=bool)
    else:
        compat = (labels == label) | (labels == UNLABELED)
    pos = np.nonzero(compat)[0]
    if pos.size == 0:
        return pos
    mem = mem_fn(V[pos], W[pos])
    return pos[np.lexsort((ids[pos], -mem))]


def gfmm_step(bs: BoxSet, xl, xu, label: int, theta: float, gamma, reject_overlap: bool) -> int:
    """Present one sample to a GFMM box set; returns the position of the box that took it.

    With ``reject_overlap`` (IOL-GFMM) an expansion that would overlap another
    class is skipped instead of being repaired by contraction.
    """
    order = _candidates(bs, label, lambda V, W: gfmm_memberships(V, W, xl, xu, gamma), False)
    for i in order:
        v, w = bs.V[i], bs.W[i]
        if not can_expand(v, w, xl, xu, theta):
            continue
        new_v, new_w = hull(v, w, xl, xu)
        new_label = bs.labels[i] if bs.labels[i] != UNLABELED else label
        if reject_overlap and len(bs.conflicting_overlaps(new_v, new_w, new_label, skip=(i,))):
            continue
        bs.V[i], bs.W[i] = new_v, new_w
        bs.labels[i] = new_label
        bs.counts[i] += 1
        if not reject_overlap:
            bs.resolve_overlaps(i)
        return i
    missing = np.isnan(xl)
    return bs.add(np.where(missing, 1.0, xl), np.where(missing, 0.0, xu), label)


def fmnn_step(bs: BoxSet, x, label: int, theta: float, gamma) -> int:
    order = _candidates(bs, label, lambda V, W: fmnn_memberships(V, W, x, gamma), True)
    budget = bs.n * theta
    for i in order:
        v, w = bs.V[i], bs.W[i]
        if np.sum(np.maximum(w, x) - np.minimum(v, x)) > budget:
            continue
        bs.V[i] = np.minimum(v, x)
        bs.W[i] = np.maximum(w, x)
        bs.counts[i] += 1
        bs.resolve_overlaps(i)
        return i
    return bs.add(x, x, label)


def _check_data(data: Dataset, algorithm: str) -> None:
    data.validate()
    if algorithm == FMNN_ALGO:
        if np.any(np.isnan(data.lower)) or not data.is_point:
            raise ValueError("FMNN trains on fully observed point samples only")
        if np.any(data.labels == UNLABELED):
            raise ValueError("FMNN requires every sample to be labelled")


def _present(bs: BoxSet, data: Dataset, i: int, algorithm: str, theta: float, gamma) -> None:
    label = int(data.labels[i])
    if algorithm == FMNN_ALGO:
        fmnn_step(bs, data.lower[i], label, theta, gamma)
    else:
        gfmm_step(bs, data.lower[i], data.upper[i], label, theta, gamma, algorithm == IOL_GFMM)


def fit_online(data: Dataset, cfg: OnlineFitConfig) -> TrainedModel:
    """Train one of the online learners selected by ``cfg.algorithm``."""
    _check_data(data, cfg.algorithm)
    n = data.n_features
    gamma = cfg.params.gamma_vector(n)
    bs = BoxSet(n)
    rng = np.random.default_rng(cfg.shuffle_seed) if cfg.shuffle_seed is not None else None
    for theta in cfg.epoch_thetas():
        order = rng.permutation(len(data)) if rng is not None else range(len(data))
        for i in order:
            _present(bs, data, i, cfg.algorithm, theta, gamma)
    classes = set(data.labels.tolist())
    return TrainedModel(bs.to_boxes(), cfg.params, n, classes, algorithm=cfg.algorithm)


def fit_onln_gfmm(data: Dataset, cfg: OnlineFitConfig = OnlineFitConfig()) -> TrainedModel:
    if cfg.algorithm != ONLN_GFMM:
        cfg = OnlineFitConfig(cfg.params, ONLN_GFMM, cfg.epochs, cfg.shuffle_seed, cfg.theta_min, cfg.theta_decay)
    return fit_online(data, cfg)


def fit_iol_gfmm(data: Dataset, cfg: OnlineFitConfig = OnlineFitConfig()) -> TrainedModel:
    if cfg.algorithm != IOL_GFMM:
        cfg = OnlineFitConfig(cfg.params, IOL_GFMM, cfg.epochs, cfg.shuffle_seed, cfg.theta_min, cfg.theta_decay)
    return fit_online(data, cfg)


def fit_fmnn(data: Dataset, cfg: OnlineFitConfig = OnlineFitConfig(algorithm=FMNN_ALGO)) -> TrainedModel:
    if cfg.algorithm != FMNN_ALGO:
        cfg = OnlineFitConfig(cfg.params, FMNN_ALGO, cfg.epochs, cfg.shuffle_seed, cfg.theta_min, cfg.theta_decay)
    return fit_online(data, cfg)


def partial_fit(model: TrainedModel, sample: IntervalSample, label: int = UNLABELED) -> TrainedModel:
    """Present one more sample to a trained model and return the updated model.

    Boxes untouched by the update are carried over as the same objects. Models
    produced by the batch learner are updated with the Onln-GFMM rule.
    """
    if sample.n_features != model.n_features:
        raise DimensionError(f"model expects {model.n_features} features, got {sample.n_features}")
    algorithm = model.algorithm if model.algorithm in ONLINE_ALGORITHMS else ONLN_GFMM
    data = Dataset(sample.lower[None, :], sample.upper[None, :], [label])
    _check_data(data, algorithm)
    bs = BoxSet.from_boxes(model.boxes, model.n_features)
    bs.next_id = model.next_id()
    gamma = model.params.gamma_vector(model.n_features)
    _present(bs, data, 0, algorithm, model.params.theta, gamma)
    return TrainedModel(
        bs.to_boxes(model.boxes),
        model.params,
        model.n_features,
        set(model.classes) | {int(label)},
        scaler=model.scaler,
        algorithm=model.algorithm,
        schema=model.schema,
    )
