"""Decision-level bagging, model-level merging and Random Hyperboxes ensembles."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .batch import AGGLO2, AggloConfig, agglomerate, fit_agglo2
from .core import (
    GFMM,
    UNLABELED,
    Dataset,
    DimensionError,
    TrainedModel,
    predict_batch,
)
from .online import BoxSet, OnlineFitConfig, fit_online

MAJORITY_VOTE = "majority_vote"

BaseConfig = Union[OnlineFitConfig, AggloConfig]


@dataclass
class EnsembleModel:
    members: list
    feature_subsets: list
    n_features: int
    aggregation: str = MAJORITY_VOTE
    seed: int = 0
    scaler: Optional[object] = None
    schema: Optional[object] = None
    kind: str = "bagging"
    classes: list = field(default_factory=list)

    def __post_init__(self):
        if not self.members:
            raise ValueError("an ensemble needs at least one member")
        if len(self.members) != len(self.feature_subsets):
            raise ValueError("one feature subset per member is required")
        subsets = []
        for model, subset in zip(self.members, self.feature_subsets):
            subset = sorted(int(i) for i in subset)
            if not subset or subset[0] < 0 or subset[-1] >= self.n_features:
                raise ValueError(f"invalid feature subset {subset}")
            if len(subset) != model.n_features:
                raise DimensionError("feature subset size does not match the member model")
            subsets.append(subset)
        self.feature_subsets = subsets
        if self.aggregation != MAJORITY_VOTE:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")
        if not self.classes:
            self.classes = sorted(set().union(*(m.classes for m in self.members)))


def fit_base(data: Dataset, base: BaseConfig) -> TrainedModel:
    if isinstance(base, AggloConfig):
        return fit_agglo2(data, base)
    return fit_online(data, base)


def _project_config(base: BaseConfig, subset) -> BaseConfig:
    params = base.params.project(subset)
    if params is base.params:
        return base
    if isinstance(base, AggloConfig):
        return AggloConfig(params, base.sigma_min, base.similarity_kind)
    return OnlineFitConfig(params, base.algorithm, base.epochs, base.shuffle_seed, base.theta_min, base.theta_decay)


def _bootstrap(n_samples: int, rate: float, rng: np.random.Generator) -> np.ndarray:
    size = max(1, int(round(rate * n_samples)))
    return rng.integers(0, n_samples, size=size)


def _check(B: int, rate: float, data: Dataset) -> None:
    if B < 1:
        raise ValueError("the ensemble size B must be >= 1")
    if not (0 < rate <= 1):
        raise ValueError("sample_rate must lie in (0, 1]")
    data.validate()


def _map(fn, items, threads: int):
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def fit_bagging(data: Dataset, base: BaseConfig, B: int = 10, sample_rate: float = 1.0, seed: int = 0, threads: int = 1) -> EnsembleModel:
    """Train ``B`` base models on bootstrap resamples; member ``i`` uses seed ``seed + i``."""
    _check(B, sample_rate, data)
    full = list(range(data.n_features))

    def member(i):
        rng = np.random.default_rng(seed + i)
        idx = _bootstrap(len(data), sample_rate, rng)
        return fit_base(data.subset(idx), base)

    members = _map(member, range(B), threads)
    return EnsembleModel(members, [full] * B, data.n_features, seed=seed, kind="bagging")


def subset_size_range(n_features: int):
    return max(1, math.isqrt(n_features)), n_features - 1


def fit_random_hyperboxes(data: Dataset, base: BaseConfig, B: int = 10, sample_rate: float = 1.0, seed: int = 0, threads: int = 1) -> EnsembleModel:
    """Each member sees a bootstrap sample projected on a random feature subset."""
    _check(B, sample_rate, data)
    n = data.n_features
    if n < 2:
        raise ValueError("random hyperboxes need at least two features")
    lo, hi = subset_size_range(n)
    draws = []
    for i in range(B):
        rng = np.random.default_rng(seed + i)
        m = int(rng.integers(lo, hi + 1))
        subset = sorted(rng.choice(n, size=m, replace=False).tolist())
        draws.append((subset, _bootstrap(len(data), sample_rate, rng)))

    def member(draw):
        subset, idx = draw
        return fit_base(data.subset(idx).project(subset), _project_config(base, subset))

    members = _map(member, draws, threads)
    return EnsembleModel(members, [d[0] for d in draws], n, seed=seed, kind="random-hyperboxes")


def member_votes(e: EnsembleModel, data: Dataset):
    """Per-member ``(labels, memberships)`` arrays, each shaped ``(B, N)``."""
    if data.n_features != e.n_features:
        raise DimensionError(f"ensemble expects {e.n_features} features, got {data.n_features}")
    labels, mems = [], []
    for model, subset in zip(e.members, e.feature_subsets):
        lab, mem = predict_batch(model, data.project(subset))
        labels.append(lab)
        mems.append(mem)
    return np.array(labels), np.array(mems)


def vote(labels: np.ndarray, mems: np.ndarray) -> np.ndarray:
    """Majority vote per column; ties go to the larger summed membership, then the lower class."""
    out = np.empty(labels.shape[1], dtype=int)
    for col in range(labels.shape[1]):
        lab, mem = labels[:, col], mems[:, col]
        classes = np.unique(lab)
        votes = np.array([(lab == c).sum() for c in classes])
        support = np.array([mem[lab == c].sum() for c in classes])
        # np.unique sorts ascending, so lexsort's stability yields the lowest class on full ties
        best = np.lexsort((-support, -votes))[0]
        out[col] = classes[best]
    return out


def predict_ensemble_batch(e: EnsembleModel, data: Dataset) -> np.ndarray:
    labels, mems = member_votes(e, data)
    return vote(labels, mems)


def predict_ensemble(e: EnsembleModel, x) -> int:
    data = Dataset(x.lower[None, :], x.upper[None, :], [UNLABELED])
    return int(predict_ensemble_batch(e, data)[0])


def _separate(bs: BoxSet) -> None:
    """Contract every remaining inter-class overlap in a pooled box set."""
    for i in range(bs.size):
        bs.resolve_overlaps(i)


def merge_models(members, cfg: AggloConfig = AggloConfig()) -> TrainedModel:
    """Pool the hyperboxes of several GFMM models and agglomerate them into one model."""
    members = list(members)
    if not members:
        raise ValueError("nothing to merge")
    n = members[0].n_features
    if any(m.n_features != n for m in members):
        raise DimensionError("members differ in dimensionality")
    if any(m.params.membership_kind != GFMM for m in members):
        raise ValueError("only GFMM-family models can be merged")
    bs = BoxSet(n, max(16, sum(len(m) for m in members)))
    for m in members:
        for b in m.boxes:
            bs.add(b.V, b.W, b.label, b.count)
    agglomerate(bs, cfg)
    _separate(bs)
    classes = set().union(*(m.classes for m in members))
    return TrainedModel(bs.to_boxes(), cfg.params, n, classes, algorithm=AGGLO2)


def fit_model_level_bagging(data: Dataset, base: BaseConfig, B: int = 10, sample_rate: float = 1.0, seed: int = 0, merge_cfg: Optional[AggloConfig] = None, threads: int = 1) -> TrainedModel:
    """Bagging whose members are merged into a single hyperbox model."""
    e = fit_bagging(data, base, B, sample_rate, seed, threads)
    if merge_cfg is None:
        merge_cfg = AggloConfig(base.params)
    return merge_models(e.members, merge_cfg)


BAGGING = "bagging"
MODEL_LEVEL_BAGGING = "bagging-model-level"
RANDOM_HYPERBOXES = "random-hyperboxes"
ENSEMBLE_KINDS = (BAGGING, MODEL_LEVEL_BAGGING, RANDOM_HYPERBOXES)


@dataclass(frozen=True)
class EnsembleConfig:
    base: BaseConfig = field(default_factory=OnlineFitConfig)
    kind: str = BAGGING
    B: int = 10
    sample_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ENSEMBLE_KINDS:
            raise ValueError(f"unknown ensemble kind {self.kind!r}")
        if self.B < 1:
            raise ValueError("the ensemble size B must be >= 1")
        if not (0 < self.sample_rate <= 1):
            raise ValueError("sample_rate must lie in (0, 1]")

    @property
    def params(self):
        return self.base.params


def fit_ensemble(data: Dataset, cfg: EnsembleConfig, threads: int = 1):
    args = (data, cfg.base, cfg.B, cfg.sample_rate, cfg.seed)
    if cfg.kind == BAGGING:
        return fit_bagging(*args, threads=threads)
    if cfg.kind == RANDOM_HYPERBOXES:
        return fit_random_hyperboxes(*args, threads=threads)
    return fit_model_level_bagging(*args, threads=threads)
