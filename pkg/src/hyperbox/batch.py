"""Agglomerative full-batch learner (AGGLO-2)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (
    GFMM,
    UNLABELED,
    Dataset,
    DimensionError,
    Hyperbox,
    ModelParams,
    TrainedModel,
    as_gamma,
    conflicting,
    overlap_mask,
    ramp,
)
from .online import BoxSet

LONGEST_GAP = "longest_gap"
MID_DISTANCE = "mid_distance"
AGGLO2 = "agglo2"


@dataclass(frozen=True)
class AggloConfig:
    params: ModelParams = field(default_factory=ModelParams)
    sigma_min: float = 0.0
    similarity_kind: str = LONGEST_GAP

    def __post_init__(self):
        if not (0 <= self.sigma_min <= 1):
            raise ValueError("sigma_min must lie in [0, 1]")
        if self.similarity_kind not in (LONGEST_GAP, MID_DISTANCE):
            raise ValueError(f"unknown similarity kind {self.similarity_kind!r}")
        if self.params.membership_kind != GFMM:
            object.__setattr__(self, "params", ModelParams(self.params.theta, self.params.gamma, GFMM))


def _gap_fit(V1, W1, V2, W2, gamma):
    # box 2 judged against box 1: how far box 2 sticks out of box 1 on the worst dimension
    fit = np.minimum(1 - ramp(W2 - W1, gamma), 1 - ramp(V1 - V2, gamma))
    return fit.min(axis=-1)


def _longest_gap(V1, W1, V2, W2, gamma):
    """Similarity from the gap between two boxes on their worst dimension.

    The expression is symmetric in the two boxes.
    """
    return np.minimum(1 - ramp(V2 - W1, gamma), 1 - ramp(V1 - W2, gamma)).min(axis=-1)


def _mid_distance(V1, W1, V2, W2, gamma):
    mid1 = (V1 + W1) / 2
    mid2 = (V2 + W2) / 2
    return np.minimum(_gap_fit(V1, W1, mid2, mid2, gamma), _gap_fit(V2, W2, mid1, mid1, gamma))


_SIMILARITY = {LONGEST_GAP: _longest_gap, MID_DISTANCE: _mid_distance}


def box_similarity(a: Hyperbox, b: Hyperbox, gamma=1.0, kind: str = LONGEST_GAP) -> float:
    if a.n_features != b.n_features:
        raise DimensionError("boxes differ in dimensionality")
    if np.any(a.unset) or np.any(b.unset):
        raise ValueError("similarity is undefined for boxes with unset dimensions")
    g = as_gamma(gamma, a.n_features)
    return float(_SIMILARITY[kind](a.V, a.W, b.V, b.W, g))


def _pair_tables(V, W, labels, gamma, kind):
    """Similarity, largest hull edge and label compatibility for all box pairs."""
    Vi, Wi = V[:, None, :], W[:, None, :]
    Vj, Wj = V[None, :, :], W[None, :, :]
    sim = _SIMILARITY[kind](Vi, Wi, Vj, Wj, gamma)
    span = (np.maximum(Wi, Wj) - np.minimum(Vi, Vj)).max(axis=-1) if V.shape[1] else np.zeros(sim.shape)
    li, lj = labels[:, None], labels[None, :]
    compat = (li == lj) | (li == UNLABELED) | (lj == UNLABELED)
    return sim, span, compat


def agglomerate(bs: BoxSet, cfg: AggloConfig) -> None:
    """Run the merge loop in place on a box set."""
    gamma = cfg.params.gamma_vector(bs.n)
    theta = cfg.params.theta
    merge_fn = _SIMILARITY[cfg.similarity_kind]
    V, W, labels, counts, ids = (a.copy() for a in bs.view())
    if np.any(V > W):
        raise ValueError("agglomerative learning requires fully observed boxes")
    sim, span, compat = _pair_tables(V, W, labels, gamma, cfg.similarity_kind)
    while len(ids) > 1:
        m = len(ids)
        iu, ju = np.triu_indices(m, 1)
        ok = compat[iu, ju] & (sim[iu, ju] >= cfg.sigma_min) & (span[iu, ju] <= theta)
        iu, ju = iu[ok], ju[ok]
        if iu.size == 0:
            break
        s = sim[iu, ju]
        a_id = np.minimum(ids[iu], ids[ju])
        b_id = np.maximum(ids[iu], ids[ju])
        order = np.lexsort((b_id, a_id, -s))
        merged = None
        for k in order:
            i, j = iu[k], ju[k]
            v = np.minimum(V[i], V[j])
            w = np.maximum(W[i], W[j])
            label = labels[i] if labels[i] != UNLABELED else labels[j]
            hit = conflicting(label, labels) & overlap_mask(v, w, V, W)
            hit[[i, j]] = False
            if hit.any():
                # forbidden until the next successful merge
                continue
            merged = (i, j, v, w, label)
            break
        if merged is None:
            break
        i, j, v, w, label = merged
        V[i], W[i], labels[i] = v, w, label
        counts[i] += counts[j]
        ids[i] = min(ids[i], ids[j])
        keep = np.arange(m) != j
        V, W, labels, counts, ids = V[keep], W[keep], labels[keep], counts[keep], ids[keep]
        sim = sim[np.ix_(keep, keep)]
        span = span[np.ix_(keep, keep)]
        compat = compat[np.ix_(keep, keep)]
        i = i if i < j else i - 1
        row_sim = merge_fn(V[i][None, :], W[i][None, :], V, W, gamma)
        row_span = (np.maximum(W[i], W) - np.minimum(V[i], V)).max(axis=-1) if bs.n else np.zeros(len(ids))
        row_compat = (labels == labels[i]) | (labels == UNLABELED) | (labels[i] == UNLABELED)
        sim[i, :] = sim[:, i] = row_sim
        span[i, :] = span[:, i] = row_span
        compat[i, :] = compat[:, i] = row_compat
    next_id = bs.next_id
    bs.size = 0
    for k in np.argsort(ids, kind="stable"):
        bs.add(V[k], W[k], labels[k], counts[k], ids[k])
    bs.next_id = max(bs.next_id, next_id)


def fit_agglo2(data: Dataset, cfg: AggloConfig = AggloConfig()) -> TrainedModel:
    """Start from one box per sample and greedily merge the most similar compatible pair."""
    data.validate()
    if np.any(np.isnan(data.lower)):
        raise ValueError("AGGLO-2 does not accept missing feature values")
    bs = BoxSet(data.n_features, max(16, len(data)))
    for i in range(len(data)):
        bs.add(data.lower[i], data.upper[i], int(data.labels[i]))
    agglomerate(bs, cfg)
    return TrainedModel(bs.to_boxes(), cfg.params, data.n_features, set(data.labels.tolist()), algorithm=AGGLO2)
