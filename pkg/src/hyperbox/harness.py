"""Evaluation layer: scaling, splitting, cross-validation, grid search, pruning, data editing."""
from __future__ import annotations

import dataclasses
import itertools
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Union

import numpy as np

from .batch import AggloConfig, fit_agglo2
from .core import UNLABELED, Dataset, TrainedModel, predict_batch, predict_winners
from .ensemble import EnsembleConfig, EnsembleModel, fit_ensemble, predict_ensemble_batch
from .online import OnlineFitConfig, fit_online

log = logging.getLogger(__name__)

Config = Union[OnlineFitConfig, AggloConfig, EnsembleConfig]
Model = Union[TrainedModel, EnsembleModel]


def n_threads() -> int:
    """Worker count from ``HBX_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get("HBX_THREADS", "0").strip() or "0"
    value = int(raw)
    if value < 0:
        raise ValueError("HBX_THREADS must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


def _map(fn, items, threads=None):
    threads = n_threads() if threads is None else threads
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# scaling

@dataclass
class ScalerState:
    min: np.ndarray
    range: np.ndarray

    def __post_init__(self):
        self.min = np.asarray(self.min, dtype=float)
        self.range = np.asarray(self.range, dtype=float)
        if np.any(self.range < 0):
            raise ValueError("scaler range must be non-negative")

    @property
    def zero_range(self) -> np.ndarray:
        # subnormal ranges would overflow the reciprocal; treat them as constant
        return self.range < np.finfo(float).tiny

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.shape[-1] != self.min.shape[0]:
            raise ValueError(f"scaler expects {self.min.shape[0]} features, got {X.shape[-1]}")
        # x * scale + offset rounds the same way as the common min-max scalers,
        # so published splits reproduce bit for bit
        scale = 1.0 / np.where(self.zero_range, 1.0, self.range)
        out = np.clip(X * scale + (-self.min * scale), 0.0, 1.0)
        out = np.where(self.zero_range, 0.5, out)
        return np.where(np.isnan(X), np.nan, out)

    def inverse_transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.where(self.zero_range, self.min, X * self.range + self.min)


def scaler_fit(X) -> ScalerState:
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on no data")
    observed = ~np.isnan(X)
    lo = np.where(observed.any(axis=0), np.nanmin(np.where(observed, X, np.inf), axis=0), 0.0)
    hi = np.where(observed.any(axis=0), np.nanmax(np.where(observed, X, -np.inf), axis=0), 0.0)
    return ScalerState(lo, hi - lo)


def scaler_transform(state: ScalerState, X):
    if state is None:
        raise ValueError("the scaler has not been fitted")
    return state.transform(X)


def scale_dataset(state: ScalerState, data: Dataset) -> Dataset:
    return Dataset(state.transform(data.lower), state.transform(data.upper), data.labels)


# ---------------------------------------------------------------------------
# fitting and scoring any model kind

def fit_model(data: Dataset, cfg: Config, threads: int = 1) -> Model:
    if isinstance(cfg, EnsembleConfig):
        return fit_ensemble(data, cfg, threads=threads)
    if isinstance(cfg, AggloConfig):
        return fit_agglo2(data, cfg)
    return fit_online(data, cfg)


def predict_labels(model: Model, data: Dataset) -> np.ndarray:
    if isinstance(model, EnsembleModel):
        return predict_ensemble_batch(model, data)
    return predict_batch(model, data)[0]


def box_count(model: Model) -> int:
    if isinstance(model, EnsembleModel):
        return sum(len(m) for m in model.members)
    return len(model)


def accuracy(y_true, y_pred) -> float:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred differ in length")
    if y_true.size == 0:
        raise ValueError("accuracy of an empty prediction set is undefined")
    return float(np.mean(y_true == y_pred))


def score(model: Model, data: Dataset) -> float:
    return accuracy(data.labels, predict_labels(model, data))


# ---------------------------------------------------------------------------
# splitting and cross-validation

def train_test_split(data: Dataset, test_fraction: float = 0.3, seed: int = 0, stratified: bool = False):
    if not (0 < test_fraction < 1):
        raise ValueError("test_fraction must lie in (0, 1)")
    rng = np.random.default_rng(seed)
    if not stratified:
        n = len(data)
        n_test = min(max(1, int(round(test_fraction * n))), n - 1)
        perm = rng.permutation(n)
        test, train = perm[:n_test], perm[n_test:]
    else:
        test, train = [], []
        for c in np.unique(data.labels):
            members = np.nonzero(data.labels == c)[0]
            if len(members) < 2:
                raise ValueError(f"class {c} has fewer than two samples; cannot stratify")
            members = rng.permutation(members)
            k = min(max(1, int(round(test_fraction * len(members)))), len(members) - 1)
            test.extend(members[:k])
            train.extend(members[k:])
        test = rng.permutation(np.array(test, dtype=int))
        train = rng.permutation(np.array(train, dtype=int))
    return data.subset(train), data.subset(test)


def kfold_indices(n: int, k: int, seed: int):
    """Seeded shuffle split into ``k`` contiguous folds whose sizes differ by at most one."""
    if k < 2:
        raise ValueError("k must be >= 2")
    if k > n:
        raise ValueError(f"k={k} exceeds the number of samples {n}")
    perm = np.random.default_rng(seed).permutation(n)
    return np.array_split(perm, k)


@dataclass
class CvReport:
    fold_scores: list
    box_counts: list

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def std(self) -> float:
        return float(np.std(self.fold_scores))

    def to_dict(self) -> dict:
        return {"fold_scores": self.fold_scores, "mean": self.mean, "std": self.std, "box_counts": self.box_counts}


def _fold_runs(data: Dataset, cfg: Config, k: int, seed: int):
    folds = kfold_indices(len(data), k, seed)

    def run(f):
        held = folds[f]
        rest = np.concatenate([folds[g] for g in range(k) if g != f])
        model = fit_model(data.subset(rest), cfg)
        test = data.subset(held)
        return held, predict_labels(model, test), box_count(model)

    return _map(run, range(k))


def cross_validate(data: Dataset, cfg: Config, k: int = 5, seed: int = 0) -> CvReport:
    scores, counts = [], []
    for held, pred, boxes in _fold_runs(data, cfg, k, seed):
        scores.append(accuracy(data.labels[held], pred))
        counts.append(boxes)
    return CvReport(scores, counts)


# ---------------------------------------------------------------------------
# grid search

_PARAM_FIELDS = {"theta", "gamma"}


def with_params(cfg: Config, **values) -> Config:
    """Copy of ``cfg`` with hyperparameters replaced (``theta``/``gamma`` reach the model params)."""
    model_values = {k: v for k, v in values.items() if k in _PARAM_FIELDS}
    other = {k: v for k, v in values.items() if k not in _PARAM_FIELDS}
    if isinstance(cfg, EnsembleConfig):
        base = with_params(cfg.base, **model_values) if model_values else cfg.base
        return dataclasses.replace(cfg, base=base, **other)
    if model_values:
        other["params"] = dataclasses.replace(cfg.params, **model_values)
    return dataclasses.replace(cfg, **other)


def grid_cells(data: Dataset, cfg: Config, grid: dict, k: int = 5, seed: int = 0):
    """Cross-validate every cell of the grid; returns ``[(config, CvReport), ...]`` in grid order."""
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("the grid must name at least one value per parameter")
    for theta in grid.get("theta", []):
        if not (0 < theta <= 1):
            raise ValueError(f"theta must lie in (0, 1], got {theta}")
    names = list(grid)
    cells = []
    for values in itertools.product(*(grid[n] for n in names)):
        cell_cfg = with_params(cfg, **dict(zip(names, values)))
        report = cross_validate(data, cell_cfg, k, seed)
        log.info("grid cell %s: mean %.4f", dict(zip(names, values)), report.mean)
        cells.append((cell_cfg, report))
    return cells


def grid_search(data: Dataset, cfg: Config, grid: dict, k: int = 5, seed: int = 0):
    """Exhaustive search; best is the highest CV mean, ties to smaller theta then grid order."""
    cells = grid_cells(data, cfg, grid, k, seed)
    best = min(
        range(len(cells)),
        key=lambda i: (-cells[i][1].mean, cells[i][0].params.theta, i),
    )
    return cells[best]


# ---------------------------------------------------------------------------
# pruning and data editing

def _box_accuracies(model: TrainedModel, data: Dataset):
    win, _ = predict_winners(model, data)
    wins = np.bincount(win, minlength=len(model))
    labels = np.array([b.label for b in model.boxes])
    correct = np.bincount(win, weights=(labels[win] == data.labels), minlength=len(model))
    with np.errstate(invalid="ignore", divide="ignore"):
        acc = np.where(wins > 0, correct / np.maximum(wins, 1), np.nan)
    return wins, acc


def _prune_pass(model: TrainedModel, data: Dataset, min_acc: float, keep_unused: bool) -> TrainedModel:
    wins, acc = _box_accuracies(model, data)
    protected = set(np.unique(data.labels).tolist()) - {UNLABELED}
    remaining = {}
    for b in model.boxes:
        remaining[b.label] = remaining.get(b.label, 0) + 1
    doomed = set()
    # worst boxes first so class protection keeps the most reliable survivor
    order = sorted(range(len(model)), key=lambda i: (-1 if np.isnan(acc[i]) else acc[i], model.boxes[i].id))
    for i in order:
        unused = wins[i] == 0
        if unused and keep_unused:
            continue
        if not unused and acc[i] >= min_acc:
            continue
        label = model.boxes[i].label
        if label in protected and remaining[label] == 1:
            continue
        remaining[label] -= 1
        doomed.add(i)
    boxes = [b for i, b in enumerate(model.boxes) if i not in doomed]
    return dataclasses.replace(model, boxes=boxes)


def prune(model: TrainedModel, data: Dataset, min_acc: float = 0.5, keep_unused: bool = False) -> TrainedModel:
    """Drop boxes whose winning decisions on ``data`` are unreliable.

    A second pass runs once on the re-evaluated winners of the reduced model.
    """
    if len(data) == 0:
        raise ValueError("pruning needs validation data")
    if not (0 <= min_acc <= 1):
        raise ValueError("min_acc must lie in [0, 1]")
    pruned = _prune_pass(model, data, min_acc, keep_unused)
    if len(pruned) < len(model):
        pruned = _prune_pass(pruned, data, min_acc, keep_unused)
    return pruned


def misclassification_rates(data: Dataset, cfg: Config, k: int = 5, repeats: int = 5, seed: int = 0) -> np.ndarray:
    """Fraction of repeated k-fold runs in which each sample was misclassified when held out."""
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    seeds = np.random.default_rng(seed).integers(0, 2**31 - 1, size=repeats)
    wrong = np.zeros(len(data))
    for s in seeds:
        for held, pred, _ in _fold_runs(data, cfg, k, int(s)):
            wrong[held] += pred != data.labels[held]
    return wrong / repeats


def edit_samples(data: Dataset, cfg: Config, k: int = 5, repeats: int = 5, removal_threshold: float = 0.5, seed: int = 0):
    """Remove samples misclassified in at least ``removal_threshold`` of the repeats.

    Returns the edited dataset and the boolean keep-mask over the input rows.
    """
    if not (0 <= removal_threshold <= 1):
        raise ValueError("removal_threshold must lie in [0, 1]")
    rates = misclassification_rates(data, cfg, k, repeats, seed)
    keep = ~((rates >= removal_threshold) & (rates > 0))
    return data.subset(np.nonzero(keep)[0]), keep

