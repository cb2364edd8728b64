"""Ensembles on Iris, and Random Hyperboxes on data with one informative feature."""
import argparse

import numpy as np

from _data import load_iris_dataset
from hyperbox.core import Dataset, ModelParams, predict_batch
from hyperbox.ensemble import BAGGING, MODEL_LEVEL_BAGGING, RANDOM_HYPERBOXES, EnsembleConfig, fit_random_hyperboxes, predict_ensemble_batch
from hyperbox.harness import accuracy, cross_validate
from hyperbox.online import OnlineFitConfig


def informative_feature_data(rng, N):
    y = rng.integers(1, 3, size=N)
    x0 = np.where(y == 1, rng.uniform(0.0, 0.45, N), rng.uniform(0.55, 1.0, N))
    return Dataset.from_points(np.column_stack([x0, rng.random(N)]), y)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data")
    ap.add_argument("--theta", type=float, default=0.1)
    ap.add_argument("--B", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    data = load_iris_dataset(args.data)
    base = OnlineFitConfig(ModelParams(args.theta))
    print(f"Iris 5-fold CV, base onln-gfmm theta={args.theta}, B={args.B}")
    print(f"{'single':22s} mean={cross_validate(data, base, 5, 7).mean:.4f}")
    for kind in (BAGGING, MODEL_LEVEL_BAGGING, RANDOM_HYPERBOXES):
        cfg = EnsembleConfig(base, kind, B=args.B, sample_rate=0.8, seed=args.seed)
        r = cross_validate(data, cfg, 5, 7)
        print(f"{kind:22s} mean={r.mean:.4f} boxes/fold={r.box_counts}")

    rng = np.random.default_rng(11)
    train, test = informative_feature_data(rng, 200), informative_feature_data(rng, 400)
    e = fit_random_hyperboxes(train, base, B=args.B, seed=args.seed)
    accs = [accuracy(test.labels, predict_batch(m, test.project(s))[0]) for m, s in zip(e.members, e.feature_subsets)]
    print("\nRandom Hyperboxes, class decided by feature 0 only")
    print(f"members on feature 0: {e.feature_subsets.count([0])}/{len(accs)}")
    print(f"member accuracy: median={np.median(accs):.4f} best={max(accs):.4f}")
    print(f"ensemble accuracy: {accuracy(test.labels, predict_ensemble_batch(e, test)):.4f}")


if __name__ == "__main__":
    main()
