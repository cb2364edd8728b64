"""Iris 70/30 holdout with Onln-GFMM over a block of split seeds.

Also reruns the single published split (random_state=42) when scikit-learn
is installed, which should print 44/45 correct.
"""
import argparse
import time

import numpy as np

from _data import load_iris_dataset
from hyperbox.core import Dataset, ModelParams, predict_batch
from hyperbox.harness import accuracy, train_test_split
from hyperbox.online import ONLINE_ALGORITHMS, OnlineFitConfig, fit_online


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data", help="Iris CSV (default: scikit-learn's copy)")
    ap.add_argument("--algo", choices=ONLINE_ALGORITHMS, default="onln-gfmm")
    ap.add_argument("--theta", type=float, default=0.1)
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()

    data = load_iris_dataset(args.data)
    cfg = OnlineFitConfig(ModelParams(args.theta), args.algo)
    scores = []
    start = time.perf_counter()
    for seed in range(args.seeds):
        train, test = train_test_split(data, 0.3, seed=seed, stratified=True)
        model = fit_online(train, cfg)
        acc = accuracy(test.labels, predict_batch(model, test)[0])
        scores.append(acc)
        print(f"seed {seed:3d}: accuracy={acc:.4f} boxes={len(model)}")
    print(f"mean={np.mean(scores):.4f} min={np.min(scores):.4f} ({time.perf_counter() - start:.2f}s)")

    try:
        from sklearn.model_selection import train_test_split as sk_split
    except ImportError:
        return
    Xtr, Xte, ytr, yte = sk_split(data.lower, data.labels, test_size=0.3, random_state=42)
    model = fit_online(Dataset.from_points(Xtr, ytr), cfg)
    pred = predict_batch(model, Dataset.from_points(Xte))[0]
    print(f"published split: {int(np.sum(pred == yte))}/{len(yte)} correct, accuracy={accuracy(yte, pred):.4f}")


if __name__ == "__main__":
    main()
