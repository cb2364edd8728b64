"""k-fold cross-validation of every learner on Iris, plus a theta grid search."""
import argparse

from _data import load_iris_dataset
from hyperbox.batch import AggloConfig
from hyperbox.core import ModelParams
from hyperbox.harness import cross_validate, grid_cells, grid_search
from hyperbox.online import OnlineFitConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data")
    ap.add_argument("--theta", type=float, default=0.1)
    ap.add_argument("--k", type=int, default=5)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--grid", default="0.05,0.1,0.2,0.3,0.5,0.7")
    args = ap.parse_args()

    data = load_iris_dataset(args.data)
    params = ModelParams(args.theta)
    configs = {
        "onln-gfmm": OnlineFitConfig(params, "onln-gfmm"),
        "iol-gfmm": OnlineFitConfig(params, "iol-gfmm"),
        "fmnn": OnlineFitConfig(params, "fmnn"),
        "agglo2": AggloConfig(params),
    }
    print(f"{args.k}-fold CV, theta={args.theta}, seed={args.seed}")
    for name, cfg in configs.items():
        r = cross_validate(data, cfg, args.k, args.seed)
        folds = " ".join(f"{s:.4f}" for s in r.fold_scores)
        print(f"{name:10s} mean={r.mean:.4f} std={r.std:.4f} folds=[{folds}] boxes={r.box_counts}")

    grid = {"theta": [float(v) for v in args.grid.split(",")]}
    print("\ngrid search (onln-gfmm)")
    for cfg, r in grid_cells(data, configs["onln-gfmm"], grid, args.k, args.seed):
        print(f"theta={cfg.params.theta:<5} mean={r.mean:.4f} mean boxes={sum(r.box_counts) / len(r.box_counts):.1f}")
    best, report = grid_search(data, configs["onln-gfmm"], grid, args.k, args.seed)
    print(f"best theta={best.params.theta} mean={report.mean:.4f}")


if __name__ == "__main__":
    main()
