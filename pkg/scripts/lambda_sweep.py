"""Accuracy and number of selected classifiers along the lambda grid.

Writes one CSV per regularizer/combiner pair with the columns
``lambda,cv_accuracy,selected_count`` (the data behind accuracy-vs-lambda
and selected-vs-lambda plots):

    python scripts/lambda_sweep.py -o sweeps/
"""

import argparse
import csv
import dataclasses
from pathlib import Path

from linstack.datasets import load_any
from linstack.evaluation import selected_count
from linstack.solver import DEFAULT_GRID, TrainConfig, lambda_search, train
from linstack.splits import derive_seed
from linstack.stacking import diverse_spec, internal_cv_scores

WINE = Path(__file__).resolve().parent.parent / "tests" / "data" / "wine.csv"
PAIRS = [("l1", "ws"), ("l1", "cws"), ("group", "cws"), ("l1", "lsg"), ("group", "lsg"), ("l2", "cws")]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", nargs="?", default=str(WINE))
    ap.add_argument("--header", action="store_true", default=None)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("-o", "--output", default="sweeps")
    args = ap.parse_args()
    header = args.header if args.header is not None else args.data == str(WINE)

    data = load_any(args.data, header=header)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    level1 = internal_cv_scores(data.X, data.y, diverse_spec(), derive_seed(args.seed, "full"), data.n_classes)
    for reg, comb in PAIRS:
        cfg = TrainConfig(comb, "hinge", reg, seed=derive_seed(args.seed, "lambda"))
        search = lambda_search(level1, cfg, DEFAULT_GRID)
        path = out / f"sweep_{reg}_{comb}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["lambda", "cv_accuracy", "selected_count"])
            for lam, acc in zip(DEFAULT_GRID, search.accuracies):
                model = train(level1, dataclasses.replace(cfg, lam=lam)).model
                w.writerow([repr(lam), repr(float(acc)), selected_count(model)])
        print(f"{path}: best lambda {search.best_lambda!r}")


if __name__ == "__main__":
    main()
