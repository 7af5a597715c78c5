"""Error table (mean +- std over 5x2 CV) for the diverse ensemble.

    python scripts/run_table.py                      # bundled wine data + synthetic
    python scripts/run_table.py data.csv --header    # any CSV, label in the last column

Prints one row per method with the mean selected-classifier count and the
one-tailed Wilcoxon decision against equal weights.
"""

import argparse
import logging
import time
from pathlib import Path

from linstack.datasets import load_any, make_synthetic
from linstack.evaluation import EW, Method, five_by_two, wilcoxon_one_tailed
from linstack.solver import DEFAULT_GRID, TrainConfig
from linstack.stacking import diverse_spec, nondiverse_spec

WINE = Path(__file__).resolve().parent.parent / "tests" / "data" / "wine.csv"

METHODS = [
    EW,
    Method("hinge-l2-cws", TrainConfig("cws", "hinge", "l2"), DEFAULT_GRID),
    Method("mlr-cws", TrainConfig("cws", "ls", "l2", lam=0.0)),
    Method("hinge-l1-cws", TrainConfig("cws", "hinge", "l1"), DEFAULT_GRID),
    Method("hinge-group-cws", TrainConfig("cws", "hinge", "group"), DEFAULT_GRID),
    Method("hinge-l2-ws", TrainConfig("ws", "hinge", "l2"), DEFAULT_GRID),
    Method("hinge-group-lsg", TrainConfig("lsg", "hinge", "group"), DEFAULT_GRID),
]


def table(name, data, spec, seed):
    t0 = time.perf_counter()
    res = five_by_two(data.X, data.y, spec, METHODS, seed, data.n_classes)
    print(f"\n{name}: I={data.X.shape[0]} d={data.X.shape[1]} N={data.n_classes} M={spec.m_count}")
    print(f"{'method':<18} {'error %':>16} {'selected':>9}  vs EW")
    for m, r in res.items():
        verdict = ""
        if m != "EW":
            w = wilcoxon_one_tailed(r.errors, res["EW"].errors)
            verdict = "n/a" if w.decision is None else f"p={w.p_value:.4f}" + (" *" if w.decision else "")
        print(f"{m:<18} {r.mean:7.2f} +- {r.std:5.2f} {r.mean_selected:9.1f}  {verdict}")
    print(f"({time.perf_counter() - t0:.0f} s)")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("data", nargs="*", help="CSV or dataset JSON files")
    ap.add_argument("--header", action="store_true")
    ap.add_argument("--label-col", default="-1")
    ap.add_argument("--nondiverse", action="store_true", help="random-feature family instead")
    ap.add_argument("--seed", type=int, default=2024)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)

    spec = nondiverse_spec() if args.nondiverse else diverse_spec()
    if args.data:
        sets = [(Path(p).name, load_any(p, args.label_col, args.header)) for p in args.data]
    else:
        sets = [
            ("wine", load_any(WINE, header=True)),
            ("synthetic", make_synthetic(60, 3, 13, n_informative=4, seed=0)),
        ]
    for name, data in sets:
        table(name, data, spec, args.seed)


if __name__ == "__main__":
    main()
