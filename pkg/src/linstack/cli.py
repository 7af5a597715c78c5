"""Command-line front end: ``ingest``, ``sweep``, ``evaluate``, ``compare``, ``fit``.

Experiments are described by a flat ``key = value`` file; see
:class:`ExperimentConfig` for the keys. Relative paths inside a config file
are resolved against the file's directory.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .baselearners import LEARNERS
from .datasets import DataError, Dataset, load_any, read_csv, save_dataset
from .evaluation import EW, Method, StackResults, five_by_two, selected_count, wilcoxon_one_tailed
from .losses import InvalidCombination
from .modelio import ModelFormatError, atomic_write_text, save_model
from .solver import DEFAULT_GRID, TrainConfig, check_grid, lambda_search, train
from .splits import StratificationError, derive_seed
from .stacking import EnsembleSpec, LearnerError, Member, diverse_spec, internal_cv_scores, nondiverse_spec

log = logging.getLogger("linstack")

WILCOXON_POLICY = (
    "one-tailed signed-rank, H1: method error < EW error; zero differences dropped; "
    "tied magnitudes get average ranks; exact null for n <= 20, normal approximation above; "
    "n < 5 reported as inconclusive; alpha = {alpha}"
)


class ConfigError(ValueError):
    pass


# --- experiment configuration ---------------------------------------------------------


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_floats(s):
    return tuple(float(v) for v in s.replace(",", " ").split())


def _parse_lambda(s):
    s = s.strip().lower()
    return "cv" if s == "cv" else float(s)


@dataclass(frozen=True)
class MethodSpec:
    """A trained combiner named like ``hinge-l2-cws@cv`` or ``ls-l2-cws@0``."""

    loss: str
    reg: str
    combiner: str
    lam: object  # float or "cv"

    @classmethod
    def parse(cls, text: str) -> "MethodSpec":
        body, _, lam = text.strip().partition("@")
        parts = body.lower().split("-")
        if len(parts) != 3:
            raise ValueError(f"method {text!r} must look like loss-reg-combiner[@lambda|@cv]")
        return cls(*parts, _parse_lambda(lam or "cv"))

    @property
    def name(self) -> str:
        lam = self.lam if self.lam == "cv" else repr(float(self.lam))
        return f"{self.loss}-{self.reg}-{self.combiner}@{lam}"

    def method(self, base: TrainConfig, grid) -> Method:
        lam = 0.0 if self.lam == "cv" else float(self.lam)
        cfg = dataclasses.replace(base, combiner=self.combiner, loss=self.loss, reg=self.reg, lam=lam)
        return Method(self.name, cfg, tuple(grid) if self.lam == "cv" else None)


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: Path
    label_col: str = "-1"
    header: bool = False
    ensemble: str = "diverse"  # diverse | nondiverse | path to a spec file
    bags: int = 5
    fraction: float = 0.8
    k: int = 4
    combiner: str = "cws"
    loss: str = "hinge"
    regularizer: str = "l2"
    lam: object = "cv"
    methods: tuple = ()
    grid: tuple = DEFAULT_GRID
    seed: int = 0
    output: Path = Path("results")
    max_iters: int = 2000
    tol: float = 1e-7

    # config-file key -> (field, parser)
    KEYS = {
        "dataset": ("dataset", Path),
        "label_col": ("label_col", str),
        "header": ("header", _parse_bool),
        "ensemble": ("ensemble", str),
        "bags": ("bags", int),
        "fraction": ("fraction", float),
        "k": ("k", int),
        "combiner": ("combiner", str.lower),
        "loss": ("loss", str.lower),
        "regularizer": ("regularizer", str.lower),
        "lambda": ("lam", _parse_lambda),
        "methods": ("methods", lambda s: tuple(v for v in s.replace(",", " ").split())),
        "grid": ("grid", _parse_floats),
        "seed": ("seed", int),
        "output": ("output", Path),
        "max_iters": ("max_iters", int),
        "tol": ("tol", float),
    }

    @classmethod
    def from_text(cls, text: str, base_dir=".", source="<config>") -> "ExperimentConfig":
        values = {}
        for line_no, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key, value = key.strip().lower().replace("-", "_"), value.strip()
            if not sep:
                raise ConfigError(f"{source}:{line_no}: expected key = value, got {raw.strip()!r}")
            if key not in cls.KEYS:
                raise ConfigError(f"{source}:{line_no}: unknown key {key!r}")
            name, parse = cls.KEYS[key]
            if name in values:
                raise ConfigError(f"{source}:{line_no}: duplicate key {key!r}")
            try:
                values[name] = parse(value)
            except ValueError as exc:
                raise ConfigError(f"{source}:{line_no}: bad value for {key!r}: {exc}") from None
        if "dataset" not in values:
            raise ConfigError(f"{source}: missing required key 'dataset'")
        base = Path(base_dir)
        for name in ("dataset", "output"):
            if name in values and not values[name].is_absolute():
                values[name] = base / values[name]
        if "output" not in values:
            values["output"] = base / cls.output
        ens = values.get("ensemble", cls.ensemble)
        if ens not in ("diverse", "nondiverse") and not Path(ens).is_absolute():
            values["ensemble"] = str(base / ens)
        try:
            cfg = cls(**values)
        except ValueError as exc:
            raise ConfigError(f"{source}: {exc}") from None
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        return cls.from_text(path.read_text(encoding="utf-8"), path.parent, str(path))

    def __post_init__(self):
        if not 0 < self.fraction <= 1:
            raise ValueError(f"fraction must be in (0, 1], got {self.fraction}")
        if self.bags < 1 or self.k < 2:
            raise ValueError("need bags >= 1 and k >= 2")
        check_grid(self.grid)
        self.train_config()  # validates combiner/loss/regularizer
        for m in self.method_specs():
            m.method(self.train_config(), self.grid)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            combiner=self.combiner,
            loss=self.loss,
            reg=self.regularizer,
            lam=0.0 if self.lam == "cv" else float(self.lam),
            max_iters=self.max_iters,
            tol=self.tol,
            seed=self.seed,
        )

    def method_specs(self) -> list:
        if self.methods:
            return [MethodSpec.parse(m) for m in self.methods]
        return [MethodSpec(self.loss, self.regularizer, self.combiner, self.lam)]

    def methods_to_run(self) -> list:
        base = self.train_config()
        out = [EW] + [m.method(base, self.grid) for m in self.method_specs()]
        names = [m.name for m in out]
        if len(set(names)) != len(names):
            raise ConfigError(f"duplicate methods in {names}")
        return out

    def validate_paths(self) -> None:
        """Fail before any training if an input is missing or the output is unusable."""
        if not self.dataset.is_file():
            raise ConfigError(f"dataset not found: {self.dataset}")
        if self.ensemble not in ("diverse", "nondiverse") and not Path(self.ensemble).is_file():
            raise ConfigError(f"ensemble spec file not found: {self.ensemble}")
        if self.output.exists() and not self.output.is_dir():
            raise ConfigError(f"output path exists and is not a directory: {self.output}")
        parent = self.output if self.output.exists() else self.output.parent
        if not parent.is_dir():
            raise ConfigError(f"output parent directory does not exist: {parent}")

    def ensemble_spec(self) -> EnsembleSpec:
        if self.ensemble == "diverse":
            return diverse_spec(self.bags, self.fraction, k=self.k)
        if self.ensemble == "nondiverse":
            return nondiverse_spec(k=self.k)
        return read_ensemble_file(self.ensemble, self.k)

    def load_dataset(self) -> Dataset:
        return load_any(self.dataset, self.label_col, self.header)


def read_ensemble_file(path, k: int = 4) -> EnsembleSpec:
    """One member per line: ``kind [param=value ...] [fraction=f] [bag=b]``."""
    members = []
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        tokens = raw.split("#", 1)[0].split()
        if not tokens:
            continue
        kind, params = tokens[0], {}
        if kind not in LEARNERS:
            raise ConfigError(f"{path}:{line_no}: unknown learner kind {kind!r} (have {sorted(LEARNERS)})")
        for tok in tokens[1:]:
            key, sep, value = tok.partition("=")
            if not sep:
                raise ConfigError(f"{path}:{line_no}: expected param=value, got {tok!r}")
            params[key] = value
        try:
            fraction = float(params.pop("fraction", 1.0))
            bag = int(params.pop("bag", 0))
            fields = {f.name: f.type for f in dataclasses.fields(LEARNERS[kind])}
            unknown = set(params) - set(fields)
            if unknown:
                raise ValueError(f"unknown parameter(s) {sorted(unknown)} for {kind}")
            kwargs = {}
            for key, value in params.items():
                ftype = str(fields[key])
                kwargs[key] = (
                    _parse_bool(value) if "bool" in ftype else int(value) if "int" in ftype else float(value)
                )
            members.append(Member(LEARNERS[kind](**kwargs), fraction, bag))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{path}:{line_no}: {exc}") from None
    if not members:
        raise ConfigError(f"{path}: no ensemble members")
    return EnsembleSpec(tuple(members), k)


# --- outputs ----------------------------------------------------------------------------


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def results_csv(results: dict) -> str:
    rows = []
    for name, res in results.items():
        for s, (e, sel) in enumerate(zip(res.errors, res.selected)):
            rows.append([name, s, repr(float(e)), sel])
    return _csv_text(["method", "stack", "error_pct", "selected"], rows)


def read_results_csv(path) -> dict:
    """``{method: StackResults}`` from a results CSV (lambdas are not stored)."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"results file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["method", "stack", "error_pct", "selected"]:
            raise DataError(f"{path}: expected header method,stack,error_pct,selected, got {header}")
        table = {}
        for line_no, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise DataError(f"{path}:{line_no}: expected 4 fields")
            try:
                stack, err, sel = int(row[1]), float(row[2]), int(row[3])
            except ValueError as exc:
                raise DataError(f"{path}:{line_no}: {exc}") from None
            table.setdefault(row[0], {})[stack] = (err, sel)
    out = {}
    for name, stacks in table.items():
        if sorted(stacks) != list(range(10)):
            raise DataError(f"{path}: method {name!r} does not have exactly stacks 0..9")
        errs, sels = zip(*(stacks[s] for s in range(10)))
        out[name] = StackResults(errs, sels, (float("nan"),) * 10)
    if not out:
        raise DataError(f"{path}: no results")
    return out


def _fmt_lambda(lams):
    vals = [v for v in lams if v == v]
    if not vals:
        return "-"
    uniq, counts = np.unique(vals, return_counts=True)
    return repr(float(uniq[np.argmax(counts)]))


def report_text(results: dict, data: Dataset, cfg: ExperimentConfig, m_count: int, alpha=0.05) -> str:
    lines = [
        f"linstack {__version__} 5x2 cross-validation report",
        f"dataset: {cfg.dataset.name} (I={data.X.shape[0]}, d={data.X.shape[1]}, N={data.n_classes})",
        f"ensemble: {Path(cfg.ensemble).name} (M={m_count}, internal k={cfg.k}), master seed {cfg.seed}",
        "",
        f"{'method':<28} {'error % (mean +- std)':>22} {'selected':>9} {'typical lambda':>15}",
    ]
    for name, res in results.items():
        lines.append(
            f"{name:<28} {res.mean:>11.2f} +- {res.std:<7.2f} {res.mean_selected:>9.1f} "
            f"{_fmt_lambda(res.lambdas):>15}"
        )
    lines += ["", "Wilcoxon: " + WILCOXON_POLICY.format(alpha=alpha)]
    ew = results[EW.name]
    for name, res in results.items():
        if name == EW.name:
            continue
        lines.append(decision_line(name, res, EW.name, ew, alpha))
    return "\n".join(lines) + "\n"


def decision_line(name_a, a: StackResults, name_b, b: StackResults, alpha=0.05) -> str:
    w = wilcoxon_one_tailed(a.errors, b.errors, alpha)
    if w.decision is None:
        return f"{name_a} < {name_b}: inconclusive (only {w.n} nonzero differences)"
    verdict = "significant" if w.decision else "not significant"
    return (
        f"{name_a} < {name_b}: {verdict} (W+={w.w_plus:g}, n={w.n}, p={w.p_value:.6f}, "
        f"{w.method}, alpha={alpha:g})"
    )


# --- subcommands -----------------------------------------------------------------------


def cmd_ingest(args) -> int:
    data = read_csv(args.csv, args.label_col, args.header)
    out = Path(args.output) if args.output else Path(args.csv).with_suffix(".json")
    save_dataset(data, out)
    print(f"rows: {data.X.shape[0]}")
    print(f"features: {data.X.shape[1]}")
    print(f"classes: {data.n_classes}")
    for i, (name, count) in enumerate(data.histogram().items(), start=1):
        print(f"  {i}: {name} ({count})")
    print(f"wrote {out}")
    return 0


def _prepare(args):
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "grid", None):
        cfg = dataclasses.replace(cfg, grid=check_grid(args.grid))
    cfg.validate_paths()
    spec = cfg.ensemble_spec()
    data = cfg.load_dataset()
    return cfg, spec, data


def _level_one(cfg, spec, data):
    return internal_cv_scores(data.X, data.y, spec, derive_seed(cfg.seed, "full"), data.n_classes)


def cmd_sweep(args) -> int:
    cfg, spec, data = _prepare(args)
    if args.output:
        out = Path(args.output)
    else:
        cfg.output.mkdir(exist_ok=True)
        out = cfg.output / "sweep.csv"
    if not out.parent.is_dir():
        raise ConfigError(f"output directory does not exist: {out.parent}")
    base = cfg.train_config()
    level1 = _level_one(cfg, spec, data)
    search = lambda_search(level1, dataclasses.replace(base, seed=derive_seed(cfg.seed, "lambda")), cfg.grid)
    rows = []
    for lam, acc in zip(cfg.grid, search.accuracies):
        model = train(level1, base.with_lambda(lam)).model
        rows.append([repr(lam), repr(float(acc)), selected_count(model)])
        log.info("lambda %g: cv accuracy %.4f, selected %d", lam, acc, rows[-1][2])
    atomic_write_text(out, _csv_text(["lambda", "cv_accuracy", "selected_count"], rows))
    print(f"wrote {out} ({len(rows)} lambdas, best {search.best_lambda!r})")
    return 0


def cmd_evaluate(args) -> int:
    cfg, spec, data = _prepare(args)
    methods = cfg.methods_to_run()
    cfg.output.mkdir(exist_ok=True)
    results = five_by_two(data.X, data.y, spec, methods, cfg.seed, data.n_classes)
    atomic_write_text(cfg.output / "results.csv", results_csv(results))
    report = report_text(results, data, cfg, spec.m_count, args.alpha)
    atomic_write_text(cfg.output / "report.txt", report)
    sys.stdout.write(report)
    return 0


def cmd_compare(args) -> int:
    a, b = read_results_csv(args.a), read_results_csv(args.b)

    def pick(table, name, path):
        if name is None:
            trained = [k for k in table if k != EW.name] or list(table)
            if len(trained) != 1:
                raise ConfigError(f"{path} holds several methods {list(table)}; choose one")
            name = trained[0]
        if name not in table:
            raise ConfigError(f"method {name!r} not in {path} (have {list(table)})")
        return name, table[name]

    name_a, ra = pick(a, args.method_a, args.a)
    name_b, rb = pick(b, args.method_b, args.b)
    if name_a == name_b:
        name_a, name_b = f"{args.a}:{name_a}", f"{args.b}:{name_b}"
    print(decision_line(name_a, ra, name_b, rb, args.alpha))
    return 0


def cmd_fit(args) -> int:
    cfg, spec, data = _prepare(args)
    base = cfg.train_config()
    level1 = _level_one(cfg, spec, data)
    lam = base.lam
    if cfg.lam == "cv":
        lam = lambda_search(level1, dataclasses.replace(base, seed=derive_seed(cfg.seed, "lambda")), cfg.grid).best_lambda
    model = train(level1, base.with_lambda(lam)).model
    out = Path(args.output)
    save_model(model, out, data.label_names)
    print(f"wrote {out} ({model.combiner.value}, M={spec.m_count}, lambda={lam!r}, selected {selected_count(model)})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="linstack", description="Linear stacked generalization experiments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("ingest", help="parse a CSV into a dataset file")
    s.add_argument("csv")
    s.add_argument("--label-col", default="-1", help="index (negative from the end) or header name")
    s.add_argument("--header", action="store_true", help="first row is a header")
    s.add_argument("-o", "--output", help="dataset file (default: CSV path with .json)")
    s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("sweep", help="CV accuracy and selected count over a lambda grid")
    s.add_argument("config")
    s.add_argument("--grid", type=float, nargs="+", help="override the config grid")
    s.add_argument("-o", "--output", help="CSV path (default: <output>/sweep.csv)")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("evaluate", help="5x2 cross-validation of the configured methods")
    s.add_argument("config")
    s.add_argument("--alpha", type=float, default=0.05)
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("compare", help="Wilcoxon test between two results files")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--method-a")
    s.add_argument("--method-b")
    s.add_argument("--alpha", type=float, default=0.05)
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("fit", help="train one combiner on the whole dataset and save it")
    s.add_argument("config")
    s.add_argument("-o", "--output", required=True, help="model file")
    s.set_defaults(func=cmd_fit)
    return p


EXPECTED_ERRORS = (
    ConfigError,
    DataError,
    ModelFormatError,
    StratificationError,
    LearnerError,
    InvalidCombination,
    OSError,
    ValueError,
)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"linstack {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
