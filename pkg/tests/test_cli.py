import csv

import numpy as np
import pytest

from linstack import cli
from linstack.core import predict_many
from linstack.modelio import load_model
from linstack.solver import DEFAULT_GRID

from conftest import DATA

ENSEMBLE = "nearest_mean fraction=0.8 bag=0\ngaussian_nb\nknn k=3 fraction=0.8 bag=1\n"


@pytest.fixture
def workdir(tmp_path):
    (tmp_path / "wine.csv").write_bytes((DATA / "wine.csv").read_bytes())
    assert cli.main(["ingest", str(tmp_path / "wine.csv"), "--header"]) == 0
    (tmp_path / "small.ens").write_text(ENSEMBLE)
    return tmp_path


def config(workdir, extra="", name="run.cfg"):
    p = workdir / name
    p.write_text("dataset = wine.json\nensemble = small.ens\nk = 2\nseed = 5\noutput = out\n" + extra)
    return p


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_ingest_prints_summary(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("1,2,yes\n3,4,no\n5,6,yes\n7,8,no\n")
    assert cli.main(["ingest", str(p), "-o", str(tmp_path / "d.json")]) == 0
    out = capsys.readouterr().out
    assert "rows: 4" in out and "classes: 2" in out
    assert "1: yes (2)" in out and "2: no (2)" in out


def test_ingest_error_goes_to_stderr(tmp_path, capsys):
    p = tmp_path / "d.csv"
    p.write_text("1,a\n2,a\n")
    assert cli.main(["ingest", str(p)]) == 1
    err = capsys.readouterr().err
    assert err.startswith("linstack ingest: error:") and "one class" in err


# --- configuration ---------------------------------------------------------------------------


def test_config_parsing(tmp_path):
    cfg = cli.ExperimentConfig.from_text(
        "dataset = d.json  # comment\nlambda = 0.5\ngrid = 0.1, 1\nmethods = hinge-l1-cws@cv ls-l2-lsg@0\n",
        tmp_path,
    )
    assert cfg.dataset == tmp_path / "d.json" and cfg.output == tmp_path / "results"
    assert cfg.lam == 0.5 and cfg.grid == (0.1, 1.0)
    names = [m.name for m in cfg.methods_to_run()]
    assert names == ["EW", "hinge-l1-cws@cv", "ls-l2-lsg@0.0"]


@pytest.mark.parametrize(
    "text, pattern",
    [
        ("dataset = d\nfoo = 1\n", "unknown key 'foo'"),
        ("dataset = d\nseed = 1\nseed = 2\n", "duplicate"),
        ("seed = 1\n", "missing required key"),
        ("dataset = d\nk = many\n", "bad value"),
        ("dataset = d\njust text\n", "key = value"),
        ("dataset = d\ncombiner = ws\nregularizer = group\n", "group"),
        ("dataset = d\nmethods = hinge-l2\n", "loss-reg-combiner"),
        ("dataset = d\ngrid = 1, 0.1\n", "increasing"),
    ],
)
def test_config_errors(tmp_path, text, pattern):
    with pytest.raises((cli.ConfigError, ValueError), match=pattern):
        cli.ExperimentConfig.from_text(text, tmp_path)


def test_unknown_key_exits_nonzero(workdir, capsys):
    assert cli.main(["evaluate", str(config(workdir, "colour = red\n"))]) == 1
    assert "unknown key 'colour'" in capsys.readouterr().err


def test_missing_paths_fail_before_training(workdir, capsys, monkeypatch):
    def boom(*a, **k):
        raise AssertionError("training started")

    monkeypatch.setattr(cli, "five_by_two", boom)
    p = workdir / "bad.cfg"
    p.write_text("dataset = nowhere.json\n")
    assert cli.main(["evaluate", str(p)]) == 1
    assert "dataset not found" in capsys.readouterr().err
    p.write_text("dataset = wine.json\nensemble = nowhere.ens\n")
    assert cli.main(["evaluate", str(p)]) == 1
    assert "ensemble spec file not found" in capsys.readouterr().err
    p.write_text("dataset = wine.json\noutput = a/b/c\n")
    assert cli.main(["evaluate", str(p)]) == 1
    assert "output parent" in capsys.readouterr().err


def test_ensemble_file(tmp_path):
    p = tmp_path / "e.ens"
    p.write_text("# two members\nknn k=5 standardize=true\nrff_margin width=2 seed=3 fraction=0.5 bag=2\n")
    spec = cli.read_ensemble_file(p, k=3)
    assert spec.m_count == 2 and spec.k == 3
    assert spec.members[0].learner.k == 5 and spec.members[0].learner.standardize is True
    assert spec.members[1].learner.width == 2.0 and spec.members[1].fraction == 0.5
    for bad in ("svm\n", "knn k\n", "knn depth=3\n", ""):
        p.write_text(bad)
        with pytest.raises(cli.ConfigError):
            cli.read_ensemble_file(p)


# --- sweep ---------------------------------------------------------------------------------


def test_sweep_one_lambda(workdir):
    assert cli.main(["sweep", str(config(workdir)), "--grid", "0.01", "-o", str(workdir / "s.csv")]) == 0
    rows = read_rows(workdir / "s.csv")
    assert rows[0] == ["lambda", "cv_accuracy", "selected_count"] and len(rows) == 2
    assert rows[1][0] == "0.01" and 0 <= float(rows[1][1]) <= 1


def test_l2_sweep_selects_every_classifier(workdir):
    assert cli.main(["sweep", str(config(workdir, "regularizer = l2\n"))]) == 0
    rows = read_rows(workdir / "out" / "sweep.csv")[1:]
    assert [float(r[0]) for r in rows] == list(DEFAULT_GRID)
    # the largest lambdas shrink the weights towards zero but never exactly
    assert {r[2] for r in rows} == {"3"}


def test_group_sweep_endpoints(workdir):
    out = workdir / "g.csv"
    assert cli.main(["sweep", str(config(workdir, "regularizer = group\n")), "--grid", "1e-11", "10", "-o", str(out)]) == 0
    lo, hi = (int(r[2]) for r in read_rows(out)[1:])
    assert hi < lo


# --- evaluate / compare ----------------------------------------------------------------------


def test_evaluate_single_method_and_compare(workdir, capsys):
    assert cli.main(["evaluate", str(config(workdir, "lambda = 0.01\n"))]) == 0
    report = capsys.readouterr().out
    rows = read_rows(workdir / "out" / "results.csv")
    assert rows[0] == ["method", "stack", "error_pct", "selected"]
    assert {r[0] for r in rows[1:]} == {"EW", "hinge-l2-cws@0.01"} and len(rows) == 21
    assert "one-tailed signed-rank" in report and "hinge-l2-cws@0.01 < EW" in report
    assert (workdir / "out" / "report.txt").read_text() == report

    res = workdir / "out" / "results.csv"
    assert cli.main(["compare", str(res), str(res), "--method-a", "hinge-l2-cws@0.01", "--method-b", "EW"]) == 0
    line = capsys.readouterr().out.strip()
    table = cli.read_results_csv(res)
    assert line == cli.decision_line("hinge-l2-cws@0.01", table["hinge-l2-cws@0.01"], "EW", table["EW"])
    assert cli.main(["compare", str(res), str(res), "--method-a", "nope"]) == 1


def test_compare_decision_line_matches_eval(tmp_path, capsys):
    a = {"A": cli.StackResults(tuple(float(i) for i in range(10)), (1,) * 10, (0.0,) * 10)}
    b = {"B": cli.StackResults(tuple(float(i + 1 + i % 3) for i in range(10)), (1,) * 10, (0.0,) * 10)}
    (tmp_path / "a.csv").write_text(cli.results_csv(a))
    (tmp_path / "b.csv").write_text(cli.results_csv(b))
    assert cli.main(["compare", str(tmp_path / "a.csv"), str(tmp_path / "b.csv")]) == 0
    line = capsys.readouterr().out
    assert line.startswith("A < B: significant") and "p=0.000977" in line and "exact" in line


def test_read_results_rejects_bad_files(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("method,stack,error_pct,selected\nEW,0,1.0,2\n")
    with pytest.raises(cli.DataError, match="stacks 0..9"):
        cli.read_results_csv(p)
    p.write_text("a,b\n")
    with pytest.raises(cli.DataError, match="header"):
        cli.read_results_csv(p)


# --- fit -------------------------------------------------------------------------------------


def test_fit_saves_loadable_model(workdir, capsys):
    out = workdir / "model.txt"
    assert cli.main(["fit", str(config(workdir, "combiner = lsg\nregularizer = l1\ngrid = 0.001, 0.1\n")), "-o", str(out)]) == 0
    model, labels = load_model(out)
    assert labels == ("class_1", "class_2", "class_3")
    assert model.shape == (3, 3)
    F = np.random.default_rng(0).dirichlet(np.ones(3), size=(5, 3))
    assert predict_many(model, F).shape == (5,)
    assert "lsg" in capsys.readouterr().out
