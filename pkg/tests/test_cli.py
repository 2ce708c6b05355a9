import json
import subprocess
import sys

import numpy as np
import pytest

from svddtrace import datagen
from svddtrace.cli import main
from svddtrace.evaluation import confusion, f1
from svddtrace.fileio import read_csv, write_matrix_csv


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture
def sphere_csv(tmp_path):
    assert run("simulate", "sphere", "--dim", 3, "--n", 300, "--eval-n", 400, "--seed", 1,
               "--train", tmp_path / "train.csv", "--eval", tmp_path / "eval.csv") == 0
    return tmp_path / "train.csv", tmp_path / "eval.csv"


def test_simulate_study_sizes(tmp_path):
    assert run("simulate", "sphere", "--dim", 5, "--n", 5000, "--eval-n", 10000,
               "--train", tmp_path / "t.csv", "--eval", tmp_path / "e.csv") == 0
    train, ev = read_csv(tmp_path / "t.csv"), read_csv(tmp_path / "e.csv")
    assert train.x.shape == (5000, 5) and train.inlier is None
    assert ev.x.shape == (10000, 5) and ev.inlier.sum() == 5000


@pytest.mark.parametrize(
    "kind,extra",
    [("sphere", ["--dim", 4]), ("cube", ["--dim", 3]), ("multi-sphere", ["--shapes", 3, "--n", 50, "--eval-n", 40]),
     ("multi-cube", ["--dim", 3, "--shapes", 2, "--n", 50, "--eval-n", 40]), ("polygon", ["--vertices", 8, "--resolution", 30]),
     ("donuts", [])],
)
def test_simulate_byte_identical(tmp_path, kind, extra):
    outs = []
    for k in range(2):
        t, e = tmp_path / f"t{k}.csv", tmp_path / f"e{k}.csv"
        assert run("simulate", kind, *extra, "--seed", 7, "--train", t, "--eval", e) == 0
        outs.append((t.read_bytes(), e.read_bytes() if e.exists() else b""))
    assert outs[0] == outs[1]


@pytest.mark.parametrize(
    "extra", [["--dim", 0], ["--w", 1.5], ["--eval-n", 11], ["--n", 0], ["--vertices", 2]]
)
def test_simulate_invalid_params(tmp_path, extra):
    kind = "polygon" if "--vertices" in extra else "sphere"
    assert run("simulate", kind, *extra, "--train", tmp_path / "t.csv", "--eval", tmp_path / "e.csv") == 2


def test_bandwidth_deterministic_and_default_r(sphere_csv, tmp_path, capsys):
    train, _ = sphere_csv
    assert run("bandwidth", train) == 0
    first = capsys.readouterr().out
    assert run("bandwidth", train, "--r", 5, "--seed", 0, "--profile", tmp_path / "p.csv") == 0
    assert capsys.readouterr().out == first
    assert run("bandwidth", train, "--r", 3) == 0
    assert capsys.readouterr().out != first
    lines = (tmp_path / "p.csv").read_text().splitlines()
    assert lines[0] == "s,g,h,selected"
    assert sum(line.endswith(",1") for line in lines[1:]) == 1


def test_profile_command(sphere_csv, tmp_path, capsys):
    train, _ = sphere_csv
    assert run("profile", train, "-o", tmp_path / "prof.csv") == 0
    s_star = float(capsys.readouterr().out)
    rows = [line.split(",") for line in (tmp_path / "prof.csv").read_text().splitlines()[1:]]
    assert [float(r[0]) for r in rows if r[3] == "1"] == [s_star]


def test_malformed_csv_exit_3(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("x1,x2\n1,2\n3,4\n5,abc\n")
    assert run("bandwidth", bad) == 3
    assert "bad.csv:4:" in capsys.readouterr().err


def test_train_score_outlier_fraction(sphere_csv, tmp_path, capsys):
    train, _ = sphere_csv
    f, n = 0.05, 300
    assert run("train", train, "-o", tmp_path / "m.json", "--f", f) == 0
    assert run("score", tmp_path / "m.json", train, "-o", tmp_path / "s.csv") == 0
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,x3,dist2,outlier"
    assert len(lines) == n + 1
    doc = json.loads((tmp_path / "m.json").read_text())
    r2, kkt_tol = doc["r_squared"], doc["kkt_tol"]
    d2 = np.array([float(line.split(",")[-2]) for line in lines[1:]])
    flags = np.array([line.endswith(",1") for line in lines[1:]])
    assert np.array_equal(flags, d2 > r2)
    # Free support vectors straddle R^2 within solver precision; only rows beyond
    # that band can be capped points, of which there are at most N f.
    beyond = d2 > r2 + 10 * kkt_tol
    assert beyond.sum() / n <= f + kkt_tol * n
    alpha = dict(zip(map(tuple, doc["support_vectors"]), doc["alpha"]))
    x = read_csv(train).x
    for i in np.flatnonzero(flags & ~beyond):
        assert 0 < alpha[tuple(x[i])] < doc["C"]


def test_score_to_stdout_keeps_input_columns(sphere_csv, tmp_path, capsys):
    train, ev = sphere_csv
    assert run("train", train, "-o", tmp_path / "m.json", "--s", 0.8) == 0
    capsys.readouterr()
    assert run("score", tmp_path / "m.json", ev) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "x1,x2,x3,label,dist2,outlier"
    assert out[1].split(",")[:4] == (ev.read_text().splitlines()[1]).split(",")


def test_score_wrong_dimension_exit_3(sphere_csv, tmp_path):
    train, _ = sphere_csv
    assert run("train", train, "-o", tmp_path / "m.json", "--s", 1.0) == 0
    write_matrix_csv(tmp_path / "two.csv", np.zeros((3, 2)))
    assert run("score", tmp_path / "m.json", tmp_path / "two.csv") == 3


def test_score_version_mismatch_exit_3(sphere_csv, tmp_path):
    train, _ = sphere_csv
    assert run("train", train, "-o", tmp_path / "m.json", "--s", 1.0) == 0
    doc = json.loads((tmp_path / "m.json").read_text())
    doc["format_version"] = 99
    (tmp_path / "m.json").write_text(json.dumps(doc))
    assert run("score", tmp_path / "m.json", train) == 3


def test_train_does_not_touch_input(sphere_csv, tmp_path):
    train, _ = sphere_csv
    before = train.read_bytes()
    assert run("train", train, "-o", tmp_path / "m.json", "--standardize") == 0
    assert run("score", tmp_path / "m.json", train, "-o", tmp_path / "s.csv") == 0
    assert train.read_bytes() == before


def test_train_bad_f_exit_2(sphere_csv, tmp_path):
    train, _ = sphere_csv
    assert run("train", train, "-o", tmp_path / "m.json", "--s", 1.0, "--f", 0) == 2


def test_train_nonconvergence_exit_5(tmp_path, monkeypatch):
    import svddtrace.cli as cli_mod

    write_matrix_csv(tmp_path / "x.csv", np.random.default_rng(0).normal(size=(40, 2)))
    real = cli_mod.TrainConfig
    monkeypatch.setattr(cli_mod, "TrainConfig", lambda **kw: real(**kw, max_passes=2))
    assert run("train", tmp_path / "x.csv", "-o", tmp_path / "m.json", "--s", 0.5) == 5


def test_bandwidth_bracket_error_exit_4(tmp_path):
    write_matrix_csv(tmp_path / "x.csv", np.random.default_rng(0).normal(size=(100, 2)))
    assert run("bandwidth", tmp_path / "x.csv", "--s-min", 1e3, "--s-max", 2e3) == 4


def test_grid_command(tmp_path):
    x, bbox = datagen.two_donuts_circle(0)
    write_matrix_csv(tmp_path / "d.csv", x[::10])
    assert run("train", tmp_path / "d.csv", "-o", tmp_path / "m.json", "--s", 0.6) == 0
    assert run("grid", tmp_path / "m.json", "--bbox-from", tmp_path / "d.csv", "--resolution", 20,
               "-o", tmp_path / "g.csv") == 0
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "x,y,dist2,is_outlier" and len(lines) == 401
    assert run("grid", tmp_path / "m.json", "--bbox", 0, 0, 1, 1, "-o", tmp_path / "g2.csv") == 0


def test_grid_requires_2d_model(sphere_csv, tmp_path):
    train, _ = sphere_csv
    assert run("train", train, "-o", tmp_path / "m.json", "--s", 1.0) == 0
    assert run("grid", tmp_path / "m.json", "--bbox", 0, 0, 1, 1, "-o", tmp_path / "g.csv") == 2


@pytest.mark.parametrize("text,suffix", [("", ".yaml"), ("{}", ".json"), ("study: [", ".yaml"),
                                         ("bogus: 1\n", ".yaml"), ("study: torus\n", ".yaml")])
def test_evaluate_bad_spec_exit_2(tmp_path, text, suffix):
    spec = tmp_path / f"s{suffix}"
    spec.write_text(text)
    assert run("evaluate", spec, "-o", tmp_path / "r.csv") == 2


def test_evaluate_single_cell_matches_manual_pipeline(tmp_path, capsys):
    spec = tmp_path / "study.yaml"
    spec.write_text("study: sphere\ndims: [3]\nshapes: [1]\nreplicates: 1\nseed: 4\nn_train: 300\nn_eval: 400\nf: 0.02\n")
    assert run("evaluate", spec, "-o", tmp_path / "r.csv") == 0
    header, row = (tmp_path / "r.csv").read_text().splitlines()
    assert header == "replicate,dim,shapes,s_trace,f1_trace,s_best,f1_best,ratio"
    cells = dict(zip(header.split(","), row.split(",")))

    # the same cell composed by hand from the CLI building blocks
    seed = datagen.derive_seed(4, 3, 1, 0)
    t, e, m, s = (tmp_path / n for n in ("t.csv", "e.csv", "m.json", "s.csv"))
    assert run("simulate", "sphere", "--dim", 3, "--n", 300, "--eval-n", 400, "--seed", seed, "--train", t, "--eval", e) == 0
    capsys.readouterr()
    assert run("bandwidth", t, "--seed", seed) == 0
    s_star = float(capsys.readouterr().out)
    assert run("train", t, "-o", m, "--s", repr(s_star), "--f", 0.02) == 0
    assert run("score", m, e, "-o", s) == 0
    truth = read_csv(e).inlier
    flags = np.array([int(line.rsplit(",", 1)[1]) for line in s.read_text().splitlines()[1:]], bool)
    manual_f1 = f1(confusion(truth, ~flags)).f1

    assert float(cells["s_trace"]) == s_star
    assert float(cells["f1_trace"]) == manual_f1
    assert cells["s_best"] == cells["ratio"] == ""
    summary = json.loads((tmp_path / "r.json").read_text())
    assert summary["cells"][0]["n_ok"] == 1 and summary["failures"] == []


def test_evaluate_all_cells_fail_exit_4(tmp_path, monkeypatch):
    import svddtrace.studies as studies_mod
    from svddtrace.errors import BracketError

    def boom(*a, **k):
        raise BracketError("forced")

    monkeypatch.setattr(studies_mod, "select_bandwidth_trace", boom)
    spec = tmp_path / "s.json"
    spec.write_text(json.dumps({"study": "cube", "dims": [2], "replicates": 2, "n_train": 50, "n_eval": 20}))
    assert run("evaluate", spec, "-o", tmp_path / "r.csv") == 4
    summary = json.loads((tmp_path / "r.json").read_text())
    assert len(summary["failures"]) == 2


def test_usage_errors_exit_2():
    with pytest.raises(SystemExit) as info:
        main([])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        main(["simulate", "torus"])
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "svddtrace", "simulate", "donuts", "--train", str(tmp_path / "d.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert read_csv(tmp_path / "d.csv").x.shape == (3000, 2)
    proc = subprocess.run([sys.executable, "-m", "svddtrace", "bandwidth", str(tmp_path / "missing.csv")],
                          capture_output=True, text=True)
    assert proc.returncode == 3
