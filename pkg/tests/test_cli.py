import json

import numpy as np
import pytest

from stepwalk import cli
from stepwalk.limits import NumericalDegeneracyError
from stepwalk.verify import scaled_summary
from stepwalk.walks import ReinforcementParams
from stepwalk.laws import rademacher


def test_parse_simulate_example(tmp_path):
    cfg = cli.parse_config(["simulate", "--p", "0.25", "--law", "rademacher", "--n", "4096", "--paths", "1000",
                            "--seed", "42", "--grid", "0.25,0.5,1", "--out", str(tmp_path / "paths.csv")])
    assert (cfg.p, cfg.n, cfg.n_paths, cfg.seed) == (0.25, 4096, 1000, 42)
    assert cfg.grid == (0.25, 0.5, 1.0)


def test_bad_p_names_the_key(capsys):
    assert cli.main(["simulate", "--p", "1.5", "--n", "10", "--paths", "1", "--out", "-"]) == 2
    assert "'p'" in capsys.readouterr().err


@pytest.mark.parametrize("argv,key", [
    (["simulate", "--p", "0.5", "--n", "10", "--paths", "2"], "out"),
    (["simulate", "--p", "0.5", "--n", "10", "--paths", "2", "--grid", "0.5,x", "--out", "-"], "grid"),
    (["simulate", "--p", "0.3", "--n", "10", "--paths", "2", "--grid", "1", "--regime", "critical", "--out", "-"],
     "p"),
    (["verify", "--suite", "critical"], "seed"),
    (["verify", "--suite", "nope", "--seed", "1"], "suite"),
    (["limit", "--p", "0.25", "--grid", "1", "--paths", "10", "--out", "-", "--method", "qmc"], "method"),
])
def test_usage_errors(argv, key, capsys):
    assert cli.main(argv) == 2
    assert f"'{key}'" in capsys.readouterr().err


def test_config_file_precedence_and_unknown_keys(tmp_path, capsys):
    conf = tmp_path / "run.conf"
    conf.write_text("p=0.5\nlaw=gaussian\nsd=1\n")
    cfg = cli.parse_config(["coeff", "--config", str(conf), "--p", "0.25", "--n", "3"])
    assert cfg.p == 0.25 and cfg.law == "gaussian"
    conf.write_text("p=0.5\ncolour=blue\n")
    assert cli.main(["coeff", "--config", str(conf), "--n", "3"]) == 2
    assert "colour" in capsys.readouterr().err


def test_coeff_table(capsys):
    assert cli.main(["coeff", "--p", "0.3", "--n", "10", "--out", "-"]) == 0
    rows = capsys.readouterr().out.strip().splitlines()
    assert rows[0] == "k,a_hat,a_check" and len(rows) == 11
    assert rows[1] == "1,1,1"
    assert cli.main(["coeff", "--p", "1", "--n", "3", "--out", "-"]) == 0
    assert capsys.readouterr().out.strip().splitlines()[2].endswith(",")


def test_simulate_round_trip_matches_in_memory(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    argv = ["simulate", "--p", "0.3", "--n", "1024", "--paths", "300", "--seed", "5", "--grid", "0.25,0.5,1"]
    assert cli.main(argv + ["--out", str(out)]) == 0
    capsys.readouterr()
    with open(out, newline="") as fh:
        from_csv = cli.summary_from_csv(fh, 1024, [0.25, 0.5, 1.0])
    mem = scaled_summary(ReinforcementParams(0.3, rademacher(), False), 1024, 300, 5, [0.25, 0.5, 1.0])
    assert from_csv.labels == mem.labels
    for name in ("s1", "s2", "s3", "s4"):
        assert np.array_equal(getattr(from_csv, name), getattr(mem, name))
    code = cli.main(["verify", "--input", str(out), "--p", "0.3", "--n", "1024", "--grid", "0.25,0.5,1",
                     "--seed", "5"])
    report = json.loads(capsys.readouterr().out)
    assert report["suite"] == "input-covariance" and code in (0, 1)


def test_verify_exit_code_follows_checks(tmp_path, capsys):
    out = tmp_path / "paths.csv"
    assert cli.main(["simulate", "--p", "0.0", "--n", "512", "--paths", "3000", "--seed", "2", "--grid", "0.5,1",
                     "--out", str(out)]) == 0
    # paths without memory read against a strongly reinforced model
    assert cli.main(["verify", "--input", str(out), "--p", "0.45", "--n", "512", "--grid", "0.5,1",
                     "--seed", "2"]) == 1
    assert cli.main(["verify", "--input", str(out), "--p", "0.0", "--n", "512", "--grid", "0.5,1",
                     "--seed", "2"]) == 0


def test_thread_count_does_not_change_output(tmp_path):
    texts = []
    for threads in ("1", "4"):
        out = tmp_path / f"t{threads}.csv"
        assert cli.main(["simulate", "--p", "0.6", "--law", "gaussian", "--n", "3000", "--paths", "50",
                         "--seed", "9", "--threads", threads, "--out", str(out)]) == 0
        texts.append(out.read_bytes())
    assert texts[0] == texts[1]


def test_limit_command(tmp_path, capsys):
    out, kern = tmp_path / "lim.csv", tmp_path / "k.json"
    assert cli.main(["limit", "--p", "0.25", "--grid", "1", "--paths", "100000", "--method", "cholesky",
                     "--seed", "1", "--out", str(out), "--kernel-out", str(kern)]) == 0
    vals = np.loadtxt(out, delimiter=",", skiprows=1, usecols=3, dtype=float)
    names = np.loadtxt(out, delimiter=",", skiprows=1, usecols=1, dtype=str)
    bh = vals[names == "B_hat"]
    assert abs(bh.var(ddof=1) - 2) < 3 * 2 * np.sqrt(2 / len(bh))
    assert json.loads(kern.read_text())["labels"][1] == ["B_hat", 1.0]


def test_scaled_and_bracket_outputs(tmp_path):
    sc, br = tmp_path / "scaled.csv", tmp_path / "br.csv"
    assert cli.main(["simulate", "--p", "0.5", "--n", "10000", "--paths", "2", "--seed", "3", "--grid", "0.5,1",
                     "--regime", "critical", "--out", str(sc)]) == 0
    assert sc.read_text().splitlines()[0] == "path_id,component,t,value"
    assert cli.main(["simulate", "--p", "0.5", "--n", "20", "--paths", "2", "--seed", "3",
                     "--out", str(tmp_path / "p.csv"), "--brackets-out", str(br)]) == 0
    assert br.read_text().splitlines()[0] == "path_id,k,qv_hat,qv_check,qv_mixed"


def test_verify_suite_end_to_end(capsys):
    assert cli.main(["verify", "--suite", "triplet-diffusive", "--p", "0.3", "--seed", "7"]) == 0
    captured = capsys.readouterr()
    assert json.loads(captured.out)["seed"] == 7
    assert captured.err.startswith("PASS triplet-diffusive")


def test_numerical_errors_exit_three(monkeypatch, capsys):
    def boom(cfg):
        raise NumericalDegeneracyError(4, -1.0)

    monkeypatch.setattr(cli, "run_limit", boom)
    assert cli.main(["limit", "--p", "0.2", "--grid", "1", "--paths", "5", "--out", "-"]) == 3
    assert "leading minor 4" in capsys.readouterr().err
