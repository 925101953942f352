import csv
import os
import xml.etree.ElementTree as ET

import pytest

from gravicut import smoothing
from gravicut.harness.cli import main
from gravicut.harness.config import (
    ConfigError, ExperimentConfig, apply_setting, load_config, parse_seeds, run_stream,
)
from gravicut.harness.runner import RUN_COLUMNS, SUMMARY_COLUMNS

FAST = ["--objective", "quadratic", "--noise", "bernoulli", "--dim", "2", "--budget", "200000"]


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_parse_seeds():
    assert parse_seeds("3") == [0, 1, 2]
    assert parse_seeds("4,9") == [4, 9]
    assert parse_seeds("7,") == [7]
    assert parse_seeds("") == []


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text("# experiment\nobjective = quadratic\nq = 4.0\nnoise=noiseless\n"
                    "dims = 2,3\nbudgets = 1e5\nseeds = 2\ntrace = yes\n")
    config = load_config(path)
    assert config.dims == [2, 3] and config.budgets == [100_000] and config.seeds == [0, 1]
    assert config.objective_params == {"q": 4.0} and config.trace
    apply_setting(config, "dim", "5")
    assert config.validate().dims == [5]


@pytest.mark.parametrize("key, value", [("colour", "red"), ("delta", "abc")])
def test_bad_settings(key, value):
    with pytest.raises(ConfigError):
        apply_setting(ExperimentConfig(), key, value)


@pytest.mark.parametrize("field, value", [("seeds", []), ("budgets", [0]), ("seeds", [1, 1]),
                                          ("delta", 1.5), ("noise", "pink")])
def test_invalid_configs(field, value):
    config = ExperimentConfig()
    setattr(config, field, value)
    with pytest.raises(ConfigError):
        config.validate()


def test_run_stream_is_keyed():
    a = run_stream(0, 2, 1000, 3).random()
    assert a == run_stream(0, 2, 1000, 3).random()
    assert a != run_stream(0, 2, 1000, 4).random()


def test_run_writes_one_row_per_seed(tmp_path):
    assert main(["run", *FAST, "--seeds", "3", "--out", str(tmp_path)]) == 0
    raw = (tmp_path / "runs.csv").read_bytes()
    assert b"\r" not in raw
    rows = read_csv(tmp_path / "runs.csv")
    assert len(rows) == 3 and list(rows[0]) == RUN_COLUMNS
    for row in rows:
        assert int(row["q_init"]) + int(row["q_fcp"]) + int(row["q_grad"]) <= int(row["budget"])
        assert float(row["regret"]) >= -1e-12


def test_run_is_deterministic(tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / str(k)
        assert main(["run", *FAST, "--seeds", "1,1", "--out", str(out)]) == 2  # duplicate seeds
        assert main(["run", *FAST, "--seeds", "5,6", "--out", str(out)]) == 0
        outs.append([{k: v for k, v in r.items() if k != "wall_ms"}
                     for r in read_csv(out / "runs.csv")])
    assert outs[0] == outs[1]


def test_same_seed_twice_gives_identical_regret(tmp_path):
    regrets = []
    for k in range(2):
        main(["run", *FAST, "--seeds", "4,", "--out", str(tmp_path / str(k))])
        regrets.append(read_csv(tmp_path / str(k) / "runs.csv")[0]["regret"])
    assert regrets[0] == regrets[1]


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    out = blocker / "results"
    assert main(["run", *FAST, "--seeds", "1", "--out", str(out)]) == 2
    assert not out.exists() and os.listdir(tmp_path) == ["file"]


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["run", "--config", str(tmp_path / "missing.cfg")]) == 2
    assert main(["sweep", *FAST, "--seeds", "", "--out", str(tmp_path)]) == 2
    assert "seeds" in capsys.readouterr().err
    assert not os.listdir(tmp_path)


def test_trace_output(tmp_path):
    assert main(["run", *FAST, "--seeds", "1", "--trace", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "trace.jsonl").read_text().splitlines()
    assert lines and all(line.startswith("{") for line in lines)


def test_sweep_outputs(tmp_path):
    args = ["sweep", "--objective", "quadratic", "--noise", "noiseless", "--dim", "2",
            "--budget", "10000,200000", "--seeds", "3", "--out", str(tmp_path)]
    assert main(args) == 0
    summary = read_csv(tmp_path / "summary.csv")
    assert [list(r) for r in summary] == [SUMMARY_COLUMNS] * 2
    assert [int(r["budget"]) for r in summary] == [10_000, 200_000]
    root = ET.parse(tmp_path / "regret.svg").getroot()
    assert root.tag.endswith("svg")
    assert len(read_csv(tmp_path / "runs.csv")) == 6


def test_worker_pool_matches_serial(tmp_path, monkeypatch):
    rows = {}
    for threads in ("1", "2"):
        monkeypatch.setenv("GRAVICUT_THREADS", threads)
        out = tmp_path / threads
        assert main(["run", *FAST, "--dim", "2,3", "--seeds", "2", "--out", str(out)]) == 0
        rows[threads] = [{k: v for k, v in r.items() if k != "wall_ms"}
                         for r in read_csv(out / "runs.csv")]
    assert rows["1"] == rows["2"]


def test_validate_selected_suite(capsys):
    assert main(["validate", "--suite", "kls"]) == 0
    out = capsys.readouterr().out
    assert "[PASS] kls.d10" in out


def test_validate_unknown_suite():
    assert main(["validate", "--suite", "nope"]) == 2


def test_validate_negative_control(monkeypatch, capsys):
    eta = smoothing.eta_conc
    monkeypatch.setattr(smoothing, "eta_conc", lambda a: 0.1 * eta(a))
    assert main(["validate", "--suite", "all"]) == 1
    assert "[FAIL] concentration" in capsys.readouterr().out
