import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from flsched import harness
from flsched.errors import ConfigError, TooLarge, Unreachable
from flsched.harness import (TinyCase, calibrate, load_config, parse_config,
                             run_experiment, sweep_v, verify_bounds)
from flsched.scheduler import PolicySpec


def small_config(tmp_path: Path, **policy) -> Path:
    doc = {
        "system": {"num_clients": 8, "num_rounds": 12, "frame_len": 4,
                   "num_frames": 3, "min_ratio": 0.05},
        "scenario": {"mode": "IID"},
        "policy": policy or {"kind": "PEDPC"},
        "pedpc": {"penalty": 0.5, "iter_rounds": 2},
        "output": {"dir": str(tmp_path / "out")},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return path


def test_parse_config_defaults():
    cfg = parse_config({})
    assert cfg.policy.kind == "PEDPC"
    assert cfg.penalty == 1.0
    assert cfg.barrier.tol == 1e-8


def test_parse_config_rejects_unknown_keys():
    with pytest.raises(ConfigError):
        parse_config({"system": {"voltage": 12}})
    with pytest.raises(ConfigError):
        parse_config({"mystery_section": {}})
    with pytest.raises(ConfigError):
        parse_config({"policy": {"kind": "Nonsense"}})


def test_load_config_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_run_experiment_row_count_and_summary(tmp_path):
    path = small_config(tmp_path)
    out = tmp_path / "run.csv"
    summary = run_experiment(path, seed=1, output_path=out)
    lines = out.read_text().strip().split("\n")
    assert lines[0] == harness.CSV_HEADER
    assert len(lines) == 1 + 12  # header plus one row per round
    sidecar = json.loads(out.with_suffix(".summary.json").read_text())
    assert sidecar["policy"] == "PEDPC"
    assert summary.avg_cost == pytest.approx(sidecar["avg_cost"])


def test_run_experiment_select_all_counts(tmp_path):
    path = small_config(tmp_path, kind="SelectAll")
    out = tmp_path / "sa.csv"
    run_experiment(path, seed=1, output_path=out)
    rows = out.read_text().strip().split("\n")[1:]
    assert all(int(r.split(",")[3]) == 8 for r in rows)


def test_run_experiment_random_exact_count(tmp_path):
    path = small_config(tmp_path, kind="Random", random_fraction=0.5)
    summary = run_experiment(path, seed=2, output_path=tmp_path / "r.csv")
    assert summary.avg_selected == 4.0


def test_summary_avg_cost_matches_rows(tmp_path):
    path = small_config(tmp_path)
    out = tmp_path / "c.csv"
    summary = run_experiment(path, seed=3, output_path=out)
    costs = [float(r.split(",")[6]) for r in out.read_text().strip().split("\n")[1:]]
    assert summary.avg_cost == pytest.approx(np.mean(costs), abs=1e-12)


def test_byte_identical_reruns(tmp_path):
    path = small_config(tmp_path)
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    run_experiment(path, seed=9, output_path=a)
    run_experiment(path, seed=9, output_path=b)
    assert a.read_bytes() == b.read_bytes()


def test_default_output_naming(tmp_path):
    path = small_config(tmp_path)
    run_experiment(path, seed=4)
    expected = tmp_path / "out" / "PEDPC_4_0.5.csv"
    assert expected.exists()


def test_sweep_v_outputs(tmp_path):
    path = small_config(tmp_path)
    summaries = sweep_v(path, [0.01, 1.0], seed=1)
    assert len(summaries) == 2
    sweep_csv = tmp_path / "out" / "sweep_1.csv"
    assert sweep_csv.exists()
    assert len(sweep_csv.read_text().strip().split("\n")) == 3
    with pytest.raises(ValueError):
        sweep_v(path, [], seed=1)


def test_calibrate_random_exact(tmp_path):
    path = small_config(tmp_path)
    assert calibrate(path, "Random", 4, seed=0) == pytest.approx(0.5)
    with pytest.raises(Unreachable):
        calibrate(path, "Random", 0, seed=0)
    with pytest.raises(ValueError):
        calibrate(path, "Greedy", 4, seed=0)


def test_calibrate_fedcs_saturation(tmp_path):
    # every client feasible at a huge cap: target = everyone is reachable
    path = small_config(tmp_path)
    t_max = calibrate(path, "FedCS", 8, seed=1)
    summary = run_experiment(path, policy=PolicySpec("FedCS", latency_cap=t_max),
                             seed=1, output_path=tmp_path / "f.csv")
    assert abs(summary.avg_selected - 8) <= 2


def test_tiny_case_guard():
    with pytest.raises(TooLarge):
        TinyCase(num_clients=4)
    with pytest.raises(ValueError):
        TinyCase(frame_len=3)


def test_verify_bounds_trivial_client():
    # a client that is never worth selecting: both sides of the cost bound
    # are trivially satisfied (lhs = 0 <= rhs)
    tiny = TinyCase(num_clients=1, num_rounds=2, frame_len=1, num_frames=2, seed=0,
                    overrides={"accuracy_coeff": 1e-12})
    report = verify_bounds(tiny, 1.0, 0.05)
    assert report.lhs_cost == 0.0
    assert report.theorem2_ok
    assert report.energy_bound_ok.all()


def test_verify_bounds_small():
    report = verify_bounds(TinyCase(seed=2), 1.0, 0.05)
    assert report.theorem2_ok
    assert report.energy_bound_ok.all()
    assert report.lhs_cost <= report.theorem2_rhs + 1e-9


def test_cli_run_and_exit_codes(tmp_path):
    path = small_config(tmp_path)
    env_cmd = [sys.executable, "-m", "flsched.cli"]
    out = subprocess.run(env_cmd + ["run", "--config", str(path), "--seed", "1"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert json.loads(out.stdout)["policy"] == "PEDPC"

    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"system": {"nope": 1}}))
    out = subprocess.run(env_cmd + ["run", "--config", str(bad)],
                         capture_output=True, text=True)
    assert out.returncode == 2

    infeasible = tmp_path / "inf.json"
    infeasible.write_text(json.dumps({
        "system": {"num_clients": 8, "num_rounds": 12, "frame_len": 4,
                   "num_frames": 3, "min_ratio": 0.2},
        "policy": {"kind": "SelectAll"},
        "output": {"dir": str(tmp_path / "out")}}))
    out = subprocess.run(env_cmd + ["run", "--config", str(infeasible)],
                         capture_output=True, text=True)
    assert out.returncode == 3


def test_cli_csv_determinism(tmp_path):
    path = small_config(tmp_path)
    env_cmd = [sys.executable, "-m", "flsched.cli"]
    a = tmp_path / "x.csv"
    b = tmp_path / "y.csv"
    for target in (a, b):
        out = subprocess.run(env_cmd + ["run", "--config", str(path), "--seed", "2",
                                        "--out", str(target)],
                             capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
    assert a.read_bytes() == b.read_bytes()
