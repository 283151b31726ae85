"""Command-line interface: exit codes, file outputs, determinism."""
import csv
import json
import shutil
import subprocess
import sys

import pytest

from affinity_bandits.cli import (FIGURE_IDS, bundled_config_path, load_json,
                                  main, validate_experiment_config)
from affinity_bandits.simulate import AGGREGATE_COLUMNS

TINY_SWEEP = {
    "name": "tiny",
    "description": "two-point smoke sweep",
    "repeats": 3,
    "base_seed": 50,
    "horizon": 60,
    "policies": [{"policy": "ucb1"}, {"policy": "uniform"}],
    "statistics": ["pseudo_regret", "count_frac:0"],
    "param_name": "alpha",
    "points": [
        {"point_id": "a1", "param_value": 1.0,
         "env": {"means": [0.3, 0.7],
                 "bias": {"f": {"kind": "power", "alpha": 1.0},
                          "initial_pulls": [2, 2]},
                 "noise": "bernoulli", "mode": "mask"}},
        {"point_id": "a2", "param_value": 2.0,
         "env": {"means": [0.3, 0.7],
                 "bias": {"f": {"kind": "power", "alpha": 2.0},
                          "initial_pulls": [2, 2]},
                 "noise": "bernoulli", "mode": "mask"}},
    ],
}

TINY_TRAJ = {
    "type": "trajectory",
    "name": "walk",
    "paths": 2,
    "base_seed": 9,
    "horizon": 50,
    "arm": 0,
    "statistic": "count_over_sqrt_t",
    "series": [
        {"series": "plain",
         "env": {"means": [0.4, 0.6],
                 "bias": {"f": {"kind": "constant", "c": 1.0},
                          "initial_pulls": [1, 1]},
                 "noise": "bernoulli", "mode": "mask"},
         "policy": {"policy": "uniform"}},
    ],
}


def write_cfg(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestRunCommand:
    def test_sweep_outputs_and_determinism(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, TINY_SWEEP)
        out1, out2 = tmp_path / "d1", tmp_path / "d2"
        assert main(["run", cfg, "--out", str(out1)]) == 0
        printed = capsys.readouterr().out.strip().splitlines()
        csv_path = out1 / "tiny.csv"
        jsonl_path = out1 / "tiny.jsonl"
        assert str(csv_path) in printed and str(jsonl_path) in printed
        with open(csv_path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        # points x policies x statistics
        assert len(rows) == 2 * 2 * 2
        assert list(rows[0].keys()) == AGGREGATE_COLUMNS
        assert {r["policy"] for r in rows} == {"ucb1", "uniform"}
        assert {r["param_value"] for r in rows} == {"1.0", "2.0"}
        assert all(r["repeats"] == "3" for r in rows)
        assert all(len(r["digest"]) == 16 for r in rows)
        lines = open(jsonl_path).read().splitlines()
        assert len(lines) == 3 * 2 * 2      # repeats x points x policies
        assert main(["run", cfg, "--out", str(out2)]) == 0
        assert (out2 / "tiny.csv").read_bytes() == csv_path.read_bytes()

    def test_trajectory_output(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_TRAJ)
        out = tmp_path / "d"
        assert main(["run", cfg, "--out", str(out)]) == 0
        with open(out / "walk.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert list(rows[0].keys()) == ["series", "seed", "t", "value",
                                        "statistic", "digest"]
        # horizon 50 -> a snapshot at every step, for each of 2 paths
        assert len(rows) == 2 * 50
        assert {r["seed"] for r in rows} == {"10", "11"}
        last = [r for r in rows if r["t"] == "50"][0]
        assert float(last["value"]) > 0

    def test_full_trace_files(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_SWEEP)
        out = tmp_path / "d"
        assert main(["run", cfg, "--out", str(out), "--full-trace"]) == 0
        traces = sorted(p.name for p in out.glob("*.trace.csv"))
        # one per (point, policy, seed)
        assert len(traces) == 2 * 2 * 3
        assert "tiny_a1_ucb1_seed51.trace.csv" in traces
        with open(out / traces[0], newline="") as fh:
            assert len(list(csv.DictReader(fh))) == 60

    def test_seed_override_changes_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, TINY_SWEEP)
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["run", cfg, "--out", str(a)]) == 0
        assert main(["run", cfg, "--out", str(b), "--seed", "999"]) == 0
        rows_a = list(csv.DictReader(open(a / "tiny.csv")))
        rows_b = list(csv.DictReader(open(b / "tiny.csv")))
        assert all(r["base_seed"] == "999" for r in rows_b)
        assert rows_a != rows_b


class TestErrors:
    def test_missing_field_exits_2(self, tmp_path, capsys):
        bad = dict(TINY_SWEEP)
        del bad["points"]
        cfg = write_cfg(tmp_path, bad)
        assert main(["run", cfg, "--out", str(tmp_path / "d")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_field_path_in_message(self, tmp_path, capsys):
        bad = json.loads(json.dumps(TINY_SWEEP))
        del bad["points"][1]["env"]["means"]
        cfg = write_cfg(tmp_path, bad)
        assert main(["run", cfg, "--out", str(tmp_path / "d")]) == 2
        assert "points[1]" in capsys.readouterr().err

    def test_broken_json_reports_position(self, tmp_path, capsys):
        path = tmp_path / "broken.json"
        path.write_text('{"name": "x",\n  "oops\n}')
        assert main(["run", str(path), "--out", str(tmp_path / "d")]) == 2
        err = capsys.readouterr().err
        assert "line" in err and "column" in err

    def test_missing_file_exits_2(self, tmp_path, capsys):
        assert main(["run", str(tmp_path / "nope.json")]) == 2

    def test_unknown_figure_id(self, capsys, tmp_path):
        assert main(["figure", "fig99", "--out", str(tmp_path)]) == 2
        assert "fig99" in capsys.readouterr().err


class TestBundledConfigs:
    @pytest.mark.parametrize("fig_id", FIGURE_IDS)
    def test_all_bundled_configs_validate(self, fig_id):
        cfg = load_json(bundled_config_path(fig_id))
        validate_experiment_config(cfg, fig_id)   # must not raise


class TestBoundsCommand:
    INSTANCE = {"means": [0.8, 0.6], "f": {"kind": "constant", "c": 1.0},
                "initial_pulls": [1, 1], "n": 10000}

    def test_report_values(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, self.INSTANCE, "inst.json")
        assert main(["bounds", cfg]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["upper_inst_dep"] == pytest.approx(99713.0955055365)
        assert report["lower_bound"] == pytest.approx(11.5129254649702)
        assert report["horizon_condition_ratio"] == "inf"   # L = 0 is vacuous

    def test_out_writes_json_file(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, self.INSTANCE, "inst.json")
        out = tmp_path / "rep"
        assert main(["bounds", cfg, "--out", str(out)]) == 0
        path = capsys.readouterr().out.strip()
        assert path.endswith("bounds.json")
        assert json.load(open(path))["gaps"] == [0.0, pytest.approx(0.2)]

    def test_invalid_instance_exits_2(self, tmp_path, capsys):
        cfg = write_cfg(tmp_path, {"means": [0.5, 2.0],
                                   "f": {"kind": "constant", "c": 1.0},
                                   "initial_pulls": [1, 1], "n": 10},
                        "bad.json")
        assert main(["bounds", cfg]) == 2


class TestCheckLemmas:
    def test_small_budget_passes(self, capsys):
        assert main(["check-lemmas", "--budget", "2", "--seed", "7"]) == 0
        out = capsys.readouterr().out
        assert out.count("PASS") == 4
        assert "FAIL" not in out


class TestCouplingCommand:
    def test_verdict_csv_and_exit(self, tmp_path, capsys):
        out = tmp_path / "c"
        assert main(["coupling", "--n", "400", "--repeats", "4",
                     "--out", str(out)]) == 0
        text = capsys.readouterr().out
        assert "dominance_violations=0" in text
        assert "queue_identity_violations=0" in text
        with open(out / "coupling_verdicts.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 4
        assert [r["seed"] for r in rows] == ["1", "2", "3", "4"]
        assert all(r["dominance_ok"] == "True" for r in rows)
        assert all(int(r["bias_count_opt"]) + int(r["bias_count_subopt"])
                   == 400 for r in rows)


def test_console_script_installed(tmp_path):
    exe = shutil.which("affinity-bandits")
    if exe is None:
        pytest.skip("console script not on PATH")
    cfg = tmp_path / "inst.json"
    cfg.write_text(json.dumps(TestBoundsCommand.INSTANCE))
    proc = subprocess.run([exe, "bounds", str(cfg)], capture_output=True,
                          text=True, timeout=120)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["upper_inst_dep"] == pytest.approx(
        99713.0955055365)


def test_module_entry_matches_script(tmp_path):
    cfg = tmp_path / "inst.json"
    cfg.write_text(json.dumps(TestBoundsCommand.INSTANCE))
    proc = subprocess.run([sys.executable, "-m", "affinity_bandits.cli",
                           "bounds", str(cfg)],
                          capture_output=True, text=True, timeout=120)
    assert proc.returncode == 0
    assert "upper_inst_dep" in proc.stdout
