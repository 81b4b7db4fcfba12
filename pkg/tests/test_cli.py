"""Command-line interface tests, run in process through cli.main."""

import json

import numpy as np
import pytest
import yaml

from exbc import cli


@pytest.fixture()
def chain_yaml(tmp_path):
    cfg = {
        "env": {"name": "chain", "params": {"gamma": 0.9, "horizon": 6}},
        "tasks": {"main": "reach_goal", "auxiliary": [], "examples_per_task": 4},
        "scheduler": {"num_periods": 1, "use_default_trajectories": False},
        "approx": {"hidden": [8]},
        "trainer": {"total": 120, "warmup": 10, "exploration": 20,
                    "batch_size": 8, "eval_every": 60, "eval_episodes": 2,
                    "metrics_every": 30, "seed": 0},
    }
    path = tmp_path / "chain.yaml"
    path.write_text(yaml.safe_dump(cfg))
    return path


def run_dir_after_train(tmp_path, chain_yaml):
    run_dir = tmp_path / "run"
    code = cli.main(["train", str(chain_yaml), "--run-dir", str(run_dir)])
    assert code == 0
    return run_dir


class TestTrain:
    def test_writes_run_artifacts(self, tmp_path, chain_yaml, capsys):
        run_dir = run_dir_after_train(tmp_path, chain_yaml)
        assert (run_dir / "config.yaml").exists()
        assert (run_dir / "metadata.json").exists()
        assert (run_dir / "metrics.jsonl").exists()
        assert (run_dir / "checkpoint.npz").exists()
        assert (run_dir / "examples" / "reach_goal.txt").exists()
        out = capsys.readouterr().out
        assert "reach_goal" in out

    def test_resolved_config_contains_defaults(self, tmp_path, chain_yaml):
        run_dir = run_dir_after_train(tmp_path, chain_yaml)
        resolved = yaml.safe_load((run_dir / "config.yaml").read_text())
        assert resolved["trainer"]["total"] == 120
        assert resolved["penalty"]["kind"] == "hinge"  # default merged in

    def test_overrides_take_effect(self, tmp_path, chain_yaml):
        run_dir = tmp_path / "r2"
        code = cli.main(["train", str(chain_yaml), "--run-dir", str(run_dir),
                         "-o", "trainer.total=60", "-o", "trainer.eval_every=0"])
        assert code == 0
        resolved = yaml.safe_load((run_dir / "config.yaml").read_text())
        assert resolved["trainer"]["total"] == 60

    def test_missing_config_is_usage_error(self, tmp_path):
        code = cli.main(["train", str(tmp_path / "nope.yaml")])
        assert code == 2

    def test_bad_override_is_usage_error(self, tmp_path, chain_yaml):
        code = cli.main(["train", str(chain_yaml), "--run-dir",
                         str(tmp_path / "r3"), "-o", "trainer.bogus=1"])
        assert code == 2

    def test_run_root_env_var(self, tmp_path, chain_yaml, monkeypatch):
        root = tmp_path / "root"
        monkeypatch.setenv(cli.RUN_ROOT_VAR, str(root))
        code = cli.main(["train", str(chain_yaml)])
        assert code == 0
        runs = list(root.iterdir())
        assert len(runs) == 1
        assert (runs[0] / "metrics.jsonl").exists()


class TestEval:
    def test_eval_writes_summary(self, tmp_path, chain_yaml, capsys):
        run_dir = run_dir_after_train(tmp_path, chain_yaml)
        code = cli.main(["eval", str(run_dir), "--episodes", "3"])
        assert code == 0
        table = (run_dir / "eval_summary.tsv").read_text().splitlines()
        assert table[0].startswith("task\t")
        assert any("reach_goal" in line for line in table[1:])

    def test_eval_missing_run_dir_is_runtime_error(self, tmp_path):
        code = cli.main(["eval", str(tmp_path / "ghost")])
        assert code == 3


class TestDiagnose:
    def test_writes_trace_table(self, tmp_path, chain_yaml, capsys):
        run_dir = run_dir_after_train(tmp_path, chain_yaml)
        code = cli.main(["diagnose", str(run_dir), "--episode-seed", "5"])
        assert code == 0
        trace = (run_dir / "qtrace_reach_goal.tsv").read_text().splitlines()
        assert trace[0] == "t\tgap"
        assert len(trace) == 1 + 6  # one row per step of the episode horizon
        out = capsys.readouterr().out
        assert "max gap" in out


class TestExportTable:
    def test_pools_runs_into_table(self, tmp_path, chain_yaml):
        dirs = []
        for seed in (0, 1):
            run_dir = tmp_path / f"seed{seed}"
            code = cli.main(["train", str(chain_yaml), "--run-dir", str(run_dir),
                             "-o", f"trainer.seed={seed}"])
            assert code == 0
            dirs.append(str(run_dir))
        out = tmp_path / "table.tsv"
        code = cli.main(["export-table", *dirs, "--out", str(out),
                         "--resamples", "50"])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "task\tstep\tiqm\tci_low\tci_high"
        assert len(lines) == 3  # eval points at 60 and 120

    def test_missing_metrics_is_runtime_error(self, tmp_path):
        code = cli.main(["export-table", str(tmp_path)])
        assert code == 3


class TestDeterminism:
    def test_same_seed_same_metrics_stream(self, tmp_path, chain_yaml):
        streams = []
        for name in ("a", "b"):
            run_dir = tmp_path / name
            assert cli.main(["train", str(chain_yaml),
                             "--run-dir", str(run_dir)]) == 0
            streams.append((run_dir / "metrics.jsonl").read_bytes())
        assert streams[0] == streams[1]
