"""CLI commands: artifact emission, validation, determinism, sweep/probe shapes."""
import json
import os
import subprocess
import sys

import qffn.cli as cli
from qffn.cli import cmd_ablate, cmd_probe, cmd_sweep, cmd_train, main
from qffn.training import TrainingDiverged

TINY_MODEL = {"hidden": 16, "num_layers": 1, "num_heads": 1,
              "intermediate": 32, "max_seq_len": 16}
TINY_TRAIN = {"max_epochs": 1, "batch_size": 8}


def write_config(tmp_path, name="run.json", **overrides):
    doc = {
        "out_dir": str(tmp_path / "out"),
        "seed": 42,
        "task": {"kind": "synth", "num_train": 24, "num_val": 12, "num_classes": 2},
        "model": {"ffn_kind": "qffn", "pqc_layers": 1, **TINY_MODEL},
        "train": dict(TINY_TRAIN),
    }
    doc.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path, doc


class TestTrainCommand:
    def test_writes_all_artifacts(self, tmp_path, capsys):
        config, doc = write_config(tmp_path)
        assert cmd_train(config) == 0
        out = tmp_path / "out"
        for name in ("metrics.json", "epochs.csv", "weights.bin", "weights.json", "config.json"):
            assert (out / name).exists(), name
        assert not list(out.glob("*.tmp"))
        assert (out / "config.json").read_text() == config.read_text()
        summary = capsys.readouterr().out
        assert "val_acc=" in summary and "wall_clock_s=" in summary

    def test_metrics_schema(self, tmp_path):
        config, _ = write_config(tmp_path)
        assert cmd_train(config) == 0
        doc = json.loads((tmp_path / "out" / "metrics.json").read_text())
        assert set(doc) == {
            "validation_accuracy", "training_accuracy", "gap", "accuracy_per_param",
            "param_total", "epochs", "wall_clock_s", "config_echo",
        }
        assert doc["gap"] == doc["training_accuracy"] - doc["validation_accuracy"]
        assert doc["wall_clock_s"] is None
        assert set(doc["epochs"][0]) == {"epoch", "train_loss", "val_loss", "train_acc", "val_acc"}
        assert doc["config_echo"]["seed"] == 42
        header = (tmp_path / "out" / "epochs.csv").read_text().splitlines()[0]
        assert header == "epoch,train_loss,val_loss,train_acc,val_acc"

    def test_rerun_is_byte_identical(self, tmp_path):
        config, _ = write_config(tmp_path)
        assert cmd_train(config) == 0
        out = tmp_path / "out"
        first = {n: (out / n).read_bytes() for n in ("metrics.json", "epochs.csv", "weights.bin")}
        assert cmd_train(config) == 0
        for name, blob in first.items():
            assert (out / name).read_bytes() == blob, name

    def test_byte_identity_across_processes_and_hash_seeds(self, tmp_path):
        config, _ = write_config(tmp_path)
        blobs = []
        for hash_seed in ("1", "2"):
            env = {**os.environ, "PYTHONHASHSEED": hash_seed}
            run = subprocess.run(
                [sys.executable, "-m", "qffn.cli", "train", "--config", str(config)],
                capture_output=True, text=True, env=env,
            )
            assert run.returncode == 0, run.stderr
            blobs.append(
                tuple((tmp_path / "out" / n).read_bytes()
                      for n in ("metrics.json", "epochs.csv", "weights.bin"))
            )
        assert blobs[0] == blobs[1]

    def test_strict_depths_rejects_off_grid(self, tmp_path, capsys):
        config, _ = write_config(
            tmp_path, model={"ffn_kind": "qffn", "pqc_layers": 3, **TINY_MODEL},
            strict_depths=True,
        )
        assert cmd_train(config) == 1
        assert not (tmp_path / "out").exists()
        assert "pqc_layers" in capsys.readouterr().err

    def test_off_grid_depth_allowed_without_strict_flag(self, tmp_path):
        config, _ = write_config(
            tmp_path, model={"ffn_kind": "qffn", "pqc_layers": 3, **TINY_MODEL}
        )
        assert cmd_train(config) == 0

    def test_missing_dataset_path_leaves_no_outputs(self, tmp_path, capsys):
        config, _ = write_config(
            tmp_path,
            task={"kind": "tsv", "train_path": str(tmp_path / "none.tsv"),
                  "val_path": str(tmp_path / "none.tsv")},
        )
        assert cmd_train(config) == 1
        assert not (tmp_path / "out").exists()
        assert "task.train_path" in capsys.readouterr().err

    def test_unknown_field_named_in_error(self, tmp_path, capsys):
        config, _ = write_config(tmp_path, typo_field=1)
        assert cmd_train(config) == 1
        assert "typo_field" in capsys.readouterr().err

    def test_per_section_seed_rejected(self, tmp_path, capsys):
        config, _ = write_config(tmp_path, train={"seed": 1, **TINY_TRAIN})
        assert cmd_train(config) == 1
        assert "train.seed" in capsys.readouterr().err

    def test_seed_override_changes_results(self, tmp_path):
        config, _ = write_config(tmp_path)
        assert cmd_train(config) == 0
        baseline = (tmp_path / "out" / "epochs.csv").read_bytes()
        assert cmd_train(config, seed=7) == 0
        assert (tmp_path / "out" / "epochs.csv").read_bytes() != baseline

    def test_out_override(self, tmp_path):
        config, _ = write_config(tmp_path)
        other = tmp_path / "elsewhere"
        assert cmd_train(config, out=other) == 0
        assert (other / "metrics.json").exists()

    def test_tsv_task_end_to_end(self, tmp_path):
        train_file = tmp_path / "train.tsv"
        val_file = tmp_path / "val.tsv"
        rows = [("good fine nice", 1), ("bad awful poor", 0)] * 8
        train_file.write_text("".join(f"{t}\t{l}\n" for t, l in rows))
        val_file.write_text("good fine\t1\nbad poor\t0\n")
        config, _ = write_config(
            tmp_path,
            task={"kind": "tsv", "train_path": str(train_file),
                  "val_path": str(val_file), "num_classes": 2},
        )
        assert cmd_train(config) == 0


class TestSweepCommand:
    def sweep_config(self, tmp_path, **overrides):
        return write_config(
            tmp_path,
            sweep={"depths": [1, 2], "fractions": [1.0, 0.5]},
            **overrides,
        )

    def test_grid_rows_and_cells(self, tmp_path):
        config, _ = self.sweep_config(tmp_path)
        assert cmd_sweep(config) == 0
        out = tmp_path / "out"
        lines = (out / "table.csv").read_text().strip().split("\n")
        assert lines[0] == "model,layers,fraction,val_acc,train_acc,gap,acc_per_param"
        assert len(lines) == 1 + 2 * 2 + 2  # grid rows + classical baselines
        classical = [l for l in lines[1:] if l.startswith("classical,-,")]
        assert len(classical) == 2
        assert (out / "cells" / "qffn_L2_frac0.5" / "metrics.json").exists()
        assert (out / "cells" / "classical_frac1" / "epochs.csv").exists()

    def test_rerun_is_byte_identical(self, tmp_path):
        config, _ = self.sweep_config(tmp_path)
        assert cmd_sweep(config) == 0
        table = (tmp_path / "out" / "table.csv").read_bytes()
        assert cmd_sweep(config) == 0
        assert (tmp_path / "out" / "table.csv").read_bytes() == table

    def test_missing_sweep_section(self, tmp_path, capsys):
        config, _ = write_config(tmp_path)
        assert cmd_sweep(config) == 1
        assert "sweep" in capsys.readouterr().err

    def test_cell_failures_recorded_and_flagged(self, tmp_path, monkeypatch):
        config, _ = self.sweep_config(tmp_path)
        real_train = cli.train

        def failing_train(model_cfg, train_cfg, *args, **kwargs):
            if model_cfg.pqc_layers == 2:
                raise TrainingDiverged("synthetic failure for test")
            return real_train(model_cfg, train_cfg, *args, **kwargs)

        monkeypatch.setattr(cli, "train", failing_train)
        assert cmd_sweep(config) == 1
        out = tmp_path / "out"
        failures = (out / "failures.csv").read_text()
        assert "qffn_L2_frac1" in failures and "synthetic failure" in failures
        table = (out / "table.csv").read_text()
        assert "qffn,2," not in table and "qffn,1," in table

    def test_classical_kind_rejected_for_sweep(self, tmp_path, capsys):
        config, _ = self.sweep_config(
            tmp_path, model={"ffn_kind": "classical", **TINY_MODEL}
        )
        assert cmd_sweep(config) == 1
        assert "ffn_kind" in capsys.readouterr().err

    def test_ablate_forces_vanilla(self, tmp_path):
        config, _ = self.sweep_config(tmp_path)
        assert cmd_ablate(config) == 0
        table = (tmp_path / "out" / "table.csv").read_text()
        assert "vanilla_qffn,1," in table and "qffn,1," not in table.replace("vanilla_qffn", "")
        assert (tmp_path / "out" / "cells" / "vanilla_qffn_L1_frac1" / "metrics.json").exists()


class TestProbeCommand:
    def probe_config(self, tmp_path, **probe_overrides):
        probe = {"depths": [1, 2], "variants": ["optimized", "vanilla"], "num_samples": 30}
        probe.update(probe_overrides)
        return write_config(tmp_path, probe=probe)

    def test_rows_and_determinism(self, tmp_path):
        config, _ = self.probe_config(tmp_path)
        assert cmd_probe(config) == 0
        out = tmp_path / "out" / "probe.csv"
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "depth,variant,variance,num_samples,seed"
        assert len(lines) == 5  # 2 depths x 2 variants
        blob = out.read_bytes()
        assert cmd_probe(config) == 0
        assert out.read_bytes() == blob

    def test_sample_floor_enforced(self, tmp_path, capsys):
        config, _ = self.probe_config(tmp_path, num_samples=10)
        assert cmd_probe(config) == 1
        assert not (tmp_path / "out").exists()
        assert "num_samples" in capsys.readouterr().err

    def test_missing_probe_section(self, tmp_path, capsys):
        config, _ = write_config(tmp_path)
        assert cmd_probe(config) == 1
        assert "probe" in capsys.readouterr().err


class TestMain:
    def test_dispatch_and_exit_codes(self, tmp_path):
        config, _ = write_config(tmp_path)
        assert main(["train", "--config", str(config)]) == 0
        assert main(["train", "--config", str(tmp_path / "missing.json")]) == 1

    def test_strict_depth_flag(self, tmp_path):
        config, _ = write_config(
            tmp_path, model={"ffn_kind": "qffn", "pqc_layers": 3, **TINY_MODEL}
        )
        assert main(["train", "--config", str(config), "--strict-depths"]) == 1

    def test_probe_via_main_with_overrides(self, tmp_path):
        config, _ = write_config(
            tmp_path, probe={"depths": [1], "variants": ["optimized"], "num_samples": 30}
        )
        other = tmp_path / "probe_out"
        assert main(["probe", "--config", str(config), "--out", str(other), "--seed", "3"]) == 0
        text = (other / "probe.csv").read_text()
        assert text.strip().split("\n")[1].endswith(",30,3")
