"""Command-line entry point for experiment jobs.

Subcommands:

    train    one fine-tuning run  -> metrics.json, epochs.csv, weights archive
    sweep    depth x fraction grid with classical baselines
             -> per-cell metrics under cells/, combined table.csv
    ablate   sweep with the vanilla quantum block (no internal residual) forced
    probe    gradient-variance probe across depths -> probe.csv

Every artifact is written to a temporary name and atomically renamed, so
output files are either complete or absent, and a rejected config produces no
output at all. The source config file is copied verbatim into the output
directory for provenance; resolved settings are echoed inside metrics.json.
Measured wall-clock time is printed on stdout but stored as null in
metrics.json so that identical configs produce byte-identical files.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .diagnostics import grad_variance_probe, probe_csv
from .encoder import FfnKind, save_model
from .runconfig import ConfigError, RunConfig, build_task_data, load_run_config
from .training import MetricsReport, TrainingDiverged, train

CONFIG_COPY = "config.json"
QUANTUM_KINDS = (FfnKind.QFFN, FfnKind.VANILLA_QFFN)


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _copy_config_verbatim(config: RunConfig, out_dir: Path) -> None:
    target = out_dir / CONFIG_COPY
    if target.exists() and os.path.samefile(config.source_path, target):
        return
    _atomic_write(target, config.source_path.read_text(encoding="utf-8"))


def _metrics_json(report: MetricsReport, echo: dict) -> str:
    doc = {
        "validation_accuracy": report.validation_accuracy,
        "training_accuracy": report.training_accuracy,
        "gap": report.gap,
        "accuracy_per_param": report.accuracy_per_param,
        "param_total": report.param_total,
        "epochs": [
            {
                "epoch": e.epoch,
                "train_loss": e.train_loss,
                "val_loss": e.val_loss,
                "train_acc": e.train_acc,
                "val_acc": e.val_acc,
            }
            for e in report.epochs
        ],
        "wall_clock_s": None,  # measured time goes to stdout; files stay reproducible
        "config_echo": echo,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _epochs_csv(report: MetricsReport) -> str:
    lines = ["epoch,train_loss,val_loss,train_acc,val_acc"]
    for e in report.epochs:
        lines.append(
            f"{e.epoch},{e.train_loss!r},{e.val_loss!r},{e.train_acc!r},{e.val_acc!r}"
        )
    return "\n".join(lines) + "\n"


def _fail(exc: Exception) -> int:
    print(f"error: {exc}", file=sys.stderr)
    return 1


def cmd_train(config_path, out=None, seed=None, strict_depths=None) -> int:
    """Run one training job and write its artifacts; returns the exit code."""
    try:
        rc = load_run_config(config_path, out, seed, strict_depths)
        train_set, val_set, vocab = build_task_data(rc)
        model_cfg = rc.model_config(len(vocab), train_set.num_classes)
        train_cfg = rc.train_config()
        model, report = train(model_cfg, train_cfg, train_set, val_set, vocab)
    except (ConfigError, TrainingDiverged, ValueError, OSError) as exc:
        return _fail(exc)

    out_dir = rc.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _copy_config_verbatim(rc, out_dir)
    echo = rc.echo(resolved_model=_model_echo(model_cfg), train_fraction=train_cfg.fraction)
    _atomic_write(out_dir / "metrics.json", _metrics_json(report, echo))
    _atomic_write(out_dir / "epochs.csv", _epochs_csv(report))
    save_model(model, out_dir)
    print(report.summary_line())
    return 0


def _model_echo(model_cfg) -> dict:
    echo = dict(model_cfg.__dict__)
    echo["ffn_kind"] = model_cfg.ffn_kind.value
    return echo


def _sweep_kind(rc: RunConfig, forced_kind: FfnKind | None) -> FfnKind:
    if forced_kind is not None:
        return forced_kind
    kind = FfnKind(rc.model.get("ffn_kind", FfnKind.QFFN))
    if kind not in QUANTUM_KINDS:
        raise ConfigError(
            "model.ffn_kind", "depth sweeps need a quantum feedforward kind"
        )
    return kind


def _run_sweep(config_path, out, seed, strict_depths, forced_kind: FfnKind | None) -> int:
    try:
        rc = load_run_config(config_path, out, seed, strict_depths)
        if rc.sweep is None:
            raise ConfigError("sweep", "required field is missing")
        kind = _sweep_kind(rc, forced_kind)
        depths = rc.sweep["depths"]
        fractions = rc.sweep["fractions"]
        if rc.strict_depths:
            for d in depths:
                if d not in (1, 2, 4, 8):
                    raise ConfigError("sweep.depths", f"depth {d} not in the benchmark grid (1, 2, 4, 8)")
        train_set, val_set, vocab = build_task_data(rc)
    except (ConfigError, ValueError, OSError) as exc:
        return _fail(exc)

    cells = []
    if rc.sweep.get("include_classical", True):
        for fraction in fractions:
            cells.append((FfnKind.CLASSICAL, None, fraction))
    for depth in depths:
        for fraction in fractions:
            cells.append((kind, depth, fraction))

    out_dir = rc.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _copy_config_verbatim(rc, out_dir)

    rows = []
    failures = []
    for cell_kind, depth, fraction in cells:
        name = (
            f"classical_frac{fraction:g}"
            if depth is None
            else f"{cell_kind.value}_L{depth}_frac{fraction:g}"
        )
        try:
            overrides = {"ffn_kind": cell_kind}
            if depth is not None:
                overrides["pqc_layers"] = depth
            model_cfg = rc.model_config(len(vocab), train_set.num_classes, **overrides)
            train_cfg = rc.train_config(fraction)
            _, report = train(model_cfg, train_cfg, train_set, val_set, vocab)
        except (ConfigError, TrainingDiverged, ValueError) as exc:
            failures.append((name, str(exc)))
            print(f"{name}: failed: {exc}", file=sys.stderr)
            continue
        cell_dir = out_dir / "cells" / name
        cell_dir.mkdir(parents=True, exist_ok=True)
        echo = rc.echo(resolved_model=_model_echo(model_cfg), train_fraction=fraction)
        _atomic_write(cell_dir / "metrics.json", _metrics_json(report, echo))
        _atomic_write(cell_dir / "epochs.csv", _epochs_csv(report))
        rows.append(
            f"{cell_kind.value},{'-' if depth is None else depth},{fraction!r},"
            f"{report.validation_accuracy!r},{report.training_accuracy!r},"
            f"{report.gap!r},{report.accuracy_per_param!r}"
        )
        print(f"{name}: {report.summary_line()}")

    header = "model,layers,fraction,val_acc,train_acc,gap,acc_per_param"
    _atomic_write(out_dir / "table.csv", "\n".join([header, *rows]) + "\n")
    if failures:
        lines = ["cell,error"] + [f"{name},{msg!r}" for name, msg in failures]
        _atomic_write(out_dir / "failures.csv", "\n".join(lines) + "\n")
        return 1
    return 0


def cmd_sweep(config_path, out=None, seed=None, strict_depths=None) -> int:
    """Depth x fraction grid plus classical baselines; one metrics set per cell."""
    return _run_sweep(config_path, out, seed, strict_depths, forced_kind=None)


def cmd_ablate(config_path, out=None, seed=None, strict_depths=None) -> int:
    """Sweep with the vanilla quantum block (no internal residual) forced on."""
    return _run_sweep(config_path, out, seed, strict_depths, forced_kind=FfnKind.VANILLA_QFFN)


def cmd_probe(config_path, out=None, seed=None) -> int:
    """Gradient-variance probe over depths and variants; writes probe.csv."""
    try:
        rc = load_run_config(config_path, out, seed)
        if rc.probe is None:
            raise ConfigError("probe", "required field is missing")
        results = [
            grad_variance_probe(variant, rc.probe["depths"], rc.probe["num_samples"], rc.seed)
            for variant in rc.probe["variants"]
        ]
    except (ConfigError, ValueError, OSError) as exc:
        return _fail(exc)
    out_dir = rc.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    _copy_config_verbatim(rc, out_dir)
    _atomic_write(out_dir / "probe.csv", probe_csv(*results))
    for result in results:
        for entry in result.entries:
            print(
                f"variant={entry.variant} depth={entry.depth} "
                f"variance={entry.variance:.6g} samples={entry.num_samples}"
            )
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qffn",
        description="Experiments on a compact text encoder with quantum feedforward blocks.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "train": "run one training job",
        "sweep": "run a depth x fraction grid with classical baselines",
        "ablate": "run the sweep with the vanilla quantum block",
        "probe": "measure gradient variance across circuit depths",
    }
    for name, help_text in specs.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", default=None, help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, default=None, help="seed override")
        if name != "probe":
            p.add_argument(
                "--strict-depths",
                action="store_true",
                default=None,
                help="reject circuit depths outside the benchmark grid {1,2,4,8}",
            )
    args = parser.parse_args(argv)
    if args.command == "train":
        return cmd_train(args.config, args.out, args.seed, args.strict_depths)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.seed, args.strict_depths)
    if args.command == "ablate":
        return cmd_ablate(args.config, args.out, args.seed, args.strict_depths)
    return cmd_probe(args.config, args.out, args.seed)


if __name__ == "__main__":
    sys.exit(main())
