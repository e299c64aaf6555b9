"""
Command line entry point.

    train     fit one framework on one dataset, write checkpoints + losses
    probe     linear probe on a trained run (+ sweep, faithfulness, embeddings)
    generate  sample windows from a run's generator (+ reconstruction pairs)
    ablation  Guided-GAN against its lambda = 0 corner under one seed
    report    comparison table over several run directories

Exit codes: 0 success, 1 runtime failure, 2 usage error, 130 interrupted.
"""
import argparse
import logging
import os
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from guided_gan.datapipe import (
    DatasetSplit,
    SynthHARConfig,
    ingest_ucihar,
    load_mnist,
    save_split_cache,
    synth_har,
    windows_from_arrays,
)
from guided_gan.evalkit import (
    PeriodicProbe,
    ProbeResult,
    bigan_ablation,
    export_embeddings,
    faithfulness_study,
    label_fraction_sweep,
    probe_bundle,
)
from guided_gan.exceptions import (
    ArtifactExistsError,
    ConfigError,
    IngestionError,
    ShapeError,
    TrainingDiverged,
    UnsupportedOperation,
)
from guided_gan.frameworks import generate, load_checkpoint, reconstruct_array, train
from guided_gan.helpers import plots
from guided_gan.helpers.artifacts import (
    RunManifest,
    dataset_fingerprint,
    prepare_run_dir,
    read_csv,
    read_json,
    write_csv,
    write_json_atomic,
)
from guided_gan.helpers.config_loader import (
    FRAMEWORK_IDS,
    DATASET_IDS,
    AppConfig,
    DataConfig,
    dump_config,
    load_config,
)
from guided_gan.helpers.logger import attach_file_handler, detach_file_handler, set_level, set_log_context, setup_logger
from guided_gan.helpers.run_context import RunContext

logger = setup_logger("guided_gan")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INTERRUPTED = 130

USAGE_ERRORS = (ConfigError, ArtifactExistsError, UnsupportedOperation, ShapeError, IngestionError, FileNotFoundError)

REPORT_COLUMNS = ("run", "framework", "dataset", "seed", "accuracy", "macro_f1",
                  "trainable_params", "frozen_params", "trainable_ratio")


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def non_negative_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {text}")
    return value


def fraction_list(text: str) -> tuple:
    try:
        values = tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated fractions, got {text!r}")
    if not values or any(not (0.0 < v <= 1.0) for v in values):
        raise argparse.ArgumentTypeError(f"fractions must lie in (0, 1], got {text!r}")
    return values


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="Path to a flat YAML config (default: config/config.yaml)")
    p.add_argument("--force", action="store_true", default=None, help="Overwrite existing outputs")
    p.add_argument("--verbose", action="store_true", default=None, help="Enable debug-level logging")


def _data_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dataset", choices=DATASET_IDS)
    p.add_argument("--root", help="Dataset directory (UCI HAR / MNIST)")


def _train_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--framework", choices=FRAMEWORK_IDS)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--lambda-x", dest="lambda_x", type=non_negative_float)
    p.add_argument("--lambda-z", dest="lambda_z", type=non_negative_float)
    p.add_argument("--out", help="Run directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="guided-gan",
        description="Recurrent generative representation learning for sequences",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train one framework")
    _common(p)
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--probe-every", dest="probe_every", type=int,
                   help="Run the linear probe every N epochs (writes probe_curve.csv)")

    p = sub.add_parser("probe", help="Linear probe on a trained run")
    _common(p)
    _data_flags(p)
    p.add_argument("run", help="Run directory produced by `train`")
    p.add_argument("--checkpoint", help="Checkpoint file (default: latest in the run)")
    p.add_argument("--framework", choices=FRAMEWORK_IDS, help="Expected framework of the checkpoint")
    p.add_argument("--features", choices=("encoder", "discriminator"), default="encoder")
    p.add_argument("--fractions", type=fraction_list, help="Label-fraction sweep, e.g. 0.1,1.0")
    p.add_argument("--runs", type=int, help="Runs per sweep fraction")
    p.add_argument("--faithfulness", action="store_true", help="Run the reconstruction faithfulness study")
    p.add_argument("--export-embeddings", dest="export_embeddings", action="store_true",
                   help="Write test-split features to embeddings.txt")

    p = sub.add_parser("generate", help="Sample from a run's generator")
    _common(p)
    _data_flags(p)
    p.add_argument("run", help="Run directory produced by `train`")
    p.add_argument("--checkpoint")
    p.add_argument("-n", type=int, default=16, help="Number of windows to generate")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reconstruct", type=int, default=0, metavar="N",
                   help="Also reconstruct the first N test windows")

    p = sub.add_parser("ablation", help="Guided-GAN vs its lambda = 0 corner")
    _common(p)
    _data_flags(p)
    _train_flags(p)
    p.add_argument("--eval-every", dest="eval_every", type=int, default=10)

    p = sub.add_parser("report", help="Compare probe results across runs")
    _common(p)
    p.add_argument("runs", nargs="*", help="Run directories")
    p.add_argument("--out", help="Report directory (default: ./report)")
    return parser


# ---------------------------------------------------------------------------
# Shared plumbing
# ---------------------------------------------------------------------------

def _overrides(args: argparse.Namespace, keys) -> Dict[str, Any]:
    return {k: getattr(args, k, None) for k in keys}


def _resolve(base_dir: Path, root: Optional[str]) -> Optional[Path]:
    if root is None:
        return None
    p = Path(os.path.expanduser(root))
    return p if p.is_absolute() else base_dir / p


def check_dataset_path(cfg: AppConfig) -> None:
    """Usage-level validation of dataset locations, before any compute."""
    data = cfg.data
    if data.dataset == "synth_har":
        return
    root = data.root
    if root is None and data.dataset == "mnist":
        root = os.environ.get("GUIDED_GAN_MNIST_ROOT")
    root = _resolve(cfg.base_dir, root)
    if root is None:
        raise ConfigError(f"dataset {data.dataset!r} needs --root")
    if not root.is_dir() and not (data.dataset == "mnist" and data.mnist_download):
        raise ConfigError(f"dataset root {root} is not a readable directory")


def load_split(cfg: AppConfig) -> DatasetSplit:
    data: DataConfig = cfg.data
    if data.dataset == "synth_har":
        return synth_har(SynthHARConfig(
            num_classes=data.synth_classes, channels=data.synth_channels, window=data.window,
            per_class=data.synth_per_class, noise=data.synth_noise, seed=data.seed,
        ))
    if data.dataset == "ucihar":
        return ingest_ucihar(_resolve(cfg.base_dir, data.root), target_hz=data.resample_hz,
                             window=data.window, stride=data.stride)
    root = _resolve(cfg.base_dir, data.root or os.environ.get("GUIDED_GAN_MNIST_ROOT"))
    return load_mnist(root, train_limit=data.mnist_train_limit, seed=data.seed, download=data.mnist_download)


def _seeds(cfg: AppConfig) -> Dict[str, int]:
    return {"data": cfg.data.seed, "framework": cfg.framework.seed, "probe": cfg.probe.seed}


def latest_checkpoint(run_dir: Path) -> Path:
    ckpts = sorted((run_dir / "checkpoints").glob("epoch_*.pt"))
    if not ckpts:
        raise FileNotFoundError(f"no checkpoints under {run_dir / 'checkpoints'}")
    return ckpts[-1]


def _adopt_checkpoints(manifest: RunManifest) -> None:
    for p in sorted((manifest.run_dir / "checkpoints").glob("*.pt")):
        manifest.register(f"checkpoint_{p.stem}", p)


def _run_config(run_dir: Path, args: argparse.Namespace, keys) -> AppConfig:
    snapshot = run_dir / "config.yaml"
    if not snapshot.exists():
        raise FileNotFoundError(f"{run_dir} has no config.yaml snapshot")
    return load_config(str(snapshot), _overrides(args, keys))


def _guarded(command: str, manifest_factory: Callable[[], Optional[RunManifest]],
             body: Callable[[RunManifest, RunContext], None]) -> int:
    """Run ``body`` with a manifest that is finalized on every exit path."""
    manifest = manifest_factory()
    ctx = RunContext()
    handler = None
    if manifest is not None:
        set_log_context(run=manifest.data["run_id"])
        log_path = manifest.run_dir / "run.log"
        handler = attach_file_handler(log_path)
        manifest.register("log", log_path)
    status, error, code = "completed", None, EXIT_OK
    try:
        body(manifest, ctx)
    except KeyboardInterrupt:
        status, error, code = "interrupted", "interrupted by user", EXIT_INTERRUPTED
        logger.warning(f"{command} interrupted by user")
    except TrainingDiverged as e:
        status, error, code = "failed", f"{e} (step {e.step}, last checkpoint {e.last_checkpoint})", EXIT_FAILURE
        logger.error(f"{command} failed: {error}")
    except USAGE_ERRORS as e:
        status, error, code = "failed", f"{type(e).__name__}: {e}", EXIT_USAGE
        logger.error(f"{command}: {e}")
    except Exception as e:
        status, error, code = "failed", f"{type(e).__name__}: {e}", EXIT_FAILURE
        logger.exception(f"{command} failed")
    finally:
        if manifest is not None:
            if command in ("train", "ablation"):
                _adopt_checkpoints(manifest)
            manifest.record_timings(ctx.timings)
            manifest.finalize(status, error)
        detach_file_handler(handler)
        set_log_context(run="-")
    logger.info(f"{command.upper()} END {'OK' if code == EXIT_OK else status.upper()}")
    return code


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

TRAIN_KEYS = ("framework", "dataset", "root", "epochs", "seed", "lambda_x", "lambda_z", "out", "force",
              "probe_every", "verbose")


def _new_run(cfg: AppConfig, command: str, default_name: str) -> RunManifest:
    run_dir = Path(cfg.run.out) if cfg.run.out else cfg.base_dir / "runs" / default_name
    prepare_run_dir(run_dir, force=cfg.run.force)
    manifest = RunManifest.create(run_dir, command, cfg.snapshot(), cfg.config_hash, _seeds(cfg))
    config_path = manifest.artifact_path("config", "config.yaml")
    dump_config(cfg, config_path)
    return manifest


def cmd_train(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args, TRAIN_KEYS))
    check_dataset_path(cfg)
    fw = cfg.framework

    def body(manifest: RunManifest, ctx: RunContext) -> None:
        with ctx.step(logger, "load_data", dataset=cfg.data.dataset):
            split = load_split(cfg)
            manifest.data["dataset_fingerprint"] = dataset_fingerprint(split)
            manifest.save()
        manifest.artifact_path("losses", "losses.csv")

        tracker = None
        if cfg.run.probe_every > 0:
            tracker = PeriodicProbe(split, cfg.probe, cfg.run.probe_every, fw.epochs,
                                    csv_path=manifest.artifact_path("probe_curve", "probe_curve.csv"))
        try:
            with ctx.step(logger, "train", framework=fw.framework, epochs=fw.epochs, seed=fw.seed):
                _, record = train(fw, split, run_dir=manifest.run_dir, on_epoch_end=tracker)
        finally:
            if tracker is not None:
                tracker.close()

        write_json_atomic(manifest.artifact_path("training", "training.json"), record.to_dict())
        if record.epochs:
            plots.plot_loss_curves(record.epochs, manifest.artifact_path("loss_curves", "loss_curves.png"),
                                   title=f"{fw.framework} on {split.name}")

    name = f"{fw.framework}_{cfg.data.dataset}_seed{fw.seed}"
    return _guarded("train", lambda: _new_run(cfg, "train", name), body)


PROBE_KEYS = ("dataset", "root", "force", "verbose")


def cmd_probe(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    manifest = RunManifest.load(run_dir)
    cfg = _run_config(run_dir, args, PROBE_KEYS)
    if args.fractions:
        cfg = replace(cfg, probe=replace(cfg.probe, fractions=args.fractions))
    if args.runs:
        cfg = replace(cfg, probe=replace(cfg.probe, runs=args.runs))
    force = bool(args.force)

    def body(manifest: RunManifest, ctx: RunContext) -> None:
        ckpt = Path(args.checkpoint) if args.checkpoint else latest_checkpoint(run_dir)
        bundle = load_checkpoint(ckpt)
        if args.framework and args.framework != bundle.framework:
            raise ConfigError(f"checkpoint {ckpt} holds framework {bundle.framework!r}, not {args.framework!r}")
        with ctx.step(logger, "load_data", dataset=cfg.data.dataset):
            split = load_split(cfg)
        if split.channels != bundle.channels:
            raise ShapeError(f"checkpoint expects {bundle.channels} channels, dataset has {split.channels}")

        with ctx.step(logger, "probe", checkpoint=ckpt.name, features=args.features):
            result = probe_bundle(bundle, split, cfg.probe, source=args.features)
        write_json_atomic(manifest.artifact_path("probe", "probe.json", force=force), result.to_dict())
        plots.plot_confusion(result.confusion, manifest.artifact_path("confusion", "confusion.png", force=force),
                             title=f"{bundle.framework}: accuracy {result.accuracy:.3f}")
        logger.info(f"accuracy={result.accuracy:.4f} macro_f1={result.macro_f1:.4f} "
                    f"trainable={result.trainable_params} frozen={result.frozen_params}")

        if args.fractions:
            with ctx.step(logger, "sweep", fractions=list(cfg.probe.fractions), runs=cfg.probe.runs):
                curve = label_fraction_sweep(bundle, split, cfg.probe.fractions, cfg.probe.runs, cfg.probe,
                                             source=args.features)
            curve.write_csv(manifest.artifact_path("sweep", "sweep.csv", force=force))
            plots.plot_sweep(curve.summary(), manifest.artifact_path("sweep_plot", "sweep.png", force=force),
                             label=bundle.framework)

        if args.faithfulness:
            with ctx.step(logger, "faithfulness"):
                table = faithfulness_study(bundle, split, cfg.probe, source=args.features)
            write_json_atomic(manifest.artifact_path("faithfulness", "faithfulness.json", force=force),
                              table.to_dict())

        if args.export_embeddings:
            export_embeddings(bundle, split.test,
                              manifest.artifact_path("embeddings", "embeddings.txt", force=force),
                              source=args.features, pooling=cfg.probe.feature_pooling)

    def reopen() -> RunManifest:
        manifest.begin("probe")
        return manifest

    return _guarded("probe", reopen, body)


def cmd_generate(args: argparse.Namespace) -> int:
    run_dir = Path(args.run)
    manifest = RunManifest.load(run_dir)
    cfg = _run_config(run_dir, args, PROBE_KEYS)
    force = bool(args.force)
    if args.n < 1 or args.reconstruct < 0:
        raise ConfigError("-n must be >= 1 and --reconstruct >= 0")

    def body(manifest: RunManifest, ctx: RunContext) -> None:
        ckpt = Path(args.checkpoint) if args.checkpoint else latest_checkpoint(run_dir)
        bundle = load_checkpoint(ckpt)
        with ctx.step(logger, "generate", n=args.n, seed=args.seed):
            values = generate(bundle, args.n, seed=args.seed)
        save_split_cache(manifest.artifact_path("generated", "generated/samples.bin", force=force),
                         windows_from_arrays(values, None, "generated"), num_classes=0, seed=args.seed)
        plots.plot_samples(values, manifest.artifact_path("generated_plot", "generated/samples.png", force=force))

        if args.reconstruct:
            split = load_split(cfg)
            originals = [w for w in split.test[:args.reconstruct]]
            x = np.stack([w.values for w in originals])
            with ctx.step(logger, "reconstruct", n=len(originals)):
                x_rec = reconstruct_array(bundle, x)
            labels = np.array([w.label for w in originals])
            save_split_cache(manifest.artifact_path("reconstructions", "generated/reconstructions.bin", force=force),
                             windows_from_arrays(x_rec, labels, "reconstructed"),
                             num_classes=split.num_classes, seed=args.seed)
            plots.plot_reconstruction_pairs(
                x, x_rec, manifest.artifact_path("reconstruction_plot", "generated/reconstructions.png", force=force))

    def reopen() -> RunManifest:
        manifest.begin("generate")
        return manifest

    return _guarded("generate", reopen, body)


def cmd_ablation(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, _overrides(args, TRAIN_KEYS))
    check_dataset_path(cfg)

    def body(manifest: RunManifest, ctx: RunContext) -> None:
        with ctx.step(logger, "load_data", dataset=cfg.data.dataset):
            split = load_split(cfg)
            manifest.data["dataset_fingerprint"] = dataset_fingerprint(split)
            manifest.save()
        with ctx.step(logger, "ablation", epochs=cfg.framework.epochs, eval_every=args.eval_every):
            record = bigan_ablation(cfg.framework, split, cfg.probe, eval_every=args.eval_every)
        write_json_atomic(manifest.artifact_path("ablation", "ablation.json"), record.to_dict())
        write_csv(manifest.artifact_path("ablation_csv", "ablation.csv"),
                  ("arm", "epoch", "accuracy", "macro_f1", "cycle_error"), record.rows(), "guided-gan/ablation v1")
        plots.plot_ablation(record.to_dict()["arms"], manifest.artifact_path("ablation_plot", "ablation.png"))
        for arm in record.arms:
            logger.info(f"{arm.name}: final accuracy={arm.final_accuracy:.4f} diverged={arm.diverged}")

    name = f"ablation_{cfg.data.dataset}_seed{cfg.framework.seed}"
    return _guarded("ablation", lambda: _new_run(cfg, "ablation", name), body)


def _report_row(run_dir: Path) -> Dict[str, Any]:
    row: Dict[str, Any] = {c: "n/a" for c in REPORT_COLUMNS}
    row["run"] = run_dir.name
    snapshot = run_dir / "config.yaml"
    if snapshot.exists():
        cfg = load_config(str(snapshot))
        row.update(framework=cfg.framework.framework, dataset=cfg.data.dataset, seed=cfg.framework.seed)
    probe_path = run_dir / "probe.json"
    if probe_path.exists():
        result = ProbeResult.from_dict(read_json(probe_path))
        row.update(accuracy=result.accuracy, macro_f1=result.macro_f1, trainable_params=result.trainable_params,
                   frozen_params=result.frozen_params, trainable_ratio=result.trainable_ratio)
    else:
        logger.warning(f"{run_dir}: no probe.json, row marked n/a")
    return row


def render_table(rows: List[Dict[str, Any]]) -> str:
    def fmt(v: Any) -> str:
        return f"{v:.4f}" if isinstance(v, float) else str(v)

    cells = [[fmt(r[c]) for c in REPORT_COLUMNS] for r in rows]
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(REPORT_COLUMNS)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(REPORT_COLUMNS, widths)),
             "  ".join("-" * w for w in widths)]
    lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def _epoch_rows(losses_csv: Path) -> List[Dict[str, float]]:
    by_epoch: Dict[int, List[Dict[str, str]]] = {}
    for r in read_csv(losses_csv):
        by_epoch.setdefault(int(r["epoch"]), []).append(r)
    out = []
    for epoch, rows in sorted(by_epoch.items()):
        summary: Dict[str, float] = {"epoch": epoch}
        for k in rows[0]:
            if k in ("epoch", "step"):
                continue
            vals = [float(r[k]) for r in rows if r[k] != ""]
            if vals:
                summary[k] = float(np.mean(vals))
        out.append(summary)
    return out


def cmd_report(args: argparse.Namespace) -> int:
    if not args.runs:
        raise ConfigError("report needs at least one run directory")
    run_dirs = [Path(r) for r in args.runs]
    missing = [str(r) for r in run_dirs if not r.is_dir()]
    if missing:
        raise ConfigError(f"not a directory: {', '.join(missing)}")
    out_dir = Path(args.out) if args.out else Path.cwd() / "report"

    def new_report() -> RunManifest:
        prepare_run_dir(out_dir, force=bool(args.force))
        return RunManifest.create(out_dir, "report", {"runs": [str(r) for r in run_dirs]}, "", {})

    def body(manifest: RunManifest, ctx: RunContext) -> None:
        with ctx.step(logger, "report", runs=len(run_dirs)):
            rows = [_report_row(r) for r in run_dirs]
        write_csv(manifest.artifact_path("table", "comparison.csv"), REPORT_COLUMNS, rows, "guided-gan/report v1")
        text = render_table(rows)
        manifest.artifact_path("table_text", "comparison.txt").write_text(text, encoding="utf-8")
        for line in text.rstrip("\n").splitlines():
            logger.info(line)
        for i, r in enumerate(run_dirs):
            losses = r / "losses.csv"
            if losses.exists():
                epochs = _epoch_rows(losses)
                if epochs:
                    plots.plot_loss_curves(epochs, manifest.artifact_path(f"loss_curves_{i}", f"{i:02d}_{r.name}_losses.png"),
                                           title=r.name)

    return _guarded("report", new_report, body)


COMMANDS = {
    "train": cmd_train,
    "probe": cmd_probe,
    "generate": cmd_generate,
    "ablation": cmd_ablation,
    "report": cmd_report,
}


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.verbose:
        set_level(logging.DEBUG)

    logger.info("=" * 60)
    logger.info(f"GUIDED-GAN {args.command.upper()} START")
    logger.info("=" * 60)
    try:
        return COMMANDS[args.command](args)
    except KeyboardInterrupt:
        logger.warning("Interrupted by user")
        return EXIT_INTERRUPTED
    except USAGE_ERRORS as e:
        # raised before a manifest exists
        logger.error(f"{args.command}: {e}")
        return EXIT_USAGE
    except Exception:
        logger.exception(f"{args.command} failed")
        return EXIT_FAILURE
    finally:
        if args.verbose:
            set_level(logging.INFO)


if __name__ == "__main__":
    raise SystemExit(main())
