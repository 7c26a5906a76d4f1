"""Command-line entry point wiring data, training, metrics and reporting
into reproducible experiment runs.

Every run directory gets a ``run.json`` with the config, seed, input
hashes and tool version needed to reproduce its outputs. While a command
is writing, a ``.incomplete`` sentinel sits in the output directory; it is
removed only after every requested output landed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .data import load_manifest, save_manifest, synth_incongruity
from .metrics import emit_report, format_row, score_predictions, MetricsReport
from .model import (
    CANONICAL_MODALITIES,
    canonical_order,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    DEFAULT_GRID,
    HyperGrid,
    TrainConfig,
    evaluate,
    grid_search,
    train,
)

SENTINEL = ".incomplete"


def _parse_modalities(spec: str, parser: argparse.ArgumentParser):
    tags = [t.strip() for t in spec.split(",") if t.strip()]
    for t in tags:
        if t not in CANONICAL_MODALITIES:
            parser.error(f"unknown modality {t!r} in --modalities (expected t, a, v)")
    if not tags:
        parser.error("--modalities must name at least one of t, a, v")
    if len(set(tags)) != len(tags):
        parser.error(f"duplicate modality in --modalities {spec!r}")
    return canonical_order(tags)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatefuse",
        description="Gated-fusion sarcasm classification over embedding manifests.",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    p_train = sub.add_parser("train", help="train one fusion model")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--modalities", required=True, help="comma list from {t,a,v}")
    p_train.add_argument("--config", required=True, help="JSON training config")
    p_train.add_argument("--out", required=True, help="output run directory")
    p_train.add_argument("--seed", type=int, default=None, help="override config seed")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint on a split")
    p_eval.add_argument("--manifest", required=True)
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_eval.add_argument("--modalities", default=None,
                        help="optional; must match the checkpoint")
    p_eval.add_argument("--out", required=True)

    p_grid = sub.add_parser("gridsearch", help="train the full hyperparameter grid")
    p_grid.add_argument("--manifest", required=True)
    p_grid.add_argument("--modalities", required=True)
    p_grid.add_argument("--grid", default=None,
                        help="JSON grid file; defaults to the built-in 108-config sweep")
    p_grid.add_argument("--out", required=True)
    p_grid.add_argument("--seed", type=int, default=0)
    p_grid.add_argument("--jobs", type=int, default=1)

    p_score = sub.add_parser("score", help="score an external predictions file")
    p_score.add_argument("--manifest", required=True)
    p_score.add_argument("--predictions", required=True)
    p_score.add_argument("--split", default="test", choices=["train", "val", "test"])
    p_score.add_argument("--out", required=True)
    p_score.add_argument("--format", default="md", choices=["md", "csv"])

    p_synth = sub.add_parser("synth", help="generate the synthetic incongruity dataset")
    p_synth.add_argument("--out", required=True, help="manifest path to write")
    p_synth.add_argument("--n-train", type=int, default=2000)
    p_synth.add_argument("--n-val", type=int, default=500)
    p_synth.add_argument("--n-test", type=int, default=500)
    p_synth.add_argument("--dim", type=int, default=16)
    p_synth.add_argument("--snr", type=float, default=3.0)
    p_synth.add_argument("--seed", type=int, default=7)

    p_report = sub.add_parser("report", help="aggregate run directories into one table")
    p_report.add_argument("--runs", required=True,
                          help="comma list of run directories with metrics.json")
    p_report.add_argument("--format", default="md", choices=["md", "csv"])
    p_report.add_argument("--out", required=True, help="report file to write")

    return parser


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "modalities", None):
        args.modalities = _parse_modalities(args.modalities, parser)
    return args


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_train_config(path: Path, seed_override: int | None) -> TrainConfig:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {"dropout", "learning_rate", "batch_size", "shared_dim", "proj_dim",
             "max_epochs", "patience", "seed"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
    if seed_override is not None:
        raw["seed"] = seed_override
    return TrainConfig(**raw)


def _load_grid(path: Path | None) -> tuple[HyperGrid, int, int]:
    if path is None:
        return DEFAULT_GRID, 100, 10
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    max_epochs = int(raw.pop("max_epochs", 100))
    patience = int(raw.pop("patience", 10))
    return HyperGrid(**raw), max_epochs, patience


class _RunDir:
    """Output directory with a sentinel marking unfinished runs."""

    def __init__(self, out: str):
        self.path = Path(out)
        self.path.mkdir(parents=True, exist_ok=True)
        (self.path / SENTINEL).write_text("run in progress or aborted\n")

    def finish(self) -> None:
        (self.path / SENTINEL).unlink()


def _require_files(*paths) -> None:
    """Inputs are checked up front, before any output is touched."""
    for path in paths:
        if path is not None and not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")


def _cmd_train(args) -> int:
    manifest_path = Path(args.manifest)
    _require_files(manifest_path, args.config)
    manifest = load_manifest(manifest_path)
    cfg = _load_train_config(Path(args.config), args.seed)
    run = _RunDir(args.out)
    params, history = train(manifest, args.modalities, cfg)
    ckpt = run.path / "model.ckpt"
    save_checkpoint(params, ckpt)
    _write_json(run.path / "history.json", history.to_dict())
    _write_json(run.path / "run.json", {
        "verb": "train",
        "tool_version": __version__,
        "modalities": list(args.modalities),
        "config": cfg.to_dict(),
        "manifest": str(manifest_path),
        "manifest_sha256": _sha256(manifest_path),
        "checkpoint_sha256": _sha256(ckpt),
        "best_epoch": history.best_epoch,
        "best_val_weighted_f1": max(history.val_weighted_f1),
        "stopping_reason": history.stopping_reason,
    })
    run.finish()
    print(f"trained {history.epochs_run} epochs; "
          f"best val F1 {max(history.val_weighted_f1):.4f} "
          f"(epoch {history.best_epoch}); run dir {run.path}")
    return 0


def _metrics_outputs(run: _RunDir, tag: str, report: MetricsReport) -> None:
    _write_json(run.path / "metrics.json", report.to_dict())
    print(format_row(tag, report))


def _cmd_eval(args) -> int:
    manifest_path = Path(args.manifest)
    _require_files(manifest_path, args.checkpoint)
    manifest = load_manifest(manifest_path)
    params = load_checkpoint(args.checkpoint)
    if args.modalities and tuple(args.modalities) != params.modalities:
        raise ValueError(
            f"checkpoint was trained on modalities {params.modalities}, "
            f"--modalities asked for {tuple(args.modalities)}"
        )
    records = manifest.split(args.split)
    if not records:
        raise ValueError(f"manifest has no records in split {args.split!r}")
    run = _RunDir(args.out)
    report = evaluate(params, records)
    _metrics_outputs(run, f"eval-{args.split}", report)
    _write_json(run.path / "run.json", {
        "verb": "eval",
        "tool_version": __version__,
        "split": args.split,
        "modalities": list(params.modalities),
        "manifest": str(manifest_path),
        "manifest_sha256": _sha256(manifest_path),
        "checkpoint": str(args.checkpoint),
        "checkpoint_sha256": _sha256(Path(args.checkpoint)),
        "weighted_f1": report.weighted_f1,
    })
    run.finish()
    return 0


def _cmd_gridsearch(args) -> int:
    manifest_path = Path(args.manifest)
    _require_files(manifest_path, args.grid)
    manifest = load_manifest(manifest_path)
    grid, max_epochs, patience = _load_grid(Path(args.grid) if args.grid else None)
    run = _RunDir(args.out)

    def write_entry(index, cfg, history, params, error):
        sub = run.path / f"config_{index:03d}"
        sub.mkdir(exist_ok=True)
        meta = {
            "verb": "gridsearch-config",
            "tool_version": __version__,
            "index": index,
            "config": cfg.to_dict(),
            "modalities": list(args.modalities),
            "manifest": str(manifest_path),
            "manifest_sha256": _sha256(manifest_path),
        }
        if error is None:
            save_checkpoint(params, sub / "model.ckpt")
            _write_json(sub / "history.json", history.to_dict())
            meta["best_val_weighted_f1"] = max(history.val_weighted_f1)
        else:
            meta["error"] = error
        _write_json(sub / "run.json", meta)

    result = grid_search(
        manifest, args.modalities, grid,
        seed=args.seed, max_epochs=max_epochs, patience=patience,
        jobs=args.jobs, on_result=write_entry,
    )

    with open(run.path / "summary.csv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,dropout,learning_rate,batch_size,shared_dim,proj_dim,"
                 "seed,epochs_run,best_val_weighted_f1,error\n")
        for e in result.entries:
            c = e.config
            f1 = "" if e.error else f"{e.best_val_f1:.6f}"
            epochs = "" if e.error else str(e.history.epochs_run)
            err = e.error or ""
            fh.write(f"{e.index},{c.dropout},{c.learning_rate},{c.batch_size},"
                     f"{c.shared_dim},{c.proj_dim},{c.seed},{epochs},{f1},{err}\n")
    _write_json(run.path / "best.json", {
        "index": result.best_index,
        "config": result.best_config.to_dict(),
        "best_val_weighted_f1": max(
            e.best_val_f1 for e in result.entries if e.error is None
        ),
    })
    _write_json(run.path / "run.json", {
        "verb": "gridsearch",
        "tool_version": __version__,
        "modalities": list(args.modalities),
        "manifest": str(manifest_path),
        "manifest_sha256": _sha256(manifest_path),
        "seed": args.seed,
        "configs": len(grid),
        "best_index": result.best_index,
    })
    run.finish()
    print(f"grid search over {len(grid)} configs done; "
          f"best index {result.best_index} "
          f"(val F1 {max(e.best_val_f1 for e in result.entries if e.error is None):.4f})")
    return 0


def _cmd_score(args) -> int:
    manifest_path = Path(args.manifest)
    _require_files(manifest_path, args.predictions)
    manifest = load_manifest(manifest_path)
    run = _RunDir(args.out)
    report = score_predictions(manifest, args.predictions, args.split)
    tag = f"score-{args.split}"
    print(f"scored {report.total}/{len(manifest.split(args.split))} ids "
          f"in split {args.split!r}")
    _metrics_outputs(run, tag, report)
    emit_report([(tag, report)], args.format, run.path / f"report.{args.format}")
    _write_json(run.path / "run.json", {
        "verb": "score",
        "tool_version": __version__,
        "split": args.split,
        "manifest": str(manifest_path),
        "manifest_sha256": _sha256(manifest_path),
        "predictions": str(args.predictions),
        "predictions_sha256": _sha256(Path(args.predictions)),
        "weighted_f1": report.weighted_f1,
    })
    run.finish()
    return 0


def _cmd_synth(args) -> int:
    manifest = synth_incongruity(
        args.n_train, args.n_val, args.n_test, args.dim, args.snr, args.seed
    )
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    save_manifest(manifest, out)
    counts = manifest.split_counts()
    print(f"wrote {out} ({counts['train']}/{counts['val']}/{counts['test']} "
          f"train/val/test, dim {args.dim}, snr {args.snr}, seed {args.seed})")
    return 0


def _cmd_report(args) -> int:
    results = []
    for entry in args.runs.split(","):
        run_dir = Path(entry.strip())
        metrics_file = run_dir / "metrics.json"
        if not metrics_file.exists():
            raise FileNotFoundError(f"{run_dir}: no metrics.json to aggregate")
        with open(metrics_file, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        report = MetricsReport(
            weighted_precision=raw["weighted_precision"],
            weighted_recall=raw["weighted_recall"],
            weighted_f1=raw["weighted_f1"],
            per_class_precision={int(c): raw["per_class"][c]["precision"] for c in raw["per_class"]},
            per_class_recall={int(c): raw["per_class"][c]["recall"] for c in raw["per_class"]},
            per_class_f1={int(c): raw["per_class"][c]["f1"] for c in raw["per_class"]},
            support={int(c): raw["per_class"][c]["support"] for c in raw["per_class"]},
            accuracy=raw["accuracy"],
        )
        results.append((run_dir.name, report))
    out = emit_report(results, args.format, args.out)
    print(f"wrote comparison of {len(results)} runs to {out}")
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gridsearch": _cmd_gridsearch,
    "score": _cmd_score,
    "synth": _cmd_synth,
    "report": _cmd_report,
}


def run(args: argparse.Namespace) -> int:
    return _COMMANDS[args.verb](args)


def main(argv=None) -> int:
    args = parse(sys.argv[1:] if argv is None else argv)
    try:
        return run(args)
    except Exception as exc:
        print(f"gatefuse {args.verb}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
