"""Confusion matrices, support-weighted precision/recall/F1, scoring of
prediction files, and report emission.

Class 1 (sarcastic) is the positive class. "Weighted" means support-
weighted over the two classes. Any 0/0 metric cell (e.g. precision of a
never-predicted class) evaluates to 0; this matters when a model predicts
only one class.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .data import Manifest

# Documented constants for prediction files produced by external
# prompting/fine-tuning tooling scored through this module; this package
# itself never runs such models.
FEW_SHOT_K_VALUES = (2, 4, 6)
LORA_EXPANSION_FACTOR = 8
LORA_LEARNING_RATE = 1e-4


class PredictionsError(ValueError):
    """Raised when a predictions file cannot be joined against a manifest."""


@dataclass
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass
class MetricsReport:
    weighted_precision: float
    weighted_recall: float
    weighted_f1: float
    per_class_precision: dict[int, float]
    per_class_recall: dict[int, float]
    per_class_f1: dict[int, float]
    support: dict[int, int]
    accuracy: float

    @property
    def total(self) -> int:
        return self.support[0] + self.support[1]

    def to_dict(self) -> dict:
        return {
            "weighted_precision": self.weighted_precision,
            "weighted_recall": self.weighted_recall,
            "weighted_f1": self.weighted_f1,
            "per_class": {
                str(c): {
                    "precision": self.per_class_precision[c],
                    "recall": self.per_class_recall[c],
                    "f1": self.per_class_f1[c],
                    "support": self.support[c],
                }
                for c in (0, 1)
            },
            "accuracy": self.accuracy,
            "total": self.total,
        }


def confusion(labels: Sequence[int], preds: Sequence[int]) -> ConfusionMatrix:
    if len(labels) != len(preds):
        raise ValueError(f"{len(labels)} labels vs {len(preds)} predictions")
    if len(labels) == 0:
        raise ValueError("cannot score an empty label sequence")
    tp = fp = tn = fn = 0
    for y, yhat in zip(labels, preds):
        if y not in (0, 1) or yhat not in (0, 1):
            raise ValueError(f"labels and predictions must be 0 or 1, got ({y}, {yhat})")
        if y == 1 and yhat == 1:
            tp += 1
        elif y == 0 and yhat == 1:
            fp += 1
        elif y == 0 and yhat == 0:
            tn += 1
        else:
            fn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def _safe_div(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def weighted_prf(c: ConfusionMatrix) -> MetricsReport:
    """Per-class and support-weighted precision/recall/F1 from counts."""
    if c.total <= 0:
        raise ValueError("confusion matrix is empty")
    support = {1: c.tp + c.fn, 0: c.tn + c.fp}
    precision = {
        1: _safe_div(c.tp, c.tp + c.fp),
        0: _safe_div(c.tn, c.tn + c.fn),
    }
    recall = {
        1: _safe_div(c.tp, c.tp + c.fn),
        0: _safe_div(c.tn, c.tn + c.fp),
    }
    f1 = {
        cls: _safe_div(2.0 * precision[cls] * recall[cls], precision[cls] + recall[cls])
        for cls in (0, 1)
    }

    def weighted(metric: dict[int, float]) -> float:
        return (support[0] * metric[0] + support[1] * metric[1]) / c.total

    return MetricsReport(
        weighted_precision=weighted(precision),
        weighted_recall=weighted(recall),
        weighted_f1=weighted(f1),
        per_class_precision=precision,
        per_class_recall=recall,
        per_class_f1=f1,
        support=support,
        accuracy=(c.tp + c.tn) / c.total,
    )


def read_predictions(path) -> dict[str, int]:
    """Line-delimited records {id, pred: 0|1, optional score}."""
    path = Path(path)
    preds: dict[str, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                obj = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise PredictionsError(f"{path}:{lineno}: malformed record: {exc}") from exc
            if "id" not in obj or "pred" not in obj:
                raise PredictionsError(f"{path}:{lineno}: record needs 'id' and 'pred'")
            pid = str(obj["id"])
            pred = obj["pred"]
            if pred not in (0, 1):
                raise PredictionsError(
                    f"{path}:{lineno}: pred must be 0 or 1, got {pred!r}"
                )
            if pid in preds:
                raise PredictionsError(f"{path}:{lineno}: duplicate id {pid!r}")
            preds[pid] = int(pred)
    return preds


def score_predictions(manifest: Manifest, predictions_path, split: str) -> MetricsReport:
    """Join a predictions file against one manifest split and score it.

    Every id in the split must be covered exactly once; ids outside the
    split are rejected.
    """
    records = manifest.split(split)
    if not records:
        raise PredictionsError(f"manifest has no records in split {split!r}")
    preds = read_predictions(predictions_path)

    split_ids = {rec.id for rec in records}
    unknown = sorted(set(preds) - split_ids)
    if unknown:
        shown = ", ".join(repr(u) for u in unknown[:10])
        raise PredictionsError(
            f"{len(unknown)} prediction id(s) not in split {split!r}: {shown}"
        )
    missing = sorted(split_ids - set(preds))
    if missing:
        shown = ", ".join(repr(m) for m in missing[:10])
        more = "" if len(missing) <= 10 else f" (and {len(missing) - 10} more)"
        raise PredictionsError(
            f"{len(missing)} id(s) in split {split!r} have no prediction: {shown}{more}"
        )

    labels = [rec.label for rec in records]
    ordered_preds = [preds[rec.id] for rec in records]
    return weighted_prf(confusion(labels, ordered_preds))


def format_row(tag: str, report: MetricsReport) -> str:
    """One P/R/F1 percentage row with one decimal."""
    return (
        f"{tag}  P {100.0 * report.weighted_precision:.1f}  "
        f"R {100.0 * report.weighted_recall:.1f}  "
        f"F1 {100.0 * report.weighted_f1:.1f}"
    )


def emit_report(
    results: Iterable[tuple[str, MetricsReport]], fmt: str, path
) -> Path:
    """Write a comparison table (markdown or CSV) of experiment metrics.

    Rows are ordered by experiment tag so identical inputs produce
    byte-identical files. Values are percentages with one decimal.
    """
    if fmt not in ("md", "csv"):
        raise ValueError(f"format must be 'md' or 'csv', got {fmt!r}")
    rows = sorted(results, key=lambda item: item[0])
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if fmt == "csv":
            fh.write("experiment,P,R,F1\n")
            for tag, rep in rows:
                fh.write(
                    f"{tag},{100.0 * rep.weighted_precision:.1f},"
                    f"{100.0 * rep.weighted_recall:.1f},"
                    f"{100.0 * rep.weighted_f1:.1f}\n"
                )
        else:
            fh.write("| experiment | P (%) | R (%) | F1 (%) |\n")
            fh.write("| --- | --- | --- | --- |\n")
            for tag, rep in rows:
                fh.write(
                    f"| {tag} | {100.0 * rep.weighted_precision:.1f} "
                    f"| {100.0 * rep.weighted_recall:.1f} "
                    f"| {100.0 * rep.weighted_f1:.1f} |\n"
                )
    return path
