import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatefuse.data import save_manifest
from gatefuse.metrics import (
    ConfusionMatrix,
    PredictionsError,
    confusion,
    emit_report,
    format_row,
    score_predictions,
    weighted_prf,
)

from conftest import make_manifest, make_record


def brute_force_prf(c: ConfusionMatrix):
    """Independent per-class implementation with explicit support weights."""
    per_class = {}
    for cls in (0, 1):
        if cls == 1:
            tp, fp, fn = c.tp, c.fp, c.fn
            support = c.tp + c.fn
        else:
            tp, fp, fn = c.tn, c.fn, c.fp
            support = c.tn + c.fp
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = (2 * precision * recall / (precision + recall)
              if (precision + recall) > 0 else 0.0)
        per_class[cls] = (precision, recall, f1, support)
    total = sum(entry[3] for entry in per_class.values())
    weighted = [
        sum(per_class[cls][k] * per_class[cls][3] for cls in (0, 1)) / total
        for k in range(3)
    ]
    return weighted, per_class


class TestConfusion:
    def test_perfect_three(self):
        c = confusion([1, 0, 1], [1, 0, 1])
        assert (c.tp, c.tn, c.fp, c.fn) == (2, 1, 0, 0)

    def test_all_positive_predictions(self):
        c = confusion([1, 1, 1, 0], [1, 1, 1, 1])
        assert (c.tp, c.fp) == (3, 1)

    def test_matches_brute_force_tally(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 51))
            labels = rng.integers(0, 2, size=n).tolist()
            preds = rng.integers(0, 2, size=n).tolist()
            c = confusion(labels, preds)
            tally = {"tp": 0, "fp": 0, "tn": 0, "fn": 0}
            for y, yhat in zip(labels, preds):
                key = ("t" if y == yhat else "f") + ("p" if yhat == 1 else "n")
                tally[key] += 1
            assert (c.tp, c.fp, c.tn, c.fn) == (
                tally["tp"], tally["fp"], tally["tn"], tally["fn"]
            )

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="labels vs"):
            confusion([1, 0], [1])


class TestWeightedPRF:
    def test_perfect_predictions(self):
        rep = weighted_prf(ConfusionMatrix(tp=4, fp=0, tn=2, fn=0))
        assert rep.weighted_precision == rep.weighted_recall == rep.weighted_f1 == 1.0

    def test_hand_example_balanced_errors(self):
        # 6 positive (5 right), 4 negative (3 right)
        rep = weighted_prf(ConfusionMatrix(tp=5, fn=1, tn=3, fp=1))
        assert rep.weighted_precision == pytest.approx(0.800, abs=1e-12)
        assert rep.weighted_recall == pytest.approx(0.800, abs=1e-12)
        assert rep.weighted_f1 == pytest.approx(0.800, abs=1e-12)

    def test_hand_example_single_class_predictor(self):
        # 3 positive, 1 negative, everything predicted positive; negative
        # precision hits the 0/0 convention and scores 0
        rep = weighted_prf(ConfusionMatrix(tp=3, fn=0, tn=0, fp=1))
        assert rep.weighted_precision == pytest.approx(0.5625, abs=1e-12)
        assert rep.weighted_recall == pytest.approx(0.75, abs=1e-12)
        expected_f1 = float(Fraction(3, 4) * Fraction(6, 7))
        assert rep.weighted_f1 == pytest.approx(expected_f1, abs=1e-12)
        assert rep.per_class_precision[0] == 0.0

    @given(st.integers(0, 50), st.integers(0, 50), st.integers(0, 50),
           st.integers(0, 50))
    @settings(max_examples=300, deadline=None)
    def test_matches_brute_force(self, tp, fp, tn, fn):
        if tp + fp + tn + fn == 0:
            return
        c = ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)
        rep = weighted_prf(c)
        weighted, per_class = brute_force_prf(c)
        assert abs(rep.weighted_precision - weighted[0]) < 1e-12
        assert abs(rep.weighted_recall - weighted[1]) < 1e-12
        assert abs(rep.weighted_f1 - weighted[2]) < 1e-12
        for cls in (0, 1):
            assert abs(rep.per_class_precision[cls] - per_class[cls][0]) < 1e-12
            assert abs(rep.per_class_recall[cls] - per_class[cls][1]) < 1e-12
            assert abs(rep.per_class_f1[cls] - per_class[cls][2]) < 1e-12
            assert rep.support[cls] == per_class[cls][3]

    @given(st.integers(0, 30), st.integers(0, 30))
    @settings(max_examples=100, deadline=None)
    def test_symmetric_matrices_collapse_to_accuracy(self, diag, off):
        if diag + off == 0:
            return
        rep = weighted_prf(ConfusionMatrix(tp=diag, tn=diag, fp=off, fn=off))
        acc = rep.accuracy
        assert abs(rep.weighted_precision - acc) < 1e-12
        assert abs(rep.weighted_recall - acc) < 1e-12
        assert abs(rep.weighted_f1 - acc) < 1e-12

    def test_order_invariance(self, rng):
        labels = rng.integers(0, 2, size=40).tolist()
        preds = rng.integers(0, 2, size=40).tolist()
        rep1 = weighted_prf(confusion(labels, preds))
        order = rng.permutation(40)
        rep2 = weighted_prf(confusion([labels[i] for i in order],
                                      [preds[i] for i in order]))
        assert rep1 == rep2

    def test_matches_sklearn_weighted(self, rng):
        from sklearn.metrics import precision_recall_fscore_support

        labels = rng.integers(0, 2, size=60)
        preds = rng.integers(0, 2, size=60)
        rep = weighted_prf(confusion(labels.tolist(), preds.tolist()))
        p, r, f, _ = precision_recall_fscore_support(
            labels, preds, average="weighted", zero_division=0
        )
        assert rep.weighted_precision == pytest.approx(p, abs=1e-12)
        assert rep.weighted_recall == pytest.approx(r, abs=1e-12)
        assert rep.weighted_f1 == pytest.approx(f, abs=1e-12)


def prediction_manifest(tmp_path, rng):
    records = []
    labels = [1, 1, 1, 0, 1, 0, 0, 1]
    for i, label in enumerate(labels):
        records.append(
            make_record(f"p-{i}", "test", label, {"t": rng.normal(size=3)})
        )
    manifest = make_manifest(records, {"t": 3})
    return manifest


def write_predictions(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


class TestScorePredictions:
    def test_exact_predictions_score_one(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        path = tmp_path / "preds.jsonl"
        write_predictions(path, [{"id": r.id, "pred": r.label}
                                 for r in manifest.records])
        rep = score_predictions(manifest, path, "test")
        assert rep.weighted_f1 == 1.0

    def test_hand_computed_join(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        # flip two predictions: one false negative, one false positive
        rows = []
        for r in manifest.records:
            pred = r.label
            if r.id == "p-0":
                pred = 0
            if r.id == "p-3":
                pred = 1
            rows.append({"id": r.id, "pred": pred, "score": 0.5})
        path = tmp_path / "preds.jsonl"
        write_predictions(path, rows)
        rep = score_predictions(manifest, path, "test")
        expected = weighted_prf(ConfusionMatrix(tp=4, fn=1, tn=2, fp=1))
        assert rep == expected

    def test_missing_id_is_named(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        rows = [{"id": r.id, "pred": 1} for r in manifest.records if r.id != "p-5"]
        path = tmp_path / "preds.jsonl"
        write_predictions(path, rows)
        with pytest.raises(PredictionsError, match="'p-5'"):
            score_predictions(manifest, path, "test")

    def test_unknown_id_rejected(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        rows = [{"id": r.id, "pred": 1} for r in manifest.records]
        rows.append({"id": "ghost", "pred": 0})
        path = tmp_path / "preds.jsonl"
        write_predictions(path, rows)
        with pytest.raises(PredictionsError, match="'ghost'"):
            score_predictions(manifest, path, "test")

    def test_duplicate_id_rejected(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        rows = [{"id": r.id, "pred": 1} for r in manifest.records]
        rows.append({"id": "p-1", "pred": 0})
        path = tmp_path / "preds.jsonl"
        write_predictions(path, rows)
        with pytest.raises(PredictionsError, match="duplicate id 'p-1'"):
            score_predictions(manifest, path, "test")

    def test_row_formatting_one_decimal(self, tmp_path, rng):
        manifest = prediction_manifest(tmp_path, rng)
        path = tmp_path / "preds.jsonl"
        write_predictions(path, [{"id": r.id, "pred": r.label}
                                 for r in manifest.records])
        rep = score_predictions(manifest, path, "test")
        assert format_row("exact", rep) == "exact  P 100.0  R 100.0  F1 100.0"


class TestEmitReport:
    def test_empty_results_header_only(self, tmp_path):
        path = emit_report([], "csv", tmp_path / "r.csv")
        assert path.read_text() == "experiment,P,R,F1\n"

    def test_single_row_percent_one_decimal(self, tmp_path):
        rep = weighted_prf(ConfusionMatrix(tp=5, fn=1, tn=3, fp=1))
        path = emit_report([("base-ta", rep)], "csv", tmp_path / "r.csv")
        assert path.read_text().splitlines()[1] == "base-ta,80.0,80.0,80.0"

    def test_markdown_table_sorted_by_tag(self, tmp_path):
        rep = weighted_prf(ConfusionMatrix(tp=2, fn=0, tn=2, fp=0))
        path = emit_report([("z-last", rep), ("a-first", rep)], "md",
                           tmp_path / "r.md")
        lines = path.read_text().splitlines()
        assert lines[0] == "| experiment | P (%) | R (%) | F1 (%) |"
        assert lines[2].startswith("| a-first ")
        assert lines[3].startswith("| z-last ")

    def test_byte_identical_on_repeat(self, tmp_path):
        rep = weighted_prf(ConfusionMatrix(tp=7, fn=2, tn=5, fp=3))
        results = [("exp-b", rep), ("exp-a", rep)]
        p1 = emit_report(results, "md", tmp_path / "r1.md")
        p2 = emit_report(results, "md", tmp_path / "r2.md")
        assert p1.read_bytes() == p2.read_bytes()
