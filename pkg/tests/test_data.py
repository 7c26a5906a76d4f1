import json

import numpy as np
import pytest

from gatefuse.data import (
    ManifestError,
    PolarGaussian,
    load_manifest,
    save_manifest,
    synth_incongruity,
)

from conftest import make_manifest, make_record


def small_manifest(rng, n=6, dim=4):
    records = []
    for i in range(n):
        split = ("train", "val", "test")[i % 3]
        records.append(
            make_record(
                f"rec-{i:03d}", split, i % 2,
                {"t": rng.normal(size=dim), "a": rng.normal(size=dim)},
            )
        )
    return make_manifest(records, {"t": dim, "a": dim})


class TestRoundTrip:
    def test_save_load_preserves_everything(self, tmp_path, rng):
        manifest = small_manifest(rng)
        path = tmp_path / "data.jsonl"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        assert loaded.dataset == manifest.dataset
        assert loaded.split_counts() == manifest.split_counts()
        for orig, back in zip(manifest.records, loaded.records):
            assert (orig.id, orig.split, orig.label) == (back.id, back.split, back.label)
            for m in orig.embeddings:
                np.testing.assert_array_equal(
                    back.embeddings[m].values,
                    orig.embeddings[m].values.astype(np.float32).astype(np.float64),
                )

    def test_save_twice_byte_identical(self, tmp_path, rng):
        manifest = small_manifest(rng)
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        save_manifest(manifest, a)
        save_manifest(manifest, b)
        assert a.read_bytes() == b.read_bytes()

    def test_high_dim_round_trip_error_under_f32_quantum(self, tmp_path, rng):
        records = [make_record("big-0", "train", 0, {"t": rng.normal(size=4096)})]
        manifest = make_manifest(records, {"t": 4096})
        path = tmp_path / "big.jsonl"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        err = np.abs(loaded.records[0].embeddings["t"].values
                     - manifest.records[0].embeddings["t"].values)
        assert err.max() < 1e-6

    def test_empty_manifest_is_header_only(self, tmp_path):
        manifest = make_manifest([], {"t": 4})
        path = tmp_path / "empty.jsonl"
        save_manifest(manifest, path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        header = json.loads(lines[0])
        assert header["splits"] == {"train": 0, "val": 0, "test": 0}
        assert load_manifest(path).records == []

    def test_mcsd_shaped_counts_accepted(self, tmp_path, rng):
        records = []
        for i in range(1893 + 406 + 406):
            split = "train" if i < 1893 else ("val" if i < 1893 + 406 else "test")
            records.append(
                make_record(f"mcsd-{i:05d}", split, i % 2, {"t": rng.normal(size=3)})
            )
        manifest = make_manifest(records, {"t": 3}, dataset="mcsd-shaped")
        path = tmp_path / "mcsd.jsonl"
        save_manifest(manifest, path)
        loaded = load_manifest(path)
        assert loaded.split_counts() == {"train": 1893, "val": 406, "test": 406}


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


SCHEMA = json.dumps({
    "dataset": "bad",
    "modalities": {"t": {"backbone": "synthetic", "dim": 2}},
    "splits": {"train": 1, "val": 0, "test": 0},
}, separators=(",", ":"))


def record_line(rec_id="r0", split="train", label=0, values=(0.5, 1.5),
                dim=2, backbone="synthetic"):
    return json.dumps({
        "id": rec_id, "split": split, "label": label,
        "embeddings": {"t": {"backbone": backbone, "dim": dim,
                             "values": list(values)}},
    }, separators=(",", ":"))


class TestValidation:
    def test_malformed_line_reports_number(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [SCHEMA, "{not json"])
        with pytest.raises(ManifestError, match=":2: malformed"):
            load_manifest(path)

    def test_missing_modality_names_id(self, tmp_path):
        path = tmp_path / "m.jsonl"
        bad = json.dumps({"id": "r9", "split": "train", "label": 0, "embeddings": {}})
        write_lines(path, [SCHEMA, bad])
        with pytest.raises(ManifestError, match="'r9'.*missing \\['t'\\]"):
            load_manifest(path)

    def test_duplicate_id_rejected(self, tmp_path):
        schema = json.loads(SCHEMA)
        schema["splits"]["train"] = 2
        path = tmp_path / "m.jsonl"
        write_lines(path, [json.dumps(schema), record_line("dup"), record_line("dup")])
        with pytest.raises(ManifestError, match=":3: duplicate id 'dup'"):
            load_manifest(path)

    def test_dim_mismatch_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [SCHEMA, record_line(values=(1.0, 2.0, 3.0))])
        with pytest.raises(ManifestError, match="3 values, expected 2"):
            load_manifest(path)

    def test_nan_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        line = record_line().replace("0.5", "NaN")
        write_lines(path, [SCHEMA, line])
        with pytest.raises(ManifestError, match="non-finite"):
            load_manifest(path)

    def test_unknown_split_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [SCHEMA, record_line(split="dev")])
        with pytest.raises(ManifestError, match="unknown split 'dev'"):
            load_manifest(path)

    def test_label_outside_binary_rejected(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [SCHEMA, record_line(label=2)])
        with pytest.raises(ManifestError, match="label must be 0 or 1"):
            load_manifest(path)

    def test_backbone_mismatch_names_field(self, tmp_path):
        path = tmp_path / "m.jsonl"
        write_lines(path, [SCHEMA, record_line(backbone="other")])
        with pytest.raises(ManifestError, match="schema says"):
            load_manifest(path)

    def test_split_count_mismatch_rejected(self, tmp_path):
        schema = json.loads(SCHEMA)
        schema["splits"] = {"train": 0, "val": 1, "test": 0}
        path = tmp_path / "m.jsonl"
        write_lines(path, [json.dumps(schema), record_line()])
        with pytest.raises(ManifestError, match="declared split counts"):
            load_manifest(path)


class TestPolarGaussian:
    def test_seed_determinism(self):
        a = PolarGaussian(np.random.default_rng(5)).draw(100)
        b = PolarGaussian(np.random.default_rng(5)).draw(100)
        np.testing.assert_array_equal(a, b)

    def test_moments_are_plausible(self):
        draws = PolarGaussian(np.random.default_rng(11)).draw(20000)
        assert abs(draws.mean()) < 0.03
        assert abs(draws.std() - 1.0) < 0.03


class TestSynthIncongruity:
    def test_labels_are_cue_xor(self):
        # the cue sign is recoverable from coordinate 0 at high snr
        manifest = synth_incongruity(40, 10, 10, dim=4, snr=60.0, seed=3)
        for rec in manifest.records:
            sign_t = np.sign(rec.embeddings["t"].values[0])
            sign_a = np.sign(rec.embeddings["a"].values[0])
            assert rec.label == (1 if sign_t != sign_a else 0)

    def test_split_sizes_and_determinism(self):
        m1 = synth_incongruity(30, 20, 10, dim=5, snr=2.0, seed=9)
        m2 = synth_incongruity(30, 20, 10, dim=5, snr=2.0, seed=9)
        assert m1.split_counts() == {"train": 30, "val": 20, "test": 10}
        for r1, r2 in zip(m1.records, m2.records):
            np.testing.assert_array_equal(
                r1.embeddings["t"].values, r2.embeddings["t"].values
            )
            assert r1.label == r2.label

    def test_class_balance_near_half(self):
        manifest = synth_incongruity(1000, 500, 500, dim=3, snr=3.0, seed=1)
        rate = np.mean([rec.label for rec in manifest.records])
        assert abs(rate - 0.5) < 0.03

    def test_unimodal_marginal_carries_no_label_signal(self):
        # logistic baseline on a single modality stays near chance
        from sklearn.linear_model import LogisticRegression

        manifest = synth_incongruity(1500, 200, 500, dim=8, snr=3.0, seed=7)
        train = manifest.split("train")
        test = manifest.split("test")
        for modality in ("t", "a"):
            X = np.stack([r.embeddings[modality].values for r in train])
            y = np.array([r.label for r in train])
            Xt = np.stack([r.embeddings[modality].values for r in test])
            yt = np.array([r.label for r in test])
            clf = LogisticRegression(max_iter=2000).fit(X, y)
            assert clf.score(Xt, yt) <= 0.60

    def test_rejects_tiny_dims_or_counts(self):
        with pytest.raises(ValueError, match="dim"):
            synth_incongruity(2, 2, 2, dim=1, snr=1.0, seed=0)
        with pytest.raises(ValueError, match="counts"):
            synth_incongruity(0, 2, 2, dim=4, snr=1.0, seed=0)
