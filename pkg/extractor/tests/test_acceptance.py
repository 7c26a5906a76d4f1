"""Extractor acceptance: output-dim contracts, keyframe sampling, the
frame-dump pooling oracle, adapter split counts, and interop with the
training toolkit through the manifest format and its CLI only."""

import json
import shutil
import subprocess
import sys

import numpy as np

from gatefuse_extractor import (
    BackboneId,
    ExtractionJob,
    build_manifest,
    extract_audio,
    extract_text,
    extract_video,
    resolve,
    sample_keyframes,
    split_counts,
)

from conftest import write_video, write_wav
from test_adapters import write_mcsd_index, write_mustardpp_index


def check(name, condition, detail=""):
    status = "PASS" if condition else "FAIL"
    print(f"[criterion 10] {name}: {status}" + (f" ({detail})" if detail else ""))
    assert condition, f"criterion 10 ({name}) failed: {detail}"


class TestCriterion10Extractor:
    def test_output_dims_per_modality_and_scale(self, tmp_path):
        wav = write_wav(tmp_path / "a.wav")
        vid = write_video(tmp_path / "v.mp4")
        dims = {
            ("t", "base"): extract_text("dims check", BackboneId("t", "base")).size,
            ("t", "large"): extract_text("dims check", BackboneId("t", "large")).size,
            ("a", "base"): extract_audio(wav, BackboneId("a", "base")).size,
            ("a", "large"): extract_audio(wav, BackboneId("a", "large")).size,
            ("v", "base"): extract_video(vid, BackboneId("v", "base"), 4).size,
            ("v", "large"): extract_video(vid, BackboneId("v", "large"), 4).size,
        }
        expected = {
            ("t", "base"): 768, ("t", "large"): 4096,
            ("a", "base"): 768, ("a", "large"): 4096,
            ("v", "base"): 2048, ("v", "large"): 3584,
        }
        check("output dims", dims == expected, f"{sorted(dims.values())}")

    def test_keyframe_sampling_contract(self):
        got = sample_keyframes(100, 10)
        check("keyframe sampling", got == [0, 11, 22, 33, 44, 55, 66, 77, 88, 99],
              str(got))

    def test_pooled_outputs_match_frame_dump_oracle(self, micro_corpus, tmp_path):
        dump = tmp_path / "dumps"
        job = ExtractionJob(
            root=micro_corpus, adapter="generic-csv",
            out=tmp_path / "m.jsonl", modalities=("t", "a", "v"),
            n_keyframes=4, frame_dump=dump, dataset_name="oracle",
        )
        out = build_manifest(job)
        worst = 0.0
        for line in out.read_text().splitlines()[1:]:
            record = json.loads(line)
            for m, entry in record["embeddings"].items():
                frames = np.load(dump / f"{record['id']}.{m}.npy")
                naive = frames.sum(axis=0) / frames.shape[0]
                stored = np.asarray(entry["values"], dtype=np.float64)
                worst = max(worst, float(np.abs(stored - naive).max()))
        check("frame-dump pooling oracle", worst < 1e-5, f"max dev {worst:.2e}")

    def test_adapter_split_counts(self, tmp_path):
        mroot = tmp_path / "mustardpp"
        write_mustardpp_index(mroot, n=1202)
        mustard = split_counts(resolve("mustardpp", mroot))
        croot = tmp_path / "mcsd"
        write_mcsd_index(croot, n=2705)
        mcsd = split_counts(resolve("mcsd", croot))
        ok = (mustard == {"train": 841, "val": 180, "test": 181}
              and mcsd == {"train": 1893, "val": 406, "test": 406})
        check("adapter split counts", ok, f"mustardpp {mustard}, mcsd {mcsd}")

    def test_manifest_feeds_training_toolkit_cli(self, micro_corpus, tmp_path):
        """The only coupling to the training toolkit is the manifest file;
        prove it by driving the installed `gatefuse` CLI end to end."""
        gatefuse = shutil.which("gatefuse")
        assert gatefuse, "training toolkit CLI not installed"
        manifest = build_manifest(ExtractionJob(
            root=micro_corpus, adapter="generic-csv",
            out=tmp_path / "extracted.jsonl", modalities=("t", "a"),
            dataset_name="interop",
        ))
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({
            "dropout": 0.0, "learning_rate": 0.001, "batch_size": 4,
            "shared_dim": 8, "proj_dim": 4, "max_epochs": 2, "patience": 2,
            "seed": 0,
        }))
        run_dir = tmp_path / "run"
        proc = subprocess.run(
            [gatefuse, "train", "--manifest", str(manifest), "--modalities",
             "t,a", "--config", str(config), "--out", str(run_dir)],
            capture_output=True, text=True,
        )
        trained = proc.returncode == 0 and (run_dir / "model.ckpt").exists()

        eval_dir = tmp_path / "eval"
        proc2 = subprocess.run(
            [gatefuse, "eval", "--manifest", str(manifest), "--checkpoint",
             str(run_dir / "model.ckpt"), "--split", "test",
             "--out", str(eval_dir)],
            capture_output=True, text=True,
        )
        evaluated = proc2.returncode == 0 and (eval_dir / "metrics.json").exists()
        check("manifest drives training CLI", trained and evaluated,
              (proc.stderr or proc2.stderr or "train + eval rc 0").strip()[:120])
