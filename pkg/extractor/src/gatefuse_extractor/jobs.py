"""Extraction jobs: resolve a corpus, encode every sample, and assemble a
manifest. Jobs are resumable: per-sample results are appended to a
``<out>.parts.jsonl`` journal, already-extracted ids are skipped on rerun,
and the journal is removed once the manifest is complete.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .adapters import SampleSpec, resolve, split_counts
from .backbones import BackboneId
from .extract import audio_frames, mean_pool, text_frames, video_frames
from .manifest_io import record_line, write_manifest

log = logging.getLogger("gatefuse_extractor")

DEFAULT_KEYFRAMES = 8


class ExtractionError(RuntimeError):
    pass


@dataclass
class ExtractionJob:
    root: Path
    adapter: str
    out: Path
    modalities: tuple[str, ...] = ("t", "a", "v")
    scales: dict[str, str] = field(default_factory=dict)  # modality -> base|large
    n_keyframes: int = DEFAULT_KEYFRAMES
    frame_dump: Path | None = None
    jobs: int = 1
    dataset_name: str | None = None

    def __post_init__(self):
        self.root = Path(self.root)
        self.out = Path(self.out)
        if self.frame_dump is not None:
            self.frame_dump = Path(self.frame_dump)
        if self.n_keyframes < 1:
            raise ValueError("n_keyframes must be >= 1")
        mods = []
        for m in ("t", "a", "v"):
            if m in self.modalities:
                mods.append(m)
        if set(mods) != set(self.modalities):
            raise ValueError(f"modalities must be a subset of t,a,v, got {self.modalities}")
        if not mods:
            raise ValueError("at least one modality is required")
        self.modalities = tuple(mods)

    def backbone(self, modality: str) -> BackboneId:
        return BackboneId(modality, self.scales.get(modality, "base"))


def _extract_sample(job: ExtractionJob, spec: SampleSpec) -> dict:
    embeddings = {}
    for m in job.modalities:
        backbone = job.backbone(m)
        if m == "t":
            frames = text_frames(spec.transcript, backbone)
        elif m == "a":
            if spec.audio is None:
                raise ValueError(f"sample {spec.id!r}: no audio path")
            frames = audio_frames(spec.audio, backbone)
        else:
            if spec.video is None:
                raise ValueError(f"sample {spec.id!r}: no video path")
            frames = video_frames(spec.video, backbone, job.n_keyframes)
        pooled = mean_pool(frames)
        if pooled.shape != (backbone.dim,):
            raise AssertionError(
                f"sample {spec.id!r}: {backbone.tag} produced dim {pooled.shape}, "
                f"contract says {backbone.dim}"
            )
        if job.frame_dump is not None:
            job.frame_dump.mkdir(parents=True, exist_ok=True)
            np.save(job.frame_dump / f"{spec.id}.{m}.npy", frames)
        embeddings[m] = (backbone.tag, pooled)
    return {
        "id": spec.id,
        "line": record_line(spec.id, spec.split, spec.label, embeddings),
    }


def _load_journal(path: Path) -> dict[str, str]:
    done: dict[str, str] = {}
    if not path.exists():
        return done
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.strip()
            if not raw:
                continue
            entry = json.loads(raw)
            done[entry["id"]] = entry["line"]
    return done


def build_manifest(job: ExtractionJob) -> Path:
    """Run a job to completion and write the manifest.

    Per-sample failures are logged with the sample id; the job raises at
    the end if any sample remains unextracted (the journal keeps finished
    work for the next attempt). Rerunning a completed job rewrites a
    byte-identical manifest.
    """
    specs = resolve(job.adapter, job.root)
    if not specs:
        raise ExtractionError(f"adapter {job.adapter!r} resolved no samples in {job.root}")
    journal_path = job.out.with_name(job.out.name + ".parts.jsonl")
    done = _load_journal(journal_path)
    pending = [spec for spec in specs if spec.id not in done]
    if done:
        log.info("resuming: %d of %d samples already extracted", len(done), len(specs))

    failures: list[tuple[str, str]] = []
    job.out.parent.mkdir(parents=True, exist_ok=True)
    with open(journal_path, "a", encoding="utf-8") as journal:
        def run_one(spec: SampleSpec):
            try:
                return spec, _extract_sample(job, spec), None
            except Exception as exc:
                return spec, None, f"{type(exc).__name__}: {exc}"

        if job.jobs <= 1:
            results = map(run_one, pending)
        else:
            pool = ThreadPoolExecutor(max_workers=job.jobs)
            results = pool.map(run_one, pending)
        for spec, result, error in results:
            if error is not None:
                log.error("sample %r failed: %s", spec.id, error)
                failures.append((spec.id, error))
                continue
            journal.write(json.dumps(result, separators=(",", ":")) + "\n")
            done[spec.id] = result["line"]
        if job.jobs > 1:
            pool.shutdown()

    if failures:
        shown = "; ".join(f"{sid}: {err}" for sid, err in failures[:5])
        raise ExtractionError(
            f"{len(failures)} of {len(specs)} samples failed ({shown}); "
            f"finished work kept in {journal_path}"
        )

    modalities = {m: (job.backbone(m).tag, job.backbone(m).dim)
                  for m in job.modalities}
    write_manifest(
        job.out,
        dataset=job.dataset_name or f"{job.adapter}:{job.root.name}",
        modalities=modalities,
        lines=[done[spec.id] for spec in specs],
        counts=split_counts(specs),
    )
    journal_path.unlink()
    log.info("wrote %s (%d records)", job.out, len(specs))
    return job.out
