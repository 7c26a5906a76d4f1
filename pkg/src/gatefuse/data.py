"""Embedding manifests: on-disk format, loading/validation, and the
synthetic cross-modal-incongruity dataset.

A manifest is UTF-8 line-delimited JSON (LF separators). The first line is
a schema object::

    {"dataset": ..., "modalities": {tag: {"backbone": ..., "dim": ...}},
     "splits": {"train": n, "val": n, "test": n}}

and every following line is one record::

    {"id": ..., "split": ..., "label": 0|1,
     "embeddings": {tag: {"backbone": ..., "dim": ..., "values": [...]}}}

Vector values are semantically float32: the writer emits the shortest
decimal that round-trips to the intended float32 value.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import CANONICAL_MODALITIES, canonical_order

SPLITS = ("train", "val", "test")


class ManifestError(ValueError):
    """Raised for malformed or schema-inconsistent manifest content."""


@dataclass
class ModalitySchema:
    backbone: str
    dim: int


@dataclass
class EmbeddingRecord:
    id: str
    split: str
    label: int
    embeddings: dict[str, "ModalityEmbedding"]


@dataclass
class ModalityEmbedding:
    backbone: str
    dim: int
    values: np.ndarray


@dataclass
class Manifest:
    dataset: str
    modalities: dict[str, ModalitySchema]
    records: list[EmbeddingRecord] = field(default_factory=list)

    def split_counts(self) -> dict[str, int]:
        counts = {s: 0 for s in SPLITS}
        for rec in self.records:
            counts[rec.split] += 1
        return counts

    def split(self, name: str) -> list[EmbeddingRecord]:
        if name not in SPLITS:
            raise ValueError(f"unknown split {name!r}")
        return [rec for rec in self.records if rec.split == name]

    def raw_dims(self) -> dict[str, int]:
        return {m: schema.dim for m, schema in self.modalities.items()}


def _format_f32(x: float) -> str:
    """Shortest decimal that parses back to the same float32 value."""
    return np.format_float_positional(np.float32(x), unique=True, trim="-")


def save_manifest(manifest: Manifest, path) -> None:
    """Canonical serialization: schema line then records in input order.

    Saving the same manifest twice yields byte-identical files.
    """
    mods = canonical_order(manifest.modalities.keys())
    counts = manifest.split_counts()
    schema_obj = {
        "dataset": manifest.dataset,
        "modalities": {
            m: {"backbone": manifest.modalities[m].backbone,
                "dim": manifest.modalities[m].dim}
            for m in mods
        },
        "splits": {s: counts[s] for s in SPLITS},
    }
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(json.dumps(schema_obj, separators=(",", ":"), ensure_ascii=False))
            fh.write("\n")
            for rec in manifest.records:
                # values are written as bare JSON numbers, so the line is
                # assembled directly instead of going through json.dumps
                parts = []
                for m in mods:
                    emb = rec.embeddings[m]
                    vals = ",".join(
                        _format_f32(v)
                        for v in np.asarray(emb.values, dtype=np.float64)
                    )
                    parts.append(
                        f'{json.dumps(m)}:{{"backbone":{json.dumps(emb.backbone, ensure_ascii=False)},'
                        f'"dim":{int(emb.dim)},"values":[{vals}]}}'
                    )
                fh.write(
                    f'{{"id":{json.dumps(rec.id, ensure_ascii=False)},'
                    f'"split":{json.dumps(rec.split)},"label":{int(rec.label)},'
                    f'"embeddings":{{{",".join(parts)}}}}}\n'
                )
    except OSError as exc:
        raise OSError(f"failed to write manifest {path}: {exc}") from exc


def load_manifest(path) -> Manifest:
    """Parse and schema-validate a manifest; diagnostics carry line numbers."""
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ManifestError(f"{path}: empty file, missing schema line")

    try:
        schema_obj = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}:1: malformed schema line: {exc}") from exc
    for key in ("dataset", "modalities", "splits"):
        if key not in schema_obj:
            raise ManifestError(f"{path}:1: schema missing field {key!r}")
    modalities: dict[str, ModalitySchema] = {}
    for m, entry in schema_obj["modalities"].items():
        if m not in CANONICAL_MODALITIES:
            raise ManifestError(f"{path}:1: unknown modality tag {m!r}")
        modalities[m] = ModalitySchema(
            backbone=str(entry["backbone"]), dim=int(entry["dim"])
        )
        if modalities[m].dim <= 0:
            raise ManifestError(f"{path}:1: modality {m!r} has non-positive dim")

    records: list[EmbeddingRecord] = []
    seen_ids: set[str] = set()
    for lineno, raw in enumerate(lines[1:], start=2):
        if raw == "":
            raise ManifestError(f"{path}:{lineno}: blank line inside manifest")
        try:
            obj = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"{path}:{lineno}: malformed record: {exc}") from exc
        records.append(_parse_record(obj, modalities, seen_ids, path, lineno))

    manifest = Manifest(
        dataset=str(schema_obj["dataset"]), modalities=modalities, records=records
    )
    declared = {s: int(schema_obj["splits"].get(s, 0)) for s in SPLITS}
    actual = manifest.split_counts()
    if declared != actual:
        raise ManifestError(
            f"{path}: declared split counts {declared} do not match records {actual}"
        )
    return manifest


def _parse_record(obj, modalities, seen_ids, path, lineno) -> EmbeddingRecord:
    where = f"{path}:{lineno}"
    for key in ("id", "split", "label", "embeddings"):
        if key not in obj:
            raise ManifestError(f"{where}: record missing field {key!r}")
    rec_id = str(obj["id"])
    if rec_id in seen_ids:
        raise ManifestError(f"{where}: duplicate id {rec_id!r}")
    seen_ids.add(rec_id)
    split = obj["split"]
    if split not in SPLITS:
        raise ManifestError(f"{where}: record {rec_id!r}: unknown split {split!r}")
    label = obj["label"]
    if label not in (0, 1):
        raise ManifestError(f"{where}: record {rec_id!r}: label must be 0 or 1, got {label!r}")

    embeddings: dict[str, ModalityEmbedding] = {}
    if set(obj["embeddings"].keys()) != set(modalities.keys()):
        missing = sorted(set(modalities) - set(obj["embeddings"]))
        extra = sorted(set(obj["embeddings"]) - set(modalities))
        detail = []
        if missing:
            detail.append(f"missing {missing}")
        if extra:
            detail.append(f"unexpected {extra}")
        raise ManifestError(
            f"{where}: record {rec_id!r}: modalities do not match schema ({'; '.join(detail)})"
        )
    for m, entry in obj["embeddings"].items():
        schema = modalities[m]
        backbone = str(entry.get("backbone", ""))
        dim = int(entry.get("dim", -1))
        if backbone != schema.backbone or dim != schema.dim:
            raise ManifestError(
                f"{where}: record {rec_id!r}: modality {m!r} declares "
                f"({backbone!r}, {dim}), schema says ({schema.backbone!r}, {schema.dim})"
            )
        values = entry.get("values")
        if not isinstance(values, list) or len(values) != dim:
            got = len(values) if isinstance(values, list) else type(values).__name__
            raise ManifestError(
                f"{where}: record {rec_id!r}: modality {m!r} has {got} values, expected {dim}"
            )
        if not all(isinstance(v, (int, float)) and math.isfinite(v) for v in values):
            raise ManifestError(
                f"{where}: record {rec_id!r}: modality {m!r} contains non-finite or "
                "non-numeric values"
            )
        arr = np.asarray(values, dtype=np.float32).astype(np.float64)
        embeddings[m] = ModalityEmbedding(backbone=backbone, dim=dim, values=arr)
    return EmbeddingRecord(id=rec_id, split=split, label=int(label), embeddings=embeddings)


class PolarGaussian:
    """Marsaglia polar method over a seeded PCG64 generator.

    Draw order is fully specified so datasets are reproducible across
    implementations: repeatedly take two uniforms u, v in (-1, 1) from
    ``rng.random()`` until 0 < s = u^2 + v^2 < 1, then emit
    u*sqrt(-2 ln s / s) followed by v*sqrt(-2 ln s / s).
    """

    def __init__(self, rng: np.random.Generator):
        self.rng = rng
        self._spare: float | None = None

    def next(self) -> float:
        if self._spare is not None:
            out, self._spare = self._spare, None
            return out
        while True:
            u = 2.0 * self.rng.random() - 1.0
            v = 2.0 * self.rng.random() - 1.0
            s = u * u + v * v
            if 0.0 < s < 1.0:
                break
        factor = math.sqrt(-2.0 * math.log(s) / s)
        self._spare = v * factor
        return u * factor

    def draw(self, n: int) -> np.ndarray:
        return np.array([self.next() for _ in range(n)], dtype=np.float64)


def synth_incongruity(
    n_train: int, n_val: int, n_test: int, dim: int, snr: float, seed: int
) -> Manifest:
    """Two-modality dataset whose label is the XOR of hidden cue signs.

    Each sample draws cue bits c_t, c_a in {+1, -1} uniformly, then for
    each modality coordinate 0 is cue*snr plus unit Gaussian noise and the
    remaining coordinates are unit Gaussian noise. The label is 1 iff the
    cues disagree, so either modality alone carries no label information
    while the pair determines the label almost surely as snr grows.

    Per-sample draw order: cue_t, cue_a (one uniform each), then ``dim``
    Gaussians for modality t, then ``dim`` for modality a. Gaussians come
    from the polar method; the generator is PCG64 seeded with ``seed``.
    Values are quantized to float32 like any manifest on disk.
    """
    if dim < 2:
        raise ValueError("dim must be >= 2")
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("all split counts must be >= 1")
    rng = np.random.default_rng(seed)
    gauss = PolarGaussian(rng)
    modalities = {
        "t": ModalitySchema(backbone="synthetic", dim=dim),
        "a": ModalitySchema(backbone="synthetic", dim=dim),
    }
    records: list[EmbeddingRecord] = []
    total = n_train + n_val + n_test
    for i in range(total):
        if i < n_train:
            split = "train"
        elif i < n_train + n_val:
            split = "val"
        else:
            split = "test"
        cue_t = 1.0 if rng.random() < 0.5 else -1.0
        cue_a = 1.0 if rng.random() < 0.5 else -1.0
        vec_t = gauss.draw(dim)
        vec_t[0] += cue_t * snr
        vec_a = gauss.draw(dim)
        vec_a[0] += cue_a * snr
        label = 1 if cue_t != cue_a else 0
        records.append(
            EmbeddingRecord(
                id=f"synth-{i:06d}",
                split=split,
                label=label,
                embeddings={
                    "t": ModalityEmbedding(
                        "synthetic", dim,
                        np.asarray(vec_t, dtype=np.float32).astype(np.float64),
                    ),
                    "a": ModalityEmbedding(
                        "synthetic", dim,
                        np.asarray(vec_a, dtype=np.float32).astype(np.float64),
                    ),
                },
            )
        )
    return Manifest(dataset="synth-incongruity", modalities=modalities, records=records)
