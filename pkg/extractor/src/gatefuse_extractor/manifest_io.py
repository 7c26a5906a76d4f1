"""Writer for the embedding-manifest interchange format.

The format (shared with the training toolkit that consumes these files):
UTF-8 JSON lines with LF separators; line 1 is a schema object
{"dataset", "modalities": {tag: {"backbone", "dim"}}, "splits"}; every
following line is one record {"id", "split", "label", "embeddings"}.
Vector values are written as the shortest decimal that round-trips to the
intended float32.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MODALITY_ORDER = ("t", "a", "v")
SPLIT_ORDER = ("train", "val", "test")


def format_f32(x: float) -> str:
    return np.format_float_positional(np.float32(x), unique=True, trim="-")


def record_line(sample_id: str, split: str, label: int,
                embeddings: dict[str, tuple[str, np.ndarray]]) -> str:
    """One serialized record; ``embeddings`` maps modality tag to
    (backbone tag, vector)."""
    parts = []
    for m in MODALITY_ORDER:
        if m not in embeddings:
            continue
        backbone, values = embeddings[m]
        values = np.asarray(values, dtype=np.float64)
        joined = ",".join(format_f32(v) for v in values)
        parts.append(
            f'{json.dumps(m)}:{{"backbone":{json.dumps(backbone, ensure_ascii=False)},'
            f'"dim":{values.size},"values":[{joined}]}}'
        )
    return (
        f'{{"id":{json.dumps(sample_id, ensure_ascii=False)},'
        f'"split":{json.dumps(split)},"label":{int(label)},'
        f'"embeddings":{{{",".join(parts)}}}}}'
    )


def write_manifest(path, dataset: str, modalities: dict[str, tuple[str, int]],
                   lines: list[str], counts: dict[str, int]) -> None:
    """``modalities`` maps tag to (backbone tag, dim); ``lines`` are
    pre-serialized record lines in dataset order."""
    schema = {
        "dataset": dataset,
        "modalities": {
            m: {"backbone": modalities[m][0], "dim": modalities[m][1]}
            for m in MODALITY_ORDER if m in modalities
        },
        "splits": {s: counts.get(s, 0) for s in SPLIT_ORDER},
    }
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(schema, separators=(",", ":"), ensure_ascii=False))
        fh.write("\n")
        for line in lines:
            fh.write(line)
            fh.write("\n")
