"""Dataset adapters: resolve a corpus root into per-sample specs.

Three layouts are supported:

* ``generic-csv``: ``index.csv`` with header
  ``id,split,label,transcript,audio,video`` (media paths relative to the
  corpus root).
* ``mustardpp``: the distribution's annotation CSV ``mustard++_text.csv``
  with at least ``KEY``, ``SENTENCE`` and ``Sarcasm`` columns, media at
  ``audio/<KEY>.wav`` and ``video/<KEY>.mp4``. Splits come from an
  optional ``splits.json`` ({"train": [keys], ...}); without one, the
  standard 70:15:15 split is derived from row order.
* ``mcsd``: assumed layout (the corpus distribution format is not
  publicly documented): ``mcsd_index.csv`` with header
  ``id,transcript,label`` and an optional ``split`` column, media at
  ``audio/<id>.wav`` and ``video/<id>.mp4``; rows without a split column
  get the derived 70:15:15 split.

The derived split rule is train = floor(0.70 n), val = round(0.15 n),
test = remainder; it reproduces the published counts for both corpora
(1202 -> 841/180/181 and 2705 -> 1893/406/406).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

ADAPTERS = ("generic-csv", "mustardpp", "mcsd")

_TRUE = {"1", "true", "yes", "sarcastic"}
_FALSE = {"0", "false", "no", "non-sarcastic", "not sarcastic"}


@dataclass
class SampleSpec:
    id: str
    split: str
    label: int
    transcript: str
    audio: Path | None
    video: Path | None


def derived_splits(n: int) -> list[str]:
    """Row-order 70:15:15 assignment matching the published split counts."""
    n_train = int(n * 0.70)
    n_val = int(round(n * 0.15))
    out = []
    for i in range(n):
        if i < n_train:
            out.append("train")
        elif i < n_train + n_val:
            out.append("val")
        else:
            out.append("test")
    return out


def _parse_label(raw, where: str) -> int:
    text = str(raw).strip().lower()
    if text in _TRUE:
        return 1
    if text in _FALSE:
        return 0
    raise ValueError(f"{where}: cannot interpret label {raw!r}")


def _read_csv(path: Path) -> list[dict]:
    if not path.exists():
        raise FileNotFoundError(f"adapter index not found: {path}")
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


def resolve_generic_csv(root: Path) -> list[SampleSpec]:
    rows = _read_csv(root / "index.csv")
    specs = []
    for lineno, row in enumerate(rows, start=2):
        where = f"{root / 'index.csv'}:{lineno}"
        split = row["split"].strip()
        if split not in ("train", "val", "test"):
            raise ValueError(f"{where}: unknown split {split!r}")
        specs.append(SampleSpec(
            id=row["id"].strip(),
            split=split,
            label=_parse_label(row["label"], where),
            transcript=row["transcript"],
            audio=root / row["audio"] if row.get("audio") else None,
            video=root / row["video"] if row.get("video") else None,
        ))
    return specs


def resolve_mustardpp(root: Path) -> list[SampleSpec]:
    rows = _read_csv(root / "mustard++_text.csv")
    splits_file = root / "splits.json"
    if splits_file.exists():
        with open(splits_file, "r", encoding="utf-8") as fh:
            mapping = json.load(fh)
        by_key = {key: split for split, keys in mapping.items() for key in keys}
        splits = [by_key[row["KEY"]] for row in rows]
    else:
        splits = derived_splits(len(rows))
    specs = []
    for lineno, (row, split) in enumerate(zip(rows, splits), start=2):
        key = row["KEY"].strip()
        specs.append(SampleSpec(
            id=key,
            split=split,
            label=_parse_label(row["Sarcasm"], f"mustard++_text.csv:{lineno}"),
            transcript=row["SENTENCE"],
            audio=root / "audio" / f"{key}.wav",
            video=root / "video" / f"{key}.mp4",
        ))
    return specs


def resolve_mcsd(root: Path) -> list[SampleSpec]:
    rows = _read_csv(root / "mcsd_index.csv")
    has_split = rows and "split" in rows[0]
    splits = ([row["split"].strip() for row in rows] if has_split
              else derived_splits(len(rows)))
    specs = []
    for lineno, (row, split) in enumerate(zip(rows, splits), start=2):
        sample_id = row["id"].strip()
        specs.append(SampleSpec(
            id=sample_id,
            split=split,
            label=_parse_label(row["label"], f"mcsd_index.csv:{lineno}"),
            transcript=row["transcript"],
            audio=root / "audio" / f"{sample_id}.wav",
            video=root / "video" / f"{sample_id}.mp4",
        ))
    return specs


_RESOLVERS = {
    "generic-csv": resolve_generic_csv,
    "mustardpp": resolve_mustardpp,
    "mcsd": resolve_mcsd,
}


def resolve(adapter: str, root) -> list[SampleSpec]:
    if adapter not in _RESOLVERS:
        raise ValueError(f"unknown adapter {adapter!r}; expected one of {ADAPTERS}")
    specs = _RESOLVERS[adapter](Path(root))
    seen = set()
    for spec in specs:
        if spec.id in seen:
            raise ValueError(f"adapter {adapter}: duplicate sample id {spec.id!r}")
        seen.add(spec.id)
    return specs


def split_counts(specs: list[SampleSpec]) -> dict[str, int]:
    counts = {"train": 0, "val": 0, "test": 0}
    for spec in specs:
        counts[spec.split] += 1
    return counts
