"""Command line for corpus-to-manifest extraction."""

from __future__ import annotations

import argparse
import logging
import sys

from .adapters import ADAPTERS
from .jobs import DEFAULT_KEYFRAMES, ExtractionJob, build_manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatefuse-extract",
        description="Encode a raw corpus into an embedding manifest.",
    )
    parser.add_argument("--root", required=True, help="corpus root directory")
    parser.add_argument("--adapter", required=True, choices=ADAPTERS)
    parser.add_argument("--out", required=True, help="manifest path to write")
    parser.add_argument("--modalities", default="t,a,v",
                        help="comma list from {t,a,v}")
    parser.add_argument("--text-scale", default="base", choices=["base", "large"])
    parser.add_argument("--audio-scale", default="base", choices=["base", "large"])
    parser.add_argument("--vision-scale", default="base", choices=["base", "large"])
    parser.add_argument("--keyframes", type=int, default=DEFAULT_KEYFRAMES,
                        help="keyframes sampled per video")
    parser.add_argument("--frame-dump", default=None,
                        help="directory for per-frame vector dumps (debug)")
    parser.add_argument("--jobs", type=int, default=1)
    parser.add_argument("--dataset-name", default=None)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(sys.argv[1:] if argv is None else argv)
    mods = tuple(t.strip() for t in args.modalities.split(",") if t.strip())
    for m in mods:
        if m not in ("t", "a", "v"):
            parser.error(f"unknown modality {m!r} in --modalities")
    try:
        job = ExtractionJob(
            root=args.root,
            adapter=args.adapter,
            out=args.out,
            modalities=mods,
            scales={"t": args.text_scale, "a": args.audio_scale,
                    "v": args.vision_scale},
            n_keyframes=args.keyframes,
            frame_dump=args.frame_dump,
            jobs=args.jobs,
            dataset_name=args.dataset_name,
        )
        build_manifest(job)
        return 0
    except Exception as exc:
        print(f"gatefuse-extract: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
