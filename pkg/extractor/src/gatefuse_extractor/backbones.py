"""Per-modality feature encoders behind a fixed (modality, scale) -> dim
contract:

    text   base 768   large 4096
    audio  base 768   large 4096
    vision base 2048  large 3584

Every encoder maps one sample to a matrix of per-unit vectors (tokens,
audio frames, keyframes) plus the mean-pooled manifest vector. The
encoders here are deterministic hash-projection featurizers: content-
dependent, seeded, and runnable anywhere. Pretrained neural encoders can
be swapped in behind the same Backbone interface; the dim contract and
pooling behaviour are what downstream code relies on.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

EXPECTED_DIMS = {
    ("t", "base"): 768,
    ("t", "large"): 4096,
    ("a", "base"): 768,
    ("a", "large"): 4096,
    ("v", "base"): 2048,
    ("v", "large"): 3584,
}

AUDIO_SAMPLE_RATE = 16000
AUDIO_WINDOW = 400   # 25 ms at 16 kHz
AUDIO_HOP = 320      # 20 ms at 16 kHz
PATCH_SIDE = 16      # keyframes are reduced to PATCH_SIDE^2 grayscale pixels


@dataclass(frozen=True)
class BackboneId:
    modality: str
    scale: str

    def __post_init__(self):
        if (self.modality, self.scale) not in EXPECTED_DIMS:
            raise ValueError(
                f"no backbone for modality {self.modality!r} at scale {self.scale!r}"
            )

    @property
    def dim(self) -> int:
        return EXPECTED_DIMS[(self.modality, self.scale)]

    @property
    def tag(self) -> str:
        names = {"t": "text", "a": "audio", "v": "vision"}
        return f"{names[self.modality]}-{self.scale}"


def _seeded_rng(*parts: str) -> np.random.Generator:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def mean_pool(frames: np.ndarray) -> np.ndarray:
    """Left-to-right arithmetic mean over the frame axis."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2 or frames.shape[0] == 0:
        raise ValueError("expected a non-empty 2-D frame stack")
    acc = np.zeros(frames.shape[1])
    for frame in frames:
        acc += frame
    return acc / frames.shape[0]


class TextBackbone:
    """Whitespace tokens mapped to per-token hash embeddings."""

    def __init__(self, backbone: BackboneId):
        assert backbone.modality == "t"
        self.id = backbone

    def token_frames(self, transcript: str) -> np.ndarray:
        tokens = transcript.split()
        if not tokens:
            raise ValueError("empty transcript")
        rows = []
        for token in tokens:
            rng = _seeded_rng("token", self.id.tag, token)
            rows.append(rng.standard_normal(self.id.dim))
        return np.stack(rows)


class _Projection:
    """Cached seeded random projection, one per (tag, input width)."""

    def __init__(self, tag: str, in_width: int, dim: int):
        rng = _seeded_rng("projection", tag, str(in_width))
        self.matrix = rng.standard_normal((dim, in_width)) / np.sqrt(in_width)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.matrix @ x


class AudioBackbone:
    """Windowed waveform frames passed through a fixed random projection."""

    def __init__(self, backbone: BackboneId):
        assert backbone.modality == "a"
        self.id = backbone
        self._proj = _Projection(backbone.tag, AUDIO_WINDOW, backbone.dim)

    def frame_features(self, samples: np.ndarray) -> np.ndarray:
        """``samples`` is mono float audio already at AUDIO_SAMPLE_RATE."""
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("expected a non-empty mono sample array")
        if samples.size < AUDIO_WINDOW:
            padded = np.zeros(AUDIO_WINDOW)
            padded[: samples.size] = samples
            windows = padded[None, :]
        else:
            n = 1 + (samples.size - AUDIO_WINDOW) // AUDIO_HOP
            windows = np.stack([
                samples[i * AUDIO_HOP: i * AUDIO_HOP + AUDIO_WINDOW]
                for i in range(n)
            ])
        return np.stack([self._proj(w) for w in windows])


class VisionBackbone:
    """Downscaled grayscale keyframes through a fixed random projection."""

    def __init__(self, backbone: BackboneId):
        assert backbone.modality == "v"
        self.id = backbone
        self._proj = _Projection(backbone.tag, PATCH_SIDE * PATCH_SIDE, backbone.dim)

    def frame_feature(self, patch: np.ndarray) -> np.ndarray:
        """``patch`` is a PATCH_SIDE x PATCH_SIDE grayscale image in [0, 1]."""
        patch = np.asarray(patch, dtype=np.float64)
        if patch.shape != (PATCH_SIDE, PATCH_SIDE):
            raise ValueError(f"expected a {PATCH_SIDE}x{PATCH_SIDE} patch, got {patch.shape}")
        return self._proj(patch.ravel())


_CACHE: dict[tuple[str, str], object] = {}


def get_backbone(modality: str, scale: str):
    key = (modality, scale)
    if key not in _CACHE:
        backbone = BackboneId(modality, scale)
        cls = {"t": TextBackbone, "a": AudioBackbone, "v": VisionBackbone}[modality]
        _CACHE[key] = cls(backbone)
    return _CACHE[key]
