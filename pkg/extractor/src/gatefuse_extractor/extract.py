"""Sample-level extraction: raw transcript/audio/video to pooled vectors,
with optional per-frame dumps for pooling oracles."""

from __future__ import annotations

import numpy as np

from .backbones import BackboneId, get_backbone, mean_pool
from .media import load_audio, load_keyframes


def text_frames(transcript: str, backbone: BackboneId) -> np.ndarray:
    if backbone.modality != "t":
        raise ValueError(f"{backbone.tag} is not a text backbone")
    return get_backbone("t", backbone.scale).token_frames(transcript)


def extract_text(transcript: str, backbone: BackboneId) -> np.ndarray:
    """Mean of per-token representations; dim 768 (base) or 4096 (large)."""
    return mean_pool(text_frames(transcript, backbone))


def audio_frames(path, backbone: BackboneId) -> np.ndarray:
    if backbone.modality != "a":
        raise ValueError(f"{backbone.tag} is not an audio backbone")
    samples = load_audio(path)
    return get_backbone("a", backbone.scale).frame_features(samples)


def extract_audio(path, backbone: BackboneId) -> np.ndarray:
    """Mean over time of per-window features; dim 768 (base) or 4096 (large)."""
    return mean_pool(audio_frames(path, backbone))


def video_frames(path, backbone: BackboneId, n_keyframes: int) -> np.ndarray:
    if backbone.modality != "v":
        raise ValueError(f"{backbone.tag} is not a vision backbone")
    encoder = get_backbone("v", backbone.scale)
    patches = load_keyframes(path, n_keyframes)
    return np.stack([encoder.frame_feature(patch) for patch in patches])


def extract_video(path, backbone: BackboneId, n_keyframes: int) -> np.ndarray:
    """Per-keyframe features mean-pooled into one vector; dim 2048 (base)
    or 3584 (large)."""
    return mean_pool(video_frames(path, backbone, n_keyframes))
