"""Media decoding: WAV loading with mono downmix and resampling, video
keyframe sampling and decoding."""

from __future__ import annotations

import wave
from pathlib import Path

import cv2
import numpy as np

from .backbones import AUDIO_SAMPLE_RATE, PATCH_SIDE

_PCM_DTYPES = {1: np.int8, 2: np.int16, 4: np.int32}


def load_audio(path) -> np.ndarray:
    """Mono float64 samples in [-1, 1] at AUDIO_SAMPLE_RATE.

    Multi-channel input is downmixed by averaging; other sample rates are
    resampled by linear interpolation.
    """
    path = Path(path)
    try:
        with wave.open(str(path), "rb") as wav:
            n_channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            n_frames = wav.getnframes()
            raw = wav.readframes(n_frames)
    except (wave.Error, EOFError, OSError) as exc:
        raise ValueError(f"cannot decode audio {path}: {exc}") from exc
    if width not in _PCM_DTYPES:
        raise ValueError(f"cannot decode audio {path}: unsupported sample width {width}")
    if n_frames == 0:
        raise ValueError(f"cannot decode audio {path}: no samples")

    samples = np.frombuffer(raw, dtype=_PCM_DTYPES[width]).astype(np.float64)
    samples /= float(2 ** (8 * width - 1))
    if n_channels > 1:
        samples = samples.reshape(-1, n_channels).mean(axis=1)

    if rate != AUDIO_SAMPLE_RATE:
        n_out = int(round(samples.size * AUDIO_SAMPLE_RATE / rate))
        old_t = np.arange(samples.size) / rate
        new_t = np.arange(max(n_out, 1)) / AUDIO_SAMPLE_RATE
        samples = np.interp(new_t, old_t, samples)
    return samples


def sample_keyframes(frame_count: int, n_keyframes: int) -> list[int]:
    """Evenly spaced frame indices: round(linspace over [0, frame_count-1]),
    duplicates collapsed; always min(n_keyframes, frame_count) distinct
    indices."""
    if frame_count < 1 or n_keyframes < 1:
        raise ValueError("frame_count and n_keyframes must be >= 1")
    raw = np.rint(np.linspace(0.0, frame_count - 1, n_keyframes)).astype(int)
    out: list[int] = []
    for idx in raw.tolist():
        if not out or idx != out[-1]:
            out.append(idx)
    return out


def load_keyframes(path, n_keyframes: int) -> list[np.ndarray]:
    """Decode a video and return its sampled keyframes as PATCH_SIDE-square
    grayscale patches in [0, 1]."""
    path = Path(path)
    capture = cv2.VideoCapture(str(path))
    if not capture.isOpened():
        raise ValueError(f"cannot decode video {path}")
    frame_count = 0
    while capture.grab():
        frame_count += 1
    capture.release()
    if frame_count == 0:
        raise ValueError(f"cannot decode video {path}: no frames")

    wanted = set(sample_keyframes(frame_count, n_keyframes))
    patches: list[np.ndarray] = []
    capture = cv2.VideoCapture(str(path))
    try:
        for index in range(frame_count):
            ok, frame = capture.read()
            if not ok:
                raise ValueError(f"cannot decode video {path}: read failed at frame {index}")
            if index in wanted:
                gray = cv2.cvtColor(frame, cv2.COLOR_BGR2GRAY)
                patch = cv2.resize(gray, (PATCH_SIDE, PATCH_SIDE),
                                   interpolation=cv2.INTER_AREA)
                patches.append(patch.astype(np.float64) / 255.0)
    finally:
        capture.release()
    return patches
