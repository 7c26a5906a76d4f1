import csv
import wave

import cv2
import numpy as np
import pytest


def write_wav(path, seconds=0.3, freq=440.0, rate=16000, channels=1):
    n = int(seconds * rate)
    t = np.arange(n) / rate
    tone = 0.5 * np.sin(2 * np.pi * freq * t)
    pcm = (tone * 32767).astype(np.int16)
    if channels == 2:
        pcm = np.column_stack([pcm, (pcm * 0.5).astype(np.int16)]).ravel()
    with wave.open(str(path), "wb") as wav:
        wav.setnchannels(channels)
        wav.setsampwidth(2)
        wav.setframerate(rate)
        wav.writeframes(pcm.tobytes())
    return path


def write_video(path, n_frames=24, size=(48, 32), seed=0):
    rng = np.random.default_rng(seed)
    writer = cv2.VideoWriter(
        str(path), cv2.VideoWriter_fourcc(*"mp4v"), 12.0, size
    )
    assert writer.isOpened()
    for i in range(n_frames):
        frame = np.full((size[1], size[0], 3), (i * 9) % 255, dtype=np.uint8)
        frame[:8, :8] = rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8)
        writer.write(frame)
    writer.release()
    return path


@pytest.fixture
def micro_corpus(tmp_path):
    """generic-csv corpus: 5 samples with transcript + audio + video."""
    root = tmp_path / "corpus"
    (root / "media").mkdir(parents=True)
    rows = []
    sentences = [
        "oh that is just great",
        "what a wonderful surprise",
        "i totally meant that",
        "this went exactly as planned",
        "no notes perfect as always",
    ]
    splits = ["train", "train", "train", "val", "test"]
    for i, (sentence, split) in enumerate(zip(sentences, splits)):
        sid = f"clip-{i}"
        write_wav(root / "media" / f"{sid}.wav", freq=300.0 + 40 * i,
                  channels=2 if i % 2 else 1, rate=22050 if i == 2 else 16000)
        write_video(root / "media" / f"{sid}.mp4", n_frames=10 + 3 * i, seed=i)
        rows.append({
            "id": sid, "split": split, "label": i % 2, "transcript": sentence,
            "audio": f"media/{sid}.wav", "video": f"media/{sid}.mp4",
        })
    with open(root / "index.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()))
        writer.writeheader()
        writer.writerows(rows)
    return root
