"""Shared fixtures: synthetic clips, landmark tracks, clip directories."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from avpf_forge.media import AudioTrack, Clip, LandmarkTrack, save_clip, save_landmarks


def make_clip(
    n_frames: int = 25,
    height: int = 16,
    width: int = 16,
    fps: float = 25.0,
    sample_rate: int = 16000,
    seed: int = 0,
    clip_id: str = "clip",
) -> Clip:
    """Clip with smoothly moving content and tone-plus-noise audio.

    Content moves frame to frame so temporal shifts are visible and
    snippet distances are informative.
    """
    rng = np.random.default_rng(seed)
    base = rng.random((height, width, 3))
    frames = np.empty((n_frames, height, width, 3))
    for t in range(n_frames):
        rolled = np.roll(base, shift=t, axis=1)
        frames[t] = np.clip(rolled * (0.6 + 0.4 * np.sin(0.3 * t)), 0.0, 1.0)
    n_samples = int(round(n_frames * sample_rate / fps))
    t = np.arange(n_samples) / sample_rate
    tone = 0.3 * np.sin(2 * np.pi * 500.0 * t)
    noise = 0.05 * rng.standard_normal(n_samples)
    samples = np.clip(tone + noise, -1.0, 1.0)
    return Clip(
        id=clip_id,
        frames=frames,
        audio=AudioTrack(samples=samples, sample_rate=sample_rate),
        fps=fps,
    )


def make_landmarks(
    clip: Clip, n_points: int = 8, inset: float = 0.2, seed: int = 1
) -> LandmarkTrack:
    """Polygonal landmark ring inside the frame, drifting slightly over time."""
    rng = np.random.default_rng(seed)
    cx, cy = (clip.width - 1) / 2.0, (clip.height - 1) / 2.0
    radius = (0.5 - inset) * min(clip.width - 1, clip.height - 1)
    angles = np.linspace(0.0, 2 * np.pi, n_points, endpoint=False)
    ring = np.stack([cx + radius * np.cos(angles), cy + radius * np.sin(angles)], axis=1)
    drift = rng.uniform(-0.5, 0.5, size=(clip.n_frames, 1, 2))
    points = np.clip(
        ring[None, :, :] + drift,
        0.0,
        [[[clip.width - 1e-6, clip.height - 1e-6]]],
    )
    return LandmarkTrack(points=points)


def write_clip_dir(
    clip: Clip, directory: Path, landmarks: LandmarkTrack | None = None
) -> Path:
    save_clip(clip, directory)
    if landmarks is not None:
        save_landmarks(landmarks, directory / "landmarks.json")
    return directory


@pytest.fixture
def small_clip() -> Clip:
    return make_clip(n_frames=25, height=16, width=16, seed=3)


@pytest.fixture
def clip_dir(tmp_path: Path, small_clip: Clip) -> Path:
    return write_clip_dir(small_clip, tmp_path / "clip", make_landmarks(small_clip))
