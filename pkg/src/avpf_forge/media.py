"""Clip data model and bit-exact on-disk I/O.

A clip on disk is a directory:

    <clip_dir>/frames/%06d.png   lossless frames, 8- or 16-bit RGB
    <clip_dir>/audio.wav         16-bit PCM mono
    <clip_dir>/meta.json         {"fps": <float>, "id": <str>}
    <clip_dir>/landmarks.json    optional sidecar, see LandmarkTrack

In memory, pixels live in [0, 1] and audio samples in [-1, 1]; storage
quantizes pixels to the declared bit depth and audio to 16-bit PCM, so a
save/load round trip is exact for anything that has been through it once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import cv2
import numpy as np
from scipy.io import wavfile

from avpf_forge.errors import AlignmentError, FormatError, IoError, ValidationError

_FRAME_NAME = re.compile(r"^(\d+)\.png$")

LANDMARK_SCHEMA_VERSION = 1


def _readonly(a) -> np.ndarray:
    """Own a float64 copy marked read-only; reuse arrays that already are."""
    if isinstance(a, np.ndarray) and a.dtype == np.float64 and not a.flags.writeable:
        return a
    out = np.asarray(a, dtype=np.float64).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class AudioTrack:
    """Mono waveform with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        samples = _readonly(self.samples)
        if samples.ndim != 1 or samples.size < 1:
            raise ValidationError("audio must be a non-empty 1-D array")
        if not np.all(np.isfinite(samples)):
            raise ValidationError("audio contains NaN or Inf")
        if samples.min() < -1.0 or samples.max() > 1.0:
            raise ValidationError("audio samples must lie in [-1, 1]")
        if int(self.sample_rate) <= 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate


@dataclass(frozen=True)
class Clip:
    """Paired frame sequence and audio track with timing metadata.

    ``frames`` has shape (T, h, w, 3) with values in [0, 1]; individual
    frames are the slices ``frames[t]``. Audio duration must match
    T / fps within one frame period. Instances are immutable; the
    underlying arrays are marked read-only.
    """

    id: str
    frames: np.ndarray
    audio: AudioTrack
    fps: float

    def __post_init__(self) -> None:
        frames = _readonly(self.frames)
        if frames.ndim != 4 or frames.shape[3] != 3:
            raise ValidationError(f"frames must have shape (T, h, w, 3), got {frames.shape}")
        if frames.shape[0] < 1:
            raise ValidationError("clip needs at least one frame")
        if frames.shape[1] < 1 or frames.shape[2] < 1:
            raise ValidationError("frame width and height must be positive")
        if not np.all(np.isfinite(frames)):
            raise ValidationError("frames contain NaN or Inf")
        if frames.min() < 0.0 or frames.max() > 1.0:
            raise ValidationError("pixel values must lie in [0, 1]")
        if not self.fps > 0:
            raise ValidationError(f"fps must be positive, got {self.fps}")
        frame_period = 1.0 / self.fps
        expected = frames.shape[0] / self.fps
        if abs(self.audio.duration_s - expected) > frame_period + 1e-9:
            raise AlignmentError(
                f"audio duration {self.audio.duration_s:.4f}s vs video "
                f"{expected:.4f}s differs by more than one frame period"
            )
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def height(self) -> int:
        return self.frames.shape[1]

    @property
    def width(self) -> int:
        return self.frames.shape[2]

    def with_frames(self, frames: np.ndarray) -> "Clip":
        return Clip(id=self.id, frames=frames, audio=self.audio, fps=self.fps)

    def with_audio(self, audio: AudioTrack) -> "Clip":
        return Clip(id=self.id, frames=self.frames, audio=audio, fps=self.fps)


@dataclass(frozen=True)
class LandmarkTrack:
    """Per-frame 2-D landmark points in pixel coordinates.

    ``points`` has shape (T, K, 2) with a fixed point count K >= 3.
    Bounds against a particular frame size are checked where the track
    is consumed, since the track alone does not know the frame extent.
    """

    points: np.ndarray
    schema_version: int = LANDMARK_SCHEMA_VERSION

    def __post_init__(self) -> None:
        points = _readonly(self.points)
        if points.ndim != 3 or points.shape[2] != 2:
            raise ValidationError(f"landmarks must have shape (T, K, 2), got {points.shape}")
        if points.shape[1] < 3:
            raise ValidationError("need at least 3 landmark points per frame")
        if not np.all(np.isfinite(points)):
            raise ValidationError("landmarks contain NaN or Inf")
        object.__setattr__(self, "points", points)

    @property
    def n_frames(self) -> int:
        return self.points.shape[0]

    @property
    def points_per_frame(self) -> int:
        return self.points.shape[1]

    def check_bounds(self, width: int, height: int) -> None:
        """Raise ValidationError unless every point lies in [0, w) x [0, h)."""
        x = self.points[..., 0]
        y = self.points[..., 1]
        if x.min() < 0 or y.min() < 0 or x.max() >= width or y.max() >= height:
            raise ValidationError("landmark points fall outside the frame bounds")


def _frame_paths(frames_dir: Path) -> list[Path]:
    named = []
    for p in frames_dir.iterdir():
        m = _FRAME_NAME.match(p.name)
        if m is None:
            raise FormatError(f"unexpected file in frames dir: {p.name}")
        named.append((int(m.group(1)), p))
    named.sort()
    return [p for _, p in named]


def load_clip(clip_dir: Path | str) -> Clip:
    """Load a clip from the canonical directory layout.

    Frames are ordered by their numeric filename and normalized to [0, 1]
    from the stored bit depth; audio is normalized from 16-bit PCM.
    """
    clip_dir = Path(clip_dir)
    meta_path = clip_dir / "meta.json"
    frames_dir = clip_dir / "frames"
    audio_path = clip_dir / "audio.wav"
    for p in (meta_path, frames_dir, audio_path):
        if not p.exists():
            raise FormatError(f"missing {p.name} in {clip_dir}")

    try:
        meta = json.loads(meta_path.read_text())
        fps = float(meta["fps"])
        clip_id = str(meta["id"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid meta.json in {clip_dir}: {exc}") from exc

    paths = _frame_paths(frames_dir)
    if not paths:
        raise FormatError(f"no frames found in {frames_dir}")
    frames = []
    shape = None
    for p in paths:
        img = cv2.imread(str(p), cv2.IMREAD_UNCHANGED)
        if img is None:
            raise FormatError(f"could not decode frame {p}")
        if img.ndim == 2:
            img = cv2.cvtColor(img, cv2.COLOR_GRAY2BGR)
        if img.shape[2] != 3:
            raise FormatError(f"frame {p.name} is not 3-channel")
        if shape is None:
            shape = img.shape
        elif img.shape != shape:
            raise FormatError(f"frame {p.name} has shape {img.shape}, expected {shape}")
        if img.dtype == np.uint8:
            scale = 255.0
        elif img.dtype == np.uint16:
            scale = 65535.0
        else:
            raise FormatError(f"frame {p.name} has unsupported dtype {img.dtype}")
        frames.append(cv2.cvtColor(img, cv2.COLOR_BGR2RGB).astype(np.float64) / scale)

    try:
        sr, data = wavfile.read(audio_path)
    except Exception as exc:
        raise FormatError(f"could not read {audio_path}: {exc}") from exc
    if data.dtype != np.int16:
        raise FormatError(f"audio.wav must be 16-bit PCM, got dtype {data.dtype}")
    if data.ndim != 1:
        raise FormatError("audio.wav must be mono")
    samples = np.clip(data.astype(np.float64) / 32767.0, -1.0, 1.0)

    return Clip(id=clip_id, frames=np.stack(frames), audio=AudioTrack(samples, int(sr)), fps=fps)


def save_clip(clip: Clip, out_dir: Path | str, bit_depth: int = 8) -> None:
    """Write a clip to the canonical layout, quantizing to ``bit_depth``.

    save followed by load reproduces pixel values within half a
    quantization step per channel and audio samples bit-exactly at
    16-bit PCM.
    """
    if bit_depth not in (8, 16):
        raise ValidationError(f"bit_depth must be 8 or 16, got {bit_depth}")
    out_dir = Path(out_dir)
    frames_dir = out_dir / "frames"
    try:
        frames_dir.mkdir(parents=True, exist_ok=True)
        scale = float(2**bit_depth - 1)
        dtype = np.uint8 if bit_depth == 8 else np.uint16
        for t in range(clip.n_frames):
            quant = np.rint(clip.frames[t] * scale).astype(dtype)
            bgr = cv2.cvtColor(quant, cv2.COLOR_RGB2BGR)
            if not cv2.imwrite(str(frames_dir / f"{t:06d}.png"), bgr):
                raise IoError(f"failed to write frame {t}")
        pcm = np.rint(np.clip(clip.audio.samples, -1.0, 1.0) * 32767.0).astype(np.int16)
        wavfile.write(out_dir / "audio.wav", clip.audio.sample_rate, pcm)
        meta = {"fps": clip.fps, "id": clip.id}
        (out_dir / "meta.json").write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    except OSError as exc:
        raise IoError(f"could not write clip to {out_dir}: {exc}") from exc


def load_landmarks(path: Path | str) -> LandmarkTrack:
    """Read a landmarks.json sidecar."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"could not read landmarks from {path}: {exc}") from exc
    try:
        version = int(doc["schema_version"])
        per_frame = int(doc["points_per_frame"])
        frames = doc["frames"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"landmarks schema violation in {path}: {exc}") from exc
    if version != LANDMARK_SCHEMA_VERSION:
        raise FormatError(f"unsupported landmarks schema_version {version}")
    if not isinstance(frames, list) or not frames:
        raise FormatError("landmarks 'frames' must be a non-empty list")
    if any(len(pts) != per_frame for pts in frames):
        raise FormatError("landmark point count varies across frames")
    try:
        points = np.asarray(frames, dtype=np.float64)
    except ValueError as exc:
        raise FormatError(f"landmark points are not numeric pairs: {exc}") from exc
    if points.ndim != 3 or points.shape[2] != 2:
        raise FormatError("landmark frames must contain [x, y] pairs")
    try:
        return LandmarkTrack(points=points, schema_version=version)
    except ValidationError as exc:
        raise FormatError(str(exc)) from exc


def save_landmarks(track: LandmarkTrack, path: Path | str) -> None:
    """Write a landmarks.json sidecar (used by fixtures and the validator)."""
    doc = {
        "schema_version": track.schema_version,
        "points_per_frame": track.points_per_frame,
        "frames": track.points.tolist(),
    }
    try:
        Path(path).write_text(json.dumps(doc, sort_keys=True) + "\n")
    except OSError as exc:
        raise IoError(f"could not write landmarks to {path}: {exc}") from exc
