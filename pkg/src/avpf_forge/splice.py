"""Audio-visual self-splicing: replace a snippet with its nearest match.

A short destination snippet is replaced by the most visually similar
same-length snippet from elsewhere in the same clip, constrained to a
temporal offset range. Video frames and the corresponding audio span are
replaced together so the two modalities stay mutually consistent; a
short equal-power crossfade suppresses clicks at the audio boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from avpf_forge.errors import InfeasibleError, RangeError, ValidationError
from avpf_forge.manifest import AvssRecord
from avpf_forge.media import AudioTrack, Clip


@dataclass(frozen=True)
class AvssParams:
    """Self-splice configuration."""

    len_frames: int = 1
    range_s: tuple[float, float] = (0.5, 1.0)
    crossfade_ms: float = 2.0
    max_retries: int = 8

    def validate(self) -> None:
        if self.len_frames < 1:
            raise ValidationError("len_frames must be >= 1")
        lo, hi = self.range_s
        if not (0 < lo <= hi):
            raise ValidationError("range_s must satisfy 0 < lo <= hi")
        if self.crossfade_ms < 0:
            raise ValidationError("crossfade_ms must be >= 0")
        if self.max_retries < 0:
            raise ValidationError("max_retries must be >= 0")


@dataclass(frozen=True)
class SpliceSpec:
    """A concrete splice: which snippet replaces which."""

    dest_start: int
    source_start: int
    length: int
    fps: float
    offset_range_s: tuple[float, float]

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValidationError("splice length must be >= 1")
        if self.dest_start < 0 or self.source_start < 0:
            raise ValidationError("splice indices must be non-negative")
        if self.dest_start == self.source_start:
            raise ValidationError("splice source must differ from destination")
        lo, hi = self.offset_range_s
        offset_s = abs(self.dest_start - self.source_start) / self.fps
        if not (lo - 1e-9 <= offset_s <= hi + 1e-9):
            raise ValidationError(
                f"splice offset {offset_s:.4f}s outside range [{lo}, {hi}]s"
            )


def offset_bounds(range_s: tuple[float, float], fps: float) -> tuple[int, int]:
    """Frame-offset bounds that keep realized offsets inside the range."""
    lo = math.ceil(range_s[0] * fps - 1e-9)
    hi = math.floor(range_s[1] * fps + 1e-9)
    return max(lo, 1), hi


def snippet_distance(clip: Clip, i: int, j: int, length: int) -> float:
    """Mean absolute pixel difference between two same-length snippets."""
    if length < 1:
        raise RangeError("snippet length must be >= 1")
    last = clip.n_frames - length
    if not (0 <= i <= last and 0 <= j <= last):
        raise RangeError(
            f"snippet starts {i}, {j} with length {length} out of range for T={clip.n_frames}"
        )
    return float(np.mean(np.abs(clip.frames[i : i + length] - clip.frames[j : j + length])))


def feasible_sources(n_frames: int, dest: int, length: int, off_lo: int, off_hi: int) -> np.ndarray:
    """All source starts within the offset band that fit in the clip."""
    last = n_frames - length
    if last < 0:
        return np.empty(0, dtype=int)
    candidates = np.arange(0, last + 1)
    offsets = np.abs(candidates - dest)
    return candidates[(offsets >= off_lo) & (offsets <= off_hi)]


def find_similar_snippet(
    clip: Clip, dest: int, length: int, range_s: tuple[float, float]
) -> SpliceSpec:
    """Exhaustive search for the most similar snippet in the offset band.

    Distance ties break toward the smallest source index, which makes the
    result a pure function of the inputs.
    """
    off_lo, off_hi = offset_bounds(range_s, clip.fps)
    if not (0 <= dest <= clip.n_frames - length):
        raise RangeError(f"destination {dest} with length {length} out of range")
    candidates = feasible_sources(clip.n_frames, dest, length, off_lo, off_hi)
    if candidates.size == 0:
        raise InfeasibleError(
            f"no source start within offset [{off_lo}, {off_hi}] frames for dest {dest}"
        )
    best = None
    for j in candidates:
        d = snippet_distance(clip, dest, int(j), length)
        if best is None or d < best[0]:
            best = (d, int(j))
    return SpliceSpec(
        dest_start=dest,
        source_start=best[1],
        length=length,
        fps=clip.fps,
        offset_range_s=range_s,
    )


def _equal_power_ramp(n: int) -> tuple[np.ndarray, np.ndarray]:
    theta = (np.pi / 2.0) * (np.arange(1, n + 1) / (n + 1.0))
    return np.cos(theta), np.sin(theta)


def splice(clip: Clip, spec: SpliceSpec, crossfade_ms: float = 2.0) -> tuple[Clip, AvssRecord]:
    """Replace the destination snippet with the source snippet.

    Frames [dest, dest+length) take the source frames; the audio span
    covering the same time interval takes the source span's samples, with
    an equal-power crossfade of ``crossfade_ms`` at each boundary kept
    inside the replaced span. Everything outside the span is untouched
    and the total duration is unchanged.
    """
    last = clip.n_frames - spec.length
    if not (0 <= spec.dest_start <= last and 0 <= spec.source_start <= last):
        raise ValidationError("splice spec indices out of range for this clip")
    if abs(spec.fps - clip.fps) > 1e-9:
        raise ValidationError(f"splice spec fps {spec.fps} != clip fps {clip.fps}")
    if crossfade_ms < 0:
        raise ValidationError("crossfade_ms must be >= 0")

    frames = clip.frames.copy()
    frames[spec.dest_start : spec.dest_start + spec.length] = clip.frames[
        spec.source_start : spec.source_start + spec.length
    ]

    sr = clip.audio.sample_rate
    dest_lo = int(round(spec.dest_start * sr / clip.fps))
    dest_hi = int(round((spec.dest_start + spec.length) * sr / clip.fps))
    dest_hi = min(dest_hi, clip.audio.samples.size)
    span = dest_hi - dest_lo
    src_lo = int(round(spec.source_start * sr / clip.fps))
    if src_lo + span > clip.audio.samples.size:
        src_lo = clip.audio.samples.size - span
    source_seg = clip.audio.samples[src_lo : src_lo + span].copy()

    fade = min(int(round(crossfade_ms * sr / 1000.0)), span // 2)
    if fade > 0:
        w_old, w_new = _equal_power_ramp(fade)
        old = clip.audio.samples
        source_seg[:fade] = w_old * old[dest_lo : dest_lo + fade] + w_new * source_seg[:fade]
        source_seg[-fade:] = (
            w_old[::-1] * old[dest_hi - fade : dest_hi] + w_new[::-1] * source_seg[-fade:]
        )

    samples = clip.audio.samples.copy()
    samples[dest_lo:dest_hi] = np.clip(source_seg, -1.0, 1.0)
    out = Clip(
        id=clip.id,
        frames=frames,
        audio=AudioTrack(samples=samples, sample_rate=sr),
        fps=clip.fps,
    )
    record = AvssRecord(
        dest_start=spec.dest_start,
        source_start=spec.source_start,
        length=spec.length,
        fps=clip.fps,
        offset_range_s=spec.offset_range_s,
    )
    return out, record


def plan_splice(clip: Clip, params: AvssParams, rng: np.random.Generator) -> SpliceSpec:
    """Pick a destination uniformly among frames with a feasible source."""
    params.validate()
    off_lo, off_hi = offset_bounds(params.range_s, clip.fps)
    last = clip.n_frames - params.len_frames
    feasible = [
        i
        for i in range(0, last + 1)
        if feasible_sources(clip.n_frames, i, params.len_frames, off_lo, off_hi).size > 0
    ]
    if not feasible:
        raise InfeasibleError(
            f"no destination admits a source at offset [{off_lo}, {off_hi}] frames "
            f"in a {clip.n_frames}-frame clip"
        )
    dest = feasible[int(rng.integers(0, len(feasible)))]
    return find_similar_snippet(clip, dest, params.len_frames, params.range_s)
