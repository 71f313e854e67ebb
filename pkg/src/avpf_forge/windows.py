"""Temporal window sampling and blend-schedule construction.

Perturbations are confined to short temporal windows; a triangular ramp
softens the window boundaries so the blend factor rises from 0 to its
peak and back instead of switching on and off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from avpf_forge.errors import ValidationError


@dataclass(frozen=True)
class WindowSet:
    """Disjoint half-open step intervals [start, end) within [0, length).

    ``clamped`` flags the degenerate case where the requested minimum
    duration exceeded the track and a single full-cover window was
    returned instead.
    """

    length: int
    windows: tuple[tuple[int, int], ...]
    clamped: bool = False

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValidationError("window set length must be >= 1")
        prev_end = None
        for start, end in sorted(self.windows):
            if not (0 <= start < end <= self.length):
                raise ValidationError(f"window [{start}, {end}) outside [0, {self.length})")
            if prev_end is not None and start < prev_end:
                raise ValidationError("windows must be pairwise disjoint")
            prev_end = end
        object.__setattr__(self, "windows", tuple(sorted(self.windows)))


@dataclass(frozen=True)
class BlendSchedule:
    """Per-step blend factor in [0, peak], zero outside the window union."""

    values: np.ndarray
    peak: float

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64).copy()
        if values.ndim != 1:
            raise ValidationError("schedule values must be 1-D")
        if not (0.0 < self.peak <= 1.0):
            raise ValidationError(f"peak must lie in (0, 1], got {self.peak}")
        if values.min() < 0.0 or values.max() > self.peak + 1e-12:
            raise ValidationError("schedule values must lie in [0, peak]")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)


def sample_windows(
    n_steps: int,
    step_rate: float,
    min_len_s: float,
    max_len_s: float,
    n_windows: int,
    rng: np.random.Generator,
) -> WindowSet:
    """Draw up to ``n_windows`` disjoint windows with durations in a range.

    Window lengths are integer step counts drawn uniformly from
    [ceil(min_len_s * step_rate), floor(max_len_s * step_rate)], clamped
    to the track; each window start is uniform over every position that
    keeps it disjoint from the windows already placed. When no feasible
    position remains, fewer windows are returned. If even the minimum
    duration exceeds the track, a single full-cover window is returned
    with ``clamped=True``.
    """
    if n_steps < 1:
        raise ValidationError("n_steps must be >= 1")
    if not (0 < min_len_s <= max_len_s):
        raise ValidationError("need 0 < min_len_s <= max_len_s")
    if step_rate <= 0:
        raise ValidationError("step_rate must be positive")
    if n_windows < 1:
        raise ValidationError("n_windows must be >= 1")

    lo = math.ceil(min_len_s * step_rate - 1e-9)
    hi = math.floor(max_len_s * step_rate + 1e-9)
    if lo > n_steps:
        return WindowSet(length=n_steps, windows=((0, n_steps),), clamped=True)
    lo = max(lo, 1)
    # No integer step count inside [min, max]: take the smallest >= min.
    hi = max(min(hi, n_steps), lo)

    placed: list[tuple[int, int]] = []
    for _ in range(n_windows):
        length = int(rng.integers(lo, hi + 1))
        # Free segments between already-placed windows.
        segments = []
        cursor = 0
        for start, end in sorted(placed):
            if start - cursor >= length:
                segments.append((cursor, start))
            cursor = end
        if n_steps - cursor >= length:
            segments.append((cursor, n_steps))
        total = sum(seg_end - seg_start - length + 1 for seg_start, seg_end in segments)
        if total == 0:
            break
        pick = int(rng.integers(0, total))
        for seg_start, seg_end in segments:
            count = seg_end - seg_start - length + 1
            if pick < count:
                placed.append((seg_start + pick, seg_start + pick + length))
                break
            pick -= count
    return WindowSet(length=n_steps, windows=tuple(sorted(placed)))


def _trapezoid(start: int, end: int, ramp: int, peak: float, out: np.ndarray) -> None:
    length = end - start
    r = min(ramp, length // 2)
    if r == 0:
        out[start:end] = peak
        return
    i = np.arange(start, end, dtype=np.float64)
    rise = (i - start + 1.0) / r
    fall = (end - i) / r
    out[start:end] = peak * np.minimum(1.0, np.minimum(rise, fall))


def smooth_to_schedule(window_set: WindowSet, ramp_steps: int, peak: float) -> BlendSchedule:
    """Turn binary windows into a trapezoidal blend schedule.

    Inside each window the factor rises linearly over ``ramp_steps``
    (value (k+1)/ramp_steps * peak at the k-th in-window step), holds at
    ``peak``, and falls symmetrically; outside every window it is exactly
    zero. A ramp wider than half the window is clamped to half the
    window; ``ramp_steps=0`` gives the rectangular limit.
    """
    if ramp_steps < 0:
        raise ValidationError("ramp_steps must be >= 0")
    if not (0.0 < peak <= 1.0):
        raise ValidationError(f"peak must lie in (0, 1], got {peak}")
    values = np.zeros(window_set.length, dtype=np.float64)
    for start, end in window_set.windows:
        _trapezoid(start, end, ramp_steps, peak, values)
    return BlendSchedule(values=values, peak=peak)


def schedule_for_windows(window_set: WindowSet, ramp_fraction: float, peak: float) -> BlendSchedule:
    """Schedule with a per-window ramp of ``ramp_fraction`` of its length."""
    if not (0.0 <= ramp_fraction <= 0.5):
        raise ValidationError("ramp_fraction must lie in [0, 0.5]")
    if not (0.0 < peak <= 1.0):
        raise ValidationError(f"peak must lie in (0, 1], got {peak}")
    values = np.zeros(window_set.length, dtype=np.float64)
    for start, end in window_set.windows:
        ramp = int(round(ramp_fraction * (end - start)))
        _trapezoid(start, end, ramp, peak, values)
    return BlendSchedule(values=values, peak=peak)
