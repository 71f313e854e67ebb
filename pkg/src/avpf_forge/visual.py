"""Visual self-blending: temporal frame shift plus masked convex blending.

A copy of the frame track shifted by a few frames is blended back into
the original, weighted per frame by the blend schedule and per pixel by
the facial mask:

    out[t] = frame[t] * (1 - M[t] * a[t]) + shifted[t] * M[t] * a[t]

Frames with a zero blend factor stay bit-identical; audio is untouched.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from avpf_forge.errors import RangeError, ValidationError
from avpf_forge.manifest import VsbRecord
from avpf_forge.masks import MaskParams, build_facial_masks
from avpf_forge.media import Clip, LandmarkTrack
from avpf_forge.windows import BlendSchedule, sample_windows, schedule_for_windows

BOUNDARY_POLICIES = ("clamp", "reflect")


@dataclass(frozen=True)
class ShiftSpec:
    """Signed frame shift with an out-of-range index policy.

    ``clamp`` repeats the terminal frame (a freeze); ``reflect`` mirrors
    the index about the track ends.
    """

    shift_frames: int
    boundary_policy: str = "clamp"

    def __post_init__(self) -> None:
        if self.shift_frames == 0:
            raise ValidationError("shift_frames must be nonzero (zero shift is a no-op fake)")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValidationError(f"boundary_policy must be one of {BOUNDARY_POLICIES}")


@dataclass(frozen=True)
class VsbParams:
    """Visual self-blend configuration.

    ``shift_frames`` is the fixed shift magnitude; set ``shift_range``
    to draw the magnitude uniformly from an inclusive integer range
    instead. The shift direction is drawn uniformly either way.
    """

    shift_frames: int = 2
    shift_range: tuple[int, int] | None = None
    boundary_policy: str = "clamp"

    def validate(self) -> None:
        if self.shift_range is not None:
            lo, hi = self.shift_range
            if not (1 <= lo <= hi):
                raise ValidationError("shift_range must satisfy 1 <= lo <= hi")
        elif self.shift_frames < 1:
            raise ValidationError("shift_frames magnitude must be >= 1")
        if self.boundary_policy not in BOUNDARY_POLICIES:
            raise ValidationError(f"boundary_policy must be one of {BOUNDARY_POLICIES}")


def resolve_indices(n: int, shift: int, policy: str) -> np.ndarray:
    """Source index for each output position under the boundary policy."""
    idx = np.arange(n) + shift
    if policy == "clamp":
        return np.clip(idx, 0, n - 1)
    # Mirror about 0 and n-1 without repeating the edge sample.
    period = 2 * (n - 1) if n > 1 else 1
    idx = np.abs(idx) % period
    return np.where(idx >= n, period - idx, idx)


def shift_frames(clip: Clip, spec: ShiftSpec) -> np.ndarray:
    """Temporally shifted frame track: out[t] = frames[t + shift]."""
    if abs(spec.shift_frames) >= clip.n_frames:
        raise RangeError(
            f"|shift| = {abs(spec.shift_frames)} must be < clip length {clip.n_frames}"
        )
    idx = resolve_indices(clip.n_frames, spec.shift_frames, spec.boundary_policy)
    return clip.frames[idx]


def blend_visual(
    clip: Clip,
    shifted: np.ndarray,
    schedule: BlendSchedule,
    masks: dict[int, np.ndarray],
) -> Clip:
    """Blend the shifted track into the clip inside the masked region.

    Every frame with a positive blend factor needs a mask of the frame's
    spatial shape; all other frames pass through bit-identical.
    """
    if shifted.shape != clip.frames.shape:
        raise ValidationError("shifted track shape differs from clip frames")
    if schedule.values.shape[0] != clip.n_frames:
        raise ValidationError(
            f"schedule length {schedule.values.shape[0]} != clip length {clip.n_frames}"
        )
    out = clip.frames.copy()
    for t in np.nonzero(schedule.values > 0.0)[0]:
        mask = masks.get(int(t))
        if mask is None:
            raise ValidationError(f"no facial mask for active frame {t}")
        if mask.shape != (clip.height, clip.width):
            raise ValidationError(f"mask for frame {t} has shape {mask.shape}")
        weight = (schedule.values[t] * mask)[..., None]
        out[t] = clip.frames[t] * (1.0 - weight) + shifted[t] * weight
    return clip.with_frames(out)


def plan_shift(params: VsbParams, n_frames: int, rng: np.random.Generator) -> ShiftSpec:
    """Draw the signed shift for one sample."""
    params.validate()
    if params.shift_range is not None:
        lo, hi = params.shift_range
        magnitude = int(rng.integers(lo, hi + 1))
    else:
        magnitude = params.shift_frames
    sign = 1 if int(rng.integers(0, 2)) == 1 else -1
    if magnitude >= n_frames:
        raise RangeError(f"shift magnitude {magnitude} must be < clip length {n_frames}")
    return ShiftSpec(shift_frames=sign * magnitude, boundary_policy=params.boundary_policy)


def visual_self_blend(
    clip: Clip,
    landmarks: LandmarkTrack,
    params: VsbParams,
    window_count: int,
    window_len_s: tuple[float, float],
    ramp_fraction: float,
    peak: float,
    mask_params: MaskParams,
    rng: np.random.Generator,
) -> tuple[Clip, VsbRecord]:
    """Apply one visual self-blend and report what was done."""
    spec = plan_shift(params, clip.n_frames, rng)
    window_set = sample_windows(
        clip.n_frames, clip.fps, window_len_s[0], window_len_s[1], window_count, rng
    )
    schedule = schedule_for_windows(window_set, ramp_fraction, peak)
    masks = build_facial_masks(
        landmarks, window_set, clip.width, clip.height, mask_params, rng
    )
    blended = blend_visual(clip, shift_frames(clip, spec), schedule, masks)
    record = VsbRecord(
        shift_frames=spec.shift_frames,
        windows=window_set.windows,
        alpha_peak=tuple(peak for _ in window_set.windows),
    )
    return blended, record
