"""Per-frame facial masks: convex hull, elastic deformation, Gaussian blur.

The blend region for visual perturbations is the convex hull of the
facial landmarks, deformed by a coarse random displacement field for
shape diversity and blurred so the blend boundary is soft.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from avpf_forge.errors import DegenerateHullError, ValidationError
from avpf_forge.media import LandmarkTrack
from avpf_forge.windows import WindowSet

_COLLINEAR_EPS = 1e-9


@dataclass(frozen=True)
class MaskParams:
    """Knobs for facial mask construction.

    ``mask_sigma_px`` is the blur sigma at a ``sigma_ref_px``-sized frame
    and scales proportionally with the short frame side. ``elastic_max_disp_frac``
    bounds displacement magnitude as a fraction of the landmark
    bounding-box diagonal.
    """

    elastic_grid: int = 4
    elastic_max_disp_frac: float = 0.05
    mask_sigma_px: float = 3.0
    sigma_ref_px: int = 96
    fallback_inset_frac: float = 0.15
    per_frame_field: bool = False

    def validate(self) -> None:
        if self.elastic_grid < 2:
            raise ValidationError("elastic_grid must be >= 2")
        if self.elastic_max_disp_frac < 0:
            raise ValidationError("elastic_max_disp_frac must be >= 0")
        if self.mask_sigma_px < 0:
            raise ValidationError("mask_sigma_px must be >= 0")
        if not (0.0 <= self.fallback_inset_frac < 0.5):
            raise ValidationError("fallback_inset_frac must lie in [0, 0.5)")


@dataclass(frozen=True)
class ElasticField:
    """Coarse grid of 2-D pixel displacements, bilinearly upsampled at use.

    ``displacements`` has shape (grid_h, grid_w, 2) holding (dx, dy); the
    grid corners coincide with the frame corners. Vector magnitudes never
    exceed the ``max_disp`` they were sampled with.
    """

    displacements: np.ndarray
    order: int = 1

    def __post_init__(self) -> None:
        disp = np.asarray(self.displacements, dtype=np.float64).copy()
        if disp.ndim != 3 or disp.shape[2] != 2:
            raise ValidationError(f"displacements must have shape (gh, gw, 2), got {disp.shape}")
        if disp.shape[0] < 2 or disp.shape[1] < 2:
            raise ValidationError("displacement grid dims must be >= 2")
        if self.order != 1:
            raise ValidationError("only bilinear (order=1) interpolation is supported")
        disp.setflags(write=False)
        object.__setattr__(self, "displacements", disp)

    @classmethod
    def sample(
        cls, grid_shape: tuple[int, int], max_disp: float, rng: np.random.Generator
    ) -> "ElasticField":
        """Draw uniform displacements, rescaling any vector longer than max_disp."""
        gh, gw = grid_shape
        disp = rng.uniform(-max_disp, max_disp, size=(gh, gw, 2))
        norms = np.linalg.norm(disp, axis=2)
        over = norms > max_disp
        if np.any(over):
            disp[over] *= (max_disp / norms[over])[:, None]
        return cls(displacements=disp)


def _convex_hull(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices (y axis down)."""
    pts = np.unique(points, axis=0)
    if pts.shape[0] < 3:
        raise DegenerateHullError("fewer than 3 distinct landmark points")
    order = np.lexsort((pts[:, 1], pts[:, 0]))
    pts = pts[order]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= _COLLINEAR_EPS:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= _COLLINEAR_EPS:
            upper.pop()
        upper.append(p)
    hull = np.asarray(lower[:-1] + upper[:-1])
    if hull.shape[0] < 3:
        raise DegenerateHullError("landmark points are collinear")
    return hull


def hull_mask(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Binary mask of the convex hull of ``points`` on a width x height grid.

    A pixel counts as inside when its center (integer coordinates) lies
    inside or on the hull boundary.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] != 2 or points.shape[0] < 3:
        raise ValidationError("need at least 3 (x, y) points")
    hull = _convex_hull(points)
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    gx, gy = np.meshgrid(xs, ys)
    inside = np.ones((height, width), dtype=bool)
    n = hull.shape[0]
    for k in range(n):
        ax, ay = hull[k]
        bx, by = hull[(k + 1) % n]
        cross = (bx - ax) * (gy - ay) - (by - ay) * (gx - ax)
        inside &= cross >= -_COLLINEAR_EPS
    return inside.astype(np.float64)


def elastic_deform(mask: np.ndarray, field: ElasticField) -> np.ndarray:
    """Warp ``mask`` by the bilinearly upsampled displacement field.

    output(x, y) samples the input at (x, y) + displacement(x, y) with
    bilinear interpolation and zero padding outside the frame, so a
    constant field (+d, 0) moves content left by d pixels.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise ValidationError("mask must be 2-D")
    h, w = mask.shape
    gh, gw = field.displacements.shape[:2]
    gy = np.arange(h) * ((gh - 1) / (h - 1)) if h > 1 else np.zeros(h)
    gx = np.arange(w) * ((gw - 1) / (w - 1)) if w > 1 else np.zeros(w)
    grid_y, grid_x = np.meshgrid(gy, gx, indexing="ij")
    coords = np.stack([grid_y.ravel(), grid_x.ravel()])
    dx = ndimage.map_coordinates(field.displacements[..., 0], coords, order=1).reshape(h, w)
    dy = ndimage.map_coordinates(field.displacements[..., 1], coords, order=1).reshape(h, w)
    py, px = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    sample = np.stack([(py + dy).ravel(), (px + dx).ravel()])
    out = ndimage.map_coordinates(mask, sample, order=1, mode="constant", cval=0.0).reshape(h, w)
    return np.clip(out, 0.0, 1.0)


def gaussian_smooth(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel truncated at 3 sigma, reflect padded.

    The kernel is normalized to unit sum, so constant masks are preserved
    exactly; sigma = 0 is the identity.
    """
    mask = np.asarray(mask, dtype=np.float64)
    if mask.ndim != 2:
        raise ValidationError("mask must be 2-D")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    if sigma == 0:
        return mask.copy()
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-0.5 * (offsets / sigma) ** 2)
    kernel /= kernel.sum()
    out = ndimage.correlate1d(mask, kernel, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, kernel, axis=1, mode="reflect")
    return np.clip(out, 0.0, 1.0)


def inset_rectangle_track(
    width: int, height: int, n_frames: int, inset_frac: float
) -> LandmarkTrack:
    """Fallback landmark track: a fixed inset rectangle on every frame.

    Used when no landmark sidecar exists, e.g. for pre-cropped face ROI
    sequences where the face fills the frame.
    """
    x0 = inset_frac * (width - 1)
    x1 = (1.0 - inset_frac) * (width - 1)
    y0 = inset_frac * (height - 1)
    y1 = (1.0 - inset_frac) * (height - 1)
    quad = np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)
    return LandmarkTrack(points=np.repeat(quad[None, :, :], n_frames, axis=0))


def build_facial_masks(
    landmarks: LandmarkTrack,
    window_set: WindowSet,
    width: int,
    height: int,
    params: MaskParams,
    rng: np.random.Generator,
) -> dict[int, np.ndarray]:
    """Build hull -> deform -> blur masks for every frame inside the windows.

    One displacement field is drawn per window and shared across its
    frames; per-frame fields would make the mask boundary flicker over
    time. Set ``per_frame_field=True`` to draw one per frame instead.
    """
    params.validate()
    if landmarks.n_frames < window_set.length:
        raise ValidationError(
            f"landmarks cover {landmarks.n_frames} frames, window set spans {window_set.length}"
        )
    sigma = params.mask_sigma_px * min(width, height) / params.sigma_ref_px
    masks: dict[int, np.ndarray] = {}
    for start, end in window_set.windows:
        window_points = landmarks.points[start:end].reshape(-1, 2)
        span = window_points.max(axis=0) - window_points.min(axis=0)
        max_disp = params.elastic_max_disp_frac * float(np.hypot(span[0], span[1]))
        field = ElasticField.sample((params.elastic_grid, params.elastic_grid), max_disp, rng)
        for t in range(start, end):
            if params.per_frame_field:
                field = ElasticField.sample(
                    (params.elastic_grid, params.elastic_grid), max_disp, rng
                )
            mask = hull_mask(landmarks.points[t], width, height)
            mask = elastic_deform(mask, field)
            masks[t] = gaussian_smooth(mask, sigma)
    return masks
