"""Facial mask construction vs brute-force geometry and convolution oracles."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from avpf_forge.errors import DegenerateHullError, ValidationError
from avpf_forge.masks import (
    ElasticField,
    MaskParams,
    build_facial_masks,
    elastic_deform,
    gaussian_smooth,
    hull_mask,
    inset_rectangle_track,
)
from avpf_forge.media import LandmarkTrack
from avpf_forge.windows import WindowSet


def point_in_hull_oracle(points: np.ndarray, width: int, height: int) -> np.ndarray:
    """Per-pixel point-in-polygon with an independently computed hull.

    Uses scipy's hull (counter-clockwise vertex order) and a plain Python
    loop over pixels; boundary pixels count as inside.
    """
    hull = ConvexHull(points)
    vertices = points[hull.vertices]  # CCW order
    n = len(vertices)
    mask = np.zeros((height, width))
    for y in range(height):
        for x in range(width):
            inside = True
            for k in range(n):
                ax, ay = vertices[k]
                bx, by = vertices[(k + 1) % n]
                cross = (bx - ax) * (y - ay) - (by - ay) * (x - ax)
                if cross < -1e-9:
                    inside = False
                    break
            mask[y, x] = 1.0 if inside else 0.0
    return mask


def dense_gaussian_oracle(mask: np.ndarray, sigma: float) -> np.ndarray:
    """Naive O(h w k^2) dense convolution with symmetric padding."""
    radius = int(np.ceil(3.0 * sigma))
    offsets = np.arange(-radius, radius + 1, dtype=np.float64)
    k1 = np.exp(-0.5 * (offsets / sigma) ** 2)
    k1 /= k1.sum()
    kernel = np.outer(k1, k1)
    padded = np.pad(mask, radius, mode="symmetric")
    h, w = mask.shape
    out = np.zeros_like(mask)
    for y in range(h):
        for x in range(w):
            out[y, x] = np.sum(padded[y : y + 2 * radius + 1, x : x + 2 * radius + 1] * kernel)
    return out


class TestHullMask:
    def test_triangle_fill(self):
        points = np.array([[10, 10], [50, 10], [30, 40]], dtype=float)
        mask = hull_mask(points, 64, 64)
        assert mask[20, 30] == 1.0  # (x=30, y=20) inside
        assert mask[5, 5] == 0.0
        assert set(np.unique(mask)) <= {0.0, 1.0}

    def test_collinear_points_degenerate(self):
        points = np.array([[1, 1], [5, 5], [9, 9]], dtype=float)
        with pytest.raises(DegenerateHullError):
            hull_mask(points, 16, 16)

    def test_matches_pointwise_oracle_96(self):
        rng = np.random.default_rng(21)
        for _ in range(5):
            points = rng.uniform(8, 88, size=(12, 2))
            mask = hull_mask(points, 96, 96)
            oracle = point_in_hull_oracle(points, 96, 96)
            assert np.array_equal(mask, oracle)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(22)
        points = rng.uniform(2, 14, size=(9, 2))
        base = hull_mask(points, 16, 16)
        for _ in range(5):
            perm = rng.permutation(len(points))
            assert np.array_equal(hull_mask(points[perm], 16, 16), base)

    def test_interior_points_do_not_matter(self):
        outer = np.array([[2, 2], [13, 2], [13, 13], [2, 13]], dtype=float)
        inner = np.array([[7, 7], [8, 8]])
        combined = np.vstack([outer, inner])
        assert np.array_equal(hull_mask(outer, 16, 16), hull_mask(combined, 16, 16))


class TestElasticDeform:
    def test_zero_field_is_identity(self):
        rng = np.random.default_rng(0)
        mask = rng.random((20, 24))
        field = ElasticField(displacements=np.zeros((4, 4, 2)))
        assert np.allclose(elastic_deform(mask, field), mask, atol=1e-12)

    def test_constant_field_translates(self):
        # displacement (+2, 0): output samples input at x+2 -> content moves left
        mask = np.zeros((10, 12))
        mask[3:7, 5:9] = 1.0
        field = ElasticField(displacements=np.full((3, 3, 2), [2.0, 0.0]))
        out = elastic_deform(mask, field)
        expected = np.zeros_like(mask)
        expected[3:7, 3:7] = 1.0
        assert np.array_equal(out, expected)

    def test_zero_padding_outside(self):
        mask = np.ones((8, 8))
        field = ElasticField(displacements=np.full((2, 2, 2), [4.0, 0.0]))
        out = elastic_deform(mask, field)
        assert np.all(out[:, -4:] == 0.0)  # sampled beyond the right edge
        assert np.all(out[:, :4] == 1.0)

    def test_sample_respects_max_disp(self):
        rng = np.random.default_rng(33)
        for max_disp in (0.0, 0.5, 3.0):
            field = ElasticField.sample((5, 5), max_disp, rng)
            norms = np.linalg.norm(field.displacements, axis=2)
            assert norms.max() <= max_disp + 1e-12

    def test_max_disp_zero_is_noop_for_all_seeds(self):
        mask = np.random.default_rng(1).random((12, 12))
        for seed in range(5):
            field = ElasticField.sample((4, 4), 0.0, np.random.default_rng(seed))
            assert np.allclose(elastic_deform(mask, field), mask, atol=1e-12)

    def test_output_in_unit_interval(self):
        rng = np.random.default_rng(3)
        mask = rng.random((16, 16))
        field = ElasticField.sample((4, 4), 2.5, rng)
        out = elastic_deform(mask, field)
        assert out.min() >= 0.0 and out.max() <= 1.0


class TestGaussianSmooth:
    def test_sigma_zero_identity(self):
        mask = np.random.default_rng(4).random((10, 10))
        assert np.array_equal(gaussian_smooth(mask, 0.0), mask)

    def test_constant_preservation(self):
        ones = np.ones((14, 18))
        for sigma in (0.5, 1.0, 3.0):
            assert np.allclose(gaussian_smooth(ones, sigma), ones, atol=1e-12)

    def test_impulse_matches_dense_oracle(self):
        mask = np.zeros((96, 96))
        mask[48, 48] = 1.0
        out = gaussian_smooth(mask, 2.0)
        oracle = dense_gaussian_oracle(mask, 2.0)
        assert np.max(np.abs(out - oracle)) < 1e-6

    def test_random_mask_matches_dense_oracle(self):
        mask = np.random.default_rng(5).random((24, 20))
        out = gaussian_smooth(mask, 1.3)
        oracle = dense_gaussian_oracle(mask, 1.3)
        assert np.max(np.abs(out - oracle)) < 1e-10

    def test_mass_preserved_away_from_border(self):
        mask = np.zeros((64, 64))
        mask[24:40, 24:40] = 1.0
        out = gaussian_smooth(mask, 2.0)
        assert abs(out.sum() - mask.sum()) / mask.sum() < 1e-4


class TestBuildFacialMasks:
    def _track(self, n_frames=12, size=32):
        quad = np.array(
            [[6.0, 6.0], [size - 7.0, 5.0], [size - 5.0, size - 7.0], [5.0, size - 6.0]]
        )
        return LandmarkTrack(points=np.repeat(quad[None], n_frames, axis=0))

    def test_masks_only_inside_windows(self):
        track = self._track()
        ws = WindowSet(length=12, windows=((4, 8),))
        masks = build_facial_masks(
            track, ws, 32, 32, MaskParams(), np.random.default_rng(0)
        )
        assert sorted(masks) == [4, 5, 6, 7]

    def test_identical_inputs_zero_deformation_identical_masks(self):
        track = self._track()
        ws = WindowSet(length=12, windows=((2, 6),))
        params = MaskParams(elastic_max_disp_frac=0.0, mask_sigma_px=0.0)
        masks = build_facial_masks(track, ws, 32, 32, params, np.random.default_rng(0))
        base = masks[2]
        assert all(np.array_equal(m, base) for m in masks.values())

    def test_composition_matches_oracle_composition(self):
        # zero deformation + zero blur leaves exactly the rasterized hull
        track = self._track(size=96)
        ws = WindowSet(length=12, windows=((0, 2),))
        params = MaskParams(elastic_max_disp_frac=0.0, mask_sigma_px=0.0)
        masks = build_facial_masks(track, ws, 96, 96, params, np.random.default_rng(1))
        oracle = point_in_hull_oracle(track.points[0], 96, 96)
        assert np.array_equal(masks[0], oracle)

    def test_partial_coverage_mean(self):
        track = self._track()
        ws = WindowSet(length=12, windows=((0, 4),))
        masks = build_facial_masks(track, ws, 32, 32, MaskParams(), np.random.default_rng(2))
        for mask in masks.values():
            assert 0.0 < mask.mean() < 1.0
            assert mask.min() >= 0.0 and mask.max() <= 1.0

    def test_border_ring_zero_for_interior_hull(self):
        # hull inset must exceed blur radius (3 sigma) plus max deformation
        quad = np.array([[20.0, 20.0], [75.0, 20.0], [75.0, 75.0], [20.0, 75.0]])
        track = LandmarkTrack(points=np.repeat(quad[None], 12, axis=0))
        ws = WindowSet(length=12, windows=((0, 3),))
        masks = build_facial_masks(track, ws, 96, 96, MaskParams(), np.random.default_rng(3))
        for mask in masks.values():
            assert np.all(mask[0, :] == 0.0) and np.all(mask[-1, :] == 0.0)
            assert np.all(mask[:, 0] == 0.0) and np.all(mask[:, -1] == 0.0)

    def test_shared_field_within_window(self):
        # static landmarks + no blur: any frame-to-frame mask change could
        # only come from per-frame fields, which are off by default
        track = self._track()
        ws = WindowSet(length=12, windows=((0, 5),))
        params = MaskParams(mask_sigma_px=0.0)
        masks = build_facial_masks(track, ws, 32, 32, params, np.random.default_rng(4))
        base = masks[0]
        assert all(np.array_equal(m, base) for m in masks.values())

    def test_degenerate_hull_propagates(self):
        line = np.array([[[2.0, 2.0], [8.0, 8.0], [14.0, 14.0]]])
        track = LandmarkTrack(points=np.repeat(line, 4, axis=0))
        ws = WindowSet(length=4, windows=((0, 2),))
        with pytest.raises(DegenerateHullError):
            build_facial_masks(track, ws, 16, 16, MaskParams(), np.random.default_rng(0))

    def test_landmarks_must_cover_windows(self):
        track = self._track(n_frames=4)
        ws = WindowSet(length=8, windows=((0, 2),))
        with pytest.raises(ValidationError):
            build_facial_masks(track, ws, 32, 32, MaskParams(), np.random.default_rng(0))


class TestInsetRectangle:
    def test_fallback_track_shape(self):
        track = inset_rectangle_track(96, 96, 10, 0.15)
        assert track.n_frames == 10
        assert track.points_per_frame == 4
        track.check_bounds(96, 96)
