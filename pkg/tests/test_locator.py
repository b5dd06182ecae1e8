import numpy as np
import pytest

from idreader import locator, raster
from idreader.errors import ImageTooSmall
from idreader.locator import LocatorParams


def two_tone_scene(w=200, h=160, doc=(60, 48, 140, 112), bg=(200, 30, 40), fg=(30, 200, 220)):
    """Background color everywhere except an axis-aligned document rectangle."""
    img = np.zeros((h, w, 3), dtype=np.uint8)
    img[:, :] = bg
    x0, y0, x1, y1 = doc
    img[y0:y1, x0:x1] = fg
    quad = raster.quad_from_rect(*[float(v) for v in doc])
    return img, quad


def random_mask_and_quad(rng, n=32):
    mask = rng.random((n, n)) < rng.uniform(0.2, 0.8)
    x0, y0 = rng.uniform(1, n / 2 - 1, size=2)
    x1, y1 = rng.uniform(n / 2 + 1, n - 1, size=2)
    quad = raster.quad_from_rect(x0, y0, x1, y1) + rng.uniform(-1, 1, size=(4, 2))
    if not raster.quad_is_valid(quad):
        quad = raster.quad_from_rect(x0, y0, x1, y1)
    return mask, quad


class TestInitRegions:
    def test_percentages_1000x800(self):
        outer_rect, start = locator.init_regions(1000, 800, LocatorParams())
        assert outer_rect == pytest.approx((70.0, 56.0, 930.0, 744.0))
        assert np.allclose(start, raster.quad_from_rect(300, 240, 700, 560))

    def test_square_100(self):
        _, start = locator.init_regions(100, 100, LocatorParams())
        assert np.allclose(start, raster.quad_from_rect(30, 30, 70, 70))

    def test_too_small(self):
        with pytest.raises(ImageTooSmall):
            locator.init_regions(10, 10, LocatorParams())

    def test_outer_region_excludes_center(self):
        outer_rect, _ = locator.init_regions(100, 100, LocatorParams())
        rows, cols = locator.outer_region_coords(100, 100, outer_rect)
        assert rows.size > 0
        # all returned centers are outside the central rectangle
        cx, cy = cols + 0.5, rows + 0.5
        inside = (cx >= 7) & (cx <= 93) & (cy >= 7) & (cy <= 93)
        assert not inside.any()


class TestAdaptThreshold:
    def test_two_tone_keeps_t0(self):
        img, quad = two_tone_scene()
        # colors are ~249 apart, far beyond t0=25
        t_k, mask = locator.adapt_threshold(img, (200, 30, 40), quad, LocatorParams())
        assert t_k == 25
        expected = np.all(img == np.array([200, 30, 40]), axis=2)
        assert np.array_equal(mask, expected)

    def test_uniform_image_collapses_to_zero(self):
        img = np.full((60, 80, 3), 90, dtype=np.uint8)
        quad = raster.quad_from_rect(24, 18, 56, 42)
        t_k, mask = locator.adapt_threshold(img, (90, 90, 90), quad, LocatorParams())
        assert t_k == 0
        assert not mask.any()

    def test_far_color_selects_nothing_at_t0(self):
        img = np.full((60, 80, 3), 200, dtype=np.uint8)
        quad = raster.quad_from_rect(24, 18, 56, 42)
        t_k, mask = locator.adapt_threshold(img, (0, 0, 0), quad, LocatorParams())
        assert t_k == 25
        assert not mask.any()

    def test_mask_monotone_in_threshold(self):
        rng = np.random.default_rng(2)
        img = rng.integers(0, 256, size=(40, 40, 3), dtype=np.uint8)
        quad = raster.quad_from_rect(12, 12, 28, 28)
        t_k, mask = locator.adapt_threshold(img, (128, 128, 128), quad, LocatorParams())
        d2 = np.sum((img.astype(int) - 128) ** 2, axis=2)
        larger = d2 < (t_k + 1) ** 2
        assert np.array_equal(mask & larger, mask)  # mask subset of mask at t_k+1


class TestBackgroundMask:
    def test_two_tone_recovers_background(self):
        img, _ = two_tone_scene()
        mask = locator.build_background_mask(img, LocatorParams(seed=3))
        expected = np.all(img == np.array([200, 30, 40]), axis=2)
        assert np.array_equal(mask, expected)

    def test_uniform_image_empty_mask(self):
        img = np.full((80, 100, 3), 123, dtype=np.uint8)
        mask = locator.build_background_mask(img, LocatorParams(seed=3))
        assert not mask.any()

    def test_seeded_determinism(self):
        rng = np.random.default_rng(4)
        img = rng.integers(0, 256, size=(60, 90, 3), dtype=np.uint8)
        m1 = locator.build_background_mask(img, LocatorParams(seed=17))
        m2 = locator.build_background_mask(img, LocatorParams(seed=17))
        assert np.array_equal(m1, m2)


class TestGoodness:
    def test_all_selected_full_quad_is_zero(self):
        mask = np.ones((10, 12), dtype=bool)
        quad = raster.quad_from_rect(0, 0, 12, 10)
        assert locator.goodness(mask, quad, 1.5) == 0.0

    def test_all_selected_empty_quad_counts_everything(self):
        mask = np.ones((10, 12), dtype=bool)
        quad = raster.quad_from_rect(0.1, 0.1, 0.4, 0.4)  # covers no pixel center
        assert locator.goodness(mask, quad, 1.5) == 120.0

    def test_hand_worked_2x2(self):
        mask = np.array([[1, 0], [0, 1]], dtype=bool)
        quad = raster.quad_from_rect(1, 1, 2, 2)  # covers only pixel (2,2)
        assert locator.goodness(mask, quad, 1.5) == 1.0

    def test_accelerated_equals_naive_exactly(self):
        rng = np.random.default_rng(6)
        for _ in range(100):
            mask, quad = random_mask_and_quad(rng)
            assert locator.goodness(mask, quad, 1.5) == locator.goodness_naive(
                mask, quad, 1.5
            )

    def test_increment_rule(self):
        # enlarging the region by a pixel set S changes the score by
        # d * |S not selected| - |S selected|
        rng = np.random.default_rng(8)
        d = 1.5
        for _ in range(100):
            n = 32
            mask = rng.random((n, n)) < 0.5
            inner = raster.quad_from_rect(8, 8, 20, 20)
            grow = rng.uniform(0.5, 6.0, size=4)
            outer = raster.quad_from_rect(
                8 - grow[0], 8 - grow[1], 20 + grow[2], 20 + grow[3]
            )
            b_inner = raster.quad_mask(inner, n, n)
            b_outer = raster.quad_mask(outer, n, n)
            s = b_outer & ~b_inner
            delta = locator.goodness(mask, outer, d) - locator.goodness(mask, inner, d)
            expected = d * np.sum(s & ~mask) - np.sum(s & mask)
            assert delta == pytest.approx(expected)


class TestOptimizeVertices:
    def test_recovers_rectangle_corners(self):
        img, quad = two_tone_scene()
        params = LocatorParams(seed=1, step_px=1)
        mask = locator.build_background_mask(img, params)
        _, start = locator.init_regions(img.shape[1], img.shape[0], params)
        found = locator.optimize_vertices(mask, start, params)
        err = np.linalg.norm(found - quad, axis=1)
        assert err.max() <= params.resolved_step(200, 160) + 1e-6

    def test_empty_mask_expands_to_bounds(self):
        mask = np.zeros((100, 120), dtype=bool)
        params = LocatorParams(step_px=2)
        start = raster.quad_from_rect(36, 30, 84, 70)
        found = locator.optimize_vertices(mask, start, params)
        # the maximum covers every pixel center, vertices within a step of
        # the exact corners (sub-pixel slivers hold no centers to gain)
        assert raster.quad_mask(found, 120, 100).all()
        corners = raster.quad_from_rect(0, 0, 120, 100)
        assert np.linalg.norm(found - corners, axis=1).max() <= 2 + 1e-9

    def test_no_improving_move_returns_start(self):
        img, quad = two_tone_scene()
        params = LocatorParams(step_px=1)
        mask = np.all(img == np.array([200, 30, 40]), axis=2)
        found = locator.optimize_vertices(mask, quad, params)
        assert np.allclose(found, quad)

    def test_goodness_never_decreases(self):
        img, _ = two_tone_scene()
        params = LocatorParams(seed=1)
        mask = locator.build_background_mask(img, params)
        _, start = locator.init_regions(img.shape[1], img.shape[0], params)
        found = locator.optimize_vertices(mask, start, params)
        assert locator.goodness(mask, found, params.d) >= locator.goodness(
            mask, start, params.d
        )


class TestLocate:
    def test_two_tone_scene_within_one_percent(self):
        img, quad = two_tone_scene(w=400, h=320, doc=(120, 96, 280, 224))
        found = locator.locate(img, LocatorParams(seed=5))
        tol = 0.01 * min(img.shape[0], img.shape[1])
        err = np.linalg.norm(found - quad, axis=1)
        assert err.max() <= tol + locator.LocatorParams().resolved_step(400, 320)

    def test_uniform_image_gives_image_bounds(self):
        img = np.full((100, 120, 3), 55, dtype=np.uint8)
        found = locator.locate(img, LocatorParams(seed=5, step_px=2))
        assert raster.quad_mask(found, 120, 100).all()
        corners = raster.quad_from_rect(0, 0, 120, 100)
        assert np.linalg.norm(found - corners, axis=1).max() <= 2 + 1e-9

    def test_deterministic(self):
        rng = np.random.default_rng(10)
        img = rng.integers(0, 256, size=(80, 100, 3), dtype=np.uint8)
        q1 = locator.locate(img, LocatorParams(seed=42))
        q2 = locator.locate(img, LocatorParams(seed=42))
        assert np.array_equal(q1, q2)

    def test_too_small_propagates(self):
        img = np.zeros((10, 10, 3), dtype=np.uint8)
        with pytest.raises(ImageTooSmall):
            locator.locate(img, LocatorParams())

    def test_json_serialization(self):
        quad = raster.quad_from_rect(1, 2, 3, 4)
        import json

        obj = json.loads(locator.quad_to_json(quad))
        assert obj == {"vertices": [[1.0, 2.0], [3.0, 2.0], [3.0, 4.0], [1.0, 4.0]]}
