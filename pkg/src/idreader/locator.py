"""Document localization by background-similarity masking and vertex search.

A selection mask marks pixels whose color is close to colors sampled from
the outer frame of the photo (assumed pure background), with a per-sample
threshold that adapts downward until almost nothing inside the starting
rectangle is selected. Candidate vertices are then pushed outward, greedily
maximizing a goodness score that rewards background-like pixels outside the
quad and non-background pixels inside it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from . import raster
from .errors import ImageTooSmall


@dataclass
class LocatorParams:
    """Tuning knobs of the vertex detector."""

    n_samples: int = 100          # L, background pixels sampled from the outer frame
    t0: int = 25                  # starting color-distance threshold
    d: float = 1.5                # weight of non-background pixels inside the quad
    outer_frac: float = 0.07      # outer region: outside the 7%..93% rectangle
    inner_frac: float = 0.30      # starting quad: the 30%..70% rectangle
    stop_frac: float = 0.0001     # threshold adapts until <= 0.01% selected inside
    step_px: int | None = None    # outward step; None = max(1, round(0.005*min(M,N)))
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.t0 < 1:
            raise ValueError("t0 must be >= 1")
        if self.d <= 0:
            raise ValueError("d must be > 0")
        if not 0 < self.outer_frac < self.inner_frac < 0.5:
            raise ValueError("need 0 < outer_frac < inner_frac < 0.5")
        if not 0 < self.stop_frac < 1:
            raise ValueError("stop_frac must be in (0, 1)")
        if self.step_px is not None and self.step_px < 1:
            raise ValueError("step_px must be >= 1")

    def resolved_step(self, width: int, height: int) -> int:
        if self.step_px is not None:
            return self.step_px
        return max(1, raster.round_even(0.005 * min(width, height)))


def init_regions(width: int, height: int, params: LocatorParams):
    """Outer-region inner boundary and the starting quad.

    The outer region is everything outside the returned (x0, y0, x1, y1)
    rectangle; the starting quad is the central inner_frac..1-inner_frac
    rectangle in canonical vertex order.
    """
    if width < 20 or height < 20:
        raise ImageTooSmall(f"{width}x{height} is below the 20x20 minimum")
    of, inf_ = params.outer_frac, params.inner_frac
    outer_rect = (of * width, of * height, width - of * width, height - of * height)
    start_quad = raster.quad_from_rect(
        inf_ * width, inf_ * height, width - inf_ * width, height - inf_ * height
    )
    return outer_rect, start_quad


def outer_region_coords(width: int, height: int, outer_rect) -> tuple[np.ndarray, np.ndarray]:
    """(rows, cols) of pixels whose centers fall outside the given rectangle."""
    x0, y0, x1, y1 = outer_rect
    xs = np.arange(width) + 0.5
    ys = np.arange(height) + 0.5
    in_x = (xs >= x0) & (xs <= x1)
    in_y = (ys >= y0) & (ys <= y1)
    outer = ~(in_y[:, None] & in_x[None, :])
    return np.nonzero(outer)


def _sq_distance_map(img: np.ndarray, color: np.ndarray) -> np.ndarray:
    """Integer squared RGB distance of every pixel to a reference color."""
    diff = img.astype(np.int32) - color.astype(np.int32)
    return np.sum(diff * diff, axis=2)


def adapt_threshold(img: np.ndarray, sample_color, start_quad, params: LocatorParams):
    """Largest threshold <= t0 whose selection stays out of the start quad.

    Returns (t_k, mask) where mask selects pixels with color distance
    strictly below t_k. The threshold decreases until the selected pixels
    inside the start quad are at most stop_frac of all pixels; it floors
    at 0, where nothing is selected.
    """
    img = raster.as_image(img)
    h, w = img.shape[:2]
    d2 = _sq_distance_map(img, np.asarray(sample_color, dtype=np.int32))
    inside = raster.quad_mask(start_quad, w, h)
    t_k = _adapt_on_precomputed(d2, inside, w * h, params)
    mask = d2 < t_k * t_k if t_k > 0 else np.zeros((h, w), dtype=bool)
    return t_k, mask


def _adapt_on_precomputed(d2, inside_mask, n_pixels, params: LocatorParams) -> int:
    limit = params.stop_frac * n_pixels
    d2_in = d2[inside_mask]
    t = params.t0
    while t > 0 and np.count_nonzero(d2_in < t * t) > limit:
        t -= 1
    return t


def build_background_mask(img: np.ndarray, params: LocatorParams) -> np.ndarray:
    """Union of the per-sample adaptive-threshold selections.

    Samples n_samples pixel positions uniformly with replacement from the
    outer region with the seeded generator, adapts a threshold per sample
    against the starting quad, and ORs the selections together.
    """
    img = raster.as_image(img)
    h, w = img.shape[:2]
    outer_rect, start_quad = init_regions(w, h, params)
    rows, cols = outer_region_coords(w, h, outer_rect)
    rng = np.random.default_rng(params.seed)
    idx = rng.integers(0, rows.size, size=params.n_samples)
    colors = img[rows[idx], cols[idx]].astype(np.int32)
    inside = raster.quad_mask(start_quad, w, h)
    n_pixels = w * h
    mask = np.zeros((h, w), dtype=bool)
    seen: dict[tuple[int, int, int], None] = {}
    for c in colors:
        key = (int(c[0]), int(c[1]), int(c[2]))
        if key in seen:
            continue
        seen[key] = None
        d2 = _sq_distance_map(img, c)
        t_k = _adapt_on_precomputed(d2, inside, n_pixels, params)
        if t_k > 0:
            mask |= d2 < t_k * t_k
    return mask


class GoodnessEvaluator:
    """Fast goodness evaluation of many quads against one fixed mask.

    Precomputes a summed-area table of the selection mask; each quad is
    rasterized to per-row spans and scored with row-range sums, so one
    evaluation costs O(rows) instead of O(rows * cols).
    """

    def __init__(self, mask: np.ndarray, d: float):
        mask = np.asarray(mask, dtype=bool)
        self.h, self.w = mask.shape
        self.d = float(d)
        self.a_total = int(mask.sum())
        sat = np.zeros((self.h + 1, self.w + 1), dtype=np.int64)
        np.cumsum(np.cumsum(mask, axis=0), axis=1, out=sat[1:, 1:])
        self.sat = sat

    def __call__(self, quad) -> float:
        spans = raster.quad_row_spans(quad, self.w, self.h)
        j0 = spans[:, 0]
        j1 = spans[:, 1]
        rows = np.arange(self.h)
        # selected pixels inside the quad, via row-range sums of the SAT
        a_in = int(
            np.sum(
                self.sat[rows + 1, j1] - self.sat[rows, j1]
                - self.sat[rows + 1, j0] + self.sat[rows, j0]
            )
        )
        b_total = int(np.sum(j1 - j0))
        return float(self.a_total - a_in) + self.d * float(b_total - a_in)


def goodness(mask: np.ndarray, quad, d: float) -> float:
    """Goodness of candidate vertices against a selection mask."""
    return GoodnessEvaluator(mask, d)(quad)


def goodness_naive(mask: np.ndarray, quad, d: float) -> float:
    """Reference double-loop evaluation: per-pixel products, no acceleration."""
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    b = raster.quad_mask(quad, w, h)
    return float(np.sum(mask & ~b)) + float(d) * float(np.sum(~mask & b))


_DIAG, _HORIZ, _VERT = range(3)


def optimize_vertices(mask: np.ndarray, start, params: LocatorParams) -> np.ndarray:
    """Greedy outward coordinate ascent of the quad vertices.

    Per sweep, each vertex in canonical order tries a fixed step along its
    three outward directions (away from the current centroid: diagonal,
    horizontal, vertical); the best strictly-improving candidate is applied
    immediately. Terminates when a full sweep improves nothing. Vertices
    are clamped to the image rectangle.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    step = params.resolved_step(w, h)
    ev = GoodnessEvaluator(mask, params.d)
    quad = np.asarray(start, dtype=np.float64).copy()
    current = ev(quad)
    max_sweeps = int(np.ceil((w + h) / step)) * 4 + 4
    for _ in range(max_sweeps):
        improved = False
        for vi in range(4):
            centroid = quad.mean(axis=0)
            v = quad[vi]
            off = v - centroid
            norm = np.hypot(off[0], off[1])
            candidates = []
            if norm > 1e-9:
                candidates.append(v + step * off / norm)
            if off[0] != 0.0:
                candidates.append(v + np.array([step * np.sign(off[0]), 0.0]))
            if off[1] != 0.0:
                candidates.append(v + np.array([0.0, step * np.sign(off[1])]))
            best_c, best_v = current, None
            for cand in candidates:
                cand = np.clip(cand, [0.0, 0.0], [float(w), float(h)])
                trial = quad.copy()
                trial[vi] = cand
                if not raster.quad_is_valid(trial):
                    continue
                c = ev(trial)
                if c > best_c:
                    best_c, best_v = c, cand
            if best_v is not None:
                quad[vi] = best_v
                current = best_c
                improved = True
        if not improved:
            break
    return quad


def locate(img: np.ndarray, params: LocatorParams | None = None) -> np.ndarray:
    """Find the document quad in a photo. Deterministic given params.seed."""
    params = params or LocatorParams()
    img = raster.as_image(img)
    h, w = img.shape[:2]
    _, start_quad = init_regions(w, h, params)
    mask = build_background_mask(img, params)
    return optimize_vertices(mask, start_quad, params)


def quad_to_json(quad) -> str:
    """Serialize a located quad as {"vertices": [[x, y] * 4]}."""
    q = np.asarray(quad, dtype=np.float64)
    return json.dumps({"vertices": [[float(x), float(y)] for x, y in q]})


def params_with_seed(params: LocatorParams, seed: int) -> LocatorParams:
    return replace(params, seed=seed)
