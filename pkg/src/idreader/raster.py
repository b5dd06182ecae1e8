"""Core image representation, geometry, warping, and codecs.

Conventions used by the whole package:

- An image is a numpy array of shape (height, width, 3), dtype uint8, RGB.
- The continuous coordinate system has origin at the top-left corner,
  x rightward and y downward; an image of width M and height N occupies
  [0, M] x [0, N] and the pixel at row i, column j has its center at
  (j + 0.5, i + 0.5).
- A quad is a (4, 2) float array of vertices in canonical order
  top-left, top-right, bottom-right, bottom-left; canonical order has
  positive signed (shoelace) area in this y-down system.
- All rounding of fractional pixel quantities is round-half-to-even.
"""

from __future__ import annotations

import io

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .errors import DegenerateQuad, InvalidQuality, IoError, MalformedStream


def round_even(x: float) -> int:
    """Round to the nearest integer, halves to even."""
    return int(np.rint(x))


def as_image(arr: np.ndarray) -> np.ndarray:
    """Validate and return an (H, W, 3) uint8 image array."""
    arr = np.asarray(arr)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.dtype != np.uint8:
        raise ValueError(f"expected (H, W, 3) uint8 image, got {arr.shape} {arr.dtype}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError("image must be at least 1x1")
    return arr


def color_distance(p, q) -> float:
    """Euclidean distance between two RGB triples."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    return float(np.sqrt(np.sum((p - q) ** 2)))


# ---------------------------------------------------------------------------
# Quads


def quad_from_rect(x0: float, y0: float, x1: float, y1: float) -> np.ndarray:
    """Axis-aligned rectangle as a canonical-order quad."""
    return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]], dtype=np.float64)


def quad_signed_area(quad: np.ndarray) -> float:
    """Shoelace area; positive for canonical vertex order."""
    q = np.asarray(quad, dtype=np.float64)
    x, y = q[:, 0], q[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def quad_is_valid(quad) -> bool:
    """True for a finite, convex, positively-oriented quad."""
    q = np.asarray(quad, dtype=np.float64)
    if q.shape != (4, 2) or not np.all(np.isfinite(q)):
        return False
    e = np.roll(q, -1, axis=0) - q
    cross = e[:, 0] * np.roll(e[:, 1], -1) - e[:, 1] * np.roll(e[:, 0], -1)
    return bool(np.all(cross > 0.0))


def quad_side_lengths(quad: np.ndarray) -> np.ndarray:
    q = np.asarray(quad, dtype=np.float64)
    return np.linalg.norm(np.roll(q, -1, axis=0) - q, axis=1)


def point_in_quad(p, quad) -> bool:
    """True iff the point is inside or on the boundary of a canonical quad."""
    q = np.asarray(quad, dtype=np.float64)
    px, py = float(p[0]), float(p[1])
    for i in range(4):
        x1, y1 = q[i]
        x2, y2 = q[(i + 1) % 4]
        if (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) < 0.0:
            return False
    return True


def quad_row_spans(quad: np.ndarray, width: int, height: int) -> np.ndarray:
    """Per-row pixel spans of the quad under pixel-center rasterization.

    Returns an (height, 2) int array of [start, stop) column indices per row;
    a pixel (i, j) is in the span iff its center (j+0.5, i+0.5) satisfies
    point_in_quad. Empty rows have start == stop. Agreement with the
    per-pixel predicate is exact: span edges are refined with it.
    """
    q = np.asarray(quad, dtype=np.float64)
    edges = []
    for i in range(4):
        x1, y1 = q[i]
        x2, y2 = q[(i + 1) % 4]
        # cross(p) = (x2-x1)(y-y1) - (y2-y1)(x-x1) >= 0, linear in x
        edges.append((x1, y1, x2, y2))
    spans = np.zeros((height, 2), dtype=np.int64)

    def inside(px, py):
        for x1, y1, x2, y2 in edges:
            if (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) < 0.0:
                return False
        return True

    ys = q[:, 1]
    row_lo = max(0, int(np.floor(ys.min() - 0.5)))
    row_hi = min(height, int(np.ceil(ys.max())) + 1)
    for i in range(row_lo, row_hi):
        y = i + 0.5
        x_lo, x_hi = -np.inf, np.inf
        feasible = True
        for x1, y1, x2, y2 in edges:
            a = y2 - y1
            c = (x2 - x1) * (y - y1) + a * x1
            if a > 0.0:
                x_hi = min(x_hi, c / a)
            elif a < 0.0:
                x_lo = max(x_lo, c / a)
            elif c < 0.0:  # horizontal edge, row entirely outside
                feasible = False
                break
        if not feasible or x_lo > x_hi:
            continue
        j_lo = max(0, int(np.ceil(x_lo - 0.5)))
        j_hi = min(width - 1, int(np.floor(x_hi - 0.5)))
        # refine against the exact predicate so boundary pixels agree
        while j_lo <= j_hi and not inside(j_lo + 0.5, y):
            j_lo += 1
        while j_lo - 1 >= 0 and inside(j_lo - 0.5, y):
            j_lo -= 1
        while j_hi >= j_lo and not inside(j_hi + 0.5, y):
            j_hi -= 1
        while j_hi + 1 <= width - 1 and inside(j_hi + 1.5, y):
            j_hi += 1
        if j_lo <= j_hi:
            spans[i, 0] = j_lo
            spans[i, 1] = j_hi + 1
    return spans


def quad_mask(quad: np.ndarray, width: int, height: int) -> np.ndarray:
    """Boolean (height, width) mask of pixels whose centers lie in the quad."""
    q = np.asarray(quad, dtype=np.float64)
    xs = np.arange(width, dtype=np.float64) + 0.5
    ys = np.arange(height, dtype=np.float64) + 0.5
    px, py = np.meshgrid(xs, ys)
    ok = np.ones((height, width), dtype=bool)
    for i in range(4):
        x1, y1 = q[i]
        x2, y2 = q[(i + 1) % 4]
        ok &= (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1) >= 0.0
    return ok


# ---------------------------------------------------------------------------
# Homographies


def solve_homography(src, dst) -> np.ndarray:
    """3x3 homography mapping 4 src points to 4 dst points, H[2,2] = 1.

    Solves the standard 8x8 linear system; raises DegenerateQuad when the
    correspondence is singular or the solution fails to reproduce the
    corners to within 1e-6 px.
    """
    s = np.asarray(src, dtype=np.float64).reshape(4, 2)
    d = np.asarray(dst, dtype=np.float64).reshape(4, 2)
    A = np.zeros((8, 8), dtype=np.float64)
    b = np.zeros(8, dtype=np.float64)
    for i in range(4):
        x, y = s[i]
        u, v = d[i]
        A[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        A[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as exc:
        raise DegenerateQuad("singular homography system") from exc
    H = np.append(h, 1.0).reshape(3, 3)
    if not np.all(np.isfinite(H)):
        raise DegenerateQuad("non-finite homography")
    proj = apply_homography(H, s)
    if np.max(np.abs(proj - d)) > 1e-6:
        raise DegenerateQuad("homography residual exceeds 1e-6 px")
    return H


def invert_homography(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    det = np.linalg.det(H)
    if abs(det) <= 1e-12:
        raise DegenerateQuad("homography not invertible")
    Hinv = np.linalg.inv(H)
    return Hinv / Hinv[2, 2]


def apply_homography(H: np.ndarray, pts) -> np.ndarray:
    """Apply H to an (n, 2) array of points."""
    p = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    ph = np.hstack([p, np.ones((p.shape[0], 1))])
    out = ph @ np.asarray(H, dtype=np.float64).T
    return out[:, :2] / out[:, 2:3]


def _bilinear_sample(img: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample continuous positions with bilinear interpolation, edge clamped.

    Positions are in the continuous frame (pixel centers at half-integers);
    xs/ys share any shape, the result has that shape plus the channel axis.
    """
    h, w = img.shape[:2]
    fx = xs - 0.5
    fy = ys - 0.5
    j0 = np.floor(fx).astype(np.int64)
    i0 = np.floor(fy).astype(np.int64)
    tx = (fx - j0)[..., None]
    ty = (fy - i0)[..., None]
    j0c = np.clip(j0, 0, w - 1)
    j1c = np.clip(j0 + 1, 0, w - 1)
    i0c = np.clip(i0, 0, h - 1)
    i1c = np.clip(i0 + 1, 0, h - 1)
    v = img.astype(np.float64)
    top = v[i0c, j0c] * (1.0 - tx) + v[i0c, j1c] * tx
    bot = v[i1c, j0c] * (1.0 - tx) + v[i1c, j1c] * tx
    return top * (1.0 - ty) + bot * ty


def warp_homography(img: np.ndarray, H: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Warp an image by a homography mapping source coords to output coords."""
    img = as_image(img)
    Hinv = invert_homography(H)
    xs = np.arange(out_w, dtype=np.float64) + 0.5
    ys = np.arange(out_h, dtype=np.float64) + 0.5
    gx, gy = np.meshgrid(xs, ys)
    src = apply_homography(Hinv, np.stack([gx.ravel(), gy.ravel()], axis=1))
    sx = src[:, 0].reshape(out_h, out_w)
    sy = src[:, 1].reshape(out_h, out_w)
    out = _bilinear_sample(img, sx, sy)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def warp_perspective(img: np.ndarray, src_quad, out_w: int, out_h: int) -> np.ndarray:
    """Rectify the quad region of an image into an out_w x out_h raster."""
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    dst = quad_from_rect(0.0, 0.0, float(out_w), float(out_h))
    H = solve_homography(src_quad, dst)
    return warp_homography(img, H, out_w, out_h)


# ---------------------------------------------------------------------------
# Resizing


def resize(img: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resize in the center-aligned convention."""
    img = as_image(img)
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    h, w = img.shape[:2]
    H = np.diag([out_w / w, out_h / h, 1.0])
    return warp_homography(img, H, out_w, out_h)


def resize_to_height(img: np.ndarray, target_h: int) -> np.ndarray:
    """Resize preserving aspect ratio; output width = round(M * target_h / N)."""
    img = as_image(img)
    if target_h < 1:
        raise ValueError("target height must be >= 1")
    h, w = img.shape[:2]
    out_w = max(1, round_even(w * target_h / h))
    if out_w == w and target_h == h:
        return img.copy()
    return resize(img, out_w, target_h)


# ---------------------------------------------------------------------------
# Codecs (baseline JPEG and PNG, via Pillow)


def encode_jpeg(img: np.ndarray, quality: int) -> bytes:
    img = as_image(img)
    if not 1 <= int(quality) <= 100:
        raise InvalidQuality(f"quality {quality} outside [1, 100]")
    buf = io.BytesIO()
    PILImage.fromarray(img, mode="RGB").save(buf, format="JPEG", quality=int(quality))
    return buf.getvalue()


def decode_jpeg(data: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MalformedStream("cannot decode JPEG stream") from exc


def jpeg_roundtrip(img: np.ndarray, quality: int) -> np.ndarray:
    return decode_jpeg(encode_jpeg(img, quality))


def encode_png(img: np.ndarray) -> bytes:
    img = as_image(img)
    buf = io.BytesIO()
    PILImage.fromarray(img, mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data: bytes) -> np.ndarray:
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MalformedStream("cannot decode PNG stream") from exc


def load_image(path) -> np.ndarray:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}") from exc
    try:
        with PILImage.open(io.BytesIO(data)) as im:
            return np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise MalformedStream(f"cannot decode {path}") from exc


def save_image(img: np.ndarray, path, jpeg_quality: int = 95) -> None:
    p = str(path)
    if p.lower().endswith((".jpg", ".jpeg")):
        data = encode_jpeg(img, jpeg_quality)
    elif p.lower().endswith(".png"):
        data = encode_png(img)
    else:
        raise ValueError(f"unsupported image extension: {path}")
    try:
        with open(path, "wb") as fh:
            fh.write(data)
    except OSError as exc:
        raise IoError(f"cannot write {path}") from exc
