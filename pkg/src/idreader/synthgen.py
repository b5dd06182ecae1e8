"""Synthetic document photos: rendering, compositing, degradation, datasets.

Each dataset sample draws all of its randomness from a generator seeded by
(dataset seed, sample index), so generation is reproducible and independent
of processing order. Rendering uses the bundled typefaces; backgrounds are
procedural textures unless a directory of images is supplied.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from . import identity, raster
from .classifier import DocumentClass
from .errors import EmptyManifest, IoError, PlacementInfeasible, TextOverflow
from .layouts import DocumentLayout, get_font, load_layouts

TEXT_PAD_FRAC = 0.12   # horizontal text inset, as a fraction of the rect height
TRACKING_EM = 0.11     # extra letter spacing; keeps glyphs separable at small sizes
WORD_SPACE_SCALE = 1.6  # widens word gaps clear of ordinary letter gaps
CAP_HEIGHT_EM = 0.72


def _tracking_px(font_px: int) -> int:
    return max(3, round(TRACKING_EM * font_px))


def _advance(font, ch: str, font_px: int) -> float:
    w = font.getlength(ch)
    return w * WORD_SPACE_SCALE if ch == " " else w


def text_width(font, text: str, font_px: int) -> float:
    """Rendered width of a string under the tracked drawing scheme."""
    if not text:
        return 0.0
    track = _tracking_px(font_px)
    return sum(_advance(font, c, font_px) for c in text) + track * (len(text) - 1)


def _draw_tracked(draw, x: float, center_y: float, text: str, font, font_px: int, fill):
    """Draw per character on a common baseline with extra tracking."""
    baseline = center_y + 0.5 * CAP_HEIGHT_EM * font_px
    track = _tracking_px(font_px)
    for ch in text:
        if ch != " ":
            draw.text((x, baseline), ch, font=font, fill=fill, anchor="ls")
        x += _advance(font, ch, font_px) + track


@dataclass
class DegradationParams:
    persp_min: float = 0.05       # vertex displacement, fraction of shortest side
    persp_max: float = 0.15
    alpha_range: tuple[float, float] = (0.85, 1.05)
    beta_range: tuple[float, float] = (-30.0, 20.0)
    noise_sigma: float = 4.0
    jpeg_quality: int = 70
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.persp_min <= self.persp_max < 0.5:
            raise ValueError("need 0 <= persp_min <= persp_max < 0.5")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError("jpeg_quality must be in [1, 100]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


@dataclass
class SampleRecord:
    image: str
    doc_class: DocumentClass
    quad: np.ndarray
    fields: dict[str, str]

    def to_json(self) -> str:
        return json.dumps(
            {
                "image": self.image,
                "class": int(self.doc_class),
                "quad": [[float(x), float(y)] for x, y in np.asarray(self.quad)],
                "fields": self.fields,
            }
        )

    @staticmethod
    def from_json(line: str) -> "SampleRecord":
        obj = json.loads(line)
        return SampleRecord(
            image=obj["image"],
            doc_class=DocumentClass(int(obj["class"])),
            quad=np.asarray(obj["quad"], dtype=np.float64),
            fields={str(k): str(v) for k, v in obj["fields"].items()},
        )


def write_manifest(records, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(rec.to_json() + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}") from exc


def read_manifest(path) -> list[SampleRecord]:
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise IoError(f"cannot read {path}") from exc
    records = [SampleRecord.from_json(ln) for ln in lines if ln.strip()]
    if not records:
        raise EmptyManifest(f"{path} has no records")
    return records


# ---------------------------------------------------------------------------
# Backgrounds


def _hsv_to_rgb(h, s, v):
    i = int(h * 6) % 6
    f = h * 6 - int(h * 6)
    p, q, t = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    rgb = [(v, t, p), (q, v, p), (p, v, t), (p, q, v), (t, p, v), (v, p, q)][i]
    return np.array([c * 255 for c in rgb])


def gen_background(rng, width: int, height: int) -> np.ndarray:
    """Procedural background texture with a random color family."""
    c1 = _hsv_to_rgb(rng.uniform(), rng.uniform(0.15, 0.75), rng.uniform(0.2, 0.95))
    c2 = _hsv_to_rgb(rng.uniform(), rng.uniform(0.1, 0.6), rng.uniform(0.2, 0.95))
    kind = int(rng.integers(0, 5))
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)
    if kind == 0:  # flat
        base = np.broadcast_to(c1, (height, width, 3)).copy()
    elif kind == 1:  # linear gradient
        t = (xx if rng.random() < 0.5 else yy)
        t = (t - t.min()) / max(t.max() - t.min(), 1)
        base = c1 + (c2 - c1) * t[..., None]
    elif kind == 2:  # stripes / planks
        band = int(rng.integers(20, 60))
        axis = xx if rng.random() < 0.5 else yy
        t = ((axis // band) % 2)[..., None]
        base = c1 + (c2 - c1) * t
    elif kind == 3:  # tiles
        tile = int(rng.integers(30, 80))
        t = (((yy // tile) + (xx // tile)) % 2)[..., None]
        base = c1 + (c2 - c1) * t
    else:  # marbled waves
        a, b = rng.uniform(0.01, 0.05, size=2)
        phase = rng.uniform(0, 2 * np.pi)
        warp = 3.0 * np.sin(0.013 * yy + phase)
        t = 0.5 + 0.5 * np.sin(a * xx + b * yy + warp)
        base = c1 + (c2 - c1) * t[..., None]
    noise = rng.normal(0.0, rng.uniform(2.0, 9.0), size=(height, width, 1))
    out = np.clip(np.rint(base + noise), 0, 255).astype(np.uint8)
    return out


class BackgroundSource:
    """Procedural backgrounds by default; a directory of images if given."""

    def __init__(self, image_dir=None):
        self.paths = []
        if image_dir:
            self.paths = sorted(
                p for p in Path(image_dir).iterdir()
                if p.suffix.lower() in (".png", ".jpg", ".jpeg")
            )

    def sample(self, rng, width: int, height: int) -> np.ndarray:
        if not self.paths:
            return gen_background(rng, width, height)
        path = self.paths[int(rng.integers(0, len(self.paths)))]
        img = raster.load_image(path)
        if img.shape[:2] != (height, width):
            img = raster.resize(img, width, height)
        return img


# ---------------------------------------------------------------------------
# Document rendering


def _blend_rect(arr: np.ndarray, x0, y0, x1, y1, color, weight: float) -> None:
    region = arr[y0:y1, x0:x1].astype(np.float64)
    arr[y0:y1, x0:x1] = np.clip(
        np.rint(region * (1 - weight) + np.asarray(color, dtype=np.float64) * weight),
        0, 255,
    ).astype(np.uint8)


def render_document(layout: DocumentLayout, values: dict[str, str], rng):
    """Schematic document raster at base size; returns (image, truth map).

    Background scheme plus a guilloche-like sine texture, lightened field
    rectangles, title band, optional portrait placeholder, and the field
    values drawn with the layout typefaces.
    """
    missing = [f.name for f in layout.fields if f.name not in values]
    if missing:
        raise KeyError(f"values missing for fields: {missing}")
    w, h = layout.base_width, layout.base_height
    base = np.asarray(layout.base_color, dtype=np.float64)
    jitter = rng.uniform(-8, 8, size=3)
    yy = np.linspace(0.0, 1.0, h)[:, None, None]
    grad = rng.uniform(10, 30)
    arr = np.clip(np.rint(base + jitter + grad * yy), 0, 255).astype(np.uint8)
    arr = np.broadcast_to(arr, (h, w, 3)).copy()

    im = PILImage.fromarray(arr, mode="RGB")
    draw = ImageDraw.Draw(im)
    curve_color = tuple(
        int(c) for c in np.rint(0.72 * base + 0.28 * np.asarray(layout.accent_color))
    )
    n_curves = int(rng.integers(10, 18))
    xs = np.arange(0, w, 3)
    for _ in range(n_curves):
        cy = rng.uniform(0.05, 0.95) * h
        amp = rng.uniform(0.02, 0.10) * h
        freq = rng.uniform(1.5, 5.0) * 2 * np.pi / w
        phase = rng.uniform(0, 2 * np.pi)
        pts = [(int(x), int(cy + amp * np.sin(freq * x + phase))) for x in xs]
        draw.line(pts, fill=curve_color, width=1)
    # thin border frame
    inset = max(4, w // 80)
    draw.rectangle(
        [inset, inset, w - inset, h - inset],
        outline=tuple(layout.accent_color), width=2,
    )
    # title
    title_font = get_font(layout.typeface, max(18, int(0.045 * max(w, h))))
    draw.text((w // 2, int(0.055 * h) + inset), layout.title,
              fill=tuple(layout.accent_color), font=title_font, anchor="mm")
    # portrait placeholder
    if layout.portrait_box is not None:
        px, py, pw, ph = layout.portrait_box
        x0, y0 = int(px * w), int(py * h)
        x1, y1 = int((px + pw) * w), int((py + ph) * h)
        draw.rectangle([x0, y0, x1, y1], fill=(210, 210, 214), outline=(120, 120, 130))
        mx = (x1 - x0) // 6
        my = (y1 - y0) // 8
        draw.ellipse([x0 + mx, y0 + my, x1 - mx, y1 - my], fill=(150, 152, 160))

    arr = np.asarray(im, dtype=np.uint8).copy()
    # lighten field rectangles so text sits on a quiet area
    for f in layout.fields:
        fx, fy, fw, fh = f.rect
        x0, y0 = raster.round_even(fx * w), raster.round_even(fy * h)
        x1, y1 = raster.round_even((fx + fw) * w), raster.round_even((fy + fh) * h)
        _blend_rect(arr, x0, y0, x1, y1, np.minimum(base + 26, 255), 0.78)

    im = PILImage.fromarray(arr, mode="RGB")
    draw = ImageDraw.Draw(im)
    truth: dict[str, str] = {}
    for f in layout.fields:
        text = values[f.name]
        truth[f.name] = text
        if not text:
            continue
        fx, fy, fw, fh = f.rect
        x0, y0 = raster.round_even(fx * w), raster.round_even(fy * h)
        x1, y1 = raster.round_even((fx + fw) * w), raster.round_even((fy + fh) * h)
        font = get_font(layout.field_typeface(f), f.font_px)
        pad = TEXT_PAD_FRAC * (y1 - y0)
        if text_width(font, text, f.font_px) > (x1 - x0) - 2 * pad:
            raise TextOverflow(
                f"{layout.doc_class.label}/{f.name}: {text!r} at {f.font_px}px"
            )
        _draw_tracked(draw, x0 + pad, (y0 + y1) / 2, text, font, f.font_px,
                      tuple(f.color))
    return np.asarray(im, dtype=np.uint8), truth


# ---------------------------------------------------------------------------
# Compositing and degradation


def composite_on_background(
    doc: np.ndarray,
    rng,
    background: np.ndarray,
    headroom_frac: float = 0.15,
    max_tries: int = 60,
):
    """Place the document on the background photo; returns (photo, quad).

    The placement satisfies the locator's assumptions: the quad lies wholly
    inside the 7%..93% frame and every vertex is outside the central
    30%..70% rectangle. headroom_frac additionally reserves room so a later
    outward vertex perturbation of up to that fraction of the shortest side
    cannot leave the photo.
    """
    doc = raster.as_image(doc)
    bh, bw = background.shape[:2]
    dh, dw = doc.shape[:2]
    aspect = dw / dh
    for _ in range(max_tries):
        if aspect >= 1.0:
            w_t = int(rng.uniform(0.50, 0.62) * bw)
            h_t = max(1, raster.round_even(w_t / aspect))
        else:
            h_t = int(rng.uniform(0.56, 0.70) * bh)
            w_t = max(1, raster.round_even(h_t * aspect))
        cx = bw / 2 + rng.uniform(-0.03, 0.03) * bw
        cy = bh / 2 + rng.uniform(-0.03, 0.03) * bh
        x0 = int(round(cx - w_t / 2))
        y0 = int(round(cy - h_t / 2))
        quad = raster.quad_from_rect(x0, y0, x0 + w_t, y0 + h_t)
        if not _placement_ok(quad, bw, bh, headroom_frac):
            continue
        photo = background.copy()
        photo[y0 : y0 + h_t, x0 : x0 + w_t] = raster.resize(doc, w_t, h_t)
        return photo, quad
    raise PlacementInfeasible(
        f"no placement for {dw}x{dh} document on {bw}x{bh} background"
    )


def _placement_ok(quad: np.ndarray, bw: int, bh: int, headroom_frac: float) -> bool:
    fx0, fy0 = 0.07 * bw, 0.07 * bh
    fx1, fy1 = bw - fx0, bh - fy0
    sx0, sy0 = 0.30 * bw, 0.30 * bh
    sx1, sy1 = bw - sx0, bh - sy0
    inside_frame = np.all(
        (quad[:, 0] >= fx0) & (quad[:, 0] <= fx1)
        & (quad[:, 1] >= fy0) & (quad[:, 1] <= fy1)
    )
    outside_start = np.all(
        (quad[:, 0] < sx0) | (quad[:, 0] > sx1)
        | (quad[:, 1] < sy0) | (quad[:, 1] > sy1)
    )
    if not (inside_frame and outside_start):
        return False
    # future outward perturbation must stay inside the photo
    l = float(quad_shortest_side(quad))
    g = quad.mean(axis=0)
    for v in quad:
        off = v - g
        moved = v + headroom_frac * l * off / np.linalg.norm(off)
        if not (0 <= moved[0] <= bw and 0 <= moved[1] <= bh):
            return False
    return True


def quad_shortest_side(quad) -> float:
    return float(raster.quad_side_lengths(np.asarray(quad, dtype=np.float64)).min())


def perturb_vertices(photo: np.ndarray, quad, params: DegradationParams, rng):
    """Move each vertex outward along its centroid ray; re-warp the photo."""
    q = np.asarray(quad, dtype=np.float64)
    h, w = photo.shape[:2]
    l = quad_shortest_side(q)
    lengths = rng.uniform(params.persp_min * l, params.persp_max * l, size=4)
    if np.all(lengths == 0.0):
        return photo.copy(), q.copy()
    g = q.mean(axis=0)
    offs = q - g
    units = offs / np.linalg.norm(offs, axis=1, keepdims=True)
    new_q = q + lengths[:, None] * units
    if np.any(new_q[:, 0] < 0) or np.any(new_q[:, 0] > w) or np.any(
        new_q[:, 1] < 0
    ) or np.any(new_q[:, 1] > h):
        raise PlacementInfeasible("perturbed vertex leaves the photo")
    H = raster.solve_homography(q, new_q)
    return raster.warp_homography(photo, H, w, h), new_q


def adjust_contrast_brightness(img: np.ndarray, alpha: float, beta: float) -> np.ndarray:
    """Per-channel p' = alpha * p + beta, rounded and clipped to [0, 255]."""
    out = np.rint(alpha * img.astype(np.float64) + beta)
    return np.clip(out, 0, 255).astype(np.uint8)


def add_gaussian_noise(img: np.ndarray, sigma: float, rng) -> np.ndarray:
    noise = rng.normal(0.0, sigma, size=img.shape)
    return np.clip(np.rint(img.astype(np.float64) + noise), 0, 255).astype(np.uint8)


def degrade_pipeline(photo: np.ndarray, quad, params: DegradationParams, rng):
    """Stages in order: vertex perturbation, contrast/brightness, noise, JPEG."""
    img, new_quad = perturb_vertices(photo, quad, params, rng)
    alpha = rng.uniform(*params.alpha_range)
    beta = rng.uniform(*params.beta_range)
    img = adjust_contrast_brightness(img, alpha, beta)
    img = add_gaussian_noise(img, params.noise_sigma, rng)
    img = raster.jpeg_roundtrip(img, params.jpeg_quality)
    return img, new_quad


# ---------------------------------------------------------------------------
# Random text for the classifier/ocr training sets


_TEXT_CHARS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"


def random_field_text(field, layout: DocumentLayout, rng) -> str:
    """Random string shaped to fit the field at its font size."""
    font = get_font(layout.field_typeface(field), field.font_px)
    w = layout.base_width
    h = layout.base_height
    rect_w = field.rect[2] * w
    rect_h = field.rect[3] * h
    avail = rect_w - 2 * TEXT_PAD_FRAC * rect_h
    n = int(rng.integers(3, 15))
    chars = []
    for i in range(n):
        r = rng.random()
        if 0 < i < n - 1 and r < 0.12 and chars and chars[-1] != " ":
            chars.append(" ")
        elif r < 0.35:
            chars.append(_TEXT_CHARS[int(rng.integers(26, 36))])
        else:
            chars.append(_TEXT_CHARS[int(rng.integers(0, 26))])
    text = "".join(chars).strip()
    while text and text_width(font, text, field.font_px) > avail:
        text = text[:-1].strip()
    return text or "X"


def random_values_for(layout: DocumentLayout, rng) -> dict[str, str]:
    return {f.name: random_field_text(f, layout, rng) for f in layout.fields}


# ---------------------------------------------------------------------------
# Dataset generation


def _sample_rng(seed: int, index: int):
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(index))))


def gen_dataset(
    kind: str,
    count: int,
    seed: int,
    out_dir,
    layouts=None,
    lists=None,
    degradation: DegradationParams | None = None,
    photo_size: tuple[int, int] = (640, 480),
    background_dir=None,
    debug_png: bool = False,
) -> list[SampleRecord]:
    """Generate a labeled dataset and write images plus a JSONL manifest.

    kind "main": full photos with ground-truth quads and field texts.
    kind "classifier": 200x200 rectified documents with random text and a
    light warp, degraded like the main set (minus the perspective stage).
    kind "ocr": field-line crops at height 40, one record per line.
    Classes are assigned round-robin, so counts differ by at most one.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if kind not in ("main", "classifier", "ocr"):
        raise ValueError(f"unknown dataset kind {kind!r}")
    layouts = layouts or load_layouts()
    lists = lists or identity.load_name_lists()
    degradation = degradation or DegradationParams()
    out = Path(out_dir)
    images = out / "images"
    images.mkdir(parents=True, exist_ok=True)
    backgrounds = BackgroundSource(background_dir)
    pw, ph = photo_size

    records: list[SampleRecord] = []
    for idx in range(count):
        rng = _sample_rng(seed, idx)
        doc_class = DocumentClass(idx % 9)
        layout = layouts[doc_class]
        if kind == "main":
            person = identity.gen_person(rng, lists, doc_class)
            values = identity.field_values_for(doc_class, person, rng)
            doc, truth = render_document(layout, values, rng)
            bg = backgrounds.sample(rng, pw, ph)
            photo, quad = composite_on_background(
                doc, rng, bg, headroom_frac=degradation.persp_max
            )
            if debug_png:
                raster.save_image(photo, images / f"{idx:05d}_clean.png")
            img, quad = degrade_pipeline(photo, quad, degradation, rng)
            rel = f"images/{idx:05d}.jpg"
            raster.save_image(img, out / rel, jpeg_quality=degradation.jpeg_quality)
            records.append(SampleRecord(rel, doc_class, quad, truth))
        elif kind == "classifier":
            values = random_values_for(layout, rng)
            doc, truth = render_document(layout, values, rng)
            img = _classifier_image(doc, rng, degradation)
            rel = f"images/{idx:05d}.jpg"
            raster.save_image(img, out / rel, jpeg_quality=degradation.jpeg_quality)
            frame = raster.quad_from_rect(0, 0, 200, 200)
            records.append(SampleRecord(rel, doc_class, frame, truth))
        else:  # ocr
            from . import extractor  # lines are cut exactly as at read time

            values = random_values_for(layout, rng)
            doc, truth = render_document(layout, values, rng)
            doc = _jitter_warp(doc, rng, 0.02)
            for name, line in extractor.extract_field_lines(doc, layout):
                alpha = rng.uniform(*degradation.alpha_range)
                beta = rng.uniform(*degradation.beta_range)
                line = adjust_contrast_brightness(line, alpha, beta)
                line = add_gaussian_noise(line, degradation.noise_sigma, rng)
                line = raster.jpeg_roundtrip(line, degradation.jpeg_quality)
                rel = f"images/{idx:05d}_{name}.jpg"
                raster.save_image(line, out / rel, jpeg_quality=degradation.jpeg_quality)
                lh, lw = line.shape[:2]
                records.append(
                    SampleRecord(
                        rel, doc_class, raster.quad_from_rect(0, 0, lw, lh),
                        {name: truth[name]},
                    )
                )
    write_manifest(records, out / "manifest.jsonl")
    return records


def _jitter_warp(img: np.ndarray, rng, frac: float) -> np.ndarray:
    """Light perspective: each corner moves by up to frac of the short side."""
    h, w = img.shape[:2]
    l = min(w, h)
    quad = raster.quad_from_rect(0, 0, w, h)
    r = rng.uniform(0, frac * l, size=4)
    ang = rng.uniform(0, 2 * np.pi, size=4)
    jittered = quad + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    return raster.warp_perspective(img, jittered, w, h)


def _classifier_image(doc: np.ndarray, rng, degradation: DegradationParams) -> np.ndarray:
    """200x200 rectified render with background margin and a light warp."""
    dh, dw = doc.shape[:2]
    m = max(8, int(0.04 * min(dw, dh)))
    canvas = gen_background(rng, dw + 2 * m, dh + 2 * m)
    canvas[m : m + dh, m : m + dw] = doc
    quad = raster.quad_from_rect(m, m, m + dw, m + dh)
    l = min(dw, dh)
    r = rng.uniform(0, 0.02 * l, size=4)
    ang = rng.uniform(0, 2 * np.pi, size=4)
    quad = quad + np.stack([r * np.cos(ang), r * np.sin(ang)], axis=1)
    img = raster.warp_perspective(canvas, quad, 200, 200)
    alpha = rng.uniform(*degradation.alpha_range)
    beta = rng.uniform(*degradation.beta_range)
    img = adjust_contrast_brightness(img, alpha, beta)
    img = add_gaussian_noise(img, degradation.noise_sigma, rng)
    return raster.jpeg_roundtrip(img, degradation.jpeg_quality)
