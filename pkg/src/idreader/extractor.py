"""Field extraction and the glyph-template baseline recognizer.

The located document is rectified to its class aspect ratio, field regions
are cropped through the layout registry and normalized to 40 px line
height, and each line is read by normalized cross-correlation against
glyph templates rendered with the generator's own typefaces. The
recognizer is pluggable: anything with recognize(line) -> (text, conf).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Protocol

import numpy as np
from PIL import Image as PILImage
from PIL import ImageDraw

from . import locator, raster
from .classifier import DocumentClass, classify, preprocess
from .errors import MissingLayout
from .layouts import DocumentLayout, get_font

LINE_HEIGHT = 40
RECTIFY_WIDTH = 1000

CHARSET = "ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789.-/<"
_TEMPLATE_H = 32
_TEMPLATE_FONT_PX = 28  # representative field font size for template builds
_MERGE_GAP = 1          # column gap (px) below which segments merge
_SPACE_GAP_EM = 0.52    # inter-segment gap (in em) that reads as a space
_CAP_EM = 0.72          # cap height as a fraction of the em size
_AR_PENALTY = 1.2       # weight of the aspect-ratio mismatch penalty
_HEIGHT_PENALTY = 1.2   # weight of the relative-ink-height mismatch penalty
_CENTER_PENALTY = 0.0   # weight of the center-ink mismatch (dotted zero etc.)


class RecognizerInterface(Protocol):
    def recognize(self, line: np.ndarray) -> tuple[str, float]: ...


def rectify(photo: np.ndarray, quad, layout: DocumentLayout,
            width: int = RECTIFY_WIDTH) -> np.ndarray:
    """Warp the quad to the class aspect ratio at the configured width."""
    height = max(1, raster.round_even(width / layout.aspect_ratio))
    return raster.warp_perspective(photo, quad, width, height)


def extract_field_lines(doc: np.ndarray, layout: DocumentLayout):
    """Crop each layout field and normalize it to 40 px line height."""
    doc = raster.as_image(doc)
    h, w = doc.shape[:2]
    doc_aspect = w / h
    if abs(doc_aspect - layout.aspect_ratio) > 0.01 * layout.aspect_ratio:
        raise ValueError(
            f"document aspect {doc_aspect:.4f} does not match layout "
            f"{layout.aspect_ratio:.4f}"
        )
    lines = []
    for f in layout.fields:
        fx, fy, fw, fh = f.rect
        x0 = raster.round_even(fx * w)
        y0 = raster.round_even(fy * h)
        cw = raster.round_even(fw * w)
        ch = raster.round_even(fh * h)
        crop = doc[y0 : y0 + ch, x0 : x0 + cw]
        lines.append((f.name, raster.resize_to_height(crop, LINE_HEIGHT)))
    return lines


# ---------------------------------------------------------------------------
# Glyph templates


def _render_glyph(ch: str, typeface: str, px: int = _TEMPLATE_FONT_PX):
    """Glyph template processed exactly like a field-line segment.

    The character is drawn next to a reference 'H' inside a rect sized like
    the layouts use, the strip is resized to the 40 px line height and then
    ink-normalized and binarized the same way recognition does; the
    character's own segment is cut out of the result. This keeps stroke
    blur and thickness consistent between templates and observed segments.
    """
    font = get_font(typeface, px)
    rect_h = round(1.3 * px)
    gap = max(6, round(0.30 * px))
    h_adv = font.getlength("H")
    ch_adv = font.getlength(ch)
    width = int(h_adv + gap + ch_adv + px)
    im = PILImage.new("L", (width, rect_h), 255)
    draw = ImageDraw.Draw(im)
    baseline = rect_h / 2 + 0.5 * _CAP_EM * px
    draw.text((2, baseline), "H", font=font, fill=0, anchor="ls")
    draw.text((2 + h_adv + gap, baseline), ch, font=font, fill=0, anchor="ls")
    gray = np.asarray(im, dtype=np.float64)
    # line pipeline: resize to 40 px height, then normalize the ink band
    s1 = LINE_HEIGHT / rect_h
    g40 = _resize2d(gray, LINE_HEIGHT, max(4, int(round(width * s1))))
    fg = g40 < _otsu_threshold(g40)
    rows = np.nonzero(fg.any(axis=1))[0]
    if rows.size == 0:
        return None
    r0, r1 = int(rows.min()), int(rows.max()) + 1
    scale = _NORM_INK_H / (r1 - r0)
    pad = int(np.ceil(2 / scale))
    r0p, r1p = max(0, r0 - pad), min(g40.shape[0], r1 + pad)
    gn = _resize2d(g40[r0p:r1p], max(4, int(round((r1p - r0p) * scale))),
                   max(4, int(round(g40.shape[1] * scale))))
    fgn = gn < _otsu_threshold(gn)
    segments = _column_segments(fgn, _MERGE_GAP)
    if len(segments) < 2:
        return None
    c0, c1 = segments[-1]
    rr = np.nonzero(fgn[:, c0:c1].any(axis=1))[0]
    if rr.size == 0:
        return None
    rr0, rr1 = int(rr.min()), int(rr.max()) + 1
    g_bin = fgn[rr0:rr1, c0:c1].astype(np.float64)
    g_ink = -gn[rr0:rr1, c0:c1]  # gray ink map; NCC is offset/scale invariant
    em = _NORM_INK_H / _CAP_EM  # the reference H spans the ink band
    return g_ink, g_bin, (rr1 - rr0) / em


def _resize2d(a: np.ndarray, oh: int, ow: int) -> np.ndarray:
    """Bilinear resize of a 2-D float array, center-aligned sampling."""
    h, w = a.shape
    ys = np.clip((np.arange(oh) + 0.5) * h / oh - 0.5, 0, h - 1)
    xs = np.clip((np.arange(ow) + 0.5) * w / ow - 0.5, 0, w - 1)
    i0 = np.floor(ys).astype(int)
    j0 = np.floor(xs).astype(int)
    i1 = np.minimum(i0 + 1, h - 1)
    j1 = np.minimum(j0 + 1, w - 1)
    ty = (ys - i0)[:, None]
    tx = (xs - j0)[None, :]
    top = a[np.ix_(i0, j0)] * (1 - tx) + a[np.ix_(i0, j1)] * tx
    bot = a[np.ix_(i1, j0)] * (1 - tx) + a[np.ix_(i1, j1)] * tx
    return top * (1 - ty) + bot * ty


def _center_ink(grid: np.ndarray) -> float:
    """Mean ink in the central box; separates dotted from open counters."""
    h, w = grid.shape
    r0, r1 = int(0.38 * h), max(int(0.38 * h) + 1, int(np.ceil(0.62 * h)))
    c0, c1 = int(0.38 * w), max(int(0.38 * w) + 1, int(np.ceil(0.62 * w)))
    return float(grid[r0:r1, c0:c1].mean())


def _ink_features(bin_grid: np.ndarray) -> np.ndarray:
    """Center ink plus mean-normalized quadrant ink fractions.

    The quadrant profile is divided by its own mean so that the uniform
    stroke fattening segments pick up from blur and binarization cancels;
    the remaining vector captures where the ink sits (e.g. the flat top
    bar of a 5 against the curved top of an S).
    """
    h, w = bin_grid.shape
    h2, w2 = max(1, h // 2), max(1, w // 2)
    quads = np.array(
        [
            bin_grid[:h2, :w2].mean(),
            bin_grid[:h2, w2:].mean() if w > w2 else 0.0,
            bin_grid[h2:, :w2].mean() if h > h2 else 0.0,
            bin_grid[h2:, w2:].mean() if h > h2 and w > w2 else 0.0,
        ]
    )
    mean = quads.mean()
    if mean > 1e-9:
        quads = quads / mean
    return np.concatenate([[_center_ink(bin_grid)], quads])


@dataclass
class _Glyph:
    char: str
    grid: np.ndarray          # _TEMPLATE_H x w gray ink map (NCC side)
    aspect: float             # ink width / ink height
    height_em: float          # ink height as a fraction of the em size
    features: np.ndarray      # center + normalized quadrant ink (tie-breaks)


class GlyphTemplates:
    """Per-typeface template sets rendered from the bundled fonts.

    Sets stay separate because a rendered field uses exactly one typeface;
    lines are decoded against each set and the best-scoring set wins, which
    stops lookalikes from another typeface (e.g. an undotted sans zero
    versus the mono capital O) from absorbing segments.
    """

    def __init__(self, typefaces=("sans", "serif", "mono"), charset: str = CHARSET):
        self.charset = charset
        self.by_typeface: dict[str, list[_Glyph]] = {}
        for tf in typefaces:
            glyphs = []
            for ch in charset:
                rendered = _render_glyph(ch, tf)
                if rendered is None:
                    continue
                g_ink, g_bin, h_em = rendered
                h, w = g_bin.shape
                ow = max(2, round(w * _TEMPLATE_H / h))
                grid = _resize2d(g_ink, _TEMPLATE_H, ow)
                glyphs.append(_Glyph(ch, grid, w / h, h_em, _ink_features(g_bin)))
            self.by_typeface[tf] = glyphs

    def __len__(self):
        return sum(len(v) for v in self.by_typeface.values())


_default_templates: GlyphTemplates | None = None


def default_templates() -> GlyphTemplates:
    global _default_templates
    if _default_templates is None:
        _default_templates = GlyphTemplates()
    return _default_templates


# ---------------------------------------------------------------------------
# Recognition


def _otsu_threshold(gray: np.ndarray) -> float:
    hist, _ = np.histogram(gray, bins=256, range=(0, 256))
    total = gray.size
    w0 = np.cumsum(hist)
    w1 = total - w0
    levels = np.arange(256)
    m0 = np.cumsum(hist * levels)
    total_mean = m0[-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = m0 / w0
        mu1 = (total_mean - m0) / w1
        between = w0 * w1 * (mu0 - mu1) ** 2
    between[~np.isfinite(between)] = 0.0
    return float(np.argmax(between))


def _column_segments(fg: np.ndarray, merge_gap: int):
    cols = fg.any(axis=0)
    runs = []
    start = None
    for i, v in enumerate(cols):
        if v and start is None:
            start = i
        elif not v and start is not None:
            runs.append([start, i])
            start = None
    if start is not None:
        runs.append([start, len(cols)])
    merged = []
    for run in runs:
        if merged and run[0] - merged[-1][1] <= merge_gap:
            merged[-1][1] = run[1]
        else:
            merged.append(run)
    return merged


def _ncc(a: np.ndarray, b: np.ndarray) -> float:
    ac = a - a.mean()
    bc = b - b.mean()
    denom = np.sqrt(np.sum(ac * ac) * np.sum(bc * bc))
    if denom <= 1e-12:
        return 0.0
    return float(np.sum(ac * bc) / denom)


_TIEBREAK_MARGIN = 0.06
_TIEBREAK_FEATURE_GAP = 0.25


def _feature_tiebreak(seg_features: np.ndarray, a, b) -> bool:
    """True when the runner-up should win a close race.

    Fires only when the two templates differ clearly in some ink feature
    (dotted mono zero vs capital O, flat-topped 5 vs curved S). The single
    most-different feature decides, measured on the segment at native
    scale; this sidesteps the stroke fattening that biases both plain
    correlation and the absolute ink fractions.
    """
    diff = np.abs(a.features - b.features)
    j = int(np.argmax(diff))
    if diff[j] < _TIEBREAK_FEATURE_GAP:
        return False
    return abs(seg_features[j] - b.features[j]) < abs(seg_features[j] - a.features[j])


_NORM_INK_H = 30  # ink rows are rescaled to this height before segmentation


def recognize_template(line: np.ndarray, glyphs: GlyphTemplates | None = None):
    """Read a 40 px line by template matching; returns (text, confidence).

    Otsu binarization; the ink band is rescaled to a normalized height so
    segmentation thresholds work at a fixed glyph scale. Column segments
    merge across small gaps; each segment is matched by normalized
    cross-correlation against the glyph set with an aspect-ratio penalty;
    gaps wide relative to the estimated em size become spaces. Confidence
    is the mean best correlation over the emitted characters.
    """
    glyphs = glyphs or default_templates()
    line = raster.as_image(line)
    gray = (
        0.299 * line[:, :, 0] + 0.587 * line[:, :, 1] + 0.114 * line[:, :, 2]
    )
    t = _otsu_threshold(gray)
    fg = gray < t
    # a near-uniform crop binarizes to noise; require real contrast
    if fg.mean() > 0.6 or not fg.any() or gray.std() < 12.0:
        return "", 0.0
    # rescale the ink band to a fixed height; glyph-scale thresholds follow
    rows = np.nonzero(fg.any(axis=1))[0]
    r0, r1 = int(rows.min()), int(rows.max()) + 1
    if r1 - r0 < 3:
        return "", 0.0
    scale = _NORM_INK_H / (r1 - r0)
    pad = int(np.ceil(2 / scale))
    r0p, r1p = max(0, r0 - pad), min(gray.shape[0], r1 + pad)
    oh = max(4, int(round((r1p - r0p) * scale)))
    ow = max(4, int(round(gray.shape[1] * scale)))
    gray = _resize2d(gray[r0p:r1p].astype(np.float64), oh, ow)
    t = _otsu_threshold(gray)
    fg = gray < t
    if not fg.any():
        return "", 0.0
    segments = _column_segments(fg, _MERGE_GAP)
    boxes = []
    for c0, c1 in segments:
        rows = np.nonzero(fg[:, c0:c1].any(axis=1))[0]
        if rows.size == 0:
            continue
        r0, r1 = rows.min(), rows.max() + 1
        if (r1 - r0) < 2 or (c1 - c0) < 1:
            continue
        boxes.append((c0, c1, r0, r1))
    if not boxes:
        return "", 0.0
    max_h = max(r1 - r0 for _, _, r0, r1 in boxes)
    em = max_h / _CAP_EM
    space_gap = max(3.0, _SPACE_GAP_EM * em)

    # per segment, the best match within each typeface's template set
    per_tf: dict[str, list[tuple[str, float]]] = {
        tf: [] for tf in glyphs.by_typeface
    }
    for c0, c1, r0, r1 in boxes:
        seg_ink = -gray[r0:r1, c0:c1]
        seg_bin = fg[r0:r1, c0:c1].astype(np.float64)
        seg_features = _ink_features(seg_bin)
        seg_ar = (c1 - c0) / (r1 - r0)
        seg_h_em = (r1 - r0) / em
        resized: dict[int, np.ndarray] = {}
        for tf, tf_glyphs in glyphs.by_typeface.items():
            scored = []
            for g in tf_glyphs:
                tw = g.grid.shape[1]
                if tw not in resized:
                    resized[tw] = _resize2d(seg_ink, _TEMPLATE_H, tw)
                corr = _ncc(resized[tw], g.grid)
                corr -= _AR_PENALTY * abs(seg_ar - g.aspect)
                corr -= _HEIGHT_PENALTY * abs(seg_h_em - g.height_em)
                scored.append((corr, g))
            scored.sort(key=lambda cg: -cg[0])
            best_corr, best = scored[0]
            # the typeface vote always uses the raw best score; a feature
            # tie-break may override which character is emitted, but must
            # not perturb the vote (that would couple unrelated segments)
            if len(scored) > 1:
                second_corr, second = scored[1]
                if (
                    best.char != second.char
                    and best_corr - second_corr < _TIEBREAK_MARGIN
                    and _feature_tiebreak(seg_features, best, second)
                ):
                    best = second
            per_tf[tf].append((best.char, best_corr))
    # the line is set in one typeface; keep the best-scoring decode
    winner = max(per_tf, key=lambda tf: float(np.mean([c for _, c in per_tf[tf]])))
    chars = []
    confs = []
    prev_end = None
    for (c0, c1, _, _), (ch, corr) in zip(boxes, per_tf[winner]):
        if prev_end is not None and (c0 - prev_end) >= space_gap:
            chars.append(" ")
        prev_end = c1
        chars.append(ch)
        confs.append(min(1.0, max(0.0, corr)))
    text = "".join(chars)
    conf = float(np.mean(confs)) if confs else 0.0
    return text, conf


class TemplateRecognizer:
    """Default pluggable recognizer backed by the bundled glyph templates."""

    def __init__(self, templates: GlyphTemplates | None = None):
        self.templates = templates or default_templates()

    def recognize(self, line: np.ndarray) -> tuple[str, float]:
        return recognize_template(line, self.templates)


# ---------------------------------------------------------------------------
# Whole-document readout


@dataclass
class DocumentReadout:
    doc_class: DocumentClass
    probs: np.ndarray
    quad: np.ndarray
    fields: dict[str, tuple[str, float]]

    def to_json(self) -> str:
        return json.dumps(
            {
                "class": int(self.doc_class),
                "label": self.doc_class.label,
                "probs": [float(p) for p in self.probs],
                "quad": [[float(x), float(y)] for x, y in np.asarray(self.quad)],
                "fields": {
                    k: {"text": t, "conf": round(c, 4)}
                    for k, (t, c) in self.fields.items()
                },
            }
        )


def read_document(
    photo: np.ndarray,
    model,
    layouts: dict,
    recognizer: RecognizerInterface | None = None,
    locator_params: locator.LocatorParams | None = None,
) -> DocumentReadout:
    """Locate, classify, rectify, extract, and read a document photo."""
    recognizer = recognizer or TemplateRecognizer()
    quad = locator.locate(photo, locator_params)
    tensor = preprocess(photo, quad)
    doc_class, probs = classify(model, tensor)
    if doc_class not in layouts:
        raise MissingLayout(f"no layout for classified class {doc_class}")
    layout = layouts[doc_class]
    doc = rectify(photo, quad, layout)
    fields = {}
    for name, line in extract_field_lines(doc, layout):
        fields[name] = recognizer.recognize(line)
    return DocumentReadout(doc_class=doc_class, probs=probs, quad=quad, fields=fields)
