"""Per-class document layouts: aspect ratio, field rectangles, color scheme.

The registry is a JSON file (one entry per document class); a schematic
default is bundled with the package. Field rectangles are normalized to
[0,1]^2 and drive both rendering and extraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

from PIL import ImageFont

from . import raster
from .classifier import DocumentClass
from .errors import MissingLayout

_DATA_DIR = Path(__file__).parent / "data"
DEFAULT_REGISTRY = _DATA_DIR / "layouts.json"

TYPEFACE_FILES = {
    "sans": "DejaVuSans.ttf",
    "serif": "DejaVuSerif.ttf",
    "mono": "DejaVuSansMono.ttf",
}


@lru_cache(maxsize=None)
def get_font(typeface: str, px: int) -> ImageFont.FreeTypeFont:
    path = _DATA_DIR / "fonts" / TYPEFACE_FILES[typeface]
    return ImageFont.truetype(str(path), px)


@dataclass
class FieldSpec:
    name: str
    rect: tuple[float, float, float, float]  # normalized x, y, w, h
    font_px: int
    color: tuple[int, int, int]
    typeface: str | None = None  # None = layout typeface


@dataclass
class DocumentLayout:
    doc_class: DocumentClass
    aspect_ratio: float
    base_width: int
    typeface: str
    title: str
    base_color: tuple[int, int, int]
    accent_color: tuple[int, int, int]
    text_color: tuple[int, int, int]
    portrait_box: tuple[float, float, float, float] | None
    fields: list[FieldSpec]

    @property
    def base_height(self) -> int:
        return max(1, raster.round_even(self.base_width / self.aspect_ratio))

    def field_typeface(self, field: FieldSpec) -> str:
        return field.typeface or self.typeface

    def validate(self) -> None:
        if self.aspect_ratio <= 0:
            raise ValueError("aspect_ratio must be > 0")
        for f in self.fields:
            x, y, w, h = f.rect
            if not (0 <= x and 0 <= y and w > 0 and h > 0 and x + w <= 1 and y + h <= 1):
                raise ValueError(f"{self.doc_class.label}/{f.name}: rect {f.rect} outside [0,1]^2")
        for i, a in enumerate(self.fields):
            for b in self.fields[i + 1 :]:
                if _rects_overlap(a.rect, b.rect):
                    raise ValueError(
                        f"{self.doc_class.label}: fields {a.name} and {b.name} overlap"
                    )


def _rects_overlap(r1, r2) -> bool:
    x1, y1, w1, h1 = r1
    x2, y2, w2, h2 = r2
    return x1 < x2 + w2 and x2 < x1 + w1 and y1 < y2 + h2 and y2 < y1 + h1


def _layout_from_dict(d: dict) -> DocumentLayout:
    layout = DocumentLayout(
        doc_class=DocumentClass(int(d["class"])),
        aspect_ratio=float(d["aspect_ratio"]),
        base_width=int(d["base_width"]),
        typeface=str(d["typeface"]),
        title=str(d["title"]),
        base_color=tuple(d["scheme"]["base"]),
        accent_color=tuple(d["scheme"]["accent"]),
        text_color=tuple(d["scheme"]["text"]),
        portrait_box=tuple(d["portrait_box"]) if d.get("portrait_box") else None,
        fields=[
            FieldSpec(
                name=str(f["name"]),
                rect=tuple(float(v) for v in f["rect"]),
                font_px=int(f["font_px"]),
                color=tuple(f["color"]),
                typeface=f.get("typeface"),
            )
            for f in d["fields"]
        ],
    )
    layout.validate()
    return layout


def load_layouts(path=None) -> dict[DocumentClass, DocumentLayout]:
    """Read a registry file; the bundled schematic registry by default."""
    p = Path(path) if path else DEFAULT_REGISTRY
    data = json.loads(p.read_text(encoding="utf-8"))
    layouts = {}
    for entry in data["layouts"]:
        layout = _layout_from_dict(entry)
        layouts[layout.doc_class] = layout
    return layouts


def layout_for(layouts: dict, doc_class: DocumentClass) -> DocumentLayout:
    try:
        return layouts[DocumentClass(doc_class)]
    except KeyError:
        raise MissingLayout(f"no layout for class {doc_class}") from None
