"""Deterministic labeled axonometric rendering of decompositions.

Orthographic projection with painter's-algorithm ordering (all faces are
axis-aligned unit quads, so depth sorting is exact). Output formats are
SVG 1.1 and 8-bit RGB PNG; both are byte-stable for identical scenes. The
PNG path uses an embedded 7x9 bitmap digit font so no font libraries are
involved.
"""

from __future__ import annotations

import math
import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from .decompose import Decomposition, Direction
from .errors import CanvasTooLarge

__all__ = [
    "AxonometricView",
    "ScenePolygon",
    "LabeledScene",
    "standard_views",
    "project",
    "render_svg",
    "render_raster",
    "scene_to_dict",
    "PALETTE",
]

MAX_CANVAS = 4096

PALETTE = {
    "bg": (255, 255, 255),
    "pz": (224, 221, 210),
    "nz": (128, 128, 128),
    "px": (168, 194, 220),
    "nx": (132, 158, 186),
    "py": (194, 212, 168),
    "ny": (156, 178, 138),
    "highlight": (255, 140, 66),
    "stroke": (51, 51, 51),
    "text": (17, 17, 17),
    "halo": (255, 255, 255),
}

_FILL_CLASS = {
    Direction.PZ: "pz",
    Direction.NZ: "nz",
    Direction.PX: "px",
    Direction.NX: "nx",
    Direction.PY: "py",
    Direction.NY: "ny",
}


@dataclass(frozen=True)
class AxonometricView:
    view_dir: tuple[float, float, float]
    up: tuple[float, float, float]
    name: str

    def __post_init__(self):
        for v in (self.view_dir, self.up):
            n = math.sqrt(sum(c * c for c in v))
            if abs(n - 1.0) > 1e-9:
                raise ValueError(f"view vector {v} is not unit length")
        cx = _cross(self.view_dir, self.up)
        if math.sqrt(sum(c * c for c in cx)) < 1e-9:
            raise ValueError("view_dir and up are parallel")

    def basis(self):
        """Screen basis: right, up; depth grows away from the viewer."""
        f = self.view_dir
        r = _normalize(_cross(f, self.up))
        u = _cross(r, f)
        return r, u


def _cross(a, b):
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _normalize(v):
    n = math.sqrt(sum(c * c for c in v))
    return (v[0] / n, v[1] / n, v[2] / n)


def standard_views() -> tuple[AxonometricView, AxonometricView]:
    """Two opposite-corner views covering both sides of the geometry."""
    s = 1.0 / math.sqrt(3.0)
    a = AxonometricView(view_dir=(-s, -s, -s), up=(0.0, 0.0, 1.0), name="A")
    b = AxonometricView(view_dir=(s, s, -s), up=(0.0, 0.0, 1.0), name="B")
    return a, b


@dataclass(frozen=True)
class ScenePolygon:
    points: tuple[tuple[float, float], ...]  # pixel coordinates
    depth: float  # smaller = farther from the viewer
    fill_class: str
    patch_label: int | None = None
    label_text: str | None = None
    label_anchor: tuple[float, float] | None = None


@dataclass(frozen=True)
class LabeledScene:
    polygons: tuple[ScenePolygon, ...]
    canvas: tuple[int, int]
    view: AxonometricView
    font_px: float = field(default=0.0)


_QUAD_OFFSETS = {
    # corner offsets (in half-cell units) in the two in-plane axes, CCW
    0: ((0, -1, -1), (0, 1, -1), (0, 1, 1), (0, -1, 1)),
    1: ((-1, 0, -1), (1, 0, -1), (1, 0, 1), (-1, 0, 1)),
    2: ((-1, -1, 0), (1, -1, 0), (1, 1, 0), (-1, 1, 0)),
}


def _face_corners(grid, cell, direction: Direction):
    cx, cy, cz = grid.cell_center(cell)
    h = grid.cell_size / 2.0
    a = direction.axis
    base = [cx, cy, cz]
    base[a] += direction.sign * h
    corners = []
    for off in _QUAD_OFFSETS[a]:
        corners.append(tuple(base[i] + off[i] * h for i in range(3)))
    return corners


def project(
    decomp: Decomposition,
    view: AxonometricView,
    canvas: tuple[int, int] = (1024, 1024),
    highlight: frozenset[int] | set[int] = frozenset(),
    labeled: bool = True,
) -> LabeledScene:
    """Project front-facing exposed quads onto the canvas.

    Patches facing away from the viewer (normal . view_dir >= 0) are not
    drawn and carry no label in this view. Each visible labeled patch gets
    exactly one label anchor at its projected centroid.
    """
    w, h = canvas
    right, up = view.basis()
    f = view.view_dir

    grid = decomp.grid
    lo = grid.origin
    hi = tuple(grid.origin[a] + grid.dims[a] * grid.cell_size for a in range(3))
    corners = [
        (x, y, z)
        for x in (lo[0], hi[0])
        for y in (lo[1], hi[1])
        for z in (lo[2], hi[2])
    ]
    sx = [_dot(c, right) for c in corners]
    sy = [_dot(c, up) for c in corners]
    margin = 0.08 * min(w, h)
    span_x = max(sx) - min(sx) or 1.0
    span_y = max(sy) - min(sy) or 1.0
    scale = min((w - 2 * margin) / span_x, (h - 2 * margin) / span_y)
    cx0 = (max(sx) + min(sx)) / 2.0
    cy0 = (max(sy) + min(sy)) / 2.0

    def to_px(p):
        px = w / 2.0 + (_dot(p, right) - cx0) * scale
        py = h / 2.0 - (_dot(p, up) - cy0) * scale
        return (px, py)

    all_patches = list(decomp.patches) + [p for p, _ in decomp.omitted]
    polys: list[ScenePolygon] = []
    order = 0
    for patch in all_patches:
        facing = _dot(patch.normal.vector, f)
        if facing >= 0:
            continue
        fill = "highlight" if (patch.label is not None and patch.label in highlight) else _FILL_CLASS[patch.normal]
        anchor = to_px(patch.centroid_world) if (labeled and patch.label is not None) else None
        text = str(patch.label) if (labeled and patch.label is not None) else None
        first = True
        for cell in patch.cells:
            pts = tuple(to_px(c) for c in _face_corners(grid, cell, patch.normal))
            center = grid.cell_center(cell)
            fc = list(center)
            fc[patch.normal.axis] += patch.normal.sign * grid.cell_size / 2.0
            depth = -_dot(fc, f)
            polys.append(
                ScenePolygon(
                    points=pts,
                    depth=depth,
                    fill_class=fill,
                    patch_label=patch.label,
                    label_text=text if first else None,
                    label_anchor=anchor if first else None,
                )
            )
            first = False
            order += 1
    # back-to-front: smaller depth key first; stable secondary key for ties
    polys.sort(key=lambda p: (p.depth, p.fill_class, p.points))
    return LabeledScene(
        polygons=tuple(polys), canvas=(w, h), view=view, font_px=0.04 * h
    )


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


# ---------------------------------------------------------------------------
# SVG


def _fmt(v: float) -> str:
    s = f"{v:.3f}"
    return "-0.000" if s == "-0.000" else s


def _hex(rgb) -> str:
    return "#%02x%02x%02x" % rgb


def render_svg(scene: LabeledScene) -> bytes:
    w, h = scene.canvas
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
        f'viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="{_hex(PALETTE["bg"])}"/>',
    ]
    for poly in scene.polygons:
        pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in poly.points)
        label_attr = f' data-label="{poly.patch_label}"' if poly.patch_label is not None else ""
        out.append(
            f'<polygon points="{pts}" fill="{_hex(PALETTE[poly.fill_class])}" '
            f'stroke="{_hex(PALETTE["stroke"])}" stroke-width="1"{label_attr}/>'
        )
    texts = [p for p in scene.polygons if p.label_text is not None]
    if texts:
        out.append(
            f'<g font-family="monospace" font-size="{_fmt(scene.font_px)}" '
            'text-anchor="middle" font-weight="bold">'
        )
        for p in texts:
            x, y = p.label_anchor
            ax, ay = _fmt(x), _fmt(y + scene.font_px / 3.0)
            out.append(
                f'<text x="{ax}" y="{ay}" fill="{_hex(PALETTE["halo"])}" '
                f'stroke="{_hex(PALETTE["halo"])}" stroke-width="{_fmt(scene.font_px / 4.0)}">'
                f"{p.label_text}</text>"
            )
            out.append(
                f'<text x="{ax}" y="{ay}" fill="{_hex(PALETTE["text"])}">{p.label_text}</text>'
            )
        out.append("</g>")
    out.append("</svg>")
    return ("\n".join(out) + "\n").encode()


# ---------------------------------------------------------------------------
# PNG

_DIGITS = {
    "0": (
        "..###..", ".#...#.", "#.....#", "#.....#", "#.....#",
        "#.....#", "#.....#", ".#...#.", "..###..",
    ),
    "1": (
        "...#...", "..##...", ".#.#...", "...#...", "...#...",
        "...#...", "...#...", "...#...", ".#####.",
    ),
    "2": (
        ".####..", "#....#.", "......#", "......#", ".....#.",
        "....#..", "..##...", ".#.....", "#######",
    ),
    "3": (
        ".####..", "#....#.", "......#", "....##.", "......#",
        "......#", "......#", "#....#.", ".####..",
    ),
    "4": (
        "....##.", "...#.#.", "..#..#.", ".#...#.", "#....#.",
        "#######", ".....#.", ".....#.", ".....#.",
    ),
    "5": (
        "######.", "#......", "#......", "#####..", ".....#.",
        "......#", "......#", "#....#.", ".####..",
    ),
    "6": (
        "..###..", ".#.....", "#......", "#####..", "#....#.",
        "#.....#", "#.....#", ".#...#.", "..###..",
    ),
    "7": (
        "#######", "......#", ".....#.", "....#..", "...#...",
        "...#...", "..#....", "..#....", "..#....",
    ),
    "8": (
        ".#####.", "#.....#", "#.....#", ".#####.", "#.....#",
        "#.....#", "#.....#", "#.....#", ".#####.",
    ),
    "9": (
        ".####..", "#....#.", "#.....#", "#.....#", ".#####.",
        "......#", "......#", "....#..", ".###...",
    ),
}
GLYPH_W, GLYPH_H = 7, 9


def render_raster(scene: LabeledScene) -> bytes:
    """Rasterize the scene to a deterministic 8-bit RGB PNG."""
    w, h = scene.canvas
    if w > MAX_CANVAS or h > MAX_CANVAS:
        raise CanvasTooLarge(f"canvas {w}x{h} exceeds {MAX_CANVAS}")
    img = np.empty((h, w, 3), dtype=np.uint8)
    img[:, :] = PALETTE["bg"]
    for poly in scene.polygons:
        _fill_polygon(img, poly.points, PALETTE[poly.fill_class])
    scale = max(1, round(0.04 * h / GLYPH_H))
    for poly in scene.polygons:
        if poly.label_text is not None:
            _stamp_text(img, poly.label_text, poly.label_anchor, scale)
    return _encode_png(img)


def _fill_polygon(img, pts, color):
    h, w, _ = img.shape
    ys = [p[1] for p in pts]
    y_lo = max(0, int(math.floor(min(ys))))
    y_hi = min(h - 1, int(math.ceil(max(ys))))
    n = len(pts)
    col = np.array(color, dtype=np.uint8)
    for y in range(y_lo, y_hi + 1):
        yc = y + 0.5
        xs = []
        for i in range(n):
            x1, y1 = pts[i]
            x2, y2 = pts[(i + 1) % n]
            if (y1 <= yc < y2) or (y2 <= yc < y1):
                t = (yc - y1) / (y2 - y1)
                xs.append(x1 + t * (x2 - x1))
        xs.sort()
        for a, b in zip(xs[::2], xs[1::2]):
            x_lo = max(0, int(math.ceil(a - 0.5)))
            x_hi = min(w - 1, int(math.floor(b - 0.5)))
            if x_hi >= x_lo:
                img[y, x_lo : x_hi + 1] = col


def _stamp_text(img, text, anchor, scale):
    h, w, _ = img.shape
    n = len(text)
    total_w = n * GLYPH_W * scale + (n - 1) * scale
    total_h = GLYPH_H * scale
    x0 = int(round(anchor[0] - total_w / 2.0))
    y0 = int(round(anchor[1] - total_h / 2.0))
    halo = np.array(PALETTE["halo"], dtype=np.uint8)
    ink = np.array(PALETTE["text"], dtype=np.uint8)
    boxes = []
    for ci, ch in enumerate(text):
        glyph = _DIGITS.get(ch)
        if glyph is None:
            continue
        gx = x0 + ci * (GLYPH_W + 1) * scale
        boxes.append((gx, glyph))
    # halo pass: dilate each glyph pixel by one scaled pixel
    for gx, glyph in boxes:
        for r, row in enumerate(glyph):
            for c, ch2 in enumerate(row):
                if ch2 == "#":
                    ya = max(0, y0 + (r - 1) * scale)
                    yb = min(h, y0 + (r + 2) * scale)
                    xa = max(0, gx + (c - 1) * scale)
                    xb = min(w, gx + (c + 2) * scale)
                    img[ya:yb, xa:xb] = halo
    for gx, glyph in boxes:
        for r, row in enumerate(glyph):
            for c, ch2 in enumerate(row):
                if ch2 == "#":
                    ya = max(0, y0 + r * scale)
                    yb = min(h, y0 + (r + 1) * scale)
                    xa = max(0, gx + c * scale)
                    xb = min(w, gx + (c + 1) * scale)
                    img[ya:yb, xa:xb] = ink


def _encode_png(img: np.ndarray) -> bytes:
    h, w, _ = img.shape
    raw = bytearray()
    for y in range(h):
        raw.append(0)  # filter type: none
        raw.extend(img[y].tobytes())
    comp = zlib.compress(bytes(raw), 6)

    def chunk(typ: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + typ
            + data
            + struct.pack(">I", zlib.crc32(typ + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", w, h, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", comp)
        + chunk(b"IEND", b"")
    )


# ---------------------------------------------------------------------------
# structured export for the web UI overlay


def scene_to_dict(scene: LabeledScene) -> dict:
    return {
        "view": scene.view.name,
        "canvas": list(scene.canvas),
        "font_px": scene.font_px,
        "polygons": [
            {
                "points": [[x, y] for x, y in p.points],
                "depth": p.depth,
                "fill": p.fill_class,
                "label": p.patch_label,
            }
            for p in scene.polygons
        ],
        "labels": [
            {"label": p.patch_label, "anchor": [p.label_anchor[0], p.label_anchor[1]]}
            for p in scene.polygons
            if p.label_text is not None
        ],
    }
