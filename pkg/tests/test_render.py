import io
import math
import zlib

import pytest

from voxplan.decompose import decompose_grid
from voxplan.errors import CanvasTooLarge
from voxplan.fixtures import demo_grid, grid_from_cells
from voxplan.render import (
    PALETTE,
    AxonometricView,
    project,
    render_raster,
    render_svg,
    scene_to_dict,
    standard_views,
)


def _cube():
    return decompose_grid(grid_from_cells([(0, 0, 0)], cell_size=1.0))


def _png_pixels(data: bytes):
    """Tiny independent PNG reader for 8-bit RGB, filter 0, single IDAT."""
    assert data[:8] == b"\x89PNG\r\n\x1a\n"
    pos = 8
    w = h = None
    idat = b""
    while pos < len(data):
        (length,) = (int.from_bytes(data[pos : pos + 4], "big"),)
        typ = data[pos + 4 : pos + 8]
        body = data[pos + 8 : pos + 8 + length]
        if typ == b"IHDR":
            w = int.from_bytes(body[0:4], "big")
            h = int.from_bytes(body[4:8], "big")
            assert body[8] == 8 and body[9] == 2  # 8-bit RGB
        elif typ == b"IDAT":
            idat += body
        pos += 12 + length
    raw = zlib.decompress(idat)
    stride = 1 + 3 * w
    rows = []
    for y in range(h):
        line = raw[y * stride : (y + 1) * stride]
        assert line[0] == 0  # filter none
        rows.append(line[1:])
    return w, h, rows


def _pixel(rows, x, y):
    off = 3 * x
    row = rows[y]
    return (row[off], row[off + 1], row[off + 2])


# ---------------------------------------------------------------------------


def test_standard_views_contract():
    a, b = standard_views()
    assert a.up == (0.0, 0.0, 1.0) and b.up == (0.0, 0.0, 1.0)
    # opposite corners in the horizontal plane
    horiz = a.view_dir[0] * b.view_dir[0] + a.view_dir[1] * b.view_dir[1]
    assert horiz < 0
    for v in (a, b):
        assert abs(math.sqrt(sum(c * c for c in v.view_dir)) - 1.0) < 1e-9


def test_every_vertical_direction_front_facing_in_some_view():
    a, b = standard_views()
    for normal in [(1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1)]:
        vis = [
            sum(normal[i] * v.view_dir[i] for i in range(3)) < 0 for v in (a, b)
        ]
        assert any(vis), normal


def test_project_cube_three_front_faces():
    a, _ = standard_views()
    scene = project(_cube(), a, canvas=(512, 512))
    assert len(scene.polygons) == 3
    texts = [p for p in scene.polygons if p.label_text is not None]
    assert len(texts) == 3  # one label anchor per visible labeled patch


def test_project_straight_down_only_top():
    view = AxonometricView((0.0, 0.0, -1.0), (0.0, 1.0, 0.0), "down")
    scene = project(_cube(), view, canvas=(256, 256))
    assert len(scene.polygons) == 1
    assert scene.polygons[0].fill_class == "pz"


def test_merged_patch_one_label_anchor_two_quads():
    d = decompose_grid(grid_from_cells([(0, 0, 0), (1, 0, 0)], cell_size=1.0))
    a, _ = standard_views()
    scene = project(d, a, canvas=(512, 512))
    top_quads = [p for p in scene.polygons if p.fill_class == "pz"]
    assert len(top_quads) == 2
    top_label = next(p.label_text for p in top_quads if p.label_text)
    anchors = [p for p in top_quads if p.label_text is not None]
    assert len(anchors) == 1 and top_label == str(anchors[0].patch_label)


def test_painter_order_back_to_front():
    d = decompose_grid(demo_grid("chair"))
    a, _ = standard_views()
    scene = project(d, a)
    depths = [p.depth for p in scene.polygons]
    assert depths == sorted(depths)  # smaller depth key (farther) first


def test_svg_structure_and_determinism():
    a, _ = standard_views()
    scene = project(_cube(), a, canvas=(512, 512))
    svg = render_svg(scene)
    assert svg.count(b"<polygon") == 3
    assert svg.count(b"<text") >= 1
    assert render_svg(project(_cube(), a, canvas=(512, 512))) == svg


def test_svg_empty_scene():
    from voxplan.render import LabeledScene

    a, _ = standard_views()
    svg = render_svg(LabeledScene(polygons=(), canvas=(64, 64), view=a))
    assert svg.startswith(b"<?xml")
    assert b"<rect" in svg and b"<polygon" not in svg


def test_png_deterministic_and_sampling():
    a, _ = standard_views()
    scene = project(_cube(), a, canvas=(512, 512), labeled=False)
    png = render_raster(scene)
    assert png == render_raster(scene)
    w, h, rows = _png_pixels(png)
    assert (w, h) == (512, 512)
    # the +Z patch centroid pixel carries the +Z fill color
    labeled = project(_cube(), a, canvas=(512, 512), labeled=True)
    top_anchor = next(
        p.label_anchor for p in labeled.polygons if p.fill_class == "pz" and p.label_text
    )
    px = _pixel(rows, round(top_anchor[0]), round(top_anchor[1]))
    assert px == PALETTE["pz"]
    # corner pixel is background
    assert _pixel(rows, 2, 2) == PALETTE["bg"]


def test_png_one_pixel_empty_scene():
    from voxplan.render import LabeledScene

    a, _ = standard_views()
    png = render_raster(LabeledScene(polygons=(), canvas=(1, 1), view=a))
    w, h, rows = _png_pixels(png)
    assert (w, h) == (1, 1)
    assert _pixel(rows, 0, 0) == PALETTE["bg"]


def test_png_digit_glyphs_present_at_anchor():
    a, _ = standard_views()
    scene = project(_cube(), a, canvas=(512, 512), labeled=True)
    png = render_raster(scene)
    _, _, rows = _png_pixels(png)
    anchor = next(p.label_anchor for p in scene.polygons if p.label_text == "1")
    ax, ay = round(anchor[0]), round(anchor[1])
    window = {
        _pixel(rows, x, y)
        for x in range(ax - 20, ax + 20)
        for y in range(ay - 20, ay + 20)
    }
    assert PALETTE["text"] in window and PALETTE["halo"] in window


def test_canvas_too_large():
    from voxplan.render import LabeledScene

    a, _ = standard_views()
    with pytest.raises(CanvasTooLarge):
        render_raster(LabeledScene(polygons=(), canvas=(5000, 100), view=a))


def test_highlight_recolors_selected_patch():
    a, _ = standard_views()
    d = _cube()
    plain = project(d, a, canvas=(256, 256))
    lit = project(d, a, canvas=(256, 256), highlight={1})
    fills_plain = {p.patch_label: p.fill_class for p in plain.polygons}
    fills_lit = {p.patch_label: p.fill_class for p in lit.polygons}
    assert fills_lit[1] == "highlight"
    assert all(fills_lit[k] == fills_plain[k] for k in fills_plain if k != 1)


def test_view_vector_validation():
    with pytest.raises(ValueError):
        AxonometricView((0.0, 0.0, -2.0), (0.0, 1.0, 0.0), "bad")
    with pytest.raises(ValueError):
        AxonometricView((0.0, 0.0, -1.0), (0.0, 0.0, 1.0), "parallel")


@pytest.mark.parametrize("name", ["chair", "table", "lamp", "shelf", "trashcan"])
def test_every_label_visible_in_some_standard_view(name):
    d = decompose_grid(demo_grid(name))
    a, b = standard_views()
    seen: set[int] = set()
    for view in (a, b):
        scene = project(d, view)
        seen.update(p.patch_label for p in scene.polygons if p.label_text is not None)
    assert seen == d.labels()


def test_scene_to_dict_shape():
    a, _ = standard_views()
    scene = project(_cube(), a, canvas=(128, 128))
    doc = scene_to_dict(scene)
    assert doc["view"] == "A" and doc["canvas"] == [128, 128]
    assert len(doc["polygons"]) == 3
    assert {lbl["label"] for lbl in doc["labels"]} <= {1, 2, 3, 4, 5}
