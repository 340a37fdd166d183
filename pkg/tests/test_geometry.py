import math
import random
import struct

import numpy as np
import pytest

from voxplan.errors import DegenerateMesh, EmptyMesh, ParseError
from voxplan.fixtures import box_mesh, boxes_to_obj, chair_mesh_obj, demo_cells, demo_mesh_obj
from voxplan.geometry import ComponentSpec, MeshFormat, TriangleMesh, load_mesh, voxelize

from util import point_in_box_oracle


# ---------------------------------------------------------------------------
# loading


def test_load_minimal_obj():
    obj = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    mesh = load_mesh(obj, MeshFormat.OBJ)
    assert mesh.vertices.shape == (3, 3)
    assert mesh.triangles.shape == (1, 3)
    assert mesh.bbox == ((0.0, 0.0, 0.0), (1.0, 1.0, 0.0))


def test_load_obj_with_slash_indices_and_quads():
    obj = b"v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1/1 2/2 3/3 4/4\n"
    mesh = load_mesh(obj, MeshFormat.OBJ)
    assert mesh.triangles.shape == (2, 3)  # quad fan-triangulated


def test_load_obj_out_of_range_index():
    obj = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n"
    with pytest.raises(ParseError):
        load_mesh(obj, MeshFormat.OBJ)


def test_load_obj_bad_tokens_report_offset():
    obj = b"v 0 0 0\nv 1 0 zap\n"
    with pytest.raises(ParseError) as exc:
        load_mesh(obj, MeshFormat.OBJ)
    assert exc.value.offset == 8  # second line starts at byte 8


def test_load_obj_no_faces_is_empty():
    with pytest.raises(EmptyMesh):
        load_mesh(b"v 0 0 0\nv 1 0 0\nv 0 1 0\n", MeshFormat.OBJ)


def _unit_cube_stl_binary() -> bytes:
    # the 12 facets of the unit cube written out explicitly
    quads = [
        # (normal, four corners CCW from outside)
        ((0, 0, -1), [(0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0)]),
        ((0, 0, 1), [(0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1)]),
        ((0, -1, 0), [(0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1)]),
        ((0, 1, 0), [(1, 1, 0), (0, 1, 0), (0, 1, 1), (1, 1, 1)]),
        ((-1, 0, 0), [(0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0)]),
        ((1, 0, 0), [(1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1)]),
    ]
    facets = []
    for n, (a, b, c, d) in quads:
        facets.append((n, a, b, c))
        facets.append((n, a, c, d))
    blob = b"\x00" * 80 + struct.pack("<I", len(facets))
    for n, a, b, c in facets:
        blob += struct.pack("<3f", *n)
        for v in (a, b, c):
            blob += struct.pack("<3f", *v)
        blob += struct.pack("<H", 0)
    return blob


def test_load_binary_stl_cube():
    data = _unit_cube_stl_binary()
    mesh = load_mesh(data, MeshFormat.STL_BINARY)
    assert mesh.triangles.shape[0] == 12
    assert mesh.bbox == ((0.0, 0.0, 0.0), (1.0, 1.0, 1.0))
    assert mesh.vertices.shape[0] == 8  # soup vertices deduplicated
    # format sniffing picks binary STL from the exact length match
    assert load_mesh(data).triangles.shape[0] == 12


def test_load_binary_stl_truncated():
    data = _unit_cube_stl_binary()[:-10]
    with pytest.raises(ParseError):
        load_mesh(data, MeshFormat.STL_BINARY)


def test_load_ascii_stl():
    text = ["solid cube"]
    tri = [(0, 0, 0), (1, 0, 0), (0, 1, 0)]
    text.append("facet normal 0 0 1")
    text.append(" outer loop")
    for v in tri:
        text.append(f"  vertex {v[0]} {v[1]} {v[2]}")
    text.append(" endloop")
    text.append("endfacet")
    text.append("endsolid cube")
    mesh = load_mesh("\n".join(text).encode())
    assert mesh.triangles.shape[0] == 1


def test_load_ascii_stl_malformed_vertex_count():
    data = (
        b"solid x\nfacet normal 0 0 1\nouter loop\n"
        b"vertex 0 0 0\nvertex 1 0 0\nendloop\nendfacet\nendsolid x\n"
    )
    with pytest.raises(ParseError):
        load_mesh(data)


def test_empty_input():
    with pytest.raises(ParseError):
        load_mesh(b"")


# ---------------------------------------------------------------------------
# voxelization


def test_voxelize_cube_examples():
    mesh = box_mesh((0, 0, 0), (1, 1, 1))
    for edge, expected in [(0.5, 8), (1.0, 1), (2.0, 1)]:
        grid = voxelize(mesh, ComponentSpec(structural_edge=edge))
        assert len(grid.occupied) == expected, f"edge={edge}"
        assert grid.watertight


def test_voxelize_dims_cover_bbox():
    mesh = box_mesh((0.1, 0.1, 0.1), (0.9, 1.4, 0.6))
    grid = voxelize(mesh, ComponentSpec(structural_edge=0.5))
    lo, hi = mesh.bbox
    for a in range(3):
        assert grid.origin[a] <= lo[a]
        assert grid.origin[a] + grid.dims[a] * grid.cell_size >= hi[a] - 1e-12


def test_voxelize_degenerate_flat_mesh():
    flat = TriangleMesh.from_arrays(
        [(0, 0, 0), (1, 0, 0), (0, 1, 0)], [(0, 1, 2)]
    )
    with pytest.raises(DegenerateMesh):
        voxelize(flat, ComponentSpec(structural_edge=0.5))


def test_voxelize_box_oracle_randomized():
    rng = random.Random(20240817)
    grid64 = 1.0 / 64.0
    for trial in range(120):
        lo = tuple(rng.randrange(-64, 64) * grid64 for _ in range(3))
        ext = tuple(rng.randrange(8, 128) * grid64 for _ in range(3))
        hi = tuple(lo[a] + ext[a] for a in range(3))
        edge = max(ext) / rng.uniform(1.2, 5.5)
        mesh = box_mesh(lo, hi)
        grid = voxelize(mesh, ComponentSpec(structural_edge=edge))
        oracle = point_in_box_oracle(grid, lo, hi)
        assert grid.occupied == oracle, f"trial {trial}: lo={lo} hi={hi} edge={edge}"


def test_voxelize_deterministic():
    mesh = load_mesh(chair_mesh_obj())
    spec = ComponentSpec(structural_edge=0.3)
    a = voxelize(mesh, spec)
    b = voxelize(mesh, spec)
    assert a == b


def test_voxelize_translation_covariance():
    # translating by k * cell_size shifts the snapped origin by exactly
    # k * cell_size, so world-space occupancy shifts by the integer offset
    # while the cell indices stay identical
    rng = random.Random(7)
    edge = 0.25  # power of two keeps k * edge exact
    base = box_mesh((0.11, 0.07, 0.05), (0.93, 0.66, 0.81))
    ref = voxelize(base, ComponentSpec(structural_edge=edge))
    for _ in range(10):
        k = tuple(rng.randrange(-4, 5) for _ in range(3))
        moved = base.translated(tuple(k[a] * edge for a in range(3)))
        grid = voxelize(moved, ComponentSpec(structural_edge=edge))
        assert grid.dims == ref.dims
        assert grid.occupied == ref.occupied
        for a in range(3):
            assert abs(grid.origin[a] - (ref.origin[a] + k[a] * edge)) < 1e-12


def test_voxelize_occupancy_bounds():
    mesh = load_mesh(demo_mesh_obj("lamp"))
    grid = voxelize(mesh, ComponentSpec(structural_edge=0.3))
    nx, ny, nz = grid.dims
    assert len(grid.occupied) <= nx * ny * nz
    lo, hi = mesh.bbox
    s = grid.cell_size
    for c in grid.occupied:
        center = grid.cell_center(c)
        for a in range(3):
            assert lo[a] - s <= center[a] <= hi[a] + s


@pytest.mark.parametrize("name", ["chair", "table", "lamp", "shelf", "trashcan"])
def test_demo_meshes_voxelize_to_expected_cells(name):
    mesh = load_mesh(demo_mesh_obj(name))
    grid = voxelize(mesh, ComponentSpec(structural_edge=0.3))
    assert set(grid.occupied) == demo_cells(name)


def test_non_watertight_fallback_open_top_box():
    # cube with its +Z quad removed at 3x3x3 resolution: the exterior flood
    # fill pours in through the opening, so only the 25 surface cells stay
    mesh = box_mesh((0, 0, 0), (1, 1, 1))
    keep = np.ones(12, dtype=bool)
    keep[2] = keep[3] = False  # the +Z facet pair
    leaky = TriangleMesh.from_arrays(mesh.vertices, mesh.triangles[keep])
    grid = voxelize(leaky, ComponentSpec(structural_edge=1.0 / 3.0))
    assert not grid.watertight
    assert (1, 1, 1) not in grid.occupied and (1, 1, 2) not in grid.occupied
    assert len(grid.occupied) == 25


def test_non_watertight_fallback_seals_hairline_leak():
    # cube whose top quad is split so one diagonal facet is missing: the
    # hole does not open any cell column, so the cavity stays sealed and
    # the interior flood fill keeps all 27 cells
    mesh = box_mesh((0, 0, 0), (1, 1, 1))
    keep = np.ones(12, dtype=bool)
    keep[2] = False  # one of the two +Z facets
    leaky = TriangleMesh.from_arrays(mesh.vertices, mesh.triangles[keep])
    grid = voxelize(leaky, ComponentSpec(structural_edge=1.0 / 3.0))
    assert not grid.watertight
    assert len(grid.occupied) == 27


def test_obj_multibox_union_is_watertight_per_box():
    data = boxes_to_obj([((0, 0, 0), (1, 1, 1)), ((1, 0, 0), (2, 1, 1))])
    mesh = load_mesh(data)
    grid = voxelize(mesh, ComponentSpec(structural_edge=0.5))
    assert grid.watertight
    assert len(grid.occupied) == 16
