"""Demo objects: voxel grids and watertight box-union meshes.

The five survey objects (chair, table, lamp, shelf, trash can) are modeled
as unions of touching axis-aligned boxes so voxelization has an exact
point-in-box oracle. Meshes are emitted as OBJ with one independent vertex
block per box, keeping each box a closed surface.
"""

from __future__ import annotations

import numpy as np

from .geometry import ComponentSpec, TriangleMesh, VoxelGrid

DEMO_OBJECTS = ("chair", "table", "lamp", "shelf", "trashcan")

_EDGE = 0.30  # default structural edge used by all demo fixtures


def grid_from_cells(cells, cell_size: float = _EDGE, origin=(0.0, 0.0, 0.0)) -> VoxelGrid:
    cells = {tuple(int(v) for v in c) for c in cells}
    if not cells:
        raise ValueError("no cells")
    dims = tuple(max(c[a] for c in cells) + 1 for a in range(3))
    return VoxelGrid(
        origin=tuple(float(v) for v in origin),
        cell_size=float(cell_size),
        dims=dims,
        occupied=frozenset(cells),
    )


# box corner/face tables: quads wound CCW viewed from outside
_BOX_QUADS = (
    (0, 3, 2, 1),  # -Z
    (4, 5, 6, 7),  # +Z
    (0, 1, 5, 4),  # -Y
    (2, 3, 7, 6),  # +Y
    (0, 4, 7, 3),  # -X
    (1, 2, 6, 5),  # +X
)


def _box_corners(mn, mx):
    x0, y0, z0 = mn
    x1, y1, z1 = mx
    return [
        (x0, y0, z0), (x1, y0, z0), (x1, y1, z0), (x0, y1, z0),
        (x0, y0, z1), (x1, y0, z1), (x1, y1, z1), (x0, y1, z1),
    ]


def box_mesh(mn, mx) -> TriangleMesh:
    """Closed 12-triangle box with outward-facing windings."""
    corners = _box_corners(mn, mx)
    tris = []
    for q in _BOX_QUADS:
        tris.append((q[0], q[1], q[2]))
        tris.append((q[0], q[2], q[3]))
    return TriangleMesh.from_arrays(np.array(corners), np.array(tris))


def boxes_to_obj(boxes) -> bytes:
    """OBJ bytes for a union of boxes; vertex blocks are not shared."""
    lines = ["# voxplan demo mesh"]
    base = 0
    for mn, mx in boxes:
        for v in _box_corners(mn, mx):
            lines.append(f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}")
        for q in _BOX_QUADS:
            a, b, c, d = (base + i + 1 for i in q)
            lines.append(f"f {a} {b} {c}")
            lines.append(f"f {a} {c} {d}")
        base += 8
    return ("\n".join(lines) + "\n").encode()


def _cells_box(i0, j0, k0, i1, j1, k1):
    return [
        (i, j, k)
        for i in range(i0, i1 + 1)
        for j in range(j0, j1 + 1)
        for k in range(k0, k1 + 1)
    ]


def _scaled(boxes_cells, e=_EDGE):
    """Cell-index boxes -> world boxes at edge length e."""
    return [
        ((i0 * e, j0 * e, k0 * e), ((i1 + 1) * e, (j1 + 1) * e, (k1 + 1) * e))
        for (i0, j0, k0, i1, j1, k1) in boxes_cells
    ]


_DEMO_BOXES = {
    # (i0, j0, k0, i1, j1, k1) inclusive cell ranges
    "chair": [
        (0, 0, 0, 1, 1, 0),  # base under the seat
        (0, 0, 1, 1, 1, 1),  # seat
        (0, 1, 2, 1, 1, 3),  # backrest
    ],
    "table": [
        (0, 0, 0, 0, 0, 1),
        (2, 0, 0, 2, 0, 1),
        (0, 2, 0, 0, 2, 1),
        (2, 2, 0, 2, 2, 1),
        (0, 0, 2, 2, 2, 2),  # tabletop
    ],
    "lamp": [
        (0, 0, 0, 2, 2, 0),  # base
        (1, 1, 1, 1, 1, 2),  # pole
        (0, 0, 3, 2, 2, 3),  # shade floor
        (0, 0, 4, 0, 2, 4),  # shade rim: west
        (2, 0, 4, 2, 2, 4),  # east
        (1, 0, 4, 1, 0, 4),  # south
        (1, 2, 4, 1, 2, 4),  # north
    ],
    "shelf": [
        (0, 0, 0, 0, 1, 3),  # west side
        (3, 0, 0, 3, 1, 3),  # east side
        (1, 0, 0, 2, 1, 0),  # bottom tier
        (1, 0, 2, 2, 1, 2),  # middle tier
    ],
    "trashcan": [
        (0, 0, 0, 0, 2, 2),  # west wall
        (2, 0, 0, 2, 2, 2),  # east wall
        (1, 0, 0, 1, 0, 2),  # south wall
        (1, 2, 0, 1, 2, 2),  # north wall
        (1, 1, 0, 1, 1, 0),  # floor
    ],
}


def demo_cells(name: str) -> set[tuple[int, int, int]]:
    if name not in _DEMO_BOXES:
        raise KeyError(f"unknown demo object {name!r}; have {DEMO_OBJECTS}")
    cells: set[tuple[int, int, int]] = set()
    for rng in _DEMO_BOXES[name]:
        cells.update(_cells_box(*rng))
    return cells


def demo_grid(name: str, cell_size: float = _EDGE) -> VoxelGrid:
    return grid_from_cells(demo_cells(name), cell_size=cell_size)


def demo_mesh_obj(name: str, edge: float = _EDGE) -> bytes:
    if name not in _DEMO_BOXES:
        raise KeyError(f"unknown demo object {name!r}; have {DEMO_OBJECTS}")
    return boxes_to_obj(_scaled(_DEMO_BOXES[name], edge))


def chair_grid() -> VoxelGrid:
    return demo_grid("chair")


def chair_mesh_obj() -> bytes:
    return demo_mesh_obj("chair")


def default_spec() -> ComponentSpec:
    return ComponentSpec(structural_edge=_EDGE, panel_thickness=0.02)


# ---------------------------------------------------------------------------
# survey response fixtures (32 participants x 5 objects x 3 methods)
#
# The reference evaluation released per-cell selection counts and pooled
# discordant-pair counts that are mutually off by one, so two separate
# synthetic tables are provided: one reproducing the per-cell counts, one
# reproducing the discordant pairs.

SURVEY_OBJECTS = ("chair", "table", "lamp", "shelf", "trashcan")
N_PARTICIPANTS = 32

_RATE_COUNTS = {
    "VLM": {"chair": 31, "table": 32, "lamp": 26, "shelf": 32, "trashcan": 24},
    "RULE": {"chair": 6, "table": 32, "lamp": 11, "shelf": 32, "trashcan": 14},
    "RANDOM": {"chair": 0, "table": 0, "lamp": 0, "shelf": 2, "trashcan": 2},
}

# joint (vlm, rule, random) vote patterns pooled over the 160 trials
_DISCORDANCE_PATTERNS = (
    ((1, 1, 0), 87),
    ((1, 0, 0), 56),
    ((0, 1, 0), 7),
    ((0, 0, 1), 2),
    ((1, 1, 1), 2),
    ((0, 0, 0), 6),
)


def survey_rates_table():
    """ResponseTable whose per-cell counts match the reference rate table."""
    from .evalstats import Method, ResponseRecord, ResponseTable

    records = []
    for obj in SURVEY_OBJECTS:
        for p in range(N_PARTICIPANTS):
            for m in ("VLM", "RULE", "RANDOM"):
                records.append(
                    ResponseRecord(
                        participant=f"p{p:02d}",
                        object=obj,
                        method=Method(m),
                        selected=p < _RATE_COUNTS[m][obj],
                    )
                )
    return ResponseTable(records=tuple(records))


def survey_discordance_table():
    """ResponseTable whose pooled discordant pairs match the reference
    McNemar table: VLM/RULE (56, 7), VLM/RANDOM (143, 2), RULE/RANDOM (94, 2)."""
    from .evalstats import Method, ResponseRecord, ResponseTable

    triples = []
    for pattern, count in _DISCORDANCE_PATTERNS:
        triples.extend([pattern] * count)
    assert len(triples) == len(SURVEY_OBJECTS) * N_PARTICIPANTS
    records = []
    for slot, (v, r, d) in enumerate(triples):
        obj = SURVEY_OBJECTS[slot // N_PARTICIPANTS]
        participant = f"p{slot % N_PARTICIPANTS:02d}"
        for m, sel in (("VLM", v), ("RULE", r), ("RANDOM", d)):
            records.append(
                ResponseRecord(
                    participant=participant,
                    object=obj,
                    method=Method(m),
                    selected=bool(sel),
                )
            )
    return ResponseTable(records=tuple(records))
