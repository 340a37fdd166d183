"""Exposed-face extraction, coplanar merging, and reachability filtering.

Exposed voxel faces are merged into maximal 4-connected coplanar patches.
Downward-facing horizontal patches and inward-facing vertical patches are
omitted from labeling because the robot arm cannot attach panels there;
the rest receive consecutive integer labels in a fixed deterministic order.

JSON form (shared with the renderer, the strategies, the planner, the
service, and the web UI):

    {"grid": {"origin": [x, y, z], "cell_size": s, "dims": [nx, ny, nz],
              "occupied": [[i, j, k], ...], "watertight": bool},
     "patches": [{"label": 1, "normal": "+Z", "plane": 2,
                  "cells": [[i, j, k], ...], "centroid": [x, y, z],
                  "area": 4}, ...],
     "omitted": [{... same fields, "label": null,
                  "reason": "DOWNWARD_HORIZONTAL" | "INWARD_VERTICAL"}]}

Serialization is canonical (sorted keys, fixed separators), so identical
grids produce byte-identical documents.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, NamedTuple

from .errors import EmptyGrid
from .geometry import VoxelGrid

__all__ = [
    "Direction",
    "CellFace",
    "FacePatch",
    "OmissionReason",
    "Decomposition",
    "exposed_faces",
    "merge_coplanar",
    "filter_and_label",
    "decompose_grid",
]


class Direction(Enum):
    """Outward normal of a cell face, axis-aligned."""

    PX = ("+X", (1, 0, 0))
    NX = ("-X", (-1, 0, 0))
    PY = ("+Y", (0, 1, 0))
    NY = ("-Y", (0, -1, 0))
    PZ = ("+Z", (0, 0, 1))
    NZ = ("-Z", (0, 0, -1))

    def __init__(self, label: str, vector: tuple[int, int, int]):
        self.text = label
        self.vector = vector

    @property
    def axis(self) -> int:
        return next(i for i, v in enumerate(self.vector) if v != 0)

    @property
    def sign(self) -> int:
        return self.vector[self.axis]

    @property
    def is_vertical(self) -> bool:
        return self.axis != 2

    @classmethod
    def from_text(cls, text: str) -> "Direction":
        for d in cls:
            if d.text == text:
                return d
        raise ValueError(f"unknown direction {text!r}")


# order used both for face sorting and for label assignment: upward first,
# then the four vertical directions, downward last (always omitted anyway)
_LABEL_ORDER = (Direction.PZ, Direction.PX, Direction.NX, Direction.PY, Direction.NY, Direction.NZ)
_DIR_RANK = {d: i for i, d in enumerate(_LABEL_ORDER)}


class CellFace(NamedTuple):
    cell: tuple[int, int, int]
    direction: Direction

    @property
    def plane_coord(self) -> int:
        a = self.direction.axis
        return self.cell[a] + (1 if self.direction.sign > 0 else 0)

    def center_world(self, grid: VoxelGrid) -> tuple[float, float, float]:
        c = list(grid.cell_center(self.cell))
        c[self.direction.axis] += self.direction.sign * grid.cell_size / 2.0
        return tuple(c)


class OmissionReason(Enum):
    DOWNWARD_HORIZONTAL = "DOWNWARD_HORIZONTAL"
    INWARD_VERTICAL = "INWARD_VERTICAL"


@dataclass(frozen=True)
class FacePatch:
    """Maximal merged coplanar exposed region of same-normal cell faces."""

    label: int | None
    normal: Direction
    plane_coord: int
    cells: tuple[tuple[int, int, int], ...]
    centroid_world: tuple[float, float, float]
    area_cells: int

    def faces(self) -> list[CellFace]:
        return [CellFace(c, self.normal) for c in self.cells]


@dataclass(frozen=True)
class Decomposition:
    grid: VoxelGrid
    patches: tuple[FacePatch, ...]
    omitted: tuple[tuple[FacePatch, OmissionReason], ...]

    def labels(self) -> set[int]:
        return {p.label for p in self.patches if p.label is not None}

    def patch_by_label(self, label: int) -> FacePatch:
        for p in self.patches:
            if p.label == label:
                return p
        raise KeyError(label)


def exposed_faces(grid: VoxelGrid) -> list[CellFace]:
    """Faces whose across-neighbor cell is empty or outside the grid."""
    if not grid.occupied:
        raise EmptyGrid("grid has no occupied cells")
    out: list[CellFace] = []
    for cell in grid.sorted_cells():
        i, j, k = cell
        for d in _LABEL_ORDER:
            dx, dy, dz = d.vector
            nb = (i + dx, j + dy, k + dz)
            if nb not in grid.occupied:
                out.append(CellFace(cell, d))
    out.sort(key=lambda f: (f.cell, _DIR_RANK[f.direction]))
    return out


def _inplane_axes(d: Direction) -> tuple[int, int]:
    return tuple(a for a in range(3) if a != d.axis)  # type: ignore[return-value]


def merge_coplanar(faces: Iterable[CellFace], grid: VoxelGrid) -> list[FacePatch]:
    """Partition exposed faces into maximal 4-connected coplanar patches."""
    groups: dict[tuple[Direction, int], list[CellFace]] = {}
    for f in faces:
        groups.setdefault((f.direction, f.plane_coord), []).append(f)

    patches: list[FacePatch] = []
    for (d, plane), members in groups.items():
        u, v = _inplane_axes(d)
        by_uv = {(f.cell[u], f.cell[v]): f for f in members}
        seen: set[tuple[int, int]] = set()
        for start in sorted(by_uv):
            if start in seen:
                continue
            stack = [start]
            seen.add(start)
            region: list[CellFace] = []
            while stack:
                cur = stack.pop()
                region.append(by_uv[cur])
                cu, cv = cur
                for nb in ((cu + 1, cv), (cu - 1, cv), (cu, cv + 1), (cu, cv - 1)):
                    if nb in by_uv and nb not in seen:
                        seen.add(nb)
                        stack.append(nb)
            cells = tuple(sorted(f.cell for f in region))
            centers = [CellFace(c, d).center_world(grid) for c in cells]
            centroid = tuple(sum(p[a] for p in centers) / len(centers) for a in range(3))
            patches.append(
                FacePatch(
                    label=None,
                    normal=d,
                    plane_coord=plane,
                    cells=cells,
                    centroid_world=centroid,
                    area_cells=len(cells),
                )
            )
    patches.sort(key=lambda p: (_DIR_RANK[p.normal], p.plane_coord, p.cells[0]))
    return patches


def _is_inward_vertical(patch: FacePatch, grid: VoxelGrid) -> bool:
    """Ray from the patch centroid along its outward normal: inward iff it
    hits an occupied cell before leaving the grid.

    The ray is axis-aligned, so it stays in one cell column; the column is
    picked by flooring the centroid's cross-axis grid coordinates (exact
    boundary centroids deterministically round to the higher cell).
    """
    d = patch.normal
    a = d.axis
    u, v = _inplane_axes(d)
    g = [
        (patch.centroid_world[ax] - grid.origin[ax]) / grid.cell_size
        for ax in range(3)
    ]
    ui = int(g[u]) if g[u] >= 0 else -1
    vi = int(g[v]) if g[v] >= 0 else -1
    idx = patch.plane_coord if d.sign > 0 else patch.plane_coord - 1
    while True:
        cell = [0, 0, 0]
        cell[a] = idx
        cell[u] = ui
        cell[v] = vi
        cell_t = tuple(cell)
        if not grid.in_bounds(cell_t):
            return False
        if cell_t in grid.occupied:
            return True
        idx += d.sign


def filter_and_label(patches: Iterable[FacePatch], grid: VoxelGrid) -> Decomposition:
    """Omit unreachable patches and assign labels 1..n to the rest."""
    kept: list[FacePatch] = []
    omitted: list[tuple[FacePatch, OmissionReason]] = []
    for p in patches:
        if p.normal is Direction.NZ:
            omitted.append((p, OmissionReason.DOWNWARD_HORIZONTAL))
        elif p.normal.is_vertical and _is_inward_vertical(p, grid):
            omitted.append((p, OmissionReason.INWARD_VERTICAL))
        else:
            kept.append(p)
    kept.sort(key=lambda p: (_DIR_RANK[p.normal], p.plane_coord, p.cells[0]))
    labeled = [
        FacePatch(
            label=i + 1,
            normal=p.normal,
            plane_coord=p.plane_coord,
            cells=p.cells,
            centroid_world=p.centroid_world,
            area_cells=p.area_cells,
        )
        for i, p in enumerate(kept)
    ]
    omitted.sort(key=lambda po: (_DIR_RANK[po[0].normal], po[0].plane_coord, po[0].cells[0]))
    return Decomposition(grid=grid, patches=tuple(labeled), omitted=tuple(omitted))


def decompose_grid(grid: VoxelGrid) -> Decomposition:
    """Full pipeline: exposed faces -> merged patches -> filtered labels."""
    return filter_and_label(merge_coplanar(exposed_faces(grid), grid), grid)


# ---------------------------------------------------------------------------
# JSON serialization (consumed by render, select, plan, service, and the UI)


def _patch_to_dict(p: FacePatch) -> dict:
    return {
        "label": p.label,
        "normal": p.normal.text,
        "plane": p.plane_coord,
        "cells": [list(c) for c in p.cells],
        "centroid": list(p.centroid_world),
        "area": p.area_cells,
    }


def decomposition_to_dict(d: Decomposition) -> dict:
    return {
        "grid": {
            "origin": list(d.grid.origin),
            "cell_size": d.grid.cell_size,
            "dims": list(d.grid.dims),
            "occupied": [list(c) for c in d.grid.sorted_cells()],
            "watertight": d.grid.watertight,
        },
        "patches": [_patch_to_dict(p) for p in d.patches],
        "omitted": [
            dict(_patch_to_dict(p), reason=r.value) for p, r in d.omitted
        ],
    }


def decomposition_to_json(d: Decomposition) -> bytes:
    return json.dumps(decomposition_to_dict(d), sort_keys=True, separators=(",", ":")).encode()


def _patch_from_dict(obj: dict) -> FacePatch:
    return FacePatch(
        label=obj["label"],
        normal=Direction.from_text(obj["normal"]),
        plane_coord=obj["plane"],
        cells=tuple(tuple(c) for c in obj["cells"]),
        centroid_world=tuple(obj["centroid"]),
        area_cells=obj["area"],
    )


def decomposition_from_dict(obj: dict) -> Decomposition:
    g = obj["grid"]
    grid = VoxelGrid(
        origin=tuple(g["origin"]),
        cell_size=g["cell_size"],
        dims=tuple(g["dims"]),
        occupied=frozenset(tuple(c) for c in g["occupied"]),
        watertight=g.get("watertight", True),
    )
    patches = tuple(_patch_from_dict(p) for p in obj["patches"])
    omitted = tuple(
        (_patch_from_dict(p), OmissionReason(p["reason"])) for p in obj["omitted"]
    )
    return Decomposition(grid=grid, patches=patches, omitted=omitted)
