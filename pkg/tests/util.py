"""Shared test helpers: independent oracles and randomized grid samplers.

These deliberately re-derive results from definitions (point-in-box,
brute-force region growing, replayed placement prefixes) so the main
implementations are checked against something they do not share code with.
"""

from __future__ import annotations

import random

from voxplan.geometry import VoxelGrid

NEIGHBORS6 = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))

DIR_VECTORS = {
    "+X": (1, 0, 0),
    "-X": (-1, 0, 0),
    "+Y": (0, 1, 0),
    "-Y": (0, -1, 0),
    "+Z": (0, 0, 1),
    "-Z": (0, 0, -1),
}


def add3(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def point_in_box_oracle(grid: VoxelGrid, lo, hi) -> set:
    """Closed-box membership of each cell center (the analytic oracle)."""
    occ = set()
    nx, ny, nz = grid.dims
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                c = grid.cell_center((i, j, k))
                if all(lo[a] <= c[a] <= hi[a] for a in range(3)):
                    occ.add((i, j, k))
    return occ


def exposed_faces_oracle(cells: set) -> set:
    """Exposed (cell, direction-name) pairs straight from the definition."""
    out = set()
    for c in cells:
        for name, vec in DIR_VECTORS.items():
            if add3(c, vec) not in cells:
                out.add((c, name))
    return out


def partition_oracle(cells: set) -> set:
    """Brute-force merge: group exposed faces by (normal, plane), then
    region-grow with 4-connectivity. Returns a set of frozensets of
    (cell, direction-name) pairs."""
    faces = exposed_faces_oracle(cells)
    axis_of = {"+X": 0, "-X": 0, "+Y": 1, "-Y": 1, "+Z": 2, "-Z": 2}
    plane_of = lambda c, name: c[axis_of[name]] + (1 if name.startswith("+") else 0)
    groups: dict = {}
    for cell, name in faces:
        groups.setdefault((name, plane_of(cell, name)), set()).add(cell)
    patches = set()
    for (name, _plane), members in groups.items():
        a = axis_of[name]
        u, v = [ax for ax in range(3) if ax != a]
        remaining = set(members)
        while remaining:
            seed = next(iter(remaining))
            region = {seed}
            frontier = [seed]
            while frontier:
                cur = frontier.pop()
                for other in list(remaining):
                    if other in region:
                        continue
                    if abs(other[u] - cur[u]) + abs(other[v] - cur[v]) == 1:
                        region.add(other)
                        frontier.append(other)
            remaining -= region
            patches.add(frozenset((c, name) for c in region))
    return patches


def random_cells(rng: random.Random, bounds=(5, 5, 5), p=0.4) -> set:
    """Arbitrary (possibly disconnected) occupancy sample, at least one cell."""
    cells = {
        (i, j, k)
        for i in range(bounds[0])
        for j in range(bounds[1])
        for k in range(bounds[2])
        if rng.random() < p
    }
    if not cells:
        cells.add((rng.randrange(bounds[0]), rng.randrange(bounds[1]), 0))
    return cells


def grow_assemblable(rng: random.Random, n_cells: int, bounds=(5, 5, 5)) -> set:
    """Connected occupancy grown by a witness assembly order: each added
    cell is supported (ground, below, or a face neighbor) and has no
    already-chosen cell anywhere above it in its column."""
    bx, by, bz = bounds
    start = (rng.randrange(bx), rng.randrange(by), 0)
    cells = {start}
    columns = {(start[0], start[1]): start[2]}  # top occupied z per column
    while len(cells) < n_cells:
        candidates = []
        for c in cells:
            for d in NEIGHBORS6:
                nb = add3(c, d)
                if nb in cells:
                    continue
                if not (0 <= nb[0] < bx and 0 <= nb[1] < by and 0 <= nb[2] < bz):
                    continue
                top = columns.get((nb[0], nb[1]))
                if top is not None and top > nb[2]:
                    continue  # a chosen cell sits above: not buildable
                below = (nb[0], nb[1], nb[2] - 1)
                if nb[2] == 0 or below in cells or any(
                    add3(nb, e) in cells for e in NEIGHBORS6
                ):
                    candidates.append(nb)
        if not candidates:
            break
        pick = rng.choice(sorted(candidates))
        cells.add(pick)
        key = (pick[0], pick[1])
        columns[key] = max(columns.get(key, -1), pick[2])
    return cells
