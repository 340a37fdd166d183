"""Triangle-mesh loading and voxelization onto the structural-component grid.

Voxelization strategy: for watertight meshes a cell is occupied iff its
center is inside the solid, decided by parity of +X ray crossings computed
per (y, z) column with deterministic jitter on degenerate hits. Centers
lying exactly on the surface count as inside. Non-watertight meshes fall
back to surface voxelization (triangle/AABB overlap) plus an interior
flood fill from the exterior complement.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DegenerateMesh, EmptyMesh, ParseError, ResolutionTooCoarse

__all__ = [
    "MeshFormat",
    "TriangleMesh",
    "ComponentSpec",
    "VoxelGrid",
    "load_mesh",
    "voxelize",
]


class MeshFormat(Enum):
    OBJ = "obj"
    STL_BINARY = "stl_binary"
    STL_ASCII = "stl_ascii"


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle soup. Vertices in meters; triangle indices 0-based."""

    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int64
    bbox: tuple[tuple[float, float, float], tuple[float, float, float]]

    @classmethod
    def from_arrays(cls, vertices, triangles) -> "TriangleMesh":
        v = np.ascontiguousarray(np.asarray(vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise ParseError("vertex array must be (n, 3)")
        if t.ndim != 2 or t.shape[1] != 3:
            raise ParseError("triangle array must be (m, 3)")
        if t.shape[0] == 0:
            raise EmptyMesh("mesh has no triangles")
        if t.min() < 0 or t.max() >= v.shape[0]:
            raise ParseError(
                f"triangle index out of range (vertex count {v.shape[0]})"
            )
        v.setflags(write=False)
        t.setflags(write=False)
        lo = v.min(axis=0)
        hi = v.max(axis=0)
        bbox = (tuple(float(x) for x in lo), tuple(float(x) for x in hi))
        return cls(vertices=v, triangles=t, bbox=bbox)

    @property
    def extents(self) -> tuple[float, float, float]:
        lo, hi = self.bbox
        return tuple(hi[i] - lo[i] for i in range(3))

    def translated(self, offset) -> "TriangleMesh":
        off = np.asarray(offset, dtype=np.float64)
        return TriangleMesh.from_arrays(self.vertices + off, self.triangles)


@dataclass(frozen=True)
class ComponentSpec:
    """Physical dimensions of the two predefined component types (meters)."""

    structural_edge: float = 0.30
    panel_thickness: float = 0.02
    panel_span: float | None = None

    def __post_init__(self):
        span = self.structural_edge if self.panel_span is None else self.panel_span
        object.__setattr__(self, "panel_span", span)
        if self.structural_edge <= 0 or self.panel_thickness <= 0:
            raise ValueError("component dimensions must be positive")
        if self.panel_span != self.structural_edge:
            raise ValueError("panel_span must equal structural_edge")


@dataclass(frozen=True)
class VoxelGrid:
    """Boolean occupancy lattice at structural-component resolution."""

    origin: tuple[float, float, float]
    cell_size: float
    dims: tuple[int, int, int]
    occupied: frozenset[tuple[int, int, int]]
    watertight: bool = True

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        nx, ny, nz = self.dims
        if nx < 1 or ny < 1 or nz < 1:
            raise ValueError("dims must be positive")
        for c in self.occupied:
            if not (0 <= c[0] < nx and 0 <= c[1] < ny and 0 <= c[2] < nz):
                raise ValueError(f"occupied cell {c} outside dims {self.dims}")

    def cell_center(self, cell: tuple[int, int, int]) -> tuple[float, float, float]:
        i, j, k = cell
        s = self.cell_size
        ox, oy, oz = self.origin
        return (ox + (i + 0.5) * s, oy + (j + 0.5) * s, oz + (k + 0.5) * s)

    def in_bounds(self, cell: tuple[int, int, int]) -> bool:
        i, j, k = cell
        nx, ny, nz = self.dims
        return 0 <= i < nx and 0 <= j < ny and 0 <= k < nz

    def sorted_cells(self) -> list[tuple[int, int, int]]:
        return sorted(self.occupied)


# ---------------------------------------------------------------------------
# Mesh loading


def load_mesh(data: bytes, fmt: MeshFormat | None = None) -> TriangleMesh:
    """Parse OBJ or STL bytes into a TriangleMesh.

    When ``fmt`` is None the format is sniffed: an exact binary-STL length
    match wins, then a leading ``solid`` token selects ASCII STL, otherwise
    the data is treated as OBJ.
    """
    if not data:
        raise ParseError("empty input", offset=0)
    if fmt is None:
        fmt = _sniff_format(data)
    if fmt is MeshFormat.OBJ:
        return _parse_obj(data)
    if fmt is MeshFormat.STL_BINARY:
        return _parse_stl_binary(data)
    if fmt is MeshFormat.STL_ASCII:
        return _parse_stl_ascii(data)
    raise ParseError(f"unknown mesh format {fmt!r}")


def _sniff_format(data: bytes) -> MeshFormat:
    if len(data) >= 84:
        (count,) = struct.unpack_from("<I", data, 80)
        if len(data) == 84 + 50 * count:
            return MeshFormat.STL_BINARY
    head = data.lstrip()[:6].lower()
    if head.startswith(b"solid"):
        return MeshFormat.STL_ASCII
    return MeshFormat.OBJ


def _parse_obj(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError("OBJ is not valid UTF-8", offset=e.start) from e
    vertices: list[tuple[float, float, float]] = []
    faces: list[tuple[int, int, int]] = []
    offset = 0
    for raw in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(raw.encode("utf-8"))
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tokens = line.split()
        if tokens[0] == "v":
            if len(tokens) < 4:
                raise ParseError("vertex record needs 3 coordinates", offset=line_offset)
            try:
                x, y, z = (float(t) for t in tokens[1:4])
            except ValueError:
                raise ParseError("bad vertex coordinate", offset=line_offset) from None
            vertices.append((x, y, z))
        elif tokens[0] == "f":
            if len(tokens) < 4:
                raise ParseError("face record needs at least 3 indices", offset=line_offset)
            idx = []
            for tok in tokens[1:]:
                first = tok.split("/")[0]
                try:
                    i = int(first)
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", offset=line_offset) from None
                if i < 1:
                    raise ParseError(
                        f"face index {i} not 1-based positive", offset=line_offset
                    )
                idx.append(i - 1)
            for a, b in zip(idx[1:], idx[2:]):
                faces.append((idx[0], a, b))
        # other record types (vn, vt, o, g, s, usemtl, ...) are ignored
    if not faces:
        raise EmptyMesh("OBJ contains no faces")
    nverts = len(vertices)
    for tri in faces:
        for i in tri:
            if i >= nverts:
                raise ParseError(f"face index {i + 1} exceeds vertex count {nverts}")
    return TriangleMesh.from_arrays(np.array(vertices), np.array(faces))


def _parse_stl_binary(data: bytes) -> TriangleMesh:
    if len(data) < 84:
        raise ParseError("binary STL shorter than header", offset=len(data))
    (count,) = struct.unpack_from("<I", data, 80)
    expected = 84 + 50 * count
    if len(data) != expected:
        raise ParseError(
            f"binary STL length {len(data)} != expected {expected}", offset=80
        )
    if count == 0:
        raise EmptyMesh("binary STL has zero facets")
    raw = np.frombuffer(data, dtype=np.uint8, count=50 * count, offset=84)
    facets = raw.reshape(count, 50)
    coords = facets[:, 12:48].copy().view("<f4").reshape(count, 3, 3).astype(np.float64)
    return _dedup_soup(coords)


def _parse_stl_ascii(data: bytes) -> TriangleMesh:
    try:
        text = data.decode("utf-8")
    except UnicodeDecodeError as e:
        raise ParseError("ASCII STL is not valid UTF-8", offset=e.start) from e
    tris: list[list[tuple[float, float, float]]] = []
    current: list[tuple[float, float, float]] = []
    in_solid = False
    offset = 0
    for raw in text.splitlines(keepends=True):
        line_offset = offset
        offset += len(raw.encode("utf-8"))
        tokens = raw.split()
        if not tokens:
            continue
        kw = tokens[0].lower()
        if kw == "solid":
            in_solid = True
        elif kw == "facet":
            if not in_solid:
                raise ParseError("facet outside solid", offset=line_offset)
            current = []
        elif kw == "vertex":
            if len(tokens) < 4:
                raise ParseError("vertex needs 3 coordinates", offset=line_offset)
            try:
                current.append(tuple(float(t) for t in tokens[1:4]))
            except ValueError:
                raise ParseError("bad vertex coordinate", offset=line_offset) from None
        elif kw == "endfacet":
            if len(current) != 3:
                raise ParseError(
                    f"facet has {len(current)} vertices, expected 3", offset=line_offset
                )
            tris.append(current)
            current = []
        elif kw in ("outer", "endloop", "endsolid"):
            continue
        else:
            raise ParseError(f"unexpected token {tokens[0]!r}", offset=line_offset)
    if not in_solid:
        raise ParseError("missing 'solid' header", offset=0)
    if not tris:
        raise EmptyMesh("ASCII STL has zero facets")
    return _dedup_soup(np.array(tris, dtype=np.float64))


def _dedup_soup(coords: np.ndarray) -> TriangleMesh:
    """Merge exactly-equal vertices of an (m, 3, 3) triangle soup."""
    index: dict[tuple[float, float, float], int] = {}
    verts: list[tuple[float, float, float]] = []
    tris = np.empty((coords.shape[0], 3), dtype=np.int64)
    for t in range(coords.shape[0]):
        for v in range(3):
            key = (coords[t, v, 0], coords[t, v, 1], coords[t, v, 2])
            i = index.get(key)
            if i is None:
                i = len(verts)
                index[key] = i
                verts.append(key)
            tris[t, v] = i
    return TriangleMesh.from_arrays(np.array(verts, dtype=np.float64), tris)


# ---------------------------------------------------------------------------
# Voxelization


def voxelize(mesh: TriangleMesh, spec: ComponentSpec) -> VoxelGrid:
    """Rasterize a mesh onto the structural grid.

    Grid anchoring: origin is the bbox minimum snapped down to cell_size
    multiples; dims = ceil(extent / cell_size) so the bbox is covered.
    """
    cell = spec.structural_edge
    lo, hi = mesh.bbox
    for axis in range(3):
        if hi[axis] - lo[axis] <= 0.0:
            raise DegenerateMesh(f"mesh bbox has zero extent on axis {axis}")
    origin = tuple(math.floor(lo[a] / cell) * cell for a in range(3))
    dims = []
    for a in range(3):
        q = (hi[a] - origin[a]) / cell
        n = int(math.ceil(q - 1e-9))
        dims.append(max(1, n))
    dims = tuple(dims)
    if dims[0] * dims[1] * dims[2] == 0:
        raise ResolutionTooCoarse("grid dims collapsed to zero")

    verts = mesh.vertices
    tris = _nondegenerate_triangles(mesh)
    watertight = _is_watertight(tris)
    if watertight:
        occupied = _solid_voxelize_parity(verts, tris, origin, cell, dims)
    else:
        occupied = _voxelize_surface_fill(verts, tris, origin, cell, dims)
    return VoxelGrid(
        origin=origin,
        cell_size=cell,
        dims=dims,
        occupied=frozenset(occupied),
        watertight=watertight,
    )


def _nondegenerate_triangles(mesh: TriangleMesh) -> np.ndarray:
    t = mesh.triangles
    keep = (t[:, 0] != t[:, 1]) & (t[:, 1] != t[:, 2]) & (t[:, 0] != t[:, 2])
    return t[keep]


def _is_watertight(tris: np.ndarray) -> bool:
    """Every undirected edge used exactly twice, once per direction."""
    if tris.shape[0] < 4:
        return False
    counts: dict[tuple[int, int], list[int]] = {}
    for a, b, c in tris:
        for u, v in ((a, b), (b, c), (c, a)):
            u, v = int(u), int(v)
            key = (u, v) if u < v else (v, u)
            slot = counts.setdefault(key, [0, 0])
            slot[0 if u < v else 1] += 1
    return all(fwd == 1 and rev == 1 for fwd, rev in counts.values())


def _cell_centers_axis(origin_a: float, n: int, cell: float) -> np.ndarray:
    return origin_a + (np.arange(n) + 0.5) * cell


# Deterministic jitter offsets (units of 1e-9 * cell) used to re-cast
# columns whose ray grazes a vertex or edge.
_JITTERS = [
    (0.0, 0.0),
    (1.0, 1.37),
    (-2.11, 0.93),
    (3.79, -2.71),
    (-5.23, -4.57),
    (7.91, 6.13),
    (-11.3, 9.41),
    (13.7, -12.9),
]


def _solid_voxelize_parity(verts, tris, origin, cell, dims):
    nx, ny, nz = dims
    xs = _cell_centers_axis(origin[0], nx, cell)
    ys = _cell_centers_axis(origin[1], ny, cell)
    zs = _cell_centers_axis(origin[2], nz, cell)
    tol = 1e-9 * cell

    v0 = verts[tris[:, 0]]
    v1 = verts[tris[:, 1]]
    v2 = verts[tris[:, 2]]
    tri_lo = np.minimum(np.minimum(v0, v1), v2)
    tri_hi = np.maximum(np.maximum(v0, v1), v2)

    on_surface = _centers_on_surface(verts, tris, xs, ys, zs, tol)

    occupied: set[tuple[int, int, int]] = set(on_surface)
    for j in range(ny):
        for k in range(nz):
            yc, zc = ys[j], zs[k]
            cand = np.nonzero(
                (tri_lo[:, 1] <= yc + tol)
                & (tri_hi[:, 1] >= yc - tol)
                & (tri_lo[:, 2] <= zc + tol)
                & (tri_hi[:, 2] >= zc - tol)
            )[0]
            if cand.size == 0:
                continue
            crossings = None
            for dy, dz in _JITTERS:
                crossings = _column_crossings(
                    v0[cand], v1[cand], v2[cand], yc + dy * tol, zc + dz * tol, tol
                )
                if crossings is not None:
                    break
            if crossings is None:
                # all jitters degenerate; fall back to counting ties once
                crossings = _column_crossings(
                    v0[cand], v1[cand], v2[cand], yc, zc, tol, accept_ties=True
                )
            if not crossings:
                continue
            xs_cross = np.sort(np.array(crossings))
            inside = (np.searchsorted(xs_cross, xs - tol, side="right") % 2) == 1
            for i in np.nonzero(inside)[0]:
                occupied.add((int(i), j, k))
    return occupied


def _column_crossings(a, b, c, yc, zc, tol, accept_ties=False):
    """X coordinates where the +X line through (yc, zc) crosses triangles.

    Returns None when the line grazes an edge/vertex or a ray-parallel
    triangle (caller re-jitters), unless accept_ties is set.
    """
    d = (b[:, 1] - a[:, 1]) * (c[:, 2] - a[:, 2]) - (b[:, 2] - a[:, 2]) * (
        c[:, 1] - a[:, 1]
    )
    # edge functions of the yz-projected triangle at (yc, zc)
    e0 = (b[:, 1] - a[:, 1]) * (zc - a[:, 2]) - (b[:, 2] - a[:, 2]) * (yc - a[:, 1])
    e1 = (c[:, 1] - b[:, 1]) * (zc - b[:, 2]) - (c[:, 2] - b[:, 2]) * (yc - b[:, 1])
    e2 = (a[:, 1] - c[:, 1]) * (zc - c[:, 2]) - (a[:, 2] - c[:, 2]) * (yc - c[:, 1])
    scale = np.abs(d) + 1e-300
    crossings: list[float] = []
    for t in range(a.shape[0]):
        if abs(d[t]) <= tol * tol:
            # projection degenerate: triangle parallel to the ray
            if _near_segment_2d(a[t], b[t], c[t], yc, zc, tol) and not accept_ties:
                return None
            continue
        s = 1.0 if d[t] > 0 else -1.0
        f0, f1, f2 = s * e0[t], s * e1[t], s * e2[t]
        edge_tol = tol * scale[t]
        if f0 > edge_tol and f1 > edge_tol and f2 > edge_tol:
            pass  # strictly inside
        elif f0 < -edge_tol or f1 < -edge_tol or f2 < -edge_tol:
            continue  # strictly outside
        else:
            if not accept_ties:
                return None
            if f0 < 0 or f1 < 0 or f2 < 0:
                continue
        n = np.cross(b[t] - a[t], c[t] - a[t])
        x = a[t, 0] - (n[1] * (yc - a[t, 1]) + n[2] * (zc - a[t, 2])) / n[0]
        crossings.append(float(x))
    return crossings


def _near_segment_2d(a, b, c, yc, zc, tol) -> bool:
    p = np.array([yc, zc])
    for u, v in ((a, b), (b, c), (c, a)):
        s = np.array([u[1], u[2]])
        e = np.array([v[1], v[2]])
        d = e - s
        L2 = float(d @ d)
        if L2 == 0.0:
            if np.hypot(*(p - s)) <= tol:
                return True
            continue
        t = float(np.clip((p - s) @ d / L2, 0.0, 1.0))
        if np.hypot(*(p - (s + t * d))) <= tol:
            return True
    return False


def _centers_on_surface(verts, tris, xs, ys, zs, tol):
    """Cells whose center lies on a triangle (within tol): counted inside."""
    hits: set[tuple[int, int, int]] = set()
    cell = xs[1] - xs[0] if len(xs) > 1 else (ys[1] - ys[0] if len(ys) > 1 else tol / 1e-9)
    for t in range(tris.shape[0]):
        a, b, c = verts[tris[t, 0]], verts[tris[t, 1]], verts[tris[t, 2]]
        lo = np.minimum(np.minimum(a, b), c) - tol
        hi = np.maximum(np.maximum(a, b), c) + tol
        i_idx = np.nonzero((xs >= lo[0]) & (xs <= hi[0]))[0]
        j_idx = np.nonzero((ys >= lo[1]) & (ys <= hi[1]))[0]
        k_idx = np.nonzero((zs >= lo[2]) & (zs <= hi[2]))[0]
        if not (len(i_idx) and len(j_idx) and len(k_idx)):
            continue
        n = np.cross(b - a, c - a)
        norm = np.linalg.norm(n)
        if norm == 0.0:
            continue
        nh = n / norm
        for i in i_idx:
            for j in j_idx:
                for k in k_idx:
                    p = np.array([xs[i], ys[j], zs[k]])
                    if abs(float(nh @ (p - a))) > tol:
                        continue
                    if _point_in_triangle(p, a, b, c, tol):
                        hits.add((int(i), int(j), int(k)))
    return hits


def _point_in_triangle(p, a, b, c, tol) -> bool:
    n = np.cross(b - a, c - a)
    # inside iff all edge cross products point along n (boundary inclusive)
    for u, v in ((a, b), (b, c), (c, a)):
        if float(np.cross(v - u, p - u) @ n) < -tol * float(n @ n) ** 0.5:
            return False
    return True


def _voxelize_surface_fill(verts, tris, origin, cell, dims):
    nx, ny, nz = dims
    xs = _cell_centers_axis(origin[0], nx, cell)
    ys = _cell_centers_axis(origin[1], ny, cell)
    zs = _cell_centers_axis(origin[2], nz, cell)
    half = cell / 2.0
    pad = half + 1e-9 * cell  # prefilter must not drop exact-touch cells

    surface = np.zeros(dims, dtype=bool)
    for t in range(tris.shape[0]):
        a, b, c = verts[tris[t, 0]], verts[tris[t, 1]], verts[tris[t, 2]]
        lo = np.minimum(np.minimum(a, b), c)
        hi = np.maximum(np.maximum(a, b), c)
        i_idx = np.nonzero((xs >= lo[0] - pad) & (xs <= hi[0] + pad))[0]
        j_idx = np.nonzero((ys >= lo[1] - pad) & (ys <= hi[1] + pad))[0]
        k_idx = np.nonzero((zs >= lo[2] - pad) & (zs <= hi[2] + pad))[0]
        if not (len(i_idx) and len(j_idx) and len(k_idx)):
            continue
        ii, jj, kk = np.meshgrid(i_idx, j_idx, k_idx, indexing="ij")
        centers = np.stack(
            [xs[ii.ravel()], ys[jj.ravel()], zs[kk.ravel()]], axis=1
        )
        mask = _tri_box_overlap(a, b, c, centers, pad)
        for flat in np.nonzero(mask)[0]:
            surface[ii.ravel()[flat], jj.ravel()[flat], kk.ravel()[flat]] = True

    # exterior flood fill over empty cells, seeded from the grid boundary
    exterior = np.zeros(dims, dtype=bool)
    stack = []
    for i in range(nx):
        for j in range(ny):
            for k in range(nz):
                if (i in (0, nx - 1) or j in (0, ny - 1) or k in (0, nz - 1)) and not surface[i, j, k]:
                    if not exterior[i, j, k]:
                        exterior[i, j, k] = True
                        stack.append((i, j, k))
    while stack:
        i, j, k = stack.pop()
        for di, dj, dk in ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)):
            ni, nj, nk = i + di, j + dj, k + dk
            if 0 <= ni < nx and 0 <= nj < ny and 0 <= nk < nz:
                if not surface[ni, nj, nk] and not exterior[ni, nj, nk]:
                    exterior[ni, nj, nk] = True
                    stack.append((ni, nj, nk))
    occ = surface | ~exterior
    return {(int(i), int(j), int(k)) for i, j, k in zip(*np.nonzero(occ))}


def _tri_box_overlap(a, b, c, centers, half) -> np.ndarray:
    """Vectorized separating-axis triangle/AABB test (inclusive boundaries)."""
    va = a - centers
    vb = b - centers
    vc = c - centers
    ok = np.ones(centers.shape[0], dtype=bool)

    # box face axes
    for axis in range(3):
        lo = np.minimum(np.minimum(va[:, axis], vb[:, axis]), vc[:, axis])
        hi = np.maximum(np.maximum(va[:, axis], vb[:, axis]), vc[:, axis])
        ok &= (lo <= half) & (hi >= -half)

    # triangle plane
    n = np.cross(b - a, c - a)
    r = half * (np.abs(n[0]) + np.abs(n[1]) + np.abs(n[2]))
    dist = va @ n
    ok &= np.abs(dist) <= r

    # 9 edge cross-products
    edges = (b - a, c - b, a - c)
    units = np.eye(3)
    for e in edges:
        for u in units:
            axis = np.cross(e, u)
            if not np.any(axis):
                continue
            pa = va @ axis
            pb = vb @ axis
            pc = vc @ axis
            lo = np.minimum(np.minimum(pa, pb), pc)
            hi = np.maximum(np.maximum(pa, pb), pc)
            r = half * (abs(axis[0]) + abs(axis[1]) + abs(axis[2]))
            ok &= (lo <= r) & (hi >= -r)
    return ok
