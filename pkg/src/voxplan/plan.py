"""Assembly planning: the two-list export, bottom-to-top sequencing, the
pick-and-place program, and its simulated execution.

Sequencing sweeps z-layers bottom-to-top; inside a layer, cells become
eligible once supported (ground, cell below placed, or a face-adjacent
placed neighbor) and ties break on (z, y, x). Panels are emitted right
after the layer containing their owning cell, which keeps every vertical
descent column clear. Shapes that cannot be built by vertical descent
(side-supported under-hangs, floating components) are still ordered
deterministically but flagged, and the simulator reports the violation.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum

from .decompose import Decomposition, Direction, _DIR_RANK
from .errors import ConfigError, EmptyAssembly, ValidationError
from .geometry import ComponentSpec, VoxelGrid
from .select import LabelSet

__all__ = [
    "ComponentType",
    "ComponentPlacement",
    "AssemblyModel",
    "SourceStation",
    "StationId",
    "Motion",
    "PickPlaceStep",
    "RobotProgram",
    "SimulationReport",
    "Violation",
    "build_assembly",
    "sequence",
    "emit_program",
    "simulate",
    "assembly_to_lists",
    "program_to_dict",
    "program_from_dict",
    "program_to_json",
    "program_to_csv",
    "euler_xyz_matrix",
    "rotation_for_normal",
]


class ComponentType(Enum):
    STRUCTURAL = 0
    PANEL = 1


# Euler XYZ (intrinsic, radians) rotations mapping the panel's +Z axis onto
# each face normal.
_PANEL_ROTATIONS = {
    Direction.PZ: (0.0, 0.0, 0.0),
    Direction.NZ: (math.pi, 0.0, 0.0),
    Direction.PX: (0.0, math.pi / 2.0, 0.0),
    Direction.NX: (0.0, -math.pi / 2.0, 0.0),
    Direction.PY: (-math.pi / 2.0, 0.0, 0.0),
    Direction.NY: (math.pi / 2.0, 0.0, 0.0),
}


def euler_xyz_matrix(rx: float, ry: float, rz: float):
    """Rotation matrix for intrinsic XYZ Euler angles (R = Rx @ Ry @ Rz)."""
    cx, sx = math.cos(rx), math.sin(rx)
    cy, sy = math.cos(ry), math.sin(ry)
    cz, sz = math.cos(rz), math.sin(rz)
    rx_m = ((1, 0, 0), (0, cx, -sx), (0, sx, cx))
    ry_m = ((cy, 0, sy), (0, 1, 0), (-sy, 0, cy))
    rz_m = ((cz, -sz, 0), (sz, cz, 0), (0, 0, 1))

    def matmul(a, b):
        return tuple(
            tuple(sum(a[i][k] * b[k][j] for k in range(3)) for j in range(3))
            for i in range(3)
        )

    return matmul(matmul(rx_m, ry_m), rz_m)


def rotation_for_normal(direction: Direction) -> tuple[float, float, float]:
    return _PANEL_ROTATIONS[direction]


@dataclass(frozen=True)
class ComponentPlacement:
    position: tuple[float, float, float]
    rotation: tuple[float, float, float]
    ctype: ComponentType
    cell: tuple[int, int, int]  # structural: own cell; panel: owning cell
    face: Direction | None = None  # panels only
    source_patch: int | None = None  # panels only

    def pose(self) -> tuple[float, float, float, float, float, float]:
        return self.position + self.rotation


@dataclass(frozen=True)
class AssemblyModel:
    placements: tuple[ComponentPlacement, ...]
    grid: VoxelGrid
    panel_labels: LabelSet
    panel_thickness: float
    sequenced: bool = False
    warnings: tuple[str, ...] = ()


class StationId(Enum):
    S0_CONVEYOR = "S0_CONVEYOR"
    S1_STACK = "S1_STACK"


@dataclass(frozen=True)
class SourceStation:
    id: StationId
    pickup: tuple[float, float, float]


@dataclass(frozen=True)
class Motion:
    op: str  # "move" | "close" | "open"
    target: tuple[float, float, float, float, float, float] | None = None
    width: float | None = None
    force: float | None = None


@dataclass(frozen=True)
class PickPlaceStep:
    index: int  # 1-based
    ctype: ComponentType
    source: StationId
    pickup: tuple[float, float, float, float, float, float]
    place: tuple[float, float, float, float, float, float]
    cell: tuple[int, int, int]
    face: Direction | None
    h_safe: float
    w_open: float
    w_release: float
    f_grab: float

    def motions(self) -> tuple[Motion, ...]:
        """Expand to the fixed 8-motion pick-and-place template."""
        px, py, pz = self.pickup[:3]
        qx, qy, qz = self.place[:3]
        above_pick = (px, py, pz + self.h_safe) + self.pickup[3:]
        above_place = (qx, qy, qz + self.h_safe) + self.place[3:]
        return (
            Motion("move", target=above_pick),
            Motion("move", target=self.pickup),
            Motion("close", force=self.f_grab),
            Motion("move", target=above_pick),
            Motion("move", target=above_place),
            Motion("move", target=self.place),
            Motion("open", width=self.w_release),
            Motion("move", target=above_place),
        )


@dataclass(frozen=True)
class RobotProgram:
    steps: tuple[PickPlaceStep, ...]
    stations: tuple[SourceStation, SourceStation]
    params: dict
    grid_origin: tuple[float, float, float]
    cell_size: float
    panel_thickness: float


@dataclass(frozen=True)
class Violation:
    step: int  # 1-based
    code: str
    detail: str


@dataclass(frozen=True)
class SimulationReport:
    verdict: str  # "PASS" | "FAIL"
    violations: tuple[Violation, ...]
    steps_total: int
    placed_count: int

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "steps_total": self.steps_total,
            "placed_count": self.placed_count,
            "violations": [
                {"step": v.step, "code": v.code, "detail": v.detail}
                for v in self.violations
            ],
        }


# ---------------------------------------------------------------------------
# building


def build_assembly(
    grid: VoxelGrid,
    panels: LabelSet,
    decomp: Decomposition,
    spec: ComponentSpec,
) -> AssemblyModel:
    """One structural placement per occupied cell plus one panel placement
    per member cell-face of every selected patch. Not yet ordered."""
    known = decomp.labels()
    unknown = set(panels.labels) - known
    if unknown:
        raise ValidationError(f"unknown labels {sorted(unknown)}", unknown_labels=unknown)

    placements: list[ComponentPlacement] = []
    for cell in grid.sorted_cells():
        placements.append(
            ComponentPlacement(
                position=grid.cell_center(cell),
                rotation=(0.0, 0.0, 0.0),
                ctype=ComponentType.STRUCTURAL,
                cell=cell,
            )
        )
    half_t = spec.panel_thickness / 2.0
    for label in sorted(panels.labels):
        patch = decomp.patch_by_label(label)
        rot = rotation_for_normal(patch.normal)
        for cell in patch.cells:
            center = list(grid.cell_center(cell))
            a = patch.normal.axis
            center[a] += patch.normal.sign * (grid.cell_size / 2.0 + half_t)
            placements.append(
                ComponentPlacement(
                    position=tuple(center),
                    rotation=rot,
                    ctype=ComponentType.PANEL,
                    cell=cell,
                    face=patch.normal,
                    source_patch=label,
                )
            )
    return AssemblyModel(
        placements=tuple(placements),
        grid=grid,
        panel_labels=panels,
        panel_thickness=spec.panel_thickness,
    )


_NEIGHBORS6 = ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1))


def _zyx(cell: tuple[int, int, int]):
    return (cell[2], cell[1], cell[0])


def _connected_components(cells: set[tuple[int, int, int]]) -> int:
    seen: set[tuple[int, int, int]] = set()
    count = 0
    for start in sorted(cells):
        if start in seen:
            continue
        count += 1
        stack = [start]
        seen.add(start)
        while stack:
            c = stack.pop()
            for d in _NEIGHBORS6:
                nb = (c[0] + d[0], c[1] + d[1], c[2] + d[2])
                if nb in cells and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
    return count


def sequence(model: AssemblyModel) -> AssemblyModel:
    """Order placements bottom-to-top while preserving connectivity."""
    if not model.placements:
        raise EmptyAssembly("nothing to sequence")
    structural = {p.cell: p for p in model.placements if p.ctype is ComponentType.STRUCTURAL}
    panels = [p for p in model.placements if p.ctype is ComponentType.PANEL]
    cells = set(structural)
    warnings: list[str] = []
    if _connected_components(cells) > 1:
        warnings.append("disconnected-occupancy")

    placed: set[tuple[int, int, int]] = set()
    order: list[tuple[int, int, int]] = []
    for z in sorted({c[2] for c in cells}):
        remaining = {c for c in cells if c[2] == z}
        while remaining:
            avail = [
                c
                for c in remaining
                if c[2] == 0
                or any(
                    (c[0] + d[0], c[1] + d[1], c[2] + d[2]) in placed
                    for d in _NEIGHBORS6
                )
            ]
            if avail:
                nxt = min(avail, key=_zyx)
            else:
                # no buildable cell left in this layer: start it anyway and
                # let the simulator report the physical impossibility
                nxt = min(remaining, key=_zyx)
                warnings.append(f"unsupported-start:{nxt}")
            order.append(nxt)
            placed.add(nxt)
            remaining.remove(nxt)

    panels_by_layer: dict[int, list[ComponentPlacement]] = {}
    for p in panels:
        panels_by_layer.setdefault(p.cell[2], []).append(p)
    for batch in panels_by_layer.values():
        batch.sort(key=lambda p: (_zyx(p.cell), _DIR_RANK[p.face]))

    ordered: list[ComponentPlacement] = []
    layers = sorted({c[2] for c in cells})
    for z in layers:
        for c in order:
            if c[2] == z:
                ordered.append(structural[c])
        ordered.extend(panels_by_layer.get(z, ()))
    # panels owned by layers with no structural cell cannot exist (the owner
    # is always a structural cell), so every panel is covered above
    return AssemblyModel(
        placements=tuple(ordered),
        grid=model.grid,
        panel_labels=model.panel_labels,
        panel_thickness=model.panel_thickness,
        sequenced=True,
        warnings=tuple(warnings),
    )


def emit_program(
    model: AssemblyModel,
    stations: tuple[SourceStation, SourceStation],
    params: dict,
) -> RobotProgram:
    """One 8-motion pick-and-place step per placement, source by type."""
    if not model.sequenced:
        raise ValueError("model must be sequenced before emitting a program")
    h_safe = float(params.get("h_safe", 0.0))
    if h_safe <= 0:
        raise ConfigError("h_safe must be positive")
    if h_safe <= model.grid.cell_size:
        raise ConfigError("h_safe must exceed the structural component height")
    w_open = float(params.get("w_open", 0.085))
    w_release = float(params.get("w_release", 0.085))
    f_grab = float(params.get("f_grab", 40.0))
    by_type = {
        ComponentType.STRUCTURAL: next(s for s in stations if s.id is StationId.S0_CONVEYOR),
        ComponentType.PANEL: next(s for s in stations if s.id is StationId.S1_STACK),
    }
    steps = []
    for i, p in enumerate(model.placements, start=1):
        station = by_type[p.ctype]
        steps.append(
            PickPlaceStep(
                index=i,
                ctype=p.ctype,
                source=station.id,
                pickup=station.pickup + (0.0, 0.0, 0.0),
                place=p.pose(),
                cell=p.cell,
                face=p.face,
                h_safe=h_safe,
                w_open=w_open,
                w_release=w_release,
                f_grab=f_grab,
            )
        )
    return RobotProgram(
        steps=tuple(steps),
        stations=stations,
        params={
            "h_safe": h_safe,
            "w_open": w_open,
            "w_release": w_release,
            "f_grab": f_grab,
        },
        grid_origin=model.grid.origin,
        cell_size=model.grid.cell_size,
        panel_thickness=model.panel_thickness,
    )


# ---------------------------------------------------------------------------
# simulation


def _panel_offset_cell(cell, face: Direction):
    """Grid cell the panel slab protrudes into (the air cell)."""
    return (
        cell[0] + face.vector[0],
        cell[1] + face.vector[1],
        cell[2] + face.vector[2],
    )


def simulate(program: RobotProgram, spec: ComponentSpec) -> SimulationReport:
    """Replay the program on an empty world and check placement logic.

    Per step: target unoccupied, vertical descent line above the place pose
    clear of previously placed parts, support (ground / below / adjacent for
    cubes; owning cube placed for panels), and legal gripper alternation.
    Violations are report content; nothing is raised.
    """
    cell = program.cell_size
    eps = 1e-9 * cell
    violations: list[Violation] = []
    placed_cells: set[tuple[int, int, int]] = set()
    placed_faces: set[tuple[tuple[int, int, int], str]] = set()
    boxes: list[tuple[float, float, float, float, float, float]] = []  # xlo,xhi,ylo,yhi,zlo,zhi
    gripper_open = True
    placed_count = 0
    origin = program.grid_origin

    def cube_box(c):
        x = origin[0] + c[0] * cell
        y = origin[1] + c[1] * cell
        z = origin[2] + c[2] * cell
        return (x, x + cell, y, y + cell, z, z + cell)

    def panel_box(pos, face: Direction):
        t = program.panel_thickness
        half = cell / 2.0
        lo = [0.0, 0.0, 0.0]
        hi = [0.0, 0.0, 0.0]
        for a in range(3):
            if a == face.axis:
                lo[a] = pos[a] - t / 2.0
                hi[a] = pos[a] + t / 2.0
            else:
                lo[a] = pos[a] - half
                hi[a] = pos[a] + half
        return (lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])

    def descent_blocked(pos):
        x, y, z = pos[:3]
        for (xlo, xhi, ylo, yhi, zlo, zhi) in boxes:
            if xlo + eps < x < xhi - eps and ylo + eps < y < yhi - eps and zhi > z + eps:
                return True
        return False

    for step in program.steps:
        idx = step.index
        motions = step.motions()
        for m in motions:
            if m.op == "close":
                if not gripper_open:
                    violations.append(
                        Violation(idx, "GRIPPER_STATE", "close while already closed")
                    )
                gripper_open = False
            elif m.op == "open":
                if gripper_open:
                    violations.append(
                        Violation(idx, "GRIPPER_STATE", "open while already open")
                    )
                gripper_open = True

        if step.ctype is ComponentType.STRUCTURAL:
            c = step.cell
            if c in placed_cells:
                violations.append(Violation(idx, "TARGET_OCCUPIED", f"cell {c} already filled"))
            supported = (
                c[2] == 0
                or (c[0], c[1], c[2] - 1) in placed_cells
                or any(
                    (c[0] + d[0], c[1] + d[1], c[2] + d[2]) in placed_cells
                    for d in _NEIGHBORS6
                )
            )
            if not supported:
                violations.append(
                    Violation(idx, "UNSUPPORTED", f"cell {c} has no ground, base, or neighbor support")
                )
            if descent_blocked(step.place):
                violations.append(
                    Violation(idx, "DESCENT_BLOCKED", f"column above cell {c} is obstructed")
                )
            placed_cells.add(c)
            boxes.append(cube_box(c))
            placed_count += 1
        else:
            key = (step.cell, step.face.text)
            if key in placed_faces:
                violations.append(
                    Violation(idx, "TARGET_OCCUPIED", f"face {key} already has a panel")
                )
            if step.cell not in placed_cells:
                violations.append(
                    Violation(
                        idx,
                        "PANEL_BEFORE_SUPPORT",
                        f"panel on {key} placed before its owning cube",
                    )
                )
            if descent_blocked(step.place):
                violations.append(
                    Violation(idx, "DESCENT_BLOCKED", f"column above face {key} is obstructed")
                )
            placed_faces.add(key)
            boxes.append(panel_box(step.place[:3], step.face))
            placed_count += 1

    verdict = "PASS" if not violations else "FAIL"
    return SimulationReport(
        verdict=verdict,
        violations=tuple(violations),
        steps_total=len(program.steps),
        placed_count=placed_count,
    )


# ---------------------------------------------------------------------------
# exports


def assembly_to_lists(model: AssemblyModel):
    """The paper-style two-list export: poses C and component types T."""
    c = [p.pose() for p in model.placements]
    t = [p.ctype.value for p in model.placements]
    return c, t


def program_to_dict(program: RobotProgram) -> dict:
    return {
        "version": 1,
        "euler_convention": "intrinsic-XYZ-radians",
        "grid": {"origin": list(program.grid_origin), "cell_size": program.cell_size},
        "panel_thickness": program.panel_thickness,
        "params": dict(program.params),
        "stations": [
            {"id": s.id.value, "pickup": list(s.pickup)} for s in program.stations
        ],
        "steps": [
            {
                "index": s.index,
                "type": s.ctype.value,
                "source": s.source.value,
                "cell": list(s.cell),
                "face": s.face.text if s.face else None,
                "pickup": list(s.pickup),
                "place": list(s.place),
                "motions": [
                    {
                        "op": m.op,
                        **({"to": list(m.target)} if m.target else {}),
                        **({"width": m.width} if m.width is not None else {}),
                        **({"force": m.force} if m.force is not None else {}),
                    }
                    for m in s.motions()
                ],
            }
            for s in program.steps
        ],
    }


def program_to_json(program: RobotProgram) -> bytes:
    return json.dumps(program_to_dict(program), sort_keys=True, separators=(",", ":")).encode()


def program_from_dict(obj: dict) -> RobotProgram:
    params = obj["params"]
    stations = tuple(
        SourceStation(id=StationId(s["id"]), pickup=tuple(s["pickup"]))
        for s in obj["stations"]
    )
    steps = tuple(
        PickPlaceStep(
            index=s["index"],
            ctype=ComponentType(s["type"]),
            source=StationId(s["source"]),
            pickup=tuple(s["pickup"]),
            place=tuple(s["place"]),
            cell=tuple(s["cell"]),
            face=Direction.from_text(s["face"]) if s["face"] else None,
            h_safe=params["h_safe"],
            w_open=params["w_open"],
            w_release=params["w_release"],
            f_grab=params["f_grab"],
        )
        for s in obj["steps"]
    )
    return RobotProgram(
        steps=steps,
        stations=stations,  # type: ignore[arg-type]
        params=dict(params),
        grid_origin=tuple(obj["grid"]["origin"]),
        cell_size=obj["grid"]["cell_size"],
        panel_thickness=obj["panel_thickness"],
    )


def program_to_csv(program: RobotProgram) -> bytes:
    """Flat export of C and T for external robot toolchains."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["index", "x", "y", "z", "rx", "ry", "rz", "t", "source"])
    for s in program.steps:
        writer.writerow(
            [s.index, *(repr(v) for v in s.place), s.ctype.value, s.source.value]
        )
    return buf.getvalue().encode()
