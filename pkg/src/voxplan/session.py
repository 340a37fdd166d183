"""Session state and pipeline orchestration with directory persistence.

A session is one directory holding JSON documents and image blobs:

    session.json          metadata, status, assignment history, plan index
    mesh.bin              uploaded mesh bytes
    decomposition.json    grid + labeled patches (after discretize)
    render_{A,B}_{labeled,plain}.{svg,png}
    program_NNN.json / report_NNN.json / program_NNN.csv

Statuses move forward only (CREATED -> DISCRETIZED -> ASSIGNED -> PLANNED);
re-selection, feedback, and re-planning are allowed once the stage has been
reached, so the status records the furthest stage completed.
"""

from __future__ import annotations

import hashlib
import json
import secrets
import threading
import uuid
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .decompose import Decomposition, decompose_grid, decomposition_from_dict, decomposition_to_json
from .errors import StateError, ValidationError
from .geometry import ComponentSpec, MeshFormat, load_mesh, voxelize
from .plan import (
    RobotProgram,
    SourceStation,
    StationId,
    build_assembly,
    emit_program,
    program_from_dict,
    program_to_csv,
    program_to_dict,
    sequence,
    simulate,
)
from .render import project, render_raster, render_svg, standard_views
from .select import (
    LabelSet,
    PartList,
    Provenance,
    format_labels,
    random_select,
    rule_based_select,
    vlm_feedback,
    vlm_map_labels,
    vlm_select_parts,
    SelectionRequest,
)
from .vlmclient import ChatMessage, ChatRequest, ChatVisionClient, TranscriptBuilder
from . import prompts

__all__ = [
    "Session",
    "SessionStore",
    "create_session",
    "load_session",
    "run_discretize",
    "run_select",
    "run_feedback",
    "run_plan",
    "compare_strategies",
    "current_labels",
    "build_mock_transcript",
    "DEFAULT_STATIONS",
    "default_plan_params",
]

STATUSES = ("CREATED", "DISCRETIZED", "ASSIGNED", "PLANNED")

DEFAULT_STATIONS = (
    SourceStation(StationId.S0_CONVEYOR, (-0.40, -0.40, 0.03)),
    SourceStation(StationId.S1_STACK, (-0.40, 0.40, 0.01)),
)


def default_plan_params(spec: ComponentSpec) -> dict:
    return {
        "h_safe": 2.0 * spec.structural_edge,
        "w_open": 0.085,
        "w_release": 0.085,
        "f_grab": 40.0,
    }


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class Session:
    dir: Path
    id: str
    prompt: str
    mesh_digest: str
    mesh_format: str | None
    status: str = "CREATED"
    spec: ComponentSpec | None = None
    canvas: tuple[int, int] = (1024, 1024)
    history: list[dict] = field(default_factory=list)
    plans: list[dict] = field(default_factory=list)
    created_at: str = field(default_factory=_now)
    updated_at: str = field(default_factory=_now)
    decomp: Decomposition | None = None

    # -- paths -------------------------------------------------------------
    def path(self, name: str) -> Path:
        return self.dir / name

    def render_path(self, view: str, labeled: bool, fmt: str) -> Path:
        kind = "labeled" if labeled else "plain"
        return self.path(f"render_{view}_{kind}.{fmt}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "prompt": self.prompt,
            "mesh_digest": self.mesh_digest,
            "mesh_format": self.mesh_format,
            "status": self.status,
            "spec": (
                {
                    "structural_edge": self.spec.structural_edge,
                    "panel_thickness": self.spec.panel_thickness,
                }
                if self.spec
                else None
            ),
            "canvas": list(self.canvas),
            "history": self.history,
            "plans": self.plans,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }


def save_session(session: Session) -> None:
    session.updated_at = _now()
    session.dir.mkdir(parents=True, exist_ok=True)
    session.path("session.json").write_text(
        json.dumps(session.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )


def create_session(
    directory: str | Path,
    prompt: str,
    mesh_bytes: bytes,
    fmt: MeshFormat | None = None,
    session_id: str | None = None,
) -> Session:
    """Validate the mesh, persist it, and start a CREATED session."""
    if not prompt or not prompt.strip():
        raise ValidationError("prompt must be non-empty")
    load_mesh(mesh_bytes, fmt)  # validation only; parse errors propagate
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    session = Session(
        dir=directory,
        id=session_id or directory.name or uuid.uuid4().hex[:12],
        prompt=prompt,
        mesh_digest=hashlib.sha256(mesh_bytes).hexdigest(),
        mesh_format=fmt.value if fmt else None,
    )
    (directory / "mesh.bin").write_bytes(mesh_bytes)
    save_session(session)
    return session


def load_session(directory: str | Path) -> Session:
    directory = Path(directory)
    meta_path = directory / "session.json"
    if not meta_path.exists():
        raise StateError(f"no session at {directory}")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    spec = None
    if meta.get("spec"):
        spec = ComponentSpec(
            structural_edge=meta["spec"]["structural_edge"],
            panel_thickness=meta["spec"]["panel_thickness"],
        )
    session = Session(
        dir=directory,
        id=meta["id"],
        prompt=meta["prompt"],
        mesh_digest=meta["mesh_digest"],
        mesh_format=meta.get("mesh_format"),
        status=meta["status"],
        spec=spec,
        canvas=tuple(meta.get("canvas", (1024, 1024))),
        history=meta.get("history", []),
        plans=meta.get("plans", []),
        created_at=meta.get("created_at", _now()),
        updated_at=meta.get("updated_at", _now()),
    )
    decomp_path = directory / "decomposition.json"
    if decomp_path.exists():
        session.decomp = decomposition_from_dict(
            json.loads(decomp_path.read_text(encoding="utf-8"))
        )
    return session


# ---------------------------------------------------------------------------
# pipeline stages


def run_discretize(
    session: Session,
    spec: ComponentSpec | None = None,
    canvas: tuple[int, int] | None = None,
) -> Session:
    """Voxelize + decompose + render both standard views (labeled and plain)."""
    spec = spec or ComponentSpec()
    if session.status != "CREATED":
        if session.spec == spec:
            return session  # idempotent re-run with identical spec
        raise StateError("session already discretized with a different spec")
    if canvas:
        session.canvas = canvas
    mesh = load_mesh(session.path("mesh.bin").read_bytes(),
                     MeshFormat(session.mesh_format) if session.mesh_format else None)
    grid = voxelize(mesh, spec)
    decomp = decompose_grid(grid)
    session.path("decomposition.json").write_bytes(decomposition_to_json(decomp))
    for view in standard_views():
        for labeled in (True, False):
            scene = project(decomp, view, canvas=session.canvas, labeled=labeled)
            session.render_path(view.name, labeled, "svg").write_bytes(render_svg(scene))
            session.render_path(view.name, labeled, "png").write_bytes(render_raster(scene))
    session.decomp = decomp
    session.spec = spec
    session.status = "DISCRETIZED"
    save_session(session)
    return session


def _require_decomp(session: Session) -> Decomposition:
    if session.decomp is None:
        raise StateError("session has no decomposition; run discretize first")
    return session.decomp


def _selection_request(session: Session, labeled: bool) -> SelectionRequest:
    decomp = _require_decomp(session)
    if labeled:
        images = tuple(
            (v, session.render_path(v, True, "png").read_bytes()) for v in ("A", "B")
        )
    else:
        images = (("A", session.render_path("A", False, "png").read_bytes()),)
    return SelectionRequest(user_prompt=session.prompt, decomp=decomp, images=images)


def _append_assignment(
    session: Session,
    label_set: LabelSet,
    *,
    feedback: str | None = None,
    seed: int | None = None,
    parts: tuple[str, ...] | None = None,
) -> None:
    session.history.append(
        {
            "labels": sorted(label_set.labels),
            "origin": label_set.provenance.value,
            "timestamp": _now(),
            "feedback": feedback,
            "seed": seed,
            "parts": list(parts) if parts else None,
            "retry_count": label_set.retry_count,
        }
    )


def run_select(
    session: Session,
    strategy: str,
    seed: int | None = None,
    client: ChatVisionClient | None = None,
) -> Session:
    """Append a fresh assignment produced by the requested strategy."""
    if session.status not in ("DISCRETIZED", "ASSIGNED", "PLANNED"):
        raise StateError(f"cannot select in status {session.status}")
    decomp = _require_decomp(session)
    strategy = strategy.upper()
    parts: tuple[str, ...] | None = None
    if strategy == "RULE":
        label_set = rule_based_select(decomp)
    elif strategy == "RANDOM":
        if seed is None:
            # 48 bits keeps seeds exact through JSON/JavaScript round-trips
            seed = secrets.randbits(48)
        label_set = random_select(decomp, seed)
    elif strategy == "VLM":
        if client is None:
            raise ValidationError("VLM strategy requires a configured client")
        part_list = vlm_select_parts(_selection_request(session, labeled=False), client)
        label_set = vlm_map_labels(_selection_request(session, labeled=True), part_list, client)
        parts = part_list.parts
    else:
        raise ValidationError(f"unknown strategy {strategy!r}")
    _append_assignment(session, label_set, seed=seed, parts=parts)
    if session.status == "DISCRETIZED":
        session.status = "ASSIGNED"
    save_session(session)
    return session


def run_feedback(session: Session, text: str, client: ChatVisionClient) -> Session:
    """Conversational refinement; the result replaces the current assignment."""
    if session.status not in ("ASSIGNED", "PLANNED"):
        raise StateError(f"cannot apply feedback in status {session.status}")
    if not text or not text.strip():
        raise ValidationError("feedback text must be non-empty")
    label_set = vlm_feedback(_selection_request(session, labeled=True), text, client)
    _append_assignment(session, label_set, feedback=text)
    save_session(session)
    return session


def current_labels(session: Session) -> frozenset[int]:
    if not session.history:
        raise StateError("session has no assignment yet")
    return frozenset(session.history[-1]["labels"])


def run_plan(
    session: Session,
    stations: tuple[SourceStation, SourceStation] = DEFAULT_STATIONS,
    params: dict | None = None,
) -> Session:
    """Build, sequence, emit, and simulate a program for the latest labels."""
    if session.status not in ("ASSIGNED", "PLANNED"):
        raise StateError(f"cannot plan in status {session.status}")
    decomp = _require_decomp(session)
    labels = current_labels(session)
    spec = session.spec or ComponentSpec()
    origin = Provenance(session.history[-1]["origin"])
    label_set = LabelSet(labels=labels, provenance=origin)
    model = sequence(build_assembly(decomp.grid, label_set, decomp, spec))
    program = emit_program(model, stations, params or default_plan_params(spec))
    report = simulate(program, spec)
    index = len(session.plans) + 1
    session.path(f"program_{index:03d}.json").write_text(
        json.dumps(program_to_dict(program), indent=2, sort_keys=True), encoding="utf-8"
    )
    session.path(f"program_{index:03d}.csv").write_bytes(program_to_csv(program))
    session.path(f"report_{index:03d}.json").write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
    )
    session.plans.append(
        {
            "index": index,
            "labels": sorted(labels),
            "verdict": report.verdict,
            "steps": report.steps_total,
            "warnings": list(model.warnings),
            "created_at": _now(),
        }
    )
    session.status = "PLANNED"
    save_session(session)
    return session


def latest_program(session: Session) -> RobotProgram:
    if not session.plans:
        raise StateError("session has no plan yet")
    index = session.plans[-1]["index"]
    obj = json.loads(session.path(f"program_{index:03d}.json").read_text(encoding="utf-8"))
    return program_from_dict(obj)


def compare_strategies(
    session: Session, seed: int | None = None, client: ChatVisionClient | None = None
) -> dict:
    """Dry-run all three strategies without touching the session history."""
    decomp = _require_decomp(session)
    if seed is None:
        seed = secrets.randbits(48)
    out: dict = {"seed": seed}
    out["rule"] = {"labels": sorted(rule_based_select(decomp).labels)}
    out["random"] = {"labels": sorted(random_select(decomp, seed).labels), "seed": seed}
    if client is None:
        out["vlm"] = {"error": "no VLM client configured"}
    else:
        try:
            part_list = vlm_select_parts(_selection_request(session, labeled=False), client)
            label_set = vlm_map_labels(
                _selection_request(session, labeled=True), part_list, client
            )
            out["vlm"] = {
                "labels": sorted(label_set.labels),
                "parts": list(part_list.parts),
            }
        except Exception as e:  # per-card errors surface in the comparison
            out["vlm"] = {"error": str(e)}
    return out


# ---------------------------------------------------------------------------
# mock transcript construction (fixtures, demos, UI tests)


def build_mock_transcript(
    session: Session,
    parts: tuple[str, ...] | list[str],
    labels: set[int] | frozenset[int],
    feedbacks: list[tuple[str, set[int]]] | None = None,
) -> dict:
    """Create transcript entries matching exactly the requests run_select
    and run_feedback will issue for this session."""
    builder = TranscriptBuilder()
    part_list = PartList(parts=tuple(parts))
    req1 = _selection_request(session, labeled=False)
    builder.add(
        ChatRequest(
            system=prompts.PART_SELECTION_SYSTEM,
            messages=(ChatMessage("user", prompts.part_selection_query(session.prompt)),),
            images=req1.image_bytes(),
        ),
        "Parts = " + ", ".join(part_list.parts),
    )
    req2 = _selection_request(session, labeled=True)
    builder.add(
        ChatRequest(
            system=prompts.LABEL_MAPPING_SYSTEM,
            messages=(
                ChatMessage(
                    "user", prompts.label_mapping_query(session.prompt, part_list.parts)
                ),
            ),
            images=req2.image_bytes(),
        ),
        format_labels(labels),
    )
    for text, reply_labels in feedbacks or ():
        builder.add(
            ChatRequest(
                system=prompts.FEEDBACK_SYSTEM,
                messages=(
                    ChatMessage("user", prompts.feedback_query(session.prompt, text)),
                ),
                images=req2.image_bytes(),
            ),
            format_labels(reply_labels),
        )
    return builder.to_dict()


# ---------------------------------------------------------------------------
# multi-session store (service)


class SessionStore:
    """Directory-of-sessions with per-session in-process locks."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()

    def lock(self, session_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def create(self, prompt: str, mesh_bytes: bytes, fmt: MeshFormat | None = None) -> Session:
        session_id = uuid.uuid4().hex[:12]
        return create_session(self.root / session_id, prompt, mesh_bytes, fmt, session_id)

    def get(self, session_id: str) -> Session:
        path = self.root / session_id
        if not (path / "session.json").exists():
            raise KeyError(session_id)
        return load_session(path)

    def list_ids(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "session.json").exists()
        )
