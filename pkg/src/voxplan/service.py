"""Session-oriented REST service exposing the full pipeline.

Endpoints (JSON unless noted):

    GET  /healthz
    POST /sessions                     {prompt, mesh_base64, format?}
    GET  /sessions
    GET  /sessions/{id}                full session state
    POST /sessions/{id}/discretize     {structural_edge?, panel_thickness?}
    GET  /sessions/{id}/render?view=A|B&labeled=true|false   (SVG or PNG by Accept)
    GET  /sessions/{id}/scene?view=A|B&labeled=true|false    projected polygons for overlays
    POST /sessions/{id}/select         {strategy, seed?}
    POST /sessions/{id}/compare        {seed?}   dry-run of all three strategies
    POST /sessions/{id}/feedback       {text}
    POST /sessions/{id}/plan           {params?}
    GET  /sessions/{id}/program        (JSON, or CSV when Accept: text/csv)

Errors carry {"code", "message"}; validation problems map to 4xx and
upstream VLM failures to 502. Mutations on one session are serialized by a
per-session lock; reads are lock-free.
"""

from __future__ import annotations

import base64
import binascii

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .config import AppConfig, make_vlm_client
from .decompose import decomposition_to_dict
from .errors import (
    ConfigError,
    DegenerateMesh,
    EmptyMesh,
    GrammarError,
    ParseError,
    ResolutionTooCoarse,
    StateError,
    TransportError,
    ValidationError,
    VoxplanError,
)
from .geometry import ComponentSpec, MeshFormat
from .plan import program_to_csv, program_to_dict
from .render import project, scene_to_dict, standard_views
from .session import (
    SessionStore,
    compare_strategies,
    latest_program,
    run_discretize,
    run_feedback,
    run_plan,
    run_select,
)

_STATUS_BY_ERROR = [
    (StateError, 409),
    (TransportError, 502),
    (GrammarError, 502),  # endpoint kept misbehaving after retries
    (ParseError, 422),
    (EmptyMesh, 422),
    (DegenerateMesh, 422),
    (ResolutionTooCoarse, 422),
    (ValidationError, 422),
    (ConfigError, 422),
]


class CreateSessionBody(BaseModel):
    prompt: str
    mesh_base64: str
    format: str | None = None


class DiscretizeBody(BaseModel):
    structural_edge: float | None = None
    panel_thickness: float | None = None


class SelectBody(BaseModel):
    strategy: str
    seed: int | None = None


class CompareBody(BaseModel):
    seed: int | None = None


class FeedbackBody(BaseModel):
    text: str


class PlanBody(BaseModel):
    params: dict | None = None


def _session_view(session) -> dict:
    view = session.to_dict()
    if session.decomp is not None:
        view["labels"] = [
            {
                "label": p.label,
                "normal": p.normal.text,
                "area": p.area_cells,
                "plane": p.plane_coord,
            }
            for p in session.decomp.patches
        ]
        view["omitted"] = [
            {"normal": p.normal.text, "area": p.area_cells, "reason": r.value}
            for p, r in session.decomp.omitted
        ]
    view["current_labels"] = session.history[-1]["labels"] if session.history else []
    return view


def create_app(config: AppConfig | None = None) -> FastAPI:
    config = config or AppConfig()
    store = SessionStore(config.sessions_root)
    app = FastAPI(title="voxplan", version="0.1.0")
    app.state.config = config
    app.state.store = store

    @app.exception_handler(VoxplanError)
    async def _voxplan_error(_req: Request, exc: VoxplanError):
        status = 500
        for etype, code in _STATUS_BY_ERROR:
            if isinstance(exc, etype):
                status = code
                break
        return JSONResponse(
            status_code=status, content={"code": exc.code, "message": str(exc)}
        )

    @app.exception_handler(KeyError)
    async def _not_found(_req: Request, exc: KeyError):
        return JSONResponse(
            status_code=404, content={"code": "not_found", "message": str(exc)}
        )

    def _client():
        return make_vlm_client(config.vlm)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/sessions", status_code=201)
    def create_session_ep(body: CreateSessionBody):
        try:
            mesh = base64.b64decode(body.mesh_base64, validate=True)
        except (binascii.Error, ValueError) as e:
            raise ValidationError(f"mesh_base64 is not valid base64: {e}") from e
        fmt = MeshFormat(body.format) if body.format else None
        session = store.create(body.prompt, mesh, fmt)
        return _session_view(session)

    @app.get("/sessions")
    def list_sessions():
        out = []
        for sid in store.list_ids():
            s = store.get(sid)
            out.append({"id": s.id, "prompt": s.prompt, "status": s.status})
        return {"sessions": out}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_view(store.get(sid))

    @app.post("/sessions/{sid}/discretize")
    def discretize_ep(sid: str, body: DiscretizeBody | None = None):
        with store.lock(sid):
            session = store.get(sid)
            spec = config.component
            if body and (body.structural_edge or body.panel_thickness):
                spec = ComponentSpec(
                    structural_edge=body.structural_edge or config.component.structural_edge,
                    panel_thickness=body.panel_thickness or config.component.panel_thickness,
                )
            session = run_discretize(session, spec, canvas=config.canvas)
            return _session_view(session)

    @app.get("/sessions/{sid}/render")
    def render_ep(sid: str, request: Request, view: str = "A", labeled: bool = True):
        session = store.get(sid)
        if view not in ("A", "B"):
            raise ValidationError(f"view must be A or B, got {view!r}")
        accept = request.headers.get("accept", "")
        fmt, media = ("png", "image/png") if "image/png" in accept else ("svg", "image/svg+xml")
        path = session.render_path(view, labeled, fmt)
        if not path.exists():
            raise StateError("renders not available; run discretize first")
        return Response(content=path.read_bytes(), media_type=media)

    @app.get("/sessions/{sid}/scene")
    def scene_ep(sid: str, view: str = "A", labeled: bool = True):
        session = store.get(sid)
        if session.decomp is None:
            raise StateError("no decomposition; run discretize first")
        views = {v.name: v for v in standard_views()}
        if view not in views:
            raise ValidationError(f"view must be A or B, got {view!r}")
        scene = project(session.decomp, views[view], canvas=session.canvas, labeled=labeled)
        payload = scene_to_dict(scene)
        payload["decomposition"] = decomposition_to_dict(session.decomp)
        return payload

    @app.post("/sessions/{sid}/select")
    def select_ep(sid: str, body: SelectBody):
        with store.lock(sid):
            session = store.get(sid)
            client = _client() if body.strategy.upper() == "VLM" else None
            if body.strategy.upper() == "VLM" and client is None:
                raise ConfigError("VLM strategy requires vlm configuration (mode/transcript)")
            session = run_select(session, body.strategy, seed=body.seed, client=client)
            return _session_view(session)

    @app.post("/sessions/{sid}/compare")
    def compare_ep(sid: str, body: CompareBody | None = None):
        session = store.get(sid)
        seed = body.seed if body else None
        return compare_strategies(session, seed=seed, client=_client())

    @app.post("/sessions/{sid}/feedback")
    def feedback_ep(sid: str, body: FeedbackBody):
        with store.lock(sid):
            session = store.get(sid)
            client = _client()
            if client is None:
                raise ConfigError("feedback requires vlm configuration (mode/transcript)")
            session = run_feedback(session, body.text, client)
            return _session_view(session)

    @app.post("/sessions/{sid}/plan")
    def plan_ep(sid: str, body: PlanBody | None = None):
        with store.lock(sid):
            session = store.get(sid)
            params = dict(config.plan_params())
            if body and body.params:
                params.update(body.params)
            session = run_plan(session, stations=config.stations, params=params)
            return _session_view(session)

    @app.get("/sessions/{sid}/program")
    def program_ep(sid: str, request: Request):
        session = store.get(sid)
        program = latest_program(session)
        accept = request.headers.get("accept", "")
        if "text/csv" in accept:
            return Response(content=program_to_csv(program), media_type="text/csv")
        return program_to_dict(program)

    @app.get("/sessions/{sid}/report")
    def report_ep(sid: str):
        session = store.get(sid)
        if not session.plans:
            raise StateError("session has no plan yet")
        index = session.plans[-1]["index"]
        import json as _json

        return _json.loads(
            session.path(f"report_{index:03d}.json").read_text(encoding="utf-8")
        )

    if config.ui_dist and config.ui_dist.exists():
        app.mount("/ui", StaticFiles(directory=str(config.ui_dist), html=True), name="ui")

    return app
