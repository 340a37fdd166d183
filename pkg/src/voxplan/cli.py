"""Command-line interface mirroring the REST pipeline.

A session lives in a plain directory; every stage is scriptable without the
service. Exit codes: 0 ok, 2 validation problem, 3 upstream VLM failure,
4 internal error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import load_config, make_vlm_client
from .errors import (
    ConfigError,
    GrammarError,
    TransportError,
    VoxplanError,
)
from .evalstats import ResponseTable, evaluation_report, report_to_json, report_to_text
from .fixtures import DEMO_OBJECTS, demo_mesh_obj
from .geometry import ComponentSpec, MeshFormat
from .plan import program_from_dict, simulate
from .render import project, render_raster, render_svg, standard_views
from .session import (
    build_mock_transcript,
    create_session,
    latest_program,
    load_session,
    run_discretize,
    run_feedback,
    run_plan,
    run_select,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_UPSTREAM = 3
EXIT_INTERNAL = 4


def _parse_canvas(text: str) -> tuple[int, int]:
    w, h = text.lower().split("x")
    return (int(w), int(h))


def _mesh_format(name: str | None) -> MeshFormat | None:
    if not name:
        return None
    aliases = {
        "obj": MeshFormat.OBJ,
        "stl": None,  # sniff binary vs ascii
        "stl_binary": MeshFormat.STL_BINARY,
        "stl_ascii": MeshFormat.STL_ASCII,
    }
    if name not in aliases:
        raise ConfigError(f"unknown format {name!r}")
    return aliases[name]


def _client_from_args(args):
    if getattr(args, "transcript", None):
        from .vlmclient import MockTranscriptClient

        return MockTranscriptClient(args.transcript)
    config = load_config(getattr(args, "config", None))
    return make_vlm_client(config.vlm)


def _print(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ---------------------------------------------------------------------------
# subcommands


def cmd_fixture(args) -> int:
    data = demo_mesh_obj(args.object, edge=args.edge)
    Path(args.output).write_bytes(data)
    print(f"wrote {args.object} mesh to {args.output}")
    return EXIT_OK


def cmd_discretize(args) -> int:
    mesh_bytes = Path(args.mesh).read_bytes()
    session = create_session(args.session, args.prompt, mesh_bytes, _mesh_format(args.format))
    spec = ComponentSpec(structural_edge=args.edge, panel_thickness=args.panel_thickness)
    session = run_discretize(session, spec, canvas=_parse_canvas(args.canvas))
    decomp = session.decomp
    _print(
        {
            "session": session.id,
            "status": session.status,
            "cells": len(decomp.grid.occupied),
            "labels": sorted(p.label for p in decomp.patches),
            "omitted": len(decomp.omitted),
        }
    )
    return EXIT_OK


def cmd_render(args) -> int:
    session = load_session(args.session)
    if session.decomp is None:
        raise ConfigError("session has no decomposition; run discretize first")
    views = {v.name: v for v in standard_views()}
    scene = project(
        session.decomp,
        views[args.view],
        canvas=_parse_canvas(args.canvas),
        labeled=not args.plain,
        highlight=frozenset(int(x) for x in args.highlight.split(",")) if args.highlight else frozenset(),
    )
    data = render_svg(scene) if args.fmt == "svg" else render_raster(scene)
    Path(args.output).write_bytes(data)
    print(f"wrote {args.fmt} render ({args.view}) to {args.output}")
    return EXIT_OK


def cmd_select(args) -> int:
    session = load_session(args.session)
    client = _client_from_args(args) if args.strategy.lower() == "vlm" else None
    if args.strategy.lower() == "vlm" and client is None:
        raise ConfigError("VLM strategy needs --transcript or vlm config")
    session = run_select(session, args.strategy, seed=args.seed, client=client)
    _print({"session": session.id, "status": session.status, "assignment": session.history[-1]})
    return EXIT_OK


def cmd_feedback(args) -> int:
    session = load_session(args.session)
    client = _client_from_args(args)
    if client is None:
        raise ConfigError("feedback needs --transcript or vlm config")
    session = run_feedback(session, args.text, client)
    _print({"session": session.id, "assignment": session.history[-1]})
    return EXIT_OK


def cmd_plan(args) -> int:
    session = load_session(args.session)
    config = load_config(args.config)
    params = dict(config.plan_params())
    if args.h_safe is not None:
        params["h_safe"] = args.h_safe
    session = run_plan(session, stations=config.stations, params=params)
    _print({"session": session.id, "status": session.status, "plan": session.plans[-1]})
    return EXIT_OK if session.plans[-1]["verdict"] == "PASS" else EXIT_VALIDATION


def cmd_simulate(args) -> int:
    obj = json.loads(Path(args.program).read_text(encoding="utf-8"))
    program = program_from_dict(obj)
    spec = ComponentSpec(
        structural_edge=program.cell_size, panel_thickness=program.panel_thickness
    )
    report = simulate(program, spec)
    _print(report.to_dict())
    return EXIT_OK if report.verdict == "PASS" else EXIT_VALIDATION


def cmd_eval(args) -> int:
    table = ResponseTable.from_csv(Path(args.responses).read_bytes())
    report = evaluation_report(table, alpha=args.alpha)
    if args.json:
        sys.stdout.write(report_to_json(report).decode())
        sys.stdout.write("\n")
    else:
        sys.stdout.write(report_to_text(report))
    return EXIT_OK


def cmd_mock_transcript(args) -> int:
    session = load_session(args.session)
    parts = tuple(p.strip().lower() for p in args.parts.split(",") if p.strip())
    labels = {int(x) for x in args.labels.split(",")}
    feedbacks = []
    for item in args.feedback or ():
        text, _, reply = item.partition("::")
        if not reply:
            raise ConfigError(f"feedback spec {item!r} must be TEXT::LABELS")
        feedbacks.append((text, {int(x) for x in reply.split(",")}))
    transcript = build_mock_transcript(session, parts, labels, feedbacks)
    Path(args.output).write_text(json.dumps(transcript, indent=2, sort_keys=True))
    print(f"wrote transcript with {len(transcript['entries'])} entries to {args.output}")
    return EXIT_OK


def cmd_program(args) -> int:
    session = load_session(args.session)
    program = latest_program(session)
    from .plan import program_to_csv, program_to_dict

    if args.fmt == "csv":
        data = program_to_csv(program)
        Path(args.output).write_bytes(data) if args.output else sys.stdout.write(data.decode())
    else:
        text = json.dumps(program_to_dict(program), indent=2, sort_keys=True)
        Path(args.output).write_text(text) if args.output else sys.stdout.write(text + "\n")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .config import AppConfig
    from .service import create_app

    config = load_config(args.config)
    overrides = {}
    if args.sessions_root:
        overrides["sessions_root"] = Path(args.sessions_root)
    if args.transcript:
        from .config import VlmSettings

        overrides["vlm"] = VlmSettings(mode="mock", transcript=args.transcript)
    if args.ui_dist:
        overrides["ui_dist"] = Path(args.ui_dist)
    if overrides:
        from dataclasses import replace

        config = replace(config, **overrides)
    app = create_app(config)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxplan",
        description="Mesh -> multi-component robotic assembly planning toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fixture", help="write a demo object mesh (OBJ)")
    p.add_argument("--object", choices=DEMO_OBJECTS, required=True)
    p.add_argument("--edge", type=float, default=0.30)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fixture)

    p = sub.add_parser("discretize", help="create a session and discretize a mesh")
    p.add_argument("--session", required=True, help="session directory")
    p.add_argument("--mesh", required=True)
    p.add_argument("--prompt", required=True)
    p.add_argument("--format", choices=["obj", "stl", "stl_binary", "stl_ascii"])
    p.add_argument("--edge", type=float, default=0.30)
    p.add_argument("--panel-thickness", type=float, default=0.02)
    p.add_argument("--canvas", default="1024x1024")
    p.set_defaults(func=cmd_discretize)

    p = sub.add_parser("render", help="re-render a view to SVG or PNG")
    p.add_argument("--session", required=True)
    p.add_argument("--view", choices=["A", "B"], default="A")
    p.add_argument("--fmt", choices=["svg", "png"], default="svg")
    p.add_argument("--plain", action="store_true", help="omit labels")
    p.add_argument("--highlight", help="comma-separated labels to highlight")
    p.add_argument("--canvas", default="1024x1024")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("select", help="run a panel-assignment strategy")
    p.add_argument("--session", required=True)
    p.add_argument("--strategy", choices=["vlm", "rule", "random"], required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--transcript", help="mock transcript file for the VLM")
    p.add_argument("--config")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("feedback", help="conversational refinement of the assignment")
    p.add_argument("--session", required=True)
    p.add_argument("--text", required=True)
    p.add_argument("--transcript")
    p.add_argument("--config")
    p.set_defaults(func=cmd_feedback)

    p = sub.add_parser("plan", help="sequence, emit, and simulate the robot program")
    p.add_argument("--session", required=True)
    p.add_argument("--h-safe", type=float, dest="h_safe")
    p.add_argument("--config")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="re-simulate a saved program file")
    p.add_argument("--program", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("program", help="export the latest program (json/csv)")
    p.add_argument("--session", required=True)
    p.add_argument("--fmt", choices=["json", "csv"], default="json")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_program)

    p = sub.add_parser("eval", help="selection rates + McNemar tests from a response CSV")
    p.add_argument("--responses", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("mock-transcript", help="build a mock VLM transcript for a session")
    p.add_argument("--session", required=True)
    p.add_argument("--parts", required=True, help='e.g. "seat, backrest"')
    p.add_argument("--labels", required=True, help='e.g. "1,7"')
    p.add_argument(
        "--feedback",
        action="append",
        help='repeatable, "TEXT::LABELS", e.g. "I want panels on the seat::1"',
    )
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_mock_transcript)

    p = sub.add_parser("serve", help="run the REST service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--config")
    p.add_argument("--sessions-root")
    p.add_argument("--transcript")
    p.add_argument("--ui-dist")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_VALIDATION if e.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except (TransportError, GrammarError) as e:
        print(f"error ({e.code}): {e}", file=sys.stderr)
        return EXIT_UPSTREAM
    except VoxplanError as e:
        print(f"error ({e.code}): {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error (io): {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:  # noqa: BLE001
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
