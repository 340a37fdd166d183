import base64
import json

import pytest
from fastapi.testclient import TestClient

from voxplan.config import AppConfig, VlmSettings
from voxplan.errors import StateError, ValidationError
from voxplan.fixtures import chair_mesh_obj, default_spec, demo_mesh_obj
from voxplan.geometry import ComponentSpec
from voxplan.service import create_app
from voxplan.session import (
    DEFAULT_STATIONS,
    build_mock_transcript,
    create_session,
    current_labels,
    default_plan_params,
    latest_program,
    load_session,
    run_discretize,
    run_feedback,
    run_plan,
    run_select,
)
from voxplan.vlmclient import MockTranscriptClient


SPEC = default_spec()


def _chair_session(tmp_path, prompt="Make me a chair"):
    session = create_session(tmp_path / "s1", prompt, chair_mesh_obj())
    return run_discretize(session, SPEC)


# ---------------------------------------------------------------------------
# session lifecycle


def test_create_requires_prompt_and_valid_mesh(tmp_path):
    with pytest.raises(ValidationError):
        create_session(tmp_path / "x", "", chair_mesh_obj())
    from voxplan.errors import ParseError, EmptyMesh

    with pytest.raises((ParseError, EmptyMesh)):
        create_session(tmp_path / "y", "hi", b"v 0 0 0\n")


def test_duplicate_upload_separate_sessions(tmp_path):
    a = create_session(tmp_path / "a", "chair", chair_mesh_obj())
    b = create_session(tmp_path / "b", "chair", chair_mesh_obj())
    assert a.id != b.id
    assert a.mesh_digest == b.mesh_digest


def test_discretize_idempotent(tmp_path):
    session = _chair_session(tmp_path)
    digest_first = session.path("decomposition.json").read_bytes()
    again = run_discretize(load_session(session.dir), SPEC)
    assert again.status == "DISCRETIZED"
    assert session.path("decomposition.json").read_bytes() == digest_first
    with pytest.raises(StateError):
        run_discretize(load_session(session.dir), ComponentSpec(structural_edge=0.15))


def test_session_survives_restart(tmp_path):
    session = _chair_session(tmp_path)
    run_select(session, "rule")
    reloaded = load_session(session.dir)
    assert reloaded.status == "ASSIGNED"
    assert reloaded.decomp is not None
    assert current_labels(reloaded) == frozenset({1, 2})


def test_select_requires_discretize(tmp_path):
    session = create_session(tmp_path / "s", "chair", chair_mesh_obj())
    with pytest.raises(StateError):
        run_select(session, "rule")


def test_feedback_requires_assignment(tmp_path):
    session = _chair_session(tmp_path)
    with pytest.raises(StateError):
        run_feedback(session, "panels on the seat", MockTranscriptClient({"entries": {}}))


def test_random_without_seed_records_one(tmp_path):
    session = _chair_session(tmp_path)
    run_select(session, "random")
    entry = session.history[-1]
    assert entry["seed"] is not None
    # replaying the recorded seed reproduces the assignment
    session2 = _chair_session(tmp_path / "again")
    run_select(session2, "random", seed=entry["seed"])
    assert session2.history[-1]["labels"] == entry["labels"]


def test_vlm_select_feedback_plan_flow(tmp_path):
    session = _chair_session(tmp_path)
    transcript = build_mock_transcript(
        session,
        parts=("seat", "backrest"),
        labels={1, 7},
        feedbacks=[("I want panels on the seat", {1})],
    )
    client = MockTranscriptClient(transcript)
    run_select(session, "vlm", client=client)
    assert current_labels(session) == frozenset({1, 7})
    assert session.history[-1]["parts"] == ["seat", "backrest"]
    run_feedback(session, "I want panels on the seat", client)
    assert current_labels(session) == frozenset({1})
    assert session.history[-1]["origin"] == "FEEDBACK"
    run_plan(session, DEFAULT_STATIONS, default_plan_params(SPEC))
    assert session.status == "PLANNED"
    assert session.plans[-1]["verdict"] == "PASS"
    program = latest_program(session)
    assert len(program.steps) == 12 + 2  # cubes + seat-top panels


def test_replay_reproduces_history(tmp_path):
    session = _chair_session(tmp_path)
    transcript = build_mock_transcript(session, ("seat",), {1})
    run_select(session, "vlm", client=MockTranscriptClient(transcript))
    run_select(session, "random", seed=99)
    first = [h["labels"] for h in session.history]
    replay = _chair_session(tmp_path / "replay")
    transcript2 = build_mock_transcript(replay, ("seat",), {1})
    run_select(replay, "vlm", client=MockTranscriptClient(transcript2))
    run_select(replay, "random", seed=99)
    assert [h["labels"] for h in replay.history] == first


def test_replan_keeps_history(tmp_path):
    session = _chair_session(tmp_path)
    run_select(session, "rule")
    run_plan(session)
    transcript = build_mock_transcript(session, ("seat",), {1})
    # feedback after planning, then re-plan: both plans retained
    run_feedback(session, "seat only", MockTranscriptClient(
        build_mock_transcript(session, ("seat",), {1}, feedbacks=[("seat only", {1})])
    ))
    run_plan(session)
    assert len(session.plans) == 2
    assert session.plans[-1]["labels"] == [1]


# ---------------------------------------------------------------------------
# REST service


@pytest.fixture()
def client_app(tmp_path):
    config = AppConfig(sessions_root=tmp_path / "sessions", canvas=(256, 256))
    app = create_app(config)
    return TestClient(app), config


def _create(client, prompt="Make me a chair", mesh=None):
    mesh = mesh or chair_mesh_obj()
    resp = client.post(
        "/sessions",
        json={"prompt": prompt, "mesh_base64": base64.b64encode(mesh).decode()},
    )
    assert resp.status_code == 201, resp.text
    return resp.json()["id"]


def test_service_full_flow(client_app, tmp_path):
    client, config = client_app
    sid = _create(client)
    r = client.post(f"/sessions/{sid}/discretize", json={})
    assert r.status_code == 200
    assert sorted(p["label"] for p in r.json()["labels"]) == [1, 2, 3, 4, 5, 6, 7]

    # renders by Accept header
    svg = client.get(f"/sessions/{sid}/render", params={"view": "A"})
    assert svg.headers["content-type"].startswith("image/svg")
    png = client.get(
        f"/sessions/{sid}/render", params={"view": "B", "labeled": "false"},
        headers={"accept": "image/png"},
    )
    assert png.headers["content-type"] == "image/png"
    assert png.content[:8] == b"\x89PNG\r\n\x1a\n"

    scene = client.get(f"/sessions/{sid}/scene", params={"view": "A"}).json()
    assert scene["view"] == "A" and scene["polygons"]

    # mock transcript for the VLM strategy
    session = load_session(config.sessions_root / sid)
    transcript = build_mock_transcript(
        session, ("seat", "backrest"), {1, 7},
        feedbacks=[("I want panels on the seat", {1})],
    )
    tpath = tmp_path / "transcript.json"
    tpath.write_text(json.dumps(transcript))
    config2 = AppConfig(
        sessions_root=config.sessions_root,
        canvas=config.canvas,
        vlm=VlmSettings(mode="mock", transcript=str(tpath)),
    )
    client2 = TestClient(create_app(config2))

    r = client2.post(f"/sessions/{sid}/select", json={"strategy": "VLM"})
    assert r.status_code == 200
    assert r.json()["current_labels"] == [1, 7]

    cmp = client2.post(f"/sessions/{sid}/compare", json={"seed": 5}).json()
    assert cmp["rule"]["labels"] == [1, 2]
    assert cmp["vlm"]["labels"] == [1, 7]
    assert set(cmp["random"]["labels"]) <= {1, 2, 3, 4, 5, 6, 7}

    r = client2.post(f"/sessions/{sid}/feedback", json={"text": "I want panels on the seat"})
    assert r.status_code == 200
    assert r.json()["current_labels"] == [1]

    r = client2.post(f"/sessions/{sid}/plan", json={})
    assert r.status_code == 200
    body = r.json()
    assert body["status"] == "PLANNED"
    assert body["plans"][-1]["verdict"] == "PASS"

    prog = client2.get(f"/sessions/{sid}/program").json()
    assert len(prog["steps"]) == 14
    csv_resp = client2.get(
        f"/sessions/{sid}/program", headers={"accept": "text/csv"}
    )
    assert csv_resp.headers["content-type"].startswith("text/csv")
    assert csv_resp.text.splitlines()[0] == "index,x,y,z,rx,ry,rz,t,source"

    report = client2.get(f"/sessions/{sid}/report").json()
    assert report["verdict"] == "PASS"


def test_service_error_codes(client_app):
    client, _ = client_app
    # bad base64
    r = client.post("/sessions", json={"prompt": "x", "mesh_base64": "!!!"})
    assert r.status_code == 422
    # degenerate flat mesh
    flat = b"v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n"
    sid = _create(client, mesh=flat)
    r = client.post(f"/sessions/{sid}/discretize", json={})
    assert r.status_code == 422
    assert r.json()["code"] == "degenerate_mesh"
    # state errors are 409
    r = client.post(f"/sessions/{sid}/select", json={"strategy": "RULE"})
    assert r.status_code == 409
    # unknown session is 404
    r = client.get("/sessions/nope")
    assert r.status_code == 404
    # VLM without transcript configured is a config problem (422)
    sid2 = _create(client)
    client.post(f"/sessions/{sid2}/discretize", json={})
    r = client.post(f"/sessions/{sid2}/select", json={"strategy": "VLM"})
    assert r.status_code == 422


def test_service_transport_error_maps_502(client_app, tmp_path):
    client, config = client_app
    sid = _create(client)
    client.post(f"/sessions/{sid}/discretize", json={})
    # transcript with no entries: every digest misses -> 502
    tpath = tmp_path / "empty_transcript.json"
    tpath.write_text(json.dumps({"version": 1, "entries": {}}))
    config2 = AppConfig(
        sessions_root=config.sessions_root,
        canvas=config.canvas,
        vlm=VlmSettings(mode="mock", transcript=str(tpath)),
    )
    client2 = TestClient(create_app(config2))
    r = client2.post(f"/sessions/{sid}/select", json={"strategy": "VLM"})
    assert r.status_code == 502
    assert r.json()["code"] == "transport_error"


def test_service_list_and_state_view(client_app):
    client, _ = client_app
    sid = _create(client, prompt="A wide bowl", mesh=demo_mesh_obj("trashcan"))
    listing = client.get("/sessions").json()["sessions"]
    assert any(s["id"] == sid and s["status"] == "CREATED" for s in listing)
    view = client.get(f"/sessions/{sid}").json()
    assert view["prompt"] == "A wide bowl"
    assert view["current_labels"] == []
