"""Application configuration: JSON file plus VOXPLAN_* environment overrides."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .geometry import ComponentSpec
from .plan import SourceStation, StationId
from .vlmclient import ChatVisionClient, ClientConfig, HttpChatVisionClient, MockTranscriptClient

__all__ = ["VlmSettings", "AppConfig", "load_config", "make_vlm_client"]


@dataclass(frozen=True)
class VlmSettings:
    mode: str = "mock"  # "mock" | "http"
    transcript: str | None = None
    client: ClientConfig = field(default_factory=ClientConfig)


@dataclass(frozen=True)
class AppConfig:
    component: ComponentSpec = field(default_factory=ComponentSpec)
    stations: tuple[SourceStation, SourceStation] = (
        SourceStation(StationId.S0_CONVEYOR, (-0.40, -0.40, 0.03)),
        SourceStation(StationId.S1_STACK, (-0.40, 0.40, 0.01)),
    )
    gripper: dict = field(
        default_factory=lambda: {"w_open": 0.085, "w_release": 0.085, "f_grab": 40.0}
    )
    h_safe: float | None = None  # default: 2 * structural_edge
    vlm: VlmSettings = field(default_factory=VlmSettings)
    sessions_root: Path = Path("sessions")
    canvas: tuple[int, int] = (1024, 1024)
    ui_dist: Path | None = None

    def plan_params(self) -> dict:
        return {
            "h_safe": self.h_safe if self.h_safe else 2.0 * self.component.structural_edge,
            **self.gripper,
        }


def _parse_canvas(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError as e:
        raise ConfigError(f"bad canvas {text!r}, expected WxH") from e


def load_config(path: str | Path | None = None, env: dict | None = None) -> AppConfig:
    env = dict(os.environ if env is None else env)
    doc: dict = {}
    if path:
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except (OSError, ValueError) as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e

    comp = doc.get("component", {})
    component = ComponentSpec(
        structural_edge=float(
            env.get("VOXPLAN_EDGE", comp.get("structural_edge", 0.30))
        ),
        panel_thickness=float(
            env.get("VOXPLAN_PANEL_THICKNESS", comp.get("panel_thickness", 0.02))
        ),
    )

    st = doc.get("stations", {})
    stations = (
        SourceStation(StationId.S0_CONVEYOR, tuple(st.get("s0", (-0.40, -0.40, 0.03)))),
        SourceStation(StationId.S1_STACK, tuple(st.get("s1", (-0.40, 0.40, 0.01)))),
    )

    grip = doc.get("gripper", {})
    gripper = {
        "w_open": float(grip.get("w_open", 0.085)),
        "w_release": float(grip.get("w_release", 0.085)),
        "f_grab": float(grip.get("f_grab", 40.0)),
    }
    h_safe = grip.get("h_safe")
    if "VOXPLAN_H_SAFE" in env:
        h_safe = float(env["VOXPLAN_H_SAFE"])

    vlm_doc = doc.get("vlm", {})
    vlm = VlmSettings(
        mode=env.get("VOXPLAN_VLM_MODE", vlm_doc.get("mode", "mock")),
        transcript=env.get("VOXPLAN_VLM_TRANSCRIPT", vlm_doc.get("transcript")),
        client=ClientConfig(
            base_url=env.get("VOXPLAN_VLM_URL", vlm_doc.get("base_url", "")),
            api_key_env=env.get(
                "VOXPLAN_VLM_API_KEY_ENV", vlm_doc.get("api_key_env", "VOXPLAN_VLM_API_KEY")
            ),
            model=env.get("VOXPLAN_VLM_MODEL", vlm_doc.get("model", "gemini-2.5-pro")),
            timeout_s=float(env.get("VOXPLAN_VLM_TIMEOUT", vlm_doc.get("timeout_s", 60.0))),
            max_retries=int(env.get("VOXPLAN_VLM_RETRIES", vlm_doc.get("max_retries", 2))),
        ),
    )

    ui_dist = env.get("VOXPLAN_UI_DIST", doc.get("ui_dist"))
    return AppConfig(
        component=component,
        stations=stations,
        gripper=gripper,
        h_safe=float(h_safe) if h_safe is not None else None,
        vlm=vlm,
        sessions_root=Path(env.get("VOXPLAN_SESSIONS_ROOT", doc.get("sessions_root", "sessions"))),
        canvas=_parse_canvas(env.get("VOXPLAN_CANVAS", doc.get("canvas", "1024x1024"))),
        ui_dist=Path(ui_dist) if ui_dist else None,
    )


def make_vlm_client(settings: VlmSettings) -> ChatVisionClient | None:
    """Build the configured client; None when mock mode has no transcript."""
    if settings.mode == "http":
        return HttpChatVisionClient(settings.client)
    if settings.mode == "mock":
        if not settings.transcript:
            return None
        return MockTranscriptClient(
            settings.transcript, max_retries=settings.client.max_retries
        )
    raise ConfigError(f"unknown vlm mode {settings.mode!r}")
