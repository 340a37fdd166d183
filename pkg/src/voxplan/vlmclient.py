"""Chat-vision clients: HTTP chat-completion endpoint and transcript mock.

Requests are content-addressed: a digest over the system prompt, the turn
list, and the image bytes identifies a request. The mock client replays a
transcript file mapping digests to canned replies, which makes the whole
VLM pipeline runnable offline and byte-deterministic.
"""

from __future__ import annotations

import base64
import hashlib
import json
import os
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .errors import ConfigError, TransportError

__all__ = [
    "ChatMessage",
    "ChatRequest",
    "ClientConfig",
    "ChatVisionClient",
    "HttpChatVisionClient",
    "MockTranscriptClient",
    "TranscriptBuilder",
    "request_digest",
]


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "user" | "assistant"
    text: str


@dataclass(frozen=True)
class ChatRequest:
    """One round of the conversation; images ride on the first user turn."""

    system: str
    messages: tuple[ChatMessage, ...]
    images: tuple[bytes, ...] = ()


def request_digest(req: ChatRequest) -> str:
    payload = {
        "system": req.system,
        "turns": [{"role": m.role, "text": m.text} for m in req.messages],
        "images": [hashlib.sha256(img).hexdigest() for img in req.images],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


@dataclass(frozen=True)
class ClientConfig:
    base_url: str = ""
    api_key_env: str = "VOXPLAN_VLM_API_KEY"
    model: str = "gemini-2.5-pro"
    timeout_s: float = 60.0
    max_retries: int = 2  # correction rounds after the first attempt


class ChatVisionClient(ABC):
    """Interface shared by the HTTP client and the transcript mock."""

    max_retries: int = 2

    @abstractmethod
    def complete(self, req: ChatRequest) -> str:
        """Return the assistant's text reply for one request."""


class HttpChatVisionClient(ChatVisionClient):
    """OpenAI-style chat-completion endpoint with image parts."""

    def __init__(self, config: ClientConfig, session: requests.Session | None = None):
        if not config.base_url:
            raise ConfigError("vlm base_url is not configured")
        self.config = config
        self.max_retries = config.max_retries
        self._session = session or requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, req: ChatRequest) -> dict:
        messages: list[dict] = [{"role": "system", "content": req.system}]
        first_user = True
        for m in req.messages:
            if m.role == "user" and first_user:
                content: list[dict] = [{"type": "text", "text": m.text}]
                for img in req.images:
                    b64 = base64.b64encode(img).decode()
                    content.append(
                        {
                            "type": "image_url",
                            "image_url": {"url": f"data:image/png;base64,{b64}"},
                        }
                    )
                messages.append({"role": "user", "content": content})
                first_user = False
            else:
                messages.append({"role": m.role, "content": m.text})
        return {"model": self.config.model, "messages": messages}

    def complete(self, req: ChatRequest) -> str:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self._session.post(
                url,
                json=self._payload(req),
                headers=self._headers(),
                timeout=self.config.timeout_s,
            )
        except requests.RequestException as e:
            raise TransportError(f"vlm endpoint unreachable: {e}") from e
        if resp.status_code != 200:
            raise TransportError(f"vlm endpoint returned {resp.status_code}")
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as e:
            raise TransportError(f"malformed vlm response: {e}") from e
        if not isinstance(text, str):
            raise TransportError("vlm response content is not text")
        return text


class MockTranscriptClient(ChatVisionClient):
    """Replays canned responses keyed by request digest.

    A transcript entry may be a single string or a list of strings; lists
    are consumed in order for repeated identical requests (the last reply
    repeats once exhausted). Unknown digests raise TransportError.
    """

    def __init__(self, transcript: dict | str | Path, max_retries: int = 2):
        if isinstance(transcript, (str, Path)):
            with open(transcript, encoding="utf-8") as fh:
                transcript = json.load(fh)
        entries = transcript.get("entries", {})
        self._entries: dict[str, list[str]] = {
            k: (list(v) if isinstance(v, list) else [v]) for k, v in entries.items()
        }
        self._cursor: dict[str, int] = {}
        self.max_retries = max_retries

    def complete(self, req: ChatRequest) -> str:
        digest = request_digest(req)
        replies = self._entries.get(digest)
        if not replies:
            raise TransportError(f"transcript has no entry for request {digest[:12]}")
        i = self._cursor.get(digest, 0)
        reply = replies[min(i, len(replies) - 1)]
        self._cursor[digest] = i + 1
        return reply


@dataclass
class TranscriptBuilder:
    """Accumulates digest -> reply entries; see MockTranscriptClient."""

    entries: dict[str, list[str]] = field(default_factory=dict)

    def add(self, req: ChatRequest, reply: str) -> str:
        digest = request_digest(req)
        self.entries.setdefault(digest, []).append(reply)
        return digest

    def to_dict(self) -> dict:
        return {"version": 1, "entries": self.entries}

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8"
        )
