"""Embedding providers: a pure seeded mock, an HTTP client, and a mock server.

Wire protocol: POST /embed with body {"kind": "text"|"frame", "items": [...]}
returns {"vectors": [[...], ...]}.  Clients normalise vectors to unit length
unless the service already guarantees it.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from .errors import ContractError, PipelineError
from .seeding import rng_for


class MockEmbedder:
    """Seeded hash -> pseudo-random unit vector; pure and stable across runs."""

    def __init__(self, dim: int = 16, salt: str = "mock-embedder"):
        if dim < 2:
            raise ContractError("embedding dim must be at least 2")
        self.dim = dim
        self.salt = salt

    def _vector(self, kind: str, item: str) -> np.ndarray:
        v = rng_for(self.salt, kind, item).standard_normal(self.dim)
        return v / np.linalg.norm(v)

    def text_embed(self, text: str) -> np.ndarray:
        return self._vector("text", text)

    def frame_embed(self, frame_ref: str) -> np.ndarray:
        return self._vector("frame", frame_ref)


class RemoteEmbedder:
    """Client for the /embed wire protocol with configurable timeout and retries."""

    def __init__(
        self,
        base_url: str,
        timeout: float = 5.0,
        retries: int = 2,
        normalize: bool = True,
    ):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.normalize = normalize

    def _post(self, kind: str, items: list[str]) -> list[np.ndarray]:
        payload = {"kind": kind, "items": items}
        last_error: Exception | None = None
        for _ in range(self.retries + 1):
            try:
                resp = requests.post(
                    f"{self.base_url}/embed", json=payload, timeout=self.timeout
                )
                resp.raise_for_status()
                vectors = [np.asarray(v, dtype=np.float64) for v in resp.json()["vectors"]]
                if len(vectors) != len(items):
                    raise PipelineError("embedding service returned a short batch")
                if self.normalize:
                    vectors = [v / np.linalg.norm(v) for v in vectors]
                return vectors
            except (requests.RequestException, KeyError, ValueError) as exc:
                last_error = exc
        raise PipelineError(f"embedding service unreachable after retries: {last_error}")

    def text_embed(self, text: str) -> np.ndarray:
        return self._post("text", [text])[0]

    def frame_embed(self, frame_ref: str) -> np.ndarray:
        return self._post("frame", [frame_ref])[0]


def make_embed_server(embedder: MockEmbedder, port: int = 0) -> ThreadingHTTPServer:
    """HTTP server exposing ``embedder`` over the wire protocol; safe for concurrent calls."""

    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def do_POST(self):
            if self.path != "/embed":
                self.send_error(404)
                return
            try:
                length = int(self.headers.get("Content-Length", "0"))
                body = json.loads(self.rfile.read(length))
                kind = body["kind"]
                items = body["items"]
                if kind not in ("text", "frame") or not isinstance(items, list):
                    raise ValueError("bad request")
                embed = embedder.text_embed if kind == "text" else embedder.frame_embed
                vectors = [embed(str(item)).tolist() for item in items]
            except (ValueError, KeyError, json.JSONDecodeError):
                self.send_error(400, "expected {kind: text|frame, items: [...]}")
                return
            payload = json.dumps({"vectors": vectors}).encode("utf-8")
            self.send_response(200)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

    return ThreadingHTTPServer(("127.0.0.1", port), Handler)


def serve_forever_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread
