"""Fixture server configuration and the shared threaded-HTTP plumbing."""

from __future__ import annotations

import errno
import random
import threading
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import PortInUseError

FAILURE_KINDS = ("http-500", "drop-connection", "rpc-error")


@dataclass
class FixtureConfig:
    port: int = 0  # 0 picks a free port
    artificial_latency: float = 0.0  # seconds added to every handled call
    failure_rate: float = 0.0
    failure_kind: str = "http-500"
    fail_first: int = 0  # scripted: fail exactly the first N calls
    tools_page_size: int | None = None  # MCP tools/list pagination
    malformed_initialize: bool = False  # MCP handshake fault
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError("failure_rate must be within [0, 1]")
        if self.failure_kind not in FAILURE_KINDS:
            raise ValueError(f"failure_kind must be one of {FAILURE_KINDS}")


class FixtureServer:
    """A ThreadingHTTPServer wrapper with fault injection bookkeeping."""

    def __init__(self, config: FixtureConfig, handler: type[BaseHTTPRequestHandler]):
        self.config = config
        try:
            self._httpd = ThreadingHTTPServer(("127.0.0.1", config.port), handler)
        except OSError as exc:
            if exc.errno in (errno.EADDRINUSE, errno.EACCES):
                raise PortInUseError(f"port {config.port} is already in use") from exc
            raise
        self._httpd.daemon_threads = True
        self._httpd.fixture = self  # handlers reach back through self.server.fixture
        self._thread: threading.Thread | None = None
        self._lock = threading.Lock()
        self._fail_budget = config.fail_first
        self._rng = random.Random(config.seed)

    @property
    def port(self) -> int:
        return self._httpd.server_address[1]

    @property
    def base_url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    def injected_failure(self) -> str | None:
        """Failure kind to inject for the current call, if any."""
        with self._lock:
            if self._fail_budget > 0:
                self._fail_budget -= 1
                return self.config.failure_kind
            if self.config.failure_rate and self._rng.random() < self.config.failure_rate:
                return self.config.failure_kind
        return None

    def start(self) -> "FixtureServer":
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=5)

    def __enter__(self) -> "FixtureServer":
        return self.start()

    def __exit__(self, *exc_info) -> None:
        self.stop()


class QuietHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"

    def log_message(self, format, *args):  # noqa: A002 - stdlib signature
        pass

    def drop_connection(self) -> None:
        """Abort the socket without a response; clients see a reset/EOF."""
        self.close_connection = True
        try:
            self.connection.close()
        except OSError:
            pass

    def send_json(self, status: int, payload, headers: dict | None = None) -> None:
        import json

        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        for key, value in (headers or {}).items():
            self.send_header(key, value)
        self.end_headers()
        self.wfile.write(body)
