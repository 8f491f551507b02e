"""MCP calculator fixture: JSON-RPC 2.0 over SSE or streamable HTTP.

SSE transport: GET /sse opens the event stream (first event names the POST
endpoint), requests go to POST /messages?session_id=... and responses come
back as ``message`` events. Streamable transport: POST /mcp answers each
request directly with JSON.
"""

from __future__ import annotations

import json
import queue
import threading
import time
import uuid
from urllib.parse import parse_qsl, urlsplit

from ..hub import Calculator
from .config import FixtureConfig, FixtureServer, QuietHandler

SUPPORTED_VERSIONS = ("2025-03-26", "2024-11-05")
SERVER_INFO = {"name": "calculator", "version": "1.0.0"}

_OPERATIONS = {
    "add": Calculator.add,
    "subtract": Calculator.subtract,
    "multiply": Calculator.multiply,
    "divide": Calculator.divide,
}

_NUMBER_PAIR_SCHEMA = {
    "type": "object",
    "properties": {"a": {"type": "number"}, "b": {"type": "number"}},
    "required": ["a", "b"],
}


def tool_descriptors() -> list[dict]:
    return [
        {
            "name": name,
            "description": f"{name.capitalize()} two numbers.",
            "inputSchema": _NUMBER_PAIR_SCHEMA,
        }
        for name in _OPERATIONS
    ]


def _rpc_response(request_id, result=None, error=None) -> dict:
    message: dict = {"jsonrpc": "2.0", "id": request_id}
    if error is not None:
        message["error"] = error
    else:
        message["result"] = result
    return message


def _validate_call_arguments(schema: dict, arguments: dict) -> str | None:
    """Check arguments against the tool's inputSchema, as real servers do."""
    if not isinstance(arguments, dict):
        return "arguments must be an object"
    properties = schema.get("properties", {})
    for key in arguments:
        if key not in properties:
            return f"unknown argument {key!r}"
    for key in schema.get("required", []):
        if key not in arguments:
            return f"missing required argument {key!r}"
    for key, sub in properties.items():
        if key not in arguments:
            continue
        value = arguments[key]
        if sub.get("type") == "number" and (isinstance(value, bool) or
                                            not isinstance(value, (int, float))):
            return f"argument {key!r} must be a number"
    return None


def _handle_request(config: FixtureConfig, message: dict, state: dict | None = None) -> dict | None:
    """Compute the JSON-RPC response; None for notifications.

    ``state`` tracks per-session handshake progress when the transport has
    session identity (the SSE dispatcher passes one).
    """
    method = message.get("method")
    request_id = message.get("id")
    if request_id is None:
        if method == "notifications/initialized" and state is not None:
            state["initialized"] = True
        return None
    params = message.get("params") or {}

    if method == "initialize":
        if config.malformed_initialize:
            return _rpc_response(request_id, result={"unexpected": "shape"})
        offered = params.get("protocolVersion")
        version = offered if offered in SUPPORTED_VERSIONS else SUPPORTED_VERSIONS[0]
        if state is not None:
            state["handshake"] = True
        return _rpc_response(
            request_id,
            result={
                "protocolVersion": version,
                "capabilities": {"tools": {}},
                "serverInfo": SERVER_INFO,
            },
        )
    if method == "ping":
        return _rpc_response(request_id, result={})
    if state is not None and not state.get("handshake"):
        return _rpc_response(
            request_id, error={"code": -32002, "message": "session not initialized"}
        )
    if method == "tools/list":
        tools = tool_descriptors()
        page_size = config.tools_page_size
        if not page_size:
            return _rpc_response(request_id, result={"tools": tools})
        start = int(params.get("cursor") or 0)
        page = tools[start : start + page_size]
        result: dict = {"tools": page}
        if start + page_size < len(tools):
            result["nextCursor"] = str(start + page_size)
        return _rpc_response(request_id, result=result)
    if method == "tools/call":
        name = params.get("name")
        fn = _OPERATIONS.get(name)
        if fn is None:
            return _rpc_response(
                request_id, error={"code": -32602, "message": f"unknown tool: {name}"}
            )
        if config.artificial_latency:
            time.sleep(config.artificial_latency)
        arguments = params.get("arguments") or {}
        problem = _validate_call_arguments(_NUMBER_PAIR_SCHEMA, arguments)
        if problem is not None:
            return _rpc_response(
                request_id, error={"code": -32602, "message": f"invalid arguments: {problem}"}
            )
        try:
            value = fn(arguments["a"], arguments["b"])
        except ZeroDivisionError as exc:
            return _rpc_response(
                request_id,
                result={"content": [{"type": "text", "text": str(exc)}], "isError": True},
            )
        return _rpc_response(
            request_id,
            result={"content": [{"type": "text", "text": json.dumps(value)}]},
        )
    return _rpc_response(request_id, error={"code": -32601, "message": f"method not found: {method}"})


class _SseSession:
    """One SSE session: an ordered JSON-RPC message stream.

    Requests are dispatched by a single thread in arrival order, matching
    the sequential semantics of a JSON-RPC session; responses stream back
    through the outbox.
    """

    def __init__(self, config: FixtureConfig):
        self.inbox: queue.Queue = queue.Queue()
        self.outbox: queue.Queue = queue.Queue()
        self.state: dict = {}
        self._config = config
        self._thread = threading.Thread(target=self._dispatch_loop, daemon=True)
        self._thread.start()

    def _dispatch_loop(self) -> None:
        while True:
            item = self.inbox.get()
            if item is None:
                return
            kind, payload = item
            if kind == "response":  # pre-computed (injected) response
                self.outbox.put(payload)
                continue
            response = _handle_request(self._config, payload, self.state)
            if response is not None:
                self.outbox.put(response)

    def close(self) -> None:
        self.inbox.put(None)


class _Handler(QuietHandler):
    def _read_body(self) -> bytes:
        length = int(self.headers.get("Content-Length") or 0)
        return self.rfile.read(length) if length else b""

    def _inject(self, message: dict) -> dict | str | None:
        """Failure to inject for this message: response dict, 'drop', or None."""
        if message.get("method") != "tools/call":
            return None
        kind = self.server.fixture.injected_failure()
        if kind is None:
            return None
        if kind == "drop-connection":
            return "drop"
        if kind == "rpc-error":
            return _rpc_response(
                message.get("id"), error={"code": -32000, "message": "injected failure"}
            )
        return {"__http_500__": True}

    # --- SSE transport -------------------------------------------------------

    def do_GET(self):
        fixture = self.server.fixture
        if urlsplit(self.path).path != "/sse" or fixture.transport != "sse":
            self.send_json(404, {"error": "not found"})
            return
        session_id = uuid.uuid4().hex
        session = _SseSession(fixture.config)
        with fixture.sessions_lock:
            fixture.sessions[session_id] = session
        try:
            self.send_response(200)
            self.send_header("Content-Type", "text/event-stream")
            self.send_header("Cache-Control", "no-cache")
            self.end_headers()
            self._sse_event("endpoint", f"/messages?session_id={session_id}")
            while True:
                try:
                    message = session.outbox.get(timeout=10)
                except queue.Empty:
                    self.wfile.write(b": keepalive\n\n")
                    self.wfile.flush()
                    continue
                self._sse_event("message", json.dumps(message))
        except OSError:
            pass
        finally:
            session.close()
            with fixture.sessions_lock:
                fixture.sessions.pop(session_id, None)

    def _sse_event(self, event: str, data: str) -> None:
        self.wfile.write(f"event: {event}\ndata: {data}\n\n".encode("utf-8"))
        self.wfile.flush()

    def do_POST(self):
        fixture = self.server.fixture
        split = urlsplit(self.path)
        try:
            message = json.loads(self._read_body() or b"{}")
        except json.JSONDecodeError:
            self.send_json(400, {"error": "body is not valid JSON"})
            return

        injected = self._inject(message)
        if injected == "drop":
            self.drop_connection()
            return
        if isinstance(injected, dict) and injected.get("__http_500__"):
            self.send_json(500, {"error": "injected failure"})
            return

        if fixture.transport == "sse" and split.path == "/messages":
            session_id = dict(parse_qsl(split.query)).get("session_id")
            with fixture.sessions_lock:
                session = fixture.sessions.get(session_id)
            if session is None:
                self.send_json(404, {"error": "unknown session"})
                return
            if injected is not None:
                session.inbox.put(("response", injected))
            else:
                session.inbox.put(("request", message))
            self.send_response(202)
            self.send_header("Content-Length", "0")
            self.end_headers()
            return

        if fixture.transport == "streamable-http" and split.path == "/mcp":
            response = injected or _handle_request(fixture.config, message)
            if response is None:
                self.send_response(202)
                self.send_header("Content-Length", "0")
                self.end_headers()
                return
            headers = {}
            if message.get("method") == "initialize":
                headers["Mcp-Session-Id"] = uuid.uuid4().hex
            self.send_json(200, response, headers=headers)
            return

        self.send_json(404, {"error": "not found"})


def serve_mcp_fixture(
    config: FixtureConfig | None = None, transport: str = "sse"
) -> FixtureServer:
    """Start the MCP calculator fixture over ``sse`` or ``streamable-http``."""
    if transport not in ("sse", "streamable-http"):
        raise ValueError(f"unsupported transport {transport!r}")
    server = FixtureServer(config or FixtureConfig(), _Handler)
    server.transport = transport
    server.sessions = {}
    server.sessions_lock = threading.Lock()
    return server.start()
