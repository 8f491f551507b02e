"""MCP client: connect over stdio, SSE, or streamable HTTP; list and call tools.

JSON-RPC 2.0 throughout. A session serializes writes but pipelines in-flight
requests correlated by id. Registered endpoints share one session with a
single automatic reconnect before a transport failure surfaces.
"""

from __future__ import annotations

import itertools
import json
import os
import queue
import subprocess
import sys
import threading
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator
from urllib.parse import urljoin, urlsplit

import httpx

from .errors import (
    CallTimeoutError,
    DuplicateNameError,
    HandshakeRejectedError,
    RpcError,
    ToolRaisedError,
    TransportUnreachableError,
    UnsupportedSchemaFeatureError,
    VersionUnsupportedError,
)
from .model import Tool, render_tool_name, validate_schema_dialect
from .registry import ToolRegistry

SUPPORTED_PROTOCOL_VERSIONS = ("2025-03-26", "2024-11-05")
TRANSPORTS = ("stdio", "sse", "streamable-http")


@dataclass(frozen=True)
class McpEndpoint:
    transport: str
    url: str | None = None
    command: str | None = None
    args: tuple = ()
    env: dict = field(default_factory=dict)
    request_timeout: float = 30.0

    def __post_init__(self):
        if self.transport not in TRANSPORTS:
            raise ValueError(f"transport must be one of {TRANSPORTS}")
        if self.transport == "stdio":
            if not self.command:
                raise ValueError("stdio endpoints need a command")
        else:
            parts = urlsplit(self.url or "")
            if parts.scheme not in ("http", "https") or not parts.netloc:
                raise ValueError(f"{self.transport} endpoints need an http(s) url")
        object.__setattr__(self, "args", tuple(self.args))

    @classmethod
    def from_url(cls, url: str, request_timeout: float = 30.0) -> "McpEndpoint":
        transport = "sse" if urlsplit(url).path.rstrip("/").endswith("sse") else "streamable-http"
        return cls(transport=transport, url=url, request_timeout=request_timeout)

    @classmethod
    def from_dict(cls, data: dict) -> "McpEndpoint":
        return cls(
            transport=data["transport"],
            url=data.get("url"),
            command=data.get("command"),
            args=tuple(data.get("args") or ()),
            env=dict(data.get("env") or {}),
            request_timeout=float(
                data.get("request_timeout", data.get("request_timeout_s", 30.0))
            ),
        )

    def to_dict(self) -> dict:
        return {
            "transport": self.transport,
            "url": self.url,
            "command": self.command,
            "args": list(self.args),
            "env": dict(self.env),
            "request_timeout": self.request_timeout,
        }


# --- transports --------------------------------------------------------------------

class _PendingMap:
    """Correlates in-flight request ids with waiting callers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._waiters: dict[Any, queue.SimpleQueue] = {}
        self._dead: Exception | None = None

    def add(self, request_id: Any) -> queue.SimpleQueue:
        with self._lock:
            if self._dead is not None:
                raise TransportUnreachableError(str(self._dead))
            waiter: queue.SimpleQueue = queue.SimpleQueue()
            self._waiters[request_id] = waiter
            return waiter

    def remove(self, request_id: Any) -> None:
        with self._lock:
            self._waiters.pop(request_id, None)

    def deliver(self, message: dict) -> None:
        with self._lock:
            waiter = self._waiters.get(message.get("id"))
        if waiter is not None:
            waiter.put(message)

    def fail_all(self, exc: Exception) -> None:
        with self._lock:
            self._dead = exc
            waiters = list(self._waiters.values())
            self._waiters.clear()
        for waiter in waiters:
            waiter.put(None)

    def wait(self, waiter: queue.SimpleQueue, timeout: float) -> dict:
        try:
            message = waiter.get(timeout=timeout)
        except queue.Empty:
            raise CallTimeoutError("no response before the request timeout") from None
        if message is None:
            raise TransportUnreachableError("transport closed while waiting for a response")
        return message


def _iter_sse_events(lines: Iterator[str]) -> Iterator[tuple[str, str]]:
    event, data = "message", []
    for line in lines:
        if line == "":
            if data:
                yield event, "\n".join(data)
            event, data = "message", []
        elif line.startswith(":"):
            continue
        elif line.startswith("event:"):
            event = line[len("event:"):].strip()
        elif line.startswith("data:"):
            data.append(line[len("data:"):].lstrip())


class _SseTransport:
    """Classic HTTP+SSE: responses stream back on a long-lived GET.

    Request writes are serialized over one connection (a session is an
    ordered message stream); responses pipeline freely via the stream.
    """

    def __init__(self, url: str, request_timeout: float):
        self._stream_client = httpx.Client(timeout=httpx.Timeout(10.0, read=None))
        self._post_client = httpx.Client(
            timeout=request_timeout, limits=httpx.Limits(max_connections=1)
        )
        self._write_lock = threading.Lock()
        self._pending = _PendingMap()
        try:
            request = self._stream_client.build_request(
                "GET", url, headers={"Accept": "text/event-stream"}
            )
            self._response = self._stream_client.send(request, stream=True)
        except httpx.TransportError as exc:
            self._stream_client.close()
            self._post_client.close()
            raise TransportUnreachableError(f"cannot open SSE stream at {url}: {exc}") from exc
        if self._response.status_code != 200:
            self.close()
            raise TransportUnreachableError(
                f"SSE stream at {url} answered HTTP {self._response.status_code}"
            )
        self._events = _iter_sse_events(self._response.iter_lines())
        try:
            first = next(self._events, None)
        except httpx.TransportError as exc:
            self.close()
            raise TransportUnreachableError(f"SSE stream failed: {exc}") from exc
        if first is None or first[0] != "endpoint":
            self.close()
            raise TransportUnreachableError("server did not announce a message endpoint")
        self._post_url = urljoin(url, first[1])
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        error: Exception | None = None
        try:
            for event, data in self._events:
                if event != "message":
                    continue
                try:
                    message = json.loads(data)
                except json.JSONDecodeError:
                    continue
                self._pending.deliver(message)
        except Exception as exc:  # stream died
            error = exc
        finally:
            self._pending.fail_all(error or TransportUnreachableError("SSE stream closed"))

    def _post(self, payload: dict) -> None:
        try:
            with self._write_lock:
                response = self._post_client.post(self._post_url, json=payload)
        except httpx.TransportError as exc:
            raise TransportUnreachableError(f"POST to MCP endpoint failed: {exc}") from exc
        if response.status_code >= 300:
            raise RpcError(
                -32000, f"MCP endpoint answered HTTP {response.status_code}", transient=True
            )

    def request(self, payload: dict, timeout: float) -> dict:
        waiter = self._pending.add(payload["id"])
        try:
            self._post(payload)
            return self._pending.wait(waiter, timeout)
        finally:
            self._pending.remove(payload["id"])

    def notify(self, payload: dict) -> None:
        self._post(payload)

    def close(self) -> None:
        try:
            self._response.close()
        except Exception:
            pass
        self._stream_client.close()
        self._post_client.close()


class _StreamableHttpTransport:
    """Streamable HTTP: each POST carries its response (JSON or a short SSE body)."""

    def __init__(self, url: str, request_timeout: float):
        self._url = url
        self._client = httpx.Client(timeout=request_timeout)
        self._session_id: str | None = None

    def _headers(self) -> dict:
        headers = {"Accept": "application/json, text/event-stream"}
        if self._session_id:
            headers["Mcp-Session-Id"] = self._session_id
        return headers

    def request(self, payload: dict, timeout: float) -> dict:
        try:
            response = self._client.post(
                self._url, json=payload, headers=self._headers(), timeout=timeout
            )
        except httpx.TimeoutException as exc:
            raise CallTimeoutError(f"POST to {self._url} timed out") from exc
        except httpx.TransportError as exc:
            raise TransportUnreachableError(f"POST to {self._url} failed: {exc}") from exc
        if response.status_code >= 300:
            raise RpcError(
                -32000, f"MCP endpoint answered HTTP {response.status_code}", transient=True
            )
        if self._session_id is None:
            self._session_id = response.headers.get("Mcp-Session-Id")
        content_type = response.headers.get("Content-Type", "")
        if content_type.startswith("text/event-stream"):
            for event, data in _iter_sse_events(iter(response.text.splitlines())):
                if event == "message":
                    return json.loads(data)
            raise RpcError(-32000, "event stream carried no response", transient=True)
        try:
            return response.json()
        except json.JSONDecodeError as exc:
            raise RpcError(-32700, f"response is not valid JSON: {exc}", transient=True) from exc

    def notify(self, payload: dict) -> None:
        try:
            self._client.post(self._url, json=payload, headers=self._headers())
        except httpx.TransportError as exc:
            raise TransportUnreachableError(f"POST to {self._url} failed: {exc}") from exc

    def close(self) -> None:
        self._client.close()


class _StdioTransport:
    """Newline-delimited JSON-RPC over a child process's stdin/stdout."""

    def __init__(self, endpoint: "McpEndpoint"):
        env = dict(os.environ, **endpoint.env)
        try:
            self._proc = subprocess.Popen(
                [endpoint.command, *endpoint.args],
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                env=env,
            )
        except OSError as exc:
            raise TransportUnreachableError(f"cannot spawn MCP server: {exc}") from exc
        self._write_lock = threading.Lock()
        self._pending = _PendingMap()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        try:
            for line in self._proc.stdout:
                line = line.strip()
                if not line:
                    continue
                try:
                    message = json.loads(line)
                except json.JSONDecodeError:
                    continue
                self._pending.deliver(message)
        finally:
            self._pending.fail_all(TransportUnreachableError("MCP server closed its pipe"))

    def _write(self, payload: dict) -> None:
        data = json.dumps(payload, separators=(",", ":")).encode("utf-8") + b"\n"
        try:
            with self._write_lock:
                self._proc.stdin.write(data)
                self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise TransportUnreachableError(f"cannot write to MCP server: {exc}") from exc

    def request(self, payload: dict, timeout: float) -> dict:
        waiter = self._pending.add(payload["id"])
        try:
            self._write(payload)
            return self._pending.wait(waiter, timeout)
        finally:
            self._pending.remove(payload["id"])

    def notify(self, payload: dict) -> None:
        self._write(payload)

    def close(self) -> None:
        try:
            self._proc.stdin.close()
            self._proc.wait(timeout=2)
        except (OSError, subprocess.TimeoutExpired):
            self._proc.kill()
            self._proc.wait()


def _open_transport(endpoint: McpEndpoint):
    if endpoint.transport == "sse":
        return _SseTransport(endpoint.url, endpoint.request_timeout)
    if endpoint.transport == "streamable-http":
        return _StreamableHttpTransport(endpoint.url, endpoint.request_timeout)
    return _StdioTransport(endpoint)


# --- session -----------------------------------------------------------------------

class McpSession:
    """Live MCP connection after a successful initialize handshake."""

    def __init__(self, endpoint, transport, protocol_version, server_info, capabilities):
        self.endpoint = endpoint
        self.protocol_version = protocol_version
        self.server_info = server_info
        self.capabilities = capabilities
        self._transport = transport
        self._ids = itertools.count(2)  # initialize used id 1
        self._id_lock = threading.Lock()

    @property
    def server_name(self) -> str:
        return self.server_info.get("name", "")

    def next_request_id(self) -> int:
        with self._id_lock:
            return next(self._ids)

    def request(self, method: str, params: dict | None = None) -> Any:
        payload: dict = {"jsonrpc": "2.0", "id": self.next_request_id(), "method": method}
        if params is not None:
            payload["params"] = params
        message = self._transport.request(payload, self.endpoint.request_timeout)
        if "error" in message:
            error = message["error"] or {}
            raise RpcError(error.get("code", -32603), error.get("message", "server error"))
        return message.get("result")

    def notify(self, method: str, params: dict | None = None) -> None:
        payload: dict = {"jsonrpc": "2.0", "method": method}
        if params is not None:
            payload["params"] = params
        self._transport.notify(payload)

    def close(self) -> None:
        self._transport.close()


def mcp_connect(endpoint: McpEndpoint | str) -> McpSession:
    """Open a transport, run the initialize handshake, and return the session."""
    if isinstance(endpoint, str):
        endpoint = McpEndpoint.from_url(endpoint)
    transport = _open_transport(endpoint)
    try:
        payload = {
            "jsonrpc": "2.0",
            "id": 1,
            "method": "initialize",
            "params": {
                "protocolVersion": SUPPORTED_PROTOCOL_VERSIONS[0],
                "capabilities": {},
                "clientInfo": {"name": "tooldock", "version": "0.1.0"},
            },
        }
        try:
            message = transport.request(payload, endpoint.request_timeout)
        except RpcError as exc:
            if exc.transient:
                raise TransportUnreachableError(str(exc)) from exc
            raise HandshakeRejectedError(str(exc)) from exc
        if "error" in message:
            raise HandshakeRejectedError(f"initialize rejected: {message['error']}")
        result = message.get("result")
        if not isinstance(result, dict) or not isinstance(result.get("serverInfo"), dict):
            raise HandshakeRejectedError(f"malformed initialize result: {result!r}")
        version = result.get("protocolVersion")
        if not isinstance(version, str):
            raise HandshakeRejectedError("initialize result lacks a protocol version")
        if version not in SUPPORTED_PROTOCOL_VERSIONS:
            raise VersionUnsupportedError(f"server insists on protocol {version!r}")
        transport.notify({"jsonrpc": "2.0", "method": "notifications/initialized"})
        return McpSession(
            endpoint=endpoint,
            transport=transport,
            protocol_version=version,
            server_info=result["serverInfo"],
            capabilities=result.get("capabilities") or {},
        )
    except Exception:
        transport.close()
        raise


def mcp_list_tools(session: McpSession) -> list[dict]:
    """Enumerate the server's tool descriptors, following pagination cursors."""
    tools: list[dict] = []
    cursor: str | None = None
    while True:
        params = {"cursor": cursor} if cursor else None
        result = session.request("tools/list", params) or {}
        tools.extend(result.get("tools", []))
        cursor = result.get("nextCursor")
        if not cursor:
            return tools


EMPTY_OBJECT_SCHEMA = {"type": "object", "properties": {}, "required": []}

_DROPPED_DESCRIPTOR_KEYWORDS = {"$schema", "title"}


def _translate_descriptor_schema(schema: Any) -> dict:
    if not isinstance(schema, dict):
        raise UnsupportedSchemaFeatureError("non-object schema")
    out: dict = {}
    for key, value in schema.items():
        if key in _DROPPED_DESCRIPTOR_KEYWORDS:
            continue
        if key == "additionalProperties":
            if value is False:
                continue  # our validation already rejects unknown keys
            raise UnsupportedSchemaFeatureError("additionalProperties")
        if key == "properties":
            out["properties"] = {
                name: _translate_descriptor_schema(sub) for name, sub in value.items()
            }
        elif key == "items":
            out["items"] = _translate_descriptor_schema(value)
        elif key == "anyOf":
            out["anyOf"] = [_translate_descriptor_schema(branch) for branch in value]
        elif key in ("type", "required", "enum", "description", "default"):
            out[key] = value
        else:
            raise UnsupportedSchemaFeatureError(key)
    return out


def _reduce_content(result: dict) -> Any:
    """Collapse tools/call content blocks into one JSON value."""

    def block_payload(block: dict) -> Any:
        if block.get("type") == "text":
            text = block.get("text", "")
            try:
                return json.loads(text)
            except json.JSONDecodeError:
                return text
        return block

    blocks = result.get("content") or []
    if result.get("isError"):
        texts = [b.get("text", "") for b in blocks if b.get("type") == "text"]
        raise ToolRaisedError(" ".join(texts).strip() or "tool reported an error")
    if not blocks:
        return None
    if len(blocks) == 1:
        return block_payload(blocks[0])
    return [block_payload(b) for b in blocks]


def mcp_call_tool(session: McpSession, name: str, args: dict) -> Any:
    result = session.request("tools/call", {"name": name, "arguments": args})
    return _reduce_content(result or {})


def tool_from_mcp_descriptor(
    descriptor: dict, call: Callable[[str, dict], Any], *, replica: dict | None = None
) -> Tool:
    """Translate one MCP tool descriptor into a Tool bound to ``call``."""
    name = descriptor.get("name")
    if not name:
        raise ValueError("descriptor lacks a tool name")
    input_schema = descriptor.get("inputSchema")
    if input_schema is None:
        parameters = dict(EMPTY_OBJECT_SCHEMA)
    else:
        parameters = _translate_descriptor_schema(input_schema)
        parameters.setdefault("properties", {})
        parameters.setdefault("required", [])
    validate_schema_dialect(parameters)

    def invoke(arguments: dict) -> Any:
        return call(name, arguments)

    return Tool(
        name=name,
        description=descriptor.get("description", ""),
        parameters=parameters,
        invoker=invoke,
        origin="mcp",
        replica=replica,
    )


# --- session handles (one per endpoint, reconnect once) ------------------------------

class _SessionHandle:
    def __init__(self, endpoint: McpEndpoint):
        self.endpoint = endpoint
        self._session: McpSession | None = None
        self._lock = threading.Lock()

    def session(self) -> McpSession:
        with self._lock:
            if self._session is None:
                self._session = mcp_connect(self.endpoint)
            return self._session

    def _reset(self, broken: McpSession) -> None:
        with self._lock:
            if self._session is broken:
                self._session.close()
                self._session = None

    def call(self, name: str, args: dict) -> Any:
        session = self.session()
        try:
            return mcp_call_tool(session, name, args)
        except TransportUnreachableError:
            self._reset(session)  # one automatic reconnect, then surface
            return mcp_call_tool(self.session(), name, args)

    def ping(self) -> bool:
        try:
            self.session().request("ping")
            return True
        except Exception:
            return False

    def close(self) -> None:
        with self._lock:
            if self._session is not None:
                self._session.close()
                self._session = None


_handles: dict[str, _SessionHandle] = {}
_handles_lock = threading.Lock()


def _handle_for(endpoint: McpEndpoint) -> _SessionHandle:
    key = json.dumps(endpoint.to_dict(), sort_keys=True)
    with _handles_lock:
        handle = _handles.get(key)
        if handle is None:
            handle = _SessionHandle(endpoint)
            _handles[key] = handle
        return handle


def close_sessions() -> None:
    with _handles_lock:
        handles = list(_handles.values())
        _handles.clear()
    for handle in handles:
        handle.close()


def register_from_mcp(
    registry: ToolRegistry,
    endpoint: McpEndpoint | str,
    with_namespace: bool | str = False,
) -> list[str]:
    """Connect, enumerate, translate, and register the server's tools."""
    if isinstance(endpoint, str):
        endpoint = McpEndpoint.from_url(endpoint)
    handle = _handle_for(endpoint)
    session = handle.session()
    descriptors = mcp_list_tools(session)

    if with_namespace is True:
        namespace = session.server_name.lower() or None
    elif with_namespace:
        namespace = with_namespace
    else:
        namespace = None

    staged: list[Tool] = []
    seen: set[str] = set()
    for descriptor in descriptors:
        replica = {
            "kind": "mcp_tool",
            "endpoint": endpoint.to_dict(),
            "tool": descriptor["name"],
        }
        tool = tool_from_mcp_descriptor(descriptor, handle.call, replica=replica)
        name = render_tool_name(tool.name, namespace, registry.separator)
        if name in seen:
            raise DuplicateNameError(f"server lists {name!r} twice")
        seen.add(name)
        staged.append(tool.renamed(name))
    for tool in staged:
        if tool.name in registry:
            raise DuplicateNameError(f"tool {tool.name!r} already registered")
    for tool in staged:
        registry._tools[tool.name] = tool
    registry._sync_namespaces()
    return [t.name for t in staged]


def invoker_from_replica(replica: dict) -> Callable[[dict], Any]:
    """Rebuild the tools/call invoker inside a worker process."""
    endpoint = McpEndpoint.from_dict(replica["endpoint"])
    mcp_name = replica["tool"]

    def invoke(arguments: dict) -> Any:
        return _handle_for(endpoint).call(mcp_name, arguments)

    return invoke


def probe_from_replica(replica: dict) -> bool:
    endpoint = McpEndpoint.from_dict(replica["endpoint"])
    return _handle_for(endpoint).ping()
