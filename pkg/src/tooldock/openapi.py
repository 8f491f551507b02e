"""OpenAPI 3.0/3.1 adapter: parse documents, register operations as tools,
and perform the HTTP invocations.

Path, query, and header parameters plus JSON request-body properties are
flattened into one object schema; each argument keeps exactly one location
binding so nothing is silently dropped at invocation time.
"""

from __future__ import annotations

import asyncio
import atexit
import base64
import json
import re
import threading
import weakref
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any
from urllib.parse import quote, urlencode, urlsplit

import aiohttp
import httpx
import urllib3
import yaml

from ._loopres import on_loop_close

from .errors import (
    ConnectionFailedError,
    CallTimeoutError,
    DuplicateNameError,
    HttpStatusError,
    SpecParseError,
    UnresolvableRefError,
    UnsupportedSchemaFeatureError,
    UnsupportedVersionError,
    register_secret,
)
from .model import Tool, render_tool_name, validate_schema_dialect
from .registry import ToolRegistry

MAX_REF_DEPTH = 32
BODY_METHODS = ("POST", "PUT", "PATCH")
HTTP_METHODS = ("GET", "POST", "PUT", "PATCH", "DELETE")

#: connection cap per client handle
MAX_CONNECTIONS = 64


# --- client configuration -------------------------------------------------------

@dataclass(frozen=True)
class BearerAuth:
    token: str


@dataclass(frozen=True)
class BasicAuth:
    username: str
    password: str


@dataclass(frozen=True)
class HttpClientConfig:
    base_url: str
    default_headers: dict = field(default_factory=dict)
    auth: BearerAuth | BasicAuth | None = None
    timeout: float = 10.0
    verify_tls: bool = True

    def __post_init__(self):
        parts = urlsplit(self.base_url)
        if parts.scheme not in ("http", "https") or not parts.netloc:
            raise ValueError(f"base_url must be absolute http(s), got {self.base_url!r}")
        if isinstance(self.auth, BearerAuth):
            if not self.auth.token:
                raise ValueError("bearer token must be non-empty")
            register_secret(self.auth.token)
        elif isinstance(self.auth, BasicAuth):
            if not self.auth.username or not self.auth.password:
                raise ValueError("basic credentials must be non-empty")
            register_secret(self.auth.password)

    def to_dict(self) -> dict:
        auth: dict | None = None
        if isinstance(self.auth, BearerAuth):
            auth = {"scheme": "bearer", "token": self.auth.token}
        elif isinstance(self.auth, BasicAuth):
            auth = {
                "scheme": "basic",
                "username": self.auth.username,
                "password": self.auth.password,
            }
        return {
            "base_url": self.base_url,
            "default_headers": dict(self.default_headers),
            "auth": auth,
            "timeout": self.timeout,
            "verify_tls": self.verify_tls,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HttpClientConfig":
        auth_data = data.get("auth")
        auth: BearerAuth | BasicAuth | None = None
        if auth_data:
            if auth_data.get("scheme") == "bearer":
                auth = BearerAuth(auth_data["token"])
            elif auth_data.get("scheme") == "basic":
                auth = BasicAuth(auth_data["username"], auth_data["password"])
            else:
                raise ValueError(f"unknown auth scheme {auth_data.get('scheme')!r}")
        return cls(
            base_url=data["base_url"],
            default_headers=dict(data.get("default_headers") or {}),
            auth=auth,
            timeout=float(data.get("timeout", 10.0)),
            verify_tls=bool(data.get("verify_tls", True)),
        )

    def auth_headers(self) -> dict:
        if isinstance(self.auth, BearerAuth):
            return {"Authorization": f"Bearer {self.auth.token}"}
        if isinstance(self.auth, BasicAuth):
            creds = f"{self.auth.username}:{self.auth.password}".encode("utf-8")
            return {"Authorization": f"Basic {base64.b64encode(creds).decode('ascii')}"}
        return {}


# shared connection pools, keyed by client config (reuse across calls);
# pool-level retries stay off because the executor owns retry policy
_pools: dict[str, urllib3.PoolManager] = {}
_pools_lock = threading.Lock()


def _pool_for(config: HttpClientConfig) -> urllib3.PoolManager:
    key = json.dumps(config.to_dict(), sort_keys=True)
    with _pools_lock:
        pool = _pools.get(key)
        if pool is None:
            pool = urllib3.PoolManager(
                maxsize=MAX_CONNECTIONS,
                retries=False,
                timeout=urllib3.Timeout(connect=config.timeout, read=config.timeout),
                headers={**config.default_headers, **config.auth_headers()},
                cert_reqs="CERT_REQUIRED" if config.verify_tls else "CERT_NONE",
            )
            _pools[key] = pool
        return pool


def _close_pools() -> None:
    with _pools_lock:
        for pool in _pools.values():
            pool.clear()
        _pools.clear()


atexit.register(_close_pools)

# async sessions are cached per running event loop (aiohttp sessions bind to
# the loop that created them) and closed when the batch's loop winds down
_loop_sessions: "weakref.WeakKeyDictionary[asyncio.AbstractEventLoop, dict]" = (
    weakref.WeakKeyDictionary()
)


def _session_for(config: HttpClientConfig) -> aiohttp.ClientSession:
    loop = asyncio.get_running_loop()
    sessions = _loop_sessions.get(loop)
    if sessions is None:
        sessions = {}
        _loop_sessions[loop] = sessions

        async def close_all(sessions=sessions):
            for session in sessions.values():
                await session.close()
            sessions.clear()

        on_loop_close(close_all)
    key = json.dumps(config.to_dict(), sort_keys=True)
    session = sessions.get(key)
    if session is None or session.closed:
        session = aiohttp.ClientSession(
            timeout=aiohttp.ClientTimeout(total=config.timeout),
            headers={**config.default_headers, **config.auth_headers()},
            connector=aiohttp.TCPConnector(
                limit=MAX_CONNECTIONS, ssl=None if config.verify_tls else False
            ),
        )
        sessions[key] = session
    return session


# --- document loading -------------------------------------------------------------

def _lookup_pointer(document: dict, ref: str) -> Any:
    node: Any = document
    for token in ref[2:].split("/"):
        token = token.replace("~1", "/").replace("~0", "~")
        if not isinstance(node, dict) or token not in node:
            raise UnresolvableRefError(f"reference target not found: {ref}")
        node = node[token]
    return node


def _resolve_refs(node: Any, document: dict, depth: int = 0) -> Any:
    if isinstance(node, dict):
        if "$ref" in node:
            ref = node["$ref"]
            if not isinstance(ref, str) or not ref.startswith("#/"):
                raise UnresolvableRefError(f"only internal references are resolved: {ref!r}")
            if depth >= MAX_REF_DEPTH:
                raise UnresolvableRefError(
                    f"reference chain exceeds depth {MAX_REF_DEPTH} (cycle?): {ref}"
                )
            return _resolve_refs(_lookup_pointer(document, ref), document, depth + 1)
        return {k: _resolve_refs(v, document, depth) for k, v in node.items()}
    if isinstance(node, list):
        return [_resolve_refs(v, document, depth) for v in node]
    return node


@dataclass(frozen=True)
class OpenApiSpec:
    """A parsed, reference-resolved OpenAPI document."""

    document: dict
    source: str | None = None

    @property
    def title(self) -> str:
        return self.document.get("info", {}).get("title", "")

    def operations(self) -> list[tuple[str, str, dict]]:
        """(method, path, operation) triples in document order."""
        out = []
        for path, item in self.document.get("paths", {}).items():
            if not isinstance(item, dict):
                continue
            shared_params = item.get("parameters", [])
            for method in HTTP_METHODS:
                operation = item.get(method.lower())
                if operation is None:
                    continue
                if shared_params:
                    merged = list(shared_params) + list(operation.get("parameters", []))
                    operation = {**operation, "parameters": merged}
                out.append((method, path, operation))
        return out


def load_openapi_spec(source: str | Path | dict) -> OpenApiSpec:
    """Load and resolve an OpenAPI document from a URL, path, or inline text."""
    origin: str | None = None
    if isinstance(source, dict):
        document = source
    else:
        text = str(source)
        if text.startswith(("http://", "https://")):
            origin = text
            try:
                response = httpx.get(text, timeout=10.0, follow_redirects=True)
                response.raise_for_status()
            except httpx.HTTPError as exc:
                raise ConnectionFailedError(f"cannot fetch spec from {text}: {exc}") from exc
            text = response.text
        elif "\n" not in text and Path(text).exists():
            origin = str(source)
            text = Path(text).read_text()
        try:
            document = json.loads(text)
        except json.JSONDecodeError:
            try:
                document = yaml.safe_load(text)
            except yaml.YAMLError as exc:
                raise SpecParseError(f"document is neither JSON nor YAML: {exc}") from exc
    if not isinstance(document, dict):
        raise SpecParseError("OpenAPI document must be a mapping")
    version = document.get("openapi")
    if not isinstance(version, str) or not version.startswith(("3.0", "3.1")):
        raise UnsupportedVersionError(f"unsupported OpenAPI version: {version!r}")
    return OpenApiSpec(document=_resolve_refs(document, document), source=origin)


# --- schema translation --------------------------------------------------------------

_DROPPED_KEYWORDS = {
    "title", "format", "example", "examples", "deprecated", "$schema",
    "externalDocs", "xml", "readOnly", "writeOnly",
}


def translate_schema(schema: Any) -> dict:
    """Restrict an OpenAPI schema to the internal dialect.

    ``oneOf`` maps to ``anyOf`` (exclusivity is not representable);
    3.0-style ``nullable: true`` becomes a union with null. Structural
    keywords outside the dialect are rejected.
    """
    if not isinstance(schema, dict):
        raise SpecParseError("schema must be an object")
    out: dict = {}
    nullable = bool(schema.get("nullable"))
    for key, value in schema.items():
        if key in _DROPPED_KEYWORDS or key == "nullable":
            continue
        if key == "additionalProperties":
            if value is False:
                continue  # validation already rejects unknown keys
            raise UnsupportedSchemaFeatureError("additionalProperties")
        if key in ("oneOf", "anyOf"):
            out["anyOf"] = [translate_schema(branch) for branch in value]
        elif key == "properties":
            out["properties"] = {name: translate_schema(sub) for name, sub in value.items()}
        elif key == "items":
            out["items"] = translate_schema(value)
        elif key in ("type", "required", "enum", "description", "default"):
            out[key] = value
        else:
            raise UnsupportedSchemaFeatureError(key)
    if nullable and "type" in out:
        out = {"anyOf": [{"type": out.pop("type"), **out}, {"type": "null"}]}
    return out


# --- operations --------------------------------------------------------------------

_PLACEHOLDER = re.compile(r"\{([^{}]+)\}")


@dataclass(frozen=True)
class HttpOperation:
    """One HTTP invocation recipe with per-argument location bindings."""

    operation_id: str
    method: str
    path_template: str
    param_bindings: dict  # arg name -> {path, query, header, body}
    request_body_content_type: str | None = None

    def __post_init__(self):
        if self.method not in HTTP_METHODS:
            raise ValueError(f"unsupported method {self.method!r}")
        placeholders = set(_PLACEHOLDER.findall(self.path_template))
        path_bound = {n for n, loc in self.param_bindings.items() if loc == "path"}
        if placeholders - path_bound:
            raise ValueError(f"unbound path placeholders: {sorted(placeholders - path_bound)}")
        body_bound = [n for n, loc in self.param_bindings.items() if loc == "body"]
        if body_bound and self.method not in BODY_METHODS:
            raise ValueError(f"{self.method} does not admit a request body")

    def to_dict(self) -> dict:
        return {
            "operation_id": self.operation_id,
            "method": self.method,
            "path_template": self.path_template,
            "param_bindings": dict(self.param_bindings),
            "request_body_content_type": self.request_body_content_type,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HttpOperation":
        return cls(
            operation_id=data["operation_id"],
            method=data["method"],
            path_template=data["path_template"],
            param_bindings=dict(data["param_bindings"]),
            request_body_content_type=data.get("request_body_content_type"),
        )


def _sanitized_default_name(method: str, path: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "_", path).strip("_")
    return f"{method.lower()}_{slug}" if slug else method.lower()


def _synthesize(method: str, path: str, operation: dict) -> tuple[str, str, dict, HttpOperation]:
    """(name, description, parameters schema, HttpOperation) for one operation."""
    properties: dict = {}
    required: list[str] = []
    bindings: dict = {}

    def bind(name: str, location: str, schema: dict, is_required: bool) -> None:
        if name in bindings:
            raise DuplicateNameError(
                f"argument {name!r} would bind to both {bindings[name]} and {location}"
            )
        bindings[name] = location
        properties[name] = schema
        if is_required:
            required.append(name)

    for param in operation.get("parameters", []):
        location = param.get("in")
        if location not in ("path", "query", "header"):
            continue  # cookies out of scope
        schema = translate_schema(param.get("schema", {}))
        if param.get("description") and "description" not in schema:
            schema["description"] = param["description"]
        bind(param["name"], location, schema, location == "path" or bool(param.get("required")))

    content_type: str | None = None
    body = operation.get("requestBody")
    if body:
        content = body.get("content", {})
        if "application/json" not in content:
            raise UnsupportedSchemaFeatureError(
                f"request body content types {sorted(content)} (only application/json)"
            )
        content_type = "application/json"
        body_schema = translate_schema(content["application/json"].get("schema", {}))
        body_required = set(body_schema.get("required", []))
        for name, sub in body_schema.get("properties", {}).items():
            bind(name, "body", sub, name in body_required)

    name = operation.get("operationId") or _sanitized_default_name(method, path)
    description = operation.get("description") or operation.get("summary") or ""
    parameters = {"type": "object", "properties": properties, "required": required}
    validate_schema_dialect(parameters)
    op = HttpOperation(
        operation_id=name,
        method=method,
        path_template=path,
        param_bindings=bindings,
        request_body_content_type=content_type,
    )
    return name, description, parameters, op


def _build_request(
    client: HttpClientConfig, op: HttpOperation, args: dict
) -> tuple[str, dict, bytes | None]:
    """(url, extra headers, body) for one invocation, from location bindings."""
    path = op.path_template
    params: dict = {}
    headers: dict = {}
    body: dict = {}
    for name, value in args.items():
        location = op.param_bindings.get(name)
        if location == "path":
            rendered = value if isinstance(value, str) else json.dumps(value)
            path = path.replace("{" + name + "}", quote(rendered, safe=""))
        elif location == "query":
            params[name] = value if isinstance(value, str) else json.dumps(value)
        elif location == "header":
            headers[name] = value if isinstance(value, str) else json.dumps(value)
        elif location == "body":
            body[name] = value
        else:
            raise ValueError(f"argument {name!r} has no location binding")
    url = client.base_url.rstrip("/") + path
    if params:
        url += "?" + urlencode(params)
    payload = None
    if body or op.request_body_content_type:
        payload = json.dumps(body).encode("utf-8")
        headers["Content-Type"] = "application/json"
    return url, headers, payload


def _parse_response(status: int, text: str, retry_after: str | None) -> Any:
    if not 200 <= status < 300:
        error = HttpStatusError(status, text)
        if retry_after is not None:
            try:
                error.retry_after = float(retry_after)
            except ValueError:
                pass
        raise error
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def invoke_http_operation(client: HttpClientConfig, op: HttpOperation, args: dict) -> Any:
    """Perform the HTTP request for validated arguments and parse the reply."""
    url, headers, payload = _build_request(client, op, args)
    try:
        response = _pool_for(client).request(
            op.method, url, body=payload, headers=headers or None
        )
    except (urllib3.exceptions.ConnectTimeoutError, urllib3.exceptions.ReadTimeoutError) as exc:
        raise CallTimeoutError(f"{op.method} {op.path_template} timed out") from exc
    except (urllib3.exceptions.HTTPError, OSError) as exc:
        raise ConnectionFailedError(f"{op.method} {op.path_template} failed: {exc}") from exc
    text = response.data.decode("utf-8", errors="replace")
    return _parse_response(response.status, text, response.headers.get("Retry-After"))


async def ainvoke_http_operation(
    client: HttpClientConfig, op: HttpOperation, args: dict
) -> Any:
    """Asynchronous twin of invoke_http_operation, sharing one pooled session
    per event loop."""
    url, headers, payload = _build_request(client, op, args)
    try:
        async with _session_for(client).request(
            op.method, url, data=payload, headers=headers or None
        ) as response:
            text = await response.text()
            retry_after = response.headers.get("Retry-After")
            status = response.status
    except asyncio.TimeoutError as exc:
        raise CallTimeoutError(f"{op.method} {op.path_template} timed out") from exc
    except aiohttp.ClientError as exc:
        raise ConnectionFailedError(f"{op.method} {op.path_template} failed: {exc}") from exc
    return _parse_response(status, text, retry_after)


def register_from_openapi(
    registry: ToolRegistry,
    client: HttpClientConfig,
    spec: OpenApiSpec,
    with_namespace: bool | str = False,
) -> list[str]:
    """Register one tool per operation; names follow operationId when present."""
    if with_namespace is True:
        namespace = spec.title.lower().replace(" ", "_") or None
    elif with_namespace:
        namespace = with_namespace
    else:
        namespace = None

    staged: list[Tool] = []
    seen: set[str] = set()
    for method, path, operation in spec.operations():
        raw_name, description, parameters, op = _synthesize(method, path, operation)
        replica = {"kind": "openapi_op", "client": client.to_dict(), "operation": op.to_dict()}
        tool = Tool(
            name=render_tool_name(raw_name, namespace, registry.separator),
            description=description,
            parameters=parameters,
            invoker=_make_async_invoker(client, op),
            is_async=True,
            origin="openapi",
            replica=replica,
        )
        if tool.name in seen:
            raise DuplicateNameError(f"spec yields duplicate tool name {tool.name!r}")
        seen.add(tool.name)
        staged.append(tool)
    for tool in staged:
        if tool.name in registry:
            raise DuplicateNameError(f"tool {tool.name!r} already registered")
    for tool in staged:
        registry._tools[tool.name] = tool
    registry._sync_namespaces()
    return [t.name for t in staged]


def _make_async_invoker(client: HttpClientConfig, op: HttpOperation):
    async def invoke(arguments: dict) -> Any:
        return await ainvoke_http_operation(client, op, arguments)

    return invoke


def invoker_from_replica(replica: dict):
    """Rebuild the HTTP invoker inside a worker process.

    Workers run calls one at a time, so the synchronous pooled client is the
    right fit there (no long-lived event loop to host a session).
    """
    client = HttpClientConfig.from_dict(replica["client"])
    op = HttpOperation.from_dict(replica["operation"])

    def invoke(arguments: dict) -> Any:
        return invoke_http_operation(client, op, arguments)

    return invoke


def probe_from_replica(replica: dict) -> bool:
    """Lightweight liveness probe: any HTTP answer from the base URL counts."""
    client = HttpClientConfig.from_dict(replica["client"])
    try:
        httpx.get(client.base_url, timeout=2.0, verify=client.verify_tls)
        return True
    except httpx.TransportError:
        return False
