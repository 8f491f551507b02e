"""Declarative registry descriptions.

Two closely related artifacts live here:

* the user-facing manifest file (JSON) the CLI loads: a separator, an
  execution block, and a list of tool sources (hub/importable toolsets,
  native functions by import path, OpenAPI endpoints, MCP endpoints);
* the internal worker manifest: name-addressed per-tool rebuild recipes
  produced by ``ToolRegistry.worker_manifest()`` and consumed by isolated
  workers.

Manifest example::

    {
      "separator": ".",
      "execution": {"mode": "shared", "per_call_timeout_s": 30},
      "sources": [
        {"kind": "toolset", "name": "calculator", "namespace": true},
        {"kind": "openapi", "spec": "http://localhost:8000/openapi.json",
         "client": {"base_url": "http://localhost:8000"}, "namespace": true},
        {"kind": "mcp", "transport": "sse",
         "url": "http://localhost:8001/sse", "namespace": true}
      ]
    }
"""

from __future__ import annotations

import importlib
import json
from pathlib import Path
from typing import Any, Callable

from .errors import ToolDockError
from .introspect import make_invoker
from .model import ExecutionMode, Tool
from .registry import ToolRegistry


class ManifestError(ToolDockError):
    pass


def resolve_ref(ref: str) -> Any:
    """Import ``module:qualname`` and return the named object."""
    module_name, _, qualname = ref.partition(":")
    if not module_name or not qualname:
        raise ManifestError(f"invalid import reference {ref!r}")
    try:
        obj = importlib.import_module(module_name)
    except ImportError as exc:
        raise ManifestError(f"cannot import {module_name!r}: {exc}") from exc
    for part in qualname.split("."):
        try:
            obj = getattr(obj, part)
        except AttributeError:
            raise ManifestError(f"{module_name!r} has no attribute {qualname!r}") from None
    return obj


def _resolve_toolset(source: dict) -> type:
    from .hub import HUB_TOOLSETS

    if "ref" in source:
        return resolve_ref(source["ref"])
    name = source.get("name")
    if name in HUB_TOOLSETS:
        return HUB_TOOLSETS[name]
    raise ManifestError(f"unknown toolset {name!r}")


def _execution_config(block: dict):
    from .executor import ExecutorConfig, RetryPolicy

    kwargs: dict = {}
    if "mode" in block:
        kwargs["mode"] = ExecutionMode.parse(block["mode"])
    if "shared_workers" in block:
        kwargs["shared_workers"] = int(block["shared_workers"])
    if "isolated_workers" in block:
        kwargs["isolated_workers"] = int(block["isolated_workers"])
    if "per_call_timeout_s" in block:
        kwargs["per_call_timeout"] = float(block["per_call_timeout_s"])
    retry = block.get("retry", {})
    if retry:
        kwargs["retry"] = RetryPolicy(
            max_attempts=int(retry.get("max_attempts", 3)),
            base_backoff=float(retry.get("base_backoff_ms", 100)) / 1000.0,
            multiplier=float(retry.get("multiplier", 2.0)),
        )
    return ExecutorConfig(**kwargs)


def _namespace_arg(source: dict) -> bool | str:
    value = source.get("namespace", False)
    if value is None:
        return False
    return value


def build_registry(manifest: dict) -> ToolRegistry:
    """Construct and populate a registry from a manifest dictionary."""
    if not isinstance(manifest, dict):
        raise ManifestError("manifest must be a JSON object")
    separator = manifest.get("separator", ".")
    execution = _execution_config(manifest.get("execution", {}))
    registry = ToolRegistry(separator=separator, execution_config=execution)
    for index, source in enumerate(manifest.get("sources", [])):
        kind = source.get("kind")
        try:
            if kind == "toolset":
                registry.register_from_toolset(_resolve_toolset(source), _namespace_arg(source))
            elif kind == "native":
                namespace = source.get("namespace") or None
                if isinstance(namespace, bool):
                    namespace = None
                registry.register(resolve_ref(source["ref"]), namespace=namespace)
            elif kind == "openapi":
                from .openapi import HttpClientConfig, load_openapi_spec, register_from_openapi

                client = HttpClientConfig.from_dict(source["client"])
                spec = load_openapi_spec(source["spec"])
                register_from_openapi(registry, client, spec, _namespace_arg(source))
            elif kind == "mcp":
                from .mcp import McpEndpoint, register_from_mcp

                endpoint = McpEndpoint.from_dict(source)
                register_from_mcp(registry, endpoint, _namespace_arg(source))
            else:
                raise ManifestError(f"unknown source kind {kind!r}")
        except KeyError as exc:
            raise ManifestError(f"source #{index} is missing field {exc}") from exc
    return registry


def load_manifest(path: str | Path) -> ToolRegistry:
    try:
        manifest = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ManifestError(f"cannot read manifest: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest is not valid JSON: {exc}") from exc
    return build_registry(manifest)


# --- worker-side rebuild -------------------------------------------------------

def _invoker_from_replica(replica: dict, is_async: bool) -> tuple[Callable, bool]:
    kind = replica.get("kind")
    if kind == "toolset_member":
        owner = resolve_ref(replica["ref"])
        fn = getattr(owner, replica["member"])
        return make_invoker(fn), is_async
    if kind == "openapi_op":
        from .openapi import invoker_from_replica

        return invoker_from_replica(replica), False
    if kind == "mcp_tool":
        from .mcp import invoker_from_replica

        return invoker_from_replica(replica), False
    raise ManifestError(f"unknown replica kind {kind!r}")


def build_worker_registry(manifest: dict) -> ToolRegistry:
    """Rebuild a registry replica from per-tool recipes (worker startup path)."""
    registry = ToolRegistry(separator=manifest.get("separator", "."))
    for entry in manifest.get("tools", []):
        replica = entry.get("replica")
        if not replica:
            continue
        invoker, is_async = _invoker_from_replica(replica, entry.get("is_async", False))
        tool = Tool(
            name=entry["name"],
            description=entry.get("description", ""),
            parameters=entry["parameters"],
            invoker=invoker,
            is_async=is_async,
            origin=entry.get("origin", "native"),
            replica=replica,
        )
        registry._tools[tool.name] = tool
    registry._sync_namespaces()
    return registry


def probe_replica_source(replica: dict) -> tuple[str | None, Callable[[], bool]]:
    """Key and liveness probe for a replica's external dependency, if any."""
    kind = replica.get("kind")
    if kind == "openapi_op":
        from .openapi import probe_from_replica

        base_url = replica["client"]["base_url"]
        return f"openapi:{base_url}", lambda: probe_from_replica(replica)
    if kind == "mcp_tool":
        from .mcp import probe_from_replica

        endpoint = replica["endpoint"]
        key = endpoint.get("url") or endpoint.get("command", "stdio")
        return f"mcp:{key}", lambda: probe_from_replica(replica)
    return None, lambda: True
