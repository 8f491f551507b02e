"""Central tool store: registration pathways, lookup, and namespace algebra.

Concurrent reads are safe; mutations require exclusive access. Failed
mutations never leave partial state behind (all checks run before the
first insert).
"""

from __future__ import annotations

import inspect
import re
from enum import Enum
from typing import Any, Callable

from .errors import (
    DuplicateNameError,
    MultipleNamespacesError,
    SeparatorMismatchError,
    UnknownNamespaceError,
    UnknownToolError,
    WouldCollideError,
)
from .introspect import descriptor_from_callable, make_invoker, tool_from_callable
from .model import (
    ApiFormat,
    ExecutionMode,
    SignatureDescriptor,
    Tool,
    ToolCall,
    ToolCallResult,
    render_tool_name,
)
from .schema import render_schema


class ConflictPolicy(Enum):
    ERROR = "error"
    KEEP_EXISTING = "keep-existing"
    PREFER_INCOMING = "prefer-incoming"

    @classmethod
    def parse(cls, label: str) -> "ConflictPolicy":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown conflict policy {label!r}")


def _importable_ref(cls: type) -> str | None:
    """Module-qualified reference for a class a worker can re-import, if any."""
    module = getattr(cls, "__module__", None)
    qualname = getattr(cls, "__qualname__", "")
    if not module or module == "__main__" or "<locals>" in qualname:
        return None
    return f"{module}:{qualname}"


def _toolset_members(toolset: Any) -> list[tuple[str, Callable, bool]]:
    """Public callables of a class or instance, in definition order.

    The third element says whether the member is rebuildable from the class
    alone (static/class methods); plain methods need the live instance.
    """
    is_class = isinstance(toolset, type)
    cls = toolset if is_class else type(toolset)
    members = []
    for name in vars(cls):
        if name.startswith("_"):
            continue
        attr = inspect.getattr_static(cls, name)
        if isinstance(attr, (staticmethod, classmethod)):
            members.append((name, getattr(toolset, name), True))
        elif inspect.isfunction(attr) and not is_class:
            members.append((name, getattr(toolset, name), False))
    return members


class ToolRegistry:
    """Named tool store with namespace tracking and execution delegation."""

    def __init__(self, separator: str = ".", execution_config=None):
        self._tools: dict[str, Tool] = {}
        self._sub_namespaces: set[str] = set()
        self._separator = separator
        self._execution_config = execution_config
        self._executor = None

    # --- introspection ------------------------------------------------------

    @property
    def separator(self) -> str:
        return self._separator

    @property
    def sub_namespaces(self) -> set[str]:
        return set(self._sub_namespaces)

    def tools_snapshot(self) -> dict[str, Tool]:
        return dict(self._tools)

    def __len__(self) -> int:
        return len(self._tools)

    def __contains__(self, name: str) -> bool:
        return name in self._tools

    def contains(self, name: str) -> bool:
        return name in self._tools

    def __getitem__(self, name: str) -> Callable[[dict], Any]:
        return self.get_invoker(name)

    def __repr__(self) -> str:
        return f"ToolRegistry({sorted(self._tools)})"

    def get_tool(self, name: str) -> Tool:
        try:
            return self._tools[name]
        except KeyError:
            raise UnknownToolError(f"unknown tool: {name}") from None

    def get_invoker(self, name: str) -> Callable[[dict], Any]:
        """Invocation handle for a tool; async invokers are bridged to sync."""
        tool = self.get_tool(name)
        if not tool.is_async:
            return tool.invoker

        def invoke(arguments: dict) -> Any:
            from ._loopres import close_loop_resources
            from .executor import run_coroutine_blocking

            async def bridged() -> Any:
                try:
                    return await tool.invoker(arguments)
                finally:
                    await close_loop_resources()

            return run_coroutine_blocking(bridged())

        return invoke

    def list_tools(self, prefix: str | None = None, origin: str | None = None) -> list[str]:
        names = []
        for name, tool in self._tools.items():
            if prefix is not None and not name.startswith(prefix + self._separator):
                continue
            if origin is not None and tool.origin != origin:
                continue
            names.append(name)
        return sorted(names)

    # --- registration ---------------------------------------------------------

    def _sync_namespaces(self) -> None:
        self._sub_namespaces = {
            name.split(self._separator, 1)[0]
            for name in self._tools
            if self._separator in name
        }

    def _insert(self, tool: Tool) -> None:
        if tool.name in self._tools:
            raise DuplicateNameError(f"tool {tool.name!r} already registered")
        self._tools[tool.name] = tool
        self._sync_namespaces()

    def register(
        self,
        target: Tool | Callable,
        descriptor: SignatureDescriptor | None = None,
        *,
        namespace: str | None = None,
    ) -> str:
        """Register a Tool or a plain callable; returns the stored name.

        Callables get their descriptor introspected unless one is passed.
        """
        if isinstance(target, Tool):
            tool = target
        else:
            tool = tool_from_callable(target, descriptor)
        name = render_tool_name(tool.name, namespace, self._separator)
        if name != tool.name:
            tool = tool.renamed(name)
        self._insert(tool)
        return name

    def register_from_toolset(
        self, toolset: Any, with_namespace: bool | str = False
    ) -> list[str]:
        """Register every public callable of a class or instance, atomically.

        ``with_namespace=True`` namespaces members under the toolset's
        declared name, lowercased.
        """
        cls = toolset if isinstance(toolset, type) else type(toolset)
        if with_namespace is True:
            namespace = (getattr(cls, "toolset_name", None) or cls.__name__).lower()
        elif with_namespace:
            namespace = with_namespace
        else:
            namespace = None

        ref = _importable_ref(cls)
        staged: list[Tool] = []
        seen: set[str] = set()
        for member_name, fn, from_class in _toolset_members(toolset):
            replica = None
            if ref is not None and from_class:
                replica = {"kind": "toolset_member", "ref": ref, "member": member_name}
            tool = tool_from_callable(fn, origin="toolset", replica=replica)
            name = render_tool_name(tool.name, namespace, self._separator)
            if name in seen:
                raise DuplicateNameError(f"toolset defines {name!r} twice")
            seen.add(name)
            staged.append(tool.renamed(name))
        for tool in staged:
            if tool.name in self._tools:
                raise DuplicateNameError(f"tool {tool.name!r} already registered")
        for tool in staged:
            self._tools[tool.name] = tool
        self._sync_namespaces()
        return [t.name for t in staged]

    # --- namespace algebra ------------------------------------------------------

    def merge(self, other: "ToolRegistry", policy: ConflictPolicy = ConflictPolicy.ERROR):
        """Fold another registry's tools into this one. ``other`` stays valid."""
        if other._separator != self._separator:
            raise SeparatorMismatchError(
                f"cannot merge separator {other._separator!r} into {self._separator!r}"
            )
        conflicts = [name for name in other._tools if name in self._tools]
        if conflicts and policy is ConflictPolicy.ERROR:
            raise DuplicateNameError(f"merge conflicts: {sorted(conflicts)}")
        for name, tool in other._tools.items():
            if name in self._tools and policy is ConflictPolicy.KEEP_EXISTING:
                continue
            self._tools[name] = tool
        self._sync_namespaces()
        return self

    def spinoff(self, prefix: str) -> "ToolRegistry":
        """Extract every tool under ``prefix`` into a new registry."""
        if prefix not in self._sub_namespaces:
            raise UnknownNamespaceError(f"unknown namespace: {prefix}")
        marker = prefix + self._separator
        extracted = ToolRegistry(
            separator=self._separator, execution_config=self._execution_config
        )
        for name in [n for n in self._tools if n.startswith(marker)]:
            extracted._tools[name] = self._tools.pop(name)
        extracted._sync_namespaces()
        self._sync_namespaces()
        return extracted

    def reduce_namespace(self):
        """Strip the single remaining namespace prefix from every tool name."""
        if len(self._sub_namespaces) != 1:
            raise MultipleNamespacesError(
                f"expected exactly one namespace, found {sorted(self._sub_namespaces)}"
            )
        prefix = next(iter(self._sub_namespaces))
        marker = prefix + self._separator
        renames = {
            name: name[len(marker):] for name in self._tools if name.startswith(marker)
        }
        for name, stripped in renames.items():
            if stripped in self._tools and stripped not in renames:
                raise WouldCollideError(
                    f"stripping {prefix!r} would collide on {stripped!r}"
                )
        for name, stripped in renames.items():
            self._tools[stripped] = self._tools.pop(name).renamed(stripped)
        self._sync_namespaces()
        return self

    # --- rendering ------------------------------------------------------------

    def get_tools_json(
        self,
        format: ApiFormat = ApiFormat.CHAT_COMPLETION,
        *,
        name_pattern: re.Pattern | str | None = None,
    ) -> list[dict]:
        """Rendered schema for every tool, in list_tools order."""
        return [
            render_schema(
                self._tools[name], format, separator=self._separator, name_pattern=name_pattern
            )
            for name in self.list_tools()
        ]

    # --- execution delegation ----------------------------------------------------

    @property
    def execution_config(self):
        if self._execution_config is None:
            from .executor import ExecutorConfig

            self._execution_config = ExecutorConfig()
        return self._execution_config

    @property
    def executor(self):
        if self._executor is None:
            from .executor import Executor

            self._executor = Executor(self.execution_config)
        return self._executor

    def set_execution_mode(self, mode: ExecutionMode | str) -> None:
        if isinstance(mode, str):
            mode = ExecutionMode.parse(mode)
        self.execution_config.mode = mode

    def execute_tool_calls(
        self, calls: list[ToolCall], mode_override: ExecutionMode | None = None
    ) -> list[ToolCallResult]:
        return self.executor.execute_tool_calls(self, calls, mode_override)

    async def aexecute_tool_calls(
        self, calls: list[ToolCall], mode_override: ExecutionMode | None = None
    ) -> list[ToolCallResult]:
        return await self.executor.aexecute_tool_calls(self, calls, mode_override)

    def shutdown(self) -> None:
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    # --- worker replication -------------------------------------------------------

    def worker_manifest(self) -> dict:
        """Name-addressed rebuild recipes for every replicable tool."""
        return {
            "separator": self._separator,
            "tools": [
                {
                    "name": tool.name,
                    "description": tool.description,
                    "parameters": tool.parameters,
                    "origin": tool.origin,
                    "is_async": tool.is_async,
                    "replica": tool.replica,
                }
                for tool in self._tools.values()
                if tool.replicable
            ],
        }

    def probe_sources(self) -> dict[str, bool]:
        """One lightweight liveness probe per distinct external source."""
        from .manifest import probe_replica_source

        results: dict[str, bool] = {}
        seen: set[str] = set()
        for tool in self._tools.values():
            if not tool.replica:
                continue
            key, probe = probe_replica_source(tool.replica)
            if key is None or key in seen:
                continue
            seen.add(key)
            results[key] = probe()
        return results
