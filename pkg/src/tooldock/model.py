"""Shared domain types: tools, signatures, calls, results, and naming rules.

Everything in this module is immutable after construction and safe to share
between threads or send to worker processes.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .errors import (
    NameTooLongError,
    NameUnrenderableError,
    UnsupportedSchemaFeatureError,
    sanitize,
)

MAX_NAME_LENGTH = 64

#: Characters allowed to join a namespace onto a tool name.
SEPARATORS = (".", "_", "-", "/")

#: Substitution candidates tried, in order, when a rendered name violates
#: the target pattern.
FALLBACK_SEPARATORS = ("_", "-", ".", "/")

#: Default charset for rendered tool names (strictest mainstream provider).
PERMISSIVE_NAME_PATTERN = re.compile(r"^[A-Za-z0-9_.-]{1,64}$")

_IDENTIFIER = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")

SCALAR_KINDS = frozenset({"string", "integer", "number", "boolean", "null"})

#: Dialect keywords admitted in parameter schemas.
SCHEMA_KEYWORDS = frozenset(
    {"type", "properties", "required", "items", "enum", "anyOf", "description", "default"}
)
SCHEMA_TYPES = frozenset({"object", "string", "integer", "number", "boolean", "array", "null"})

ORIGINS = frozenset({"native", "toolset", "openapi", "mcp", "foreign"})


def canonical_json(value: Any) -> str:
    """Serialize a JSON value compactly, keys in insertion order."""
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False)


def json_equal(a: Any, b: Any) -> bool:
    """JSON-semantics equality: numbers compare mathematically, bools do not."""
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if type(a) is not type(b):
        return False
    if isinstance(a, list):
        return len(a) == len(b) and all(json_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(json_equal(v, b[k]) for k, v in a.items())
    return a == b


# --- parameter kinds ----------------------------------------------------------

@dataclass(frozen=True)
class ArrayKind:
    item: Any  # Kind


@dataclass(frozen=True)
class ObjectKind:
    fields: tuple  # tuple[ParamSpec, ...]


@dataclass(frozen=True)
class EnumKind:
    values: tuple

    def __post_init__(self):
        if not self.values:
            raise ValueError("enum value list must be non-empty")


@dataclass(frozen=True)
class UnionKind:
    members: tuple  # tuple[Kind, ...]

    def __post_init__(self):
        if len(self.members) < 2:
            raise ValueError("union needs at least 2 members")


#: A parameter kind: one of the scalar kind strings or a structured kind.
Kind = Any


def value_conforms(value: Any, kind: Kind) -> bool:
    """Check a JSON value against a parameter kind (used for defaults)."""
    if kind == "string":
        return isinstance(value, str)
    if kind == "integer":
        return type(value) is int
    if kind == "number":
        return type(value) in (int, float)
    if kind == "boolean":
        return isinstance(value, bool)
    if kind == "null":
        return value is None
    if isinstance(kind, ArrayKind):
        return isinstance(value, list) and all(value_conforms(v, kind.item) for v in value)
    if isinstance(kind, EnumKind):
        return any(json_equal(value, allowed) for allowed in kind.values)
    if isinstance(kind, UnionKind):
        return any(value_conforms(value, m) for m in kind.members)
    if isinstance(kind, ObjectKind):
        if not isinstance(value, dict):
            return False
        specs = {p.name: p for p in kind.fields}
        if any(k not in specs for k in value):
            return False
        for p in kind.fields:
            if p.name in value:
                if not value_conforms(value[p.name], p.kind):
                    return False
            elif p.required:
                return False
        return True
    raise ValueError(f"unknown parameter kind: {kind!r}")


_NO_DEFAULT = object()


@dataclass(frozen=True)
class ParamSpec:
    """One parameter of a tool signature."""

    name: str
    kind: Kind
    required: bool = True
    default: Any = _NO_DEFAULT
    description: str | None = None

    def __post_init__(self):
        if not _IDENTIFIER.match(self.name):
            raise ValueError(f"parameter name {self.name!r} is not an identifier")
        if self.required and self.has_default:
            raise ValueError(f"required parameter {self.name!r} cannot carry a default")
        if self.has_default and not value_conforms(self.default, self.kind):
            raise ValueError(f"default for {self.name!r} does not conform to its kind")

    @property
    def has_default(self) -> bool:
        return self.default is not _NO_DEFAULT


@dataclass(frozen=True)
class SignatureDescriptor:
    """Typed description of a callable from which the JSON schema is derived."""

    tool_name: str
    description: str
    params: tuple = ()
    returns_description: str | None = None

    def __post_init__(self):
        if not self.tool_name:
            raise ValueError("tool_name must be non-empty")
        object.__setattr__(self, "params", tuple(self.params))
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError(f"duplicate parameter names in {self.tool_name!r}")


# --- schema dialect -----------------------------------------------------------

def validate_schema_dialect(schema: Any, *, root: bool = True, _path: str = "") -> None:
    """Reject parameter schemas that stray outside the internal dialect.

    Raises UnsupportedSchemaFeatureError for foreign keywords and ValueError
    for structurally invalid use of supported ones.
    """
    if not isinstance(schema, dict):
        raise ValueError(f"{_path or '/'}: schema must be an object")
    for key in schema:
        if key not in SCHEMA_KEYWORDS:
            raise UnsupportedSchemaFeatureError(key)
    if root and schema.get("type") != "object":
        raise ValueError("root schema must have type 'object'")
    stype = schema.get("type")
    if stype is not None and stype not in SCHEMA_TYPES:
        raise ValueError(f"{_path or '/'}: unknown type {stype!r}")
    if "enum" in schema:
        if not isinstance(schema["enum"], list) or not schema["enum"]:
            raise ValueError(f"{_path or '/'}: enum must be a non-empty array")
    if "anyOf" in schema:
        branches = schema["anyOf"]
        if not isinstance(branches, list) or len(branches) < 2:
            raise ValueError(f"{_path or '/'}: anyOf needs at least 2 branches")
        for i, branch in enumerate(branches):
            validate_schema_dialect(branch, root=False, _path=f"{_path}/anyOf/{i}")
    if "items" in schema:
        validate_schema_dialect(schema["items"], root=False, _path=f"{_path}/items")
    props = schema.get("properties")
    if props is not None:
        if not isinstance(props, dict):
            raise ValueError(f"{_path or '/'}: properties must be an object")
        for name, sub in props.items():
            validate_schema_dialect(sub, root=False, _path=f"{_path}/properties/{name}")
    required = schema.get("required")
    if required is not None:
        if not isinstance(required, list):
            raise ValueError(f"{_path or '/'}: required must be an array")
        for name in required:
            if name not in (props or {}):
                raise ValueError(f"{_path or '/'}: required name {name!r} not in properties")


# --- tool, call, result -------------------------------------------------------

@dataclass(frozen=True)
class Tool:
    """Stateless description + invoker for one callable capability.

    ``invoker`` maps a validated JSON argument object to a JSON-compatible
    result and may be a coroutine function (then ``is_async`` is true).
    ``replica`` is an optional data-only recipe from which a worker process
    can rebuild the tool; tools without one cannot enter isolated execution.
    """

    name: str
    description: str
    parameters: dict
    invoker: Callable[[dict], Any]
    is_async: bool = False
    origin: str = "native"
    replica: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.name:
            raise ValueError("tool name must be non-empty")
        if len(self.name) > MAX_NAME_LENGTH:
            raise NameTooLongError(f"tool name {self.name!r} exceeds {MAX_NAME_LENGTH} chars")
        if self.origin not in ORIGINS:
            raise ValueError(f"unknown origin {self.origin!r}")
        validate_schema_dialect(self.parameters)

    @property
    def replicable(self) -> bool:
        return self.replica is not None

    def renamed(self, name: str) -> "Tool":
        return Tool(
            name=name,
            description=self.description,
            parameters=self.parameters,
            invoker=self.invoker,
            is_async=self.is_async,
            origin=self.origin,
            replica=self.replica,
        )


@dataclass(frozen=True)
class ToolCall:
    """Normalized invocation request: correlation id, tool name, raw JSON args.

    ``arguments`` stays as the provider-delivered JSON text; parsing is
    deferred to validation.
    """

    id: str
    name: str
    arguments: str

    def __post_init__(self):
        if not self.id:
            raise ValueError("tool call id must be non-empty")


@dataclass(frozen=True)
class ErrorInfo:
    category: str  # "transient" | "permanent"
    message: str


@dataclass(frozen=True)
class ToolCallResult:
    """Outcome of one tool call. Exactly one of value/error is meaningful.

    Build through ``ok()`` / ``failed()``; direct construction with an
    inconsistent status/error pairing is rejected.
    """

    id: str
    name: str
    status: str  # "ok" | "error"
    value: Any = None
    error: ErrorInfo | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in ("ok", "error"):
            raise ValueError(f"invalid status {self.status!r}")
        if (self.status == "ok") != (self.error is None):
            raise ValueError("exactly one of value/error must be present")

    @classmethod
    def ok(cls, id: str, name: str, value: Any, meta: dict | None = None) -> "ToolCallResult":
        return cls(id=id, name=name, status="ok", value=value, meta=meta or {})

    @classmethod
    def failed(
        cls, id: str, name: str, category: str, message: str, meta: dict | None = None
    ) -> "ToolCallResult":
        info = ErrorInfo(category=category, message=sanitize(message))
        return cls(id=id, name=name, status="error", error=info, meta=meta or {})


# --- enumerations ---------------------------------------------------------------

class ApiFormat(Enum):
    """Supported provider wire formats. Unknown labels are rejected at parse."""

    CHAT_COMPLETION = "openai-chatcompletion"
    RESPONSE = "openai-response"

    @classmethod
    def parse(cls, label: str) -> "ApiFormat":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown API format {label!r}")


class ExecutionMode(Enum):
    SHARED = "shared"
    ISOLATED = "isolated"

    @classmethod
    def parse(cls, label: str) -> "ExecutionMode":
        for member in cls:
            if member.value == label:
                return member
        raise ValueError(f"unknown execution mode {label!r}")


# --- name rendering -------------------------------------------------------------

def render_tool_name(
    raw: str,
    namespace: str | None = None,
    separator: str = ".",
    target_pattern: re.Pattern | str = PERMISSIVE_NAME_PATTERN,
) -> str:
    """Join ``namespace`` and ``raw`` and make the result fit ``target_pattern``.

    Already-namespaced names are returned as-is (never double-prefixed).
    When the joined name violates the pattern, separator occurrences are
    substituted with the first fallback separator the pattern admits.
    """
    if not raw:
        raise NameUnrenderableError("tool name must be non-empty")
    if separator not in SEPARATORS:
        raise ValueError(f"separator must be one of {SEPARATORS}, got {separator!r}")
    if isinstance(target_pattern, str):
        target_pattern = re.compile(target_pattern)

    if namespace:
        # substitution may have rewritten the separator on a previous render,
        # so any admissible separator counts as already-namespaced
        already = any(
            raw.startswith(namespace + sep_char)
            for sep_char in (separator, *FALLBACK_SEPARATORS)
        )
        candidate = raw if already else namespace + separator + raw
    else:
        candidate = raw

    if len(candidate) > MAX_NAME_LENGTH:
        raise NameTooLongError(f"{candidate!r} exceeds {MAX_NAME_LENGTH} characters")
    if target_pattern.match(candidate):
        return candidate
    for fallback in FALLBACK_SEPARATORS:
        if fallback == separator:
            continue
        substituted = candidate.replace(separator, fallback)
        if target_pattern.match(substituted):
            return substituted
    raise NameUnrenderableError(
        f"no separator substitution makes {candidate!r} match {target_pattern.pattern!r}"
    )
