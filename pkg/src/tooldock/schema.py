"""Schema derivation, argument validation, and per-format rendering.

All functions here are pure: identical inputs give byte-identical outputs.
Validation follows draft-2020-12 semantics over the internal dialect, with
two deliberate choices: unknown argument keys are rejected (even though
rendered schemas omit ``additionalProperties``), and the only implicit
coercion is accepting integers where a schema asks for ``number``.
"""

from __future__ import annotations

import json
import re
from typing import Any

from .errors import MalformedJsonError, SchemaViolationError
from .model import (
    PERMISSIVE_NAME_PATTERN,
    ApiFormat,
    ArrayKind,
    EnumKind,
    ObjectKind,
    ParamSpec,
    SignatureDescriptor,
    Tool,
    UnionKind,
    json_equal,
    render_tool_name,
)


def _kind_to_schema(kind: Any) -> dict:
    if kind in ("string", "integer", "number", "boolean", "null"):
        return {"type": kind}
    if isinstance(kind, ArrayKind):
        return {"type": "array", "items": _kind_to_schema(kind.item)}
    if isinstance(kind, ObjectKind):
        return _object_schema(kind.fields)
    if isinstance(kind, EnumKind):
        schema: dict = {"enum": list(kind.values)}
        inferred = _homogeneous_type(kind.values)
        if inferred is not None:
            schema["type"] = inferred
        return schema
    if isinstance(kind, UnionKind):
        return {"anyOf": [_kind_to_schema(m) for m in kind.members]}
    raise ValueError(f"unknown parameter kind: {kind!r}")


def _homogeneous_type(values: tuple) -> str | None:
    if all(isinstance(v, str) for v in values):
        return "string"
    if all(isinstance(v, bool) for v in values):
        return "boolean"
    if all(type(v) is int for v in values):
        return "integer"
    if all(type(v) in (int, float) for v in values):
        return "number"
    if all(v is None for v in values):
        return "null"
    return None


def _param_schema(p: ParamSpec) -> dict:
    schema = _kind_to_schema(p.kind)
    if p.description is not None:
        schema["description"] = p.description
    if p.has_default:
        schema["default"] = p.default
    return schema


def _object_schema(params: tuple) -> dict:
    return {
        "type": "object",
        "properties": {p.name: _param_schema(p) for p in params},
        "required": [p.name for p in params if p.required],
    }


def derive_schema(descriptor: SignatureDescriptor) -> dict:
    """Map a signature descriptor deterministically onto a parameter schema."""
    return _object_schema(descriptor.params)


# --- argument validation ------------------------------------------------------

def _type_ok(value: Any, expected: str) -> bool:
    if expected == "string":
        return isinstance(value, str)
    if expected == "integer":
        return type(value) is int
    if expected == "number":
        return type(value) in (int, float)  # integer-valued numbers accepted
    if expected == "boolean":
        return isinstance(value, bool)
    if expected == "null":
        return value is None
    if expected == "array":
        return isinstance(value, list)
    if expected == "object":
        return isinstance(value, dict)
    raise ValueError(f"unknown schema type {expected!r}")


def _validate_value(value: Any, schema: dict, path: str) -> Any:
    if "enum" in schema:
        if not any(json_equal(value, allowed) for allowed in schema["enum"]):
            raise SchemaViolationError(path, "not one of the allowed values")
        return value
    if "anyOf" in schema:
        for branch in schema["anyOf"]:
            try:
                return _validate_value(value, branch, path)
            except SchemaViolationError:
                continue
        raise SchemaViolationError(path, "matches no anyOf branch")
    expected = schema.get("type")
    if expected is not None and not _type_ok(value, expected):
        raise SchemaViolationError(path, f"expected {expected}")
    if expected == "array":
        items = schema.get("items")
        if items is not None:
            return [_validate_value(v, items, f"{path}/{i}") for i, v in enumerate(value)]
        return list(value)
    if expected == "object":
        return _validate_object(value, schema, path)
    return value


def _validate_object(value: dict, schema: dict, path: str) -> dict:
    properties = schema.get("properties", {})
    required = schema.get("required", [])
    for key in value:
        if key not in properties:
            raise SchemaViolationError(f"{path}/{key}", "unknown key")
    out: dict = {}
    for name, sub in properties.items():
        key_path = f"{path}/{name}"
        if name in value:
            out[name] = _validate_value(value[name], sub, key_path)
        elif "default" in sub:
            out[name] = sub["default"]
        elif name in required:
            raise SchemaViolationError(key_path, "required")
    return out


def validate_arguments(tool: Tool, raw: str) -> dict:
    """Parse and validate raw JSON argument text against the tool's schema.

    Returns the canonical argument object: defaults materialized, unknown
    keys rejected, nested structures validated recursively.
    """
    try:
        parsed = json.loads(raw)
    except (json.JSONDecodeError, TypeError) as exc:
        raise MalformedJsonError(f"arguments are not valid JSON: {exc}") from exc
    if not isinstance(parsed, dict):
        raise SchemaViolationError("", "arguments must be a JSON object")
    return _validate_object(parsed, tool.parameters, "")


# --- per-format rendering -----------------------------------------------------

#: Default name constraint per wire format. Both OpenAI formats accept the
#: permissive charset; stricter patterns can be passed explicitly.
FORMAT_NAME_PATTERNS: dict[ApiFormat, re.Pattern] = {
    ApiFormat.CHAT_COMPLETION: PERMISSIVE_NAME_PATTERN,
    ApiFormat.RESPONSE: PERMISSIVE_NAME_PATTERN,
}


def render_schema(
    tool: Tool,
    format: ApiFormat,
    *,
    separator: str = ".",
    name_pattern: re.Pattern | str | None = None,
) -> dict:
    """Render one tool description in the target API's wire shape.

    ``separator`` tells the renderer which character joined the namespace so
    it can be substituted when the target pattern forbids it.
    """
    pattern = name_pattern if name_pattern is not None else FORMAT_NAME_PATTERNS[format]
    name = render_tool_name(tool.name, None, separator, pattern)
    if format is ApiFormat.CHAT_COMPLETION:
        return {
            "type": "function",
            "function": {
                "name": name,
                "description": tool.description,
                "parameters": tool.parameters,
            },
        }
    return {
        "type": "function",
        "name": name,
        "description": tool.description,
        "parameters": tool.parameters,
    }
