"""Provider wire-format compatibility: normalize tool calls, rebuild messages.

Argument text is never re-serialized: whatever JSON string the provider
sent is carried through ToolCall untouched and emitted byte-identically
when a message is reconstructed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

from .errors import MalformedPayloadError, UnsupportedFormatError
from .model import ApiFormat, ToolCall, ToolCallResult, canonical_json


def _coerce_format(format: ApiFormat | str) -> ApiFormat:
    if isinstance(format, ApiFormat):
        return format
    try:
        return ApiFormat.parse(format)
    except ValueError as exc:
        raise UnsupportedFormatError(str(exc)) from exc


@dataclass(frozen=True)
class ChatMessage:
    """Assistant or tool message in normalized form.

    ``to_payload`` renders the wire shape; for the Responses format an
    assistant message serializes to its list of function_call items and a
    tool message to a function_call_output item.
    """

    role: str
    content: str | None = None
    tool_calls: tuple = ()
    tool_call_id: str | None = None
    format: ApiFormat = ApiFormat.CHAT_COMPLETION

    def __post_init__(self):
        if self.role not in ("assistant", "tool"):
            raise ValueError(f"unsupported role {self.role!r}")
        if self.role == "tool" and (self.tool_call_id is None or self.content is None):
            raise ValueError("tool messages need tool_call_id and content")
        object.__setattr__(self, "tool_calls", tuple(self.tool_calls))

    def to_payload(self) -> Any:
        if self.role == "assistant":
            if self.format is ApiFormat.CHAT_COMPLETION:
                return {
                    "role": "assistant",
                    "content": self.content,
                    "tool_calls": [dict(tc) for tc in self.tool_calls],
                }
            return [dict(tc) for tc in self.tool_calls]
        if self.format is ApiFormat.CHAT_COMPLETION:
            return {
                "role": "tool",
                "tool_call_id": self.tool_call_id,
                "content": self.content,
            }
        return {
            "type": "function_call_output",
            "call_id": self.tool_call_id,
            "output": self.content,
        }


def _require(entry: dict, key: str, path: str) -> Any:
    if key not in entry:
        raise MalformedPayloadError(f"{path}/{key}", "missing field")
    return entry[key]


def _require_str(entry: dict, key: str, path: str) -> str:
    value = _require(entry, key, path)
    if not isinstance(value, str):
        raise MalformedPayloadError(f"{path}/{key}", "expected a string")
    return value


def convert_tool_calls(raw: Any, format: ApiFormat | str) -> list[ToolCall]:
    """Normalize a provider tool-call array into ToolCall values.

    Chat Completions: the ``message.tool_calls`` array. Responses: the
    output item array, from which ``function_call`` items are taken.
    """
    format = _coerce_format(format)
    if not isinstance(raw, list):
        raise MalformedPayloadError("", "expected an array of tool calls")
    calls: list[ToolCall] = []
    for index, entry in enumerate(raw):
        path = f"/{index}"
        if not isinstance(entry, dict):
            raise MalformedPayloadError(path, "expected an object")
        if format is ApiFormat.CHAT_COMPLETION:
            if entry.get("type") != "function":
                raise MalformedPayloadError(f"{path}/type", "expected 'function'")
            function = _require(entry, "function", path)
            if not isinstance(function, dict):
                raise MalformedPayloadError(f"{path}/function", "expected an object")
            calls.append(
                ToolCall(
                    id=_require_str(entry, "id", path),
                    name=_require_str(function, "name", f"{path}/function"),
                    arguments=_require_str(function, "arguments", f"{path}/function"),
                )
            )
        else:
            if entry.get("type") != "function_call":
                continue  # Responses output arrays interleave other item kinds
            calls.append(
                ToolCall(
                    id=_require_str(entry, "call_id", path),
                    name=_require_str(entry, "name", path),
                    arguments=_require_str(entry, "arguments", path),
                )
            )
    return calls


def recover_assistant_message(
    calls: list[ToolCall], format: ApiFormat | str
) -> ChatMessage:
    """Reconstruct the assistant message that requested these tool calls."""
    format = _coerce_format(format)
    if not calls:
        raise ValueError("calls must be non-empty")
    if format is ApiFormat.CHAT_COMPLETION:
        tool_calls = [
            {
                "id": c.id,
                "type": "function",
                "function": {"name": c.name, "arguments": c.arguments},
            }
            for c in calls
        ]
    else:
        tool_calls = [
            {
                "type": "function_call",
                "call_id": c.id,
                "name": c.name,
                "arguments": c.arguments,
            }
            for c in calls
        ]
    return ChatMessage(role="assistant", content=None, tool_calls=tool_calls, format=format)


def _result_content(result: ToolCallResult) -> str:
    if result.status == "ok":
        if isinstance(result.value, str):
            return result.value  # bare strings go through unquoted
        return canonical_json(result.value)
    return canonical_json(
        {"error": result.error.message, "category": result.error.category}
    )


def recover_tool_message(
    results: list[ToolCallResult], format: ApiFormat | str
) -> list[ChatMessage]:
    """One role=tool message per result, correlated by the call id."""
    format = _coerce_format(format)
    return [
        ChatMessage(
            role="tool",
            tool_call_id=result.id,
            content=_result_content(result),
            format=format,
        )
        for result in results
    ]
