"""Protocol-agnostic tool management for LLM function calling.

One registry for native Python callables, class-based toolsets, OpenAPI
services, and MCP servers; concurrent execution in shared or isolated
mode; OpenAI-compatible schema rendering and message handling.
"""

from . import errors
from .executor import Executor, ExecutorConfig, RetryPolicy, arun_single, run_single
from .introspect import descriptor_from_callable, tool_from_callable
from .messages import (
    ChatMessage,
    convert_tool_calls,
    recover_assistant_message,
    recover_tool_message,
)
from .model import (
    ApiFormat,
    ArrayKind,
    EnumKind,
    ExecutionMode,
    ObjectKind,
    ParamSpec,
    SignatureDescriptor,
    Tool,
    ToolCall,
    ToolCallResult,
    UnionKind,
    canonical_json,
    render_tool_name,
)
from .registry import ConflictPolicy, ToolRegistry
from .schema import derive_schema, render_schema, validate_arguments

__version__ = "0.1.0"

__all__ = [
    "ApiFormat",
    "ArrayKind",
    "ChatMessage",
    "ConflictPolicy",
    "EnumKind",
    "ExecutionMode",
    "Executor",
    "ExecutorConfig",
    "ObjectKind",
    "ParamSpec",
    "RetryPolicy",
    "SignatureDescriptor",
    "Tool",
    "ToolCall",
    "ToolCallResult",
    "ToolRegistry",
    "UnionKind",
    "arun_single",
    "canonical_json",
    "convert_tool_calls",
    "derive_schema",
    "descriptor_from_callable",
    "errors",
    "recover_assistant_message",
    "recover_tool_message",
    "render_schema",
    "render_tool_name",
    "run_single",
    "tool_from_callable",
    "validate_arguments",
]
