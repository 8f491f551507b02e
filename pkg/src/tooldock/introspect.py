"""Build signature descriptors and tools from plain Python callables.

The descriptor is the contract; this module just auto-populates it from
type hints, defaults, and docstrings so callers rarely write one by hand.
Supported annotations: str, int, float, bool, None, list[X], Optional[X],
Union[...], and Literal[...]. Unannotated parameters default to string.
"""

from __future__ import annotations

import inspect
import types
import typing
from typing import Any, Callable

from .model import (
    ArrayKind,
    EnumKind,
    Kind,
    ParamSpec,
    SignatureDescriptor,
    Tool,
    UnionKind,
    value_conforms,
)

_SCALARS = {
    str: "string",
    int: "integer",
    float: "number",
    bool: "boolean",
    type(None): "null",
}


def _annotation_to_kind(annotation: Any) -> Kind:
    if annotation in _SCALARS:
        return _SCALARS[annotation]
    origin = typing.get_origin(annotation)
    args = typing.get_args(annotation)
    if origin is list:
        if len(args) != 1:
            raise TypeError("list annotations need exactly one item type, e.g. list[int]")
        return ArrayKind(_annotation_to_kind(args[0]))
    if origin is typing.Literal:
        return EnumKind(tuple(args))
    if origin in (typing.Union, types.UnionType):
        return UnionKind(tuple(_annotation_to_kind(a) for a in args))
    raise TypeError(f"cannot map annotation {annotation!r} to a parameter kind")


def descriptor_from_callable(fn: Callable, name: str | None = None) -> SignatureDescriptor:
    """Derive a SignatureDescriptor from a callable's signature and docstring."""
    signature = inspect.signature(fn)
    try:
        hints = typing.get_type_hints(fn)
    except Exception:
        hints = {}
    params = []
    for param_name, param in signature.parameters.items():
        if param.kind in (param.VAR_POSITIONAL, param.VAR_KEYWORD):
            continue
        if param_name in ("self", "cls"):
            continue
        annotation = hints.get(param_name)
        kind: Kind = _annotation_to_kind(annotation) if annotation is not None else "string"
        if param.default is inspect.Parameter.empty:
            params.append(ParamSpec(name=param_name, kind=kind))
        else:
            default = param.default
            if not value_conforms(default, kind):
                # common sloppy pattern: `x: int = None`
                if default is None:
                    kind = UnionKind((kind, "null"))
                else:
                    raise TypeError(
                        f"default {default!r} for parameter {param_name!r} "
                        "is not a JSON value conforming to its annotation"
                    )
            params.append(
                ParamSpec(name=param_name, kind=kind, required=False, default=default)
            )
    return SignatureDescriptor(
        tool_name=name or fn.__name__,
        description=inspect.getdoc(fn) or "",
        params=tuple(params),
    )


def make_invoker(fn: Callable) -> Callable[[dict], Any]:
    """Adapt a keyword-argument callable to the JSON-object invoker contract."""

    def invoke(arguments: dict) -> Any:
        return fn(**arguments)

    if inspect.iscoroutinefunction(fn):

        async def ainvoke(arguments: dict) -> Any:
            return await fn(**arguments)

        return ainvoke
    return invoke


def tool_from_callable(
    fn: Callable,
    descriptor: SignatureDescriptor | None = None,
    *,
    origin: str = "native",
    replica: dict | None = None,
) -> Tool:
    """Wrap a Python callable as a Tool, deriving the schema on the way."""
    from .schema import derive_schema

    if descriptor is None:
        descriptor = descriptor_from_callable(fn)
    return Tool(
        name=descriptor.tool_name,
        description=descriptor.description,
        parameters=derive_schema(descriptor),
        invoker=make_invoker(fn),
        is_async=inspect.iscoroutinefunction(fn),
        origin=origin,
        replica=replica,
    )
