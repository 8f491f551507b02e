import json
import random

import jsonschema
import pytest

from tooldock.errors import MalformedJsonError, SchemaViolationError
from tooldock.introspect import tool_from_callable
from tooldock.model import (
    ApiFormat,
    ArrayKind,
    EnumKind,
    ObjectKind,
    ParamSpec,
    SignatureDescriptor,
    Tool,
    UnionKind,
    canonical_json,
    validate_schema_dialect,
)
from tooldock.schema import derive_schema, render_schema, validate_arguments

from .oracles import random_descriptor

DRAFT = jsonschema.Draft202012Validator


def two_int_descriptor():
    return SignatureDescriptor(
        tool_name="add",
        description="Add two integers.",
        params=(ParamSpec("a", "integer"), ParamSpec("b", "integer")),
    )


def tool_for(descriptor) -> Tool:
    return Tool(
        name=descriptor.tool_name,
        description=descriptor.description,
        parameters=derive_schema(descriptor),
        invoker=lambda args: args,
    )


class TestDeriveSchema:
    def test_two_required_integers(self):
        assert derive_schema(two_int_descriptor()) == {
            "type": "object",
            "properties": {"a": {"type": "integer"}, "b": {"type": "integer"}},
            "required": ["a", "b"],
        }

    def test_no_params(self):
        descriptor = SignatureDescriptor(tool_name="noop", description="")
        assert derive_schema(descriptor) == {
            "type": "object",
            "properties": {},
            "required": [],
        }

    def test_optional_union_with_default(self):
        descriptor = SignatureDescriptor(
            tool_name="t",
            description="",
            params=(
                ParamSpec("x", UnionKind(("string", "integer")), required=False, default="q"),
            ),
        )
        schema = derive_schema(descriptor)
        assert schema["properties"]["x"] == {
            "anyOf": [{"type": "string"}, {"type": "integer"}],
            "default": "q",
        }
        assert schema["required"] == []
        # oracle: the emitted schema is valid draft-2020-12 and accepts both branches
        DRAFT.check_schema(schema)
        validator = DRAFT(schema)
        assert not list(validator.iter_errors({"x": "s"}))
        assert not list(validator.iter_errors({"x": 3}))
        assert list(validator.iter_errors({"x": 1.5}))

    def test_array_and_enum_mapping(self):
        descriptor = SignatureDescriptor(
            tool_name="t",
            description="",
            params=(
                ParamSpec("tags", ArrayKind("string")),
                ParamSpec("color", EnumKind(("red", "blue"))),
            ),
        )
        schema = derive_schema(descriptor)
        assert schema["properties"]["tags"] == {"type": "array", "items": {"type": "string"}}
        assert schema["properties"]["color"] == {"enum": ["red", "blue"], "type": "string"}

    def test_determinism(self):
        descriptor = two_int_descriptor()
        first = canonical_json(derive_schema(descriptor))
        for _ in range(10):
            assert canonical_json(derive_schema(descriptor)) == first


class TestValidateArguments:
    def test_accepts_exact_arguments(self):
        tool = tool_for(two_int_descriptor())
        assert validate_arguments(tool, '{"a":1,"b":2}') == {"a": 1, "b": 2}

    def test_missing_required(self):
        tool = tool_for(two_int_descriptor())
        with pytest.raises(SchemaViolationError) as info:
            validate_arguments(tool, '{"a":1}')
        assert info.value.path == "/b"
        assert info.value.reason == "required"

    def test_unknown_key(self):
        tool = tool_for(two_int_descriptor())
        with pytest.raises(SchemaViolationError) as info:
            validate_arguments(tool, '{"a":1,"b":2,"c":3}')
        assert info.value.path == "/c"
        assert info.value.reason == "unknown key"

    def test_malformed_json(self):
        tool = tool_for(two_int_descriptor())
        with pytest.raises(MalformedJsonError):
            validate_arguments(tool, "{not json")

    def test_non_object_arguments(self):
        tool = tool_for(two_int_descriptor())
        with pytest.raises(SchemaViolationError):
            validate_arguments(tool, "[1,2]")

    def test_defaults_materialized(self):
        descriptor = SignatureDescriptor(
            tool_name="t",
            description="",
            params=(
                ParamSpec("a", "integer"),
                ParamSpec("limit", "integer", required=False, default=10),
            ),
        )
        tool = tool_for(descriptor)
        assert validate_arguments(tool, '{"a":1}') == {"a": 1, "limit": 10}

    def test_integer_accepted_for_number(self):
        descriptor = SignatureDescriptor(
            tool_name="t", description="", params=(ParamSpec("x", "number"),)
        )
        tool = tool_for(descriptor)
        assert validate_arguments(tool, '{"x": 3}') == {"x": 3}

    def test_float_rejected_for_integer(self):
        descriptor = SignatureDescriptor(
            tool_name="t", description="", params=(ParamSpec("x", "integer"),)
        )
        tool = tool_for(descriptor)
        with pytest.raises(SchemaViolationError):
            validate_arguments(tool, '{"x": 3.5}')

    def test_bool_rejected_for_integer(self):
        descriptor = SignatureDescriptor(
            tool_name="t", description="", params=(ParamSpec("x", "integer"),)
        )
        tool = tool_for(descriptor)
        with pytest.raises(SchemaViolationError):
            validate_arguments(tool, '{"x": true}')

    def test_nested_object_path(self):
        inner = ObjectKind((ParamSpec("deep", "integer"),))
        descriptor = SignatureDescriptor(
            tool_name="t", description="", params=(ParamSpec("outer", inner),)
        )
        tool = tool_for(descriptor)
        with pytest.raises(SchemaViolationError) as info:
            validate_arguments(tool, '{"outer": {"deep": "no"}}')
        assert info.value.path == "/outer/deep"

    def test_validation_is_idempotent(self):
        rng = random.Random(7)
        for _ in range(50):
            descriptor = random_descriptor(rng)
            tool = tool_for(descriptor)
            from .oracles import sample_value

            arguments = {
                p.name: sample_value(rng, p.kind) for p in descriptor.params if p.required
            }
            once = validate_arguments(tool, json.dumps(arguments))
            again = validate_arguments(tool, json.dumps(once))
            assert once == again


class TestRenderSchema:
    def test_chat_completion_shape(self):
        tool = tool_for(two_int_descriptor())
        rendered = render_schema(tool, ApiFormat.CHAT_COMPLETION)
        assert rendered == {
            "type": "function",
            "function": {
                "name": "add",
                "description": "Add two integers.",
                "parameters": tool.parameters,
            },
        }
        assert list(rendered) == ["type", "function"]
        assert list(rendered["function"]) == ["name", "description", "parameters"]

    def test_response_shape_is_flattened(self):
        tool = tool_for(two_int_descriptor())
        rendered = render_schema(tool, ApiFormat.RESPONSE)
        assert rendered == {
            "type": "function",
            "name": "add",
            "description": "Add two integers.",
            "parameters": tool.parameters,
        }
        assert list(rendered) == ["type", "name", "description", "parameters"]

    def test_empty_description_still_emitted(self):
        descriptor = SignatureDescriptor(tool_name="t", description="")
        rendered = render_schema(tool_for(descriptor), ApiFormat.CHAT_COMPLETION)
        assert rendered["function"]["description"] == ""

    def test_pattern_substitution_applies(self):
        descriptor = SignatureDescriptor(tool_name="ns.add", description="")
        rendered = render_schema(
            tool_for(descriptor),
            ApiFormat.CHAT_COMPLETION,
            separator=".",
            name_pattern=r"^[A-Za-z0-9_-]{1,64}$",
        )
        assert rendered["function"]["name"] == "ns_add"

    def test_purity_byte_identical(self):
        tool = tool_for(two_int_descriptor())
        blobs = {
            canonical_json(render_schema(tool, ApiFormat.CHAT_COMPLETION)) for _ in range(5)
        }
        assert len(blobs) == 1


class TestGeneratedDescriptors:
    def test_derived_schemas_satisfy_independent_validator(self):
        rng = random.Random(42)
        for _ in range(100):
            descriptor = random_descriptor(rng)
            schema = derive_schema(descriptor)
            validate_schema_dialect(schema)
            DRAFT.check_schema(schema)

    def test_introspected_tools_round_trip(self):
        def sample(a: int, b: str = "x", flag: bool = False) -> str:
            """Sample tool."""
            return f"{a}{b}{flag}"

        tool = tool_from_callable(sample)
        DRAFT.check_schema(tool.parameters)
        assert validate_arguments(tool, '{"a": 1}') == {"a": 1, "b": "x", "flag": False}
