"""Test-side oracles, independent of the library's own validation paths.

Contains a seeded random SignatureDescriptor generator, a brute-force
recursive argument validator written directly against draft-2020-12
semantics, and a small-domain argument enumerator. Nothing here imports
from tooldock.schema.
"""

from __future__ import annotations

import random
import string
from typing import Any, Iterator

from tooldock.model import ArrayKind, EnumKind, ObjectKind, ParamSpec, SignatureDescriptor, UnionKind

SCALARS = ("string", "integer", "number", "boolean", "null")


def random_kind(rng: random.Random, depth: int = 0):
    choices = ["scalar", "enum", "array", "union"]
    if depth == 0:
        choices.append("object")
    pick = rng.choice(choices)
    if pick == "scalar":
        return rng.choice(SCALARS)
    if pick == "enum":
        if rng.random() < 0.5:
            values = tuple(rng.sample(["red", "green", "blue", "cyan"], k=rng.randint(1, 3)))
        else:
            values = tuple(rng.sample([1, 2, 3, 5, 8], k=rng.randint(1, 3)))
        return EnumKind(values)
    if pick == "array":
        return ArrayKind(rng.choice(SCALARS))
    if pick == "union":
        members = tuple(rng.sample(SCALARS, k=2))
        return UnionKind(members)
    fields = tuple(
        ParamSpec(name=f"f{i}", kind=rng.choice(SCALARS), required=rng.random() < 0.7)
        for i in range(rng.randint(1, 2))
    )
    return ObjectKind(fields)


def sample_value(rng: random.Random, kind) -> Any:
    if kind == "string":
        return rng.choice(["", "x", "hello"])
    if kind == "integer":
        return rng.choice([0, 7, -3])
    if kind == "number":
        return rng.choice([0, 2.5, -1.25])
    if kind == "boolean":
        return rng.choice([True, False])
    if kind == "null":
        return None
    if isinstance(kind, EnumKind):
        return rng.choice(kind.values)
    if isinstance(kind, ArrayKind):
        return [sample_value(rng, kind.item) for _ in range(rng.randint(0, 2))]
    if isinstance(kind, UnionKind):
        return sample_value(rng, rng.choice(kind.members))
    if isinstance(kind, ObjectKind):
        out = {}
        for field in kind.fields:
            if field.required or rng.random() < 0.5:
                out[field.name] = sample_value(rng, field.kind)
        return out
    raise AssertionError(kind)


def random_descriptor(rng: random.Random, max_params: int = 4) -> SignatureDescriptor:
    count = rng.randint(0, max_params)
    names = rng.sample([f"{c}{i}" for i, c in enumerate(string.ascii_lowercase[:12])], k=count)
    params = []
    for name in names:
        kind = random_kind(rng)
        required = rng.random() < 0.6
        if not required and rng.random() < 0.5:
            params.append(
                ParamSpec(name=name, kind=kind, required=False,
                          default=sample_value(rng, kind))
            )
        else:
            params.append(ParamSpec(name=name, kind=kind, required=required))
    return SignatureDescriptor(
        tool_name="tool_" + "".join(rng.choices(string.ascii_lowercase, k=6)),
        description="generated",
        params=tuple(params),
    )


# --- brute-force schema conformance (direct recursive check) ------------------------

def _json_eq(a: Any, b: Any) -> bool:
    if isinstance(a, bool) or isinstance(b, bool):
        return isinstance(a, bool) and isinstance(b, bool) and a is b
    if isinstance(a, (int, float)) and isinstance(b, (int, float)):
        return a == b
    if type(a) is not type(b):
        return False
    if isinstance(a, list):
        return len(a) == len(b) and all(_json_eq(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(_json_eq(v, b[k]) for k, v in a.items())
    return a == b


def brute_force_conforms(value: Any, schema: dict) -> bool:
    """Recursive draft-2020-12 style check over the internal dialect."""
    if "enum" in schema:
        return any(_json_eq(value, allowed) for allowed in schema["enum"])
    if "anyOf" in schema:
        return any(brute_force_conforms(value, branch) for branch in schema["anyOf"])
    stype = schema.get("type")
    if stype == "string":
        return isinstance(value, str)
    if stype == "integer":
        return type(value) is int
    if stype == "number":
        return type(value) in (int, float)
    if stype == "boolean":
        return isinstance(value, bool)
    if stype == "null":
        return value is None
    if stype == "array":
        if not isinstance(value, list):
            return False
        items = schema.get("items")
        return items is None or all(brute_force_conforms(v, items) for v in value)
    if stype == "object":
        if not isinstance(value, dict):
            return False
        properties = schema.get("properties", {})
        if any(k not in properties for k in value):
            return False  # additionalProperties treated as false
        for name in schema.get("required", []):
            if name not in value:
                return False
        return all(brute_force_conforms(v, properties[k]) for k, v in value.items())
    return True  # no constraint


def brute_force_accepts_arguments(schema: dict, arguments: Any) -> bool:
    """Would a strict validator accept this argument object for the tool?

    Mirrors the contract: object required, unknown keys rejected, required
    keys present unless a default exists, values conform recursively.
    """
    if not isinstance(arguments, dict):
        return False
    properties = schema.get("properties", {})
    if any(k not in properties for k in arguments):
        return False
    for name in schema.get("required", []):
        if name not in arguments and "default" not in properties[name]:
            return False
    return all(brute_force_conforms(v, properties[k]) for k, v in arguments.items())


# --- small-domain enumeration ---------------------------------------------------------

WRONG_POOL = ["zz", 13, 1.75, True, None, [1], {"k": 1}]


def _value_pool(rng: random.Random, kind) -> list:
    goods = [sample_value(rng, kind) for _ in range(2)]
    bads = rng.sample(WRONG_POOL, k=2)
    return goods + bads


def enumerate_argument_objects(
    descriptor: SignatureDescriptor, rng: random.Random, limit: int = 200
) -> Iterator[dict]:
    """All combinations of {absent, good, bad} values per parameter, plus an
    unknown-key variant, capped at ``limit``."""
    params = list(descriptor.params)[:3]
    pools = {p.name: [None] + [(v,) for v in _value_pool(rng, p.kind)] for p in params}

    def combos(index: int, current: dict) -> Iterator[dict]:
        if index == len(params):
            yield dict(current)
            return
        name = params[index].name
        for slot in pools[name]:
            if slot is None:
                yield from combos(index + 1, current)
            else:
                current[name] = slot[0]
                yield from combos(index + 1, current)
                del current[name]

    produced = 0
    for combo in combos(0, {}):
        yield combo
        produced += 1
        if produced >= limit:
            return
        if produced % 7 == 3:  # sprinkle unknown-key variants
            with_extra = dict(combo)
            with_extra["unexpected_key"] = 1
            yield with_extra
            produced += 1
            if produced >= limit:
                return
