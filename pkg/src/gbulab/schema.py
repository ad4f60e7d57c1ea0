"""Shipped JSON schemas and a dependency-free structural validator.

The validator covers the subset the shipped schemas use: type,
properties/required/additionalProperties, items, enum, minimum. Output
documents are validated before they are written to disk.
"""
from __future__ import annotations

import json
from importlib import resources

_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


class SchemaError(ValueError):
    """A document does not conform to its schema."""


def load_schema(name: str) -> dict:
    fname = f"{name}.schema.json"
    with resources.files("gbulab").joinpath("schemas", fname).open() as f:
        return json.load(f)


def _type_ok(value, typ: str) -> bool:
    if typ == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if typ == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    return isinstance(value, _TYPES[typ])


def validate(obj, schema: dict, path: str = "$") -> None:
    typ = schema.get("type")
    if typ is not None:
        types = typ if isinstance(typ, list) else [typ]
        if not any(_type_ok(obj, t) for t in types):
            raise SchemaError(f"{path}: expected {types}, got {type(obj).__name__}")
    if "enum" in schema and obj not in schema["enum"]:
        raise SchemaError(f"{path}: {obj!r} not in {schema['enum']}")
    if "minimum" in schema and isinstance(obj, (int, float)) and obj < schema["minimum"]:
        raise SchemaError(f"{path}: {obj} below minimum {schema['minimum']}")
    if isinstance(obj, dict):
        for key in schema.get("required", []):
            if key not in obj:
                raise SchemaError(f"{path}: missing required key {key!r}")
        props = schema.get("properties", {})
        extra = schema.get("additionalProperties", True)
        for key, val in obj.items():
            if key in props:
                validate(val, props[key], f"{path}.{key}")
            elif extra is False:
                raise SchemaError(f"{path}: unexpected key {key!r}")
    if isinstance(obj, list) and "items" in schema:
        for k, item in enumerate(obj):
            validate(item, schema["items"], f"{path}[{k}]")


def validate_output(name: str, obj) -> None:
    validate(obj, load_schema(name))
