# tests/conftest.py
import json
from pathlib import Path

import numpy as np
import pytest

from samples.dataset import LabeledDataset


@pytest.fixture
def small_data() -> LabeledDataset:
    """1-D groups {0, 2} and {4, 6}."""
    return LabeledDataset(np.array([[0.0], [2.0], [4.0], [6.0]]), np.array([0, 0, 1, 1]))


@pytest.fixture
def shifted_data() -> LabeledDataset:
    """Two well-separated Gaussian groups in D=2, 15 points each."""
    rng = np.random.default_rng(11)
    x0 = rng.standard_normal((15, 2))
    x1 = rng.standard_normal((15, 2)) + 4.0
    labels = np.repeat([0, 1], 15)
    return LabeledDataset(np.vstack([x0, x1]), labels)


@pytest.fixture
def null_data() -> LabeledDataset:
    rng = np.random.default_rng(5)
    return LabeledDataset(rng.standard_normal((24, 3)), np.repeat([0, 1], 12))


@pytest.fixture
def write_rows(tmp_path):
    """Writes raw CSV text to a temporary file and returns its path."""
    def _write(text: str, name: str = "data.csv"):
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path
    return _write


_JSON_TYPES = {
    "object": dict,
    "array": list,
    "string": str,
    "boolean": bool,
    "null": type(None),
}


def _has_type(value, name: str) -> bool:
    if name == "integer":
        return isinstance(value, int) and not isinstance(value, bool)
    if name == "number":
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, _JSON_TYPES[name])


def _schema_errors(doc, schema: dict, path: str = "$"):
    """Checks the JSON-schema keywords used under schemas/ and yields readable errors."""
    types = schema.get("type")
    if types is not None:
        names = [types] if isinstance(types, str) else types
        if not any(_has_type(doc, name) for name in names):
            yield f"{path}: {doc!r} is not of type {types}"
            return
    if "enum" in schema and doc not in schema["enum"]:
        yield f"{path}: {doc!r} not in {schema['enum']}"
    if _has_type(doc, "number"):
        if "minimum" in schema and doc < schema["minimum"]:
            yield f"{path}: {doc} < minimum {schema['minimum']}"
        if "maximum" in schema and doc > schema["maximum"]:
            yield f"{path}: {doc} > maximum {schema['maximum']}"
        if "exclusiveMinimum" in schema and doc <= schema["exclusiveMinimum"]:
            yield f"{path}: {doc} <= exclusiveMinimum {schema['exclusiveMinimum']}"
        if "exclusiveMaximum" in schema and doc >= schema["exclusiveMaximum"]:
            yield f"{path}: {doc} >= exclusiveMaximum {schema['exclusiveMaximum']}"
    if isinstance(doc, dict):
        for key in schema.get("required", []):
            if key not in doc:
                yield f"{path}: missing required '{key}'"
        properties = schema.get("properties", {})
        extra = schema.get("additionalProperties", True)
        for key, value in doc.items():
            if key in properties:
                yield from _schema_errors(value, properties[key], f"{path}.{key}")
            elif extra is False:
                yield f"{path}: unexpected property '{key}'"
            elif isinstance(extra, dict):
                yield from _schema_errors(value, extra, f"{path}.{key}")
    if isinstance(doc, list) and "items" in schema:
        for i, value in enumerate(doc):
            yield from _schema_errors(value, schema["items"], f"{path}[{i}]")


@pytest.fixture
def check_schema():
    """Asserts that a JSON document satisfies a schema file from schemas/."""
    schema_dir = Path(__file__).resolve().parent.parent / "schemas"

    def _check(doc, schema_name: str):
        schema = json.loads((schema_dir / schema_name).read_text(encoding="utf-8"))
        errors = list(_schema_errors(doc, schema))
        assert not errors, "\n".join(errors)
    return _check
