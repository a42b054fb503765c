"""File formats: tmk-1 JSON documents, CSV tables and run manifests.

Floats are written with 17 significant digits so that a document read back
reproduces every value bit for bit; non-finite values are written as null.
"""

import csv
from dataclasses import asdict, is_dataclass
import hashlib
import io as _io
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .errors import LoadError
from .geometry import ConvexBodyH, DiscreteMeasure

FORMAT = "tmk-1"
UNIT_TOL = 1e-9

_VEC2 = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUMS = {"type": "array", "items": {"type": "number"}, "minItems": 1}

BODY_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"const": FORMAT},
        "n": {"const": 2},
        "normals": {"type": "array", "items": _VEC2, "minItems": 3},
        "angles": {"type": "array", "items": {"type": "number"}, "minItems": 3},
        "offsets": {"type": "array", "items": {"type": "number"}, "minItems": 3},
    },
    "required": ["offsets"],
    "oneOf": [{"required": ["normals"]}, {"required": ["angles"]}],
    "additionalProperties": False,
}

MEASURE_SCHEMA = {
    "type": "object",
    "properties": {
        "format": {"const": FORMAT},
        "directions": {"type": "array", "items": _VEC2, "minItems": 1},
        "angles": _NUMS,
        "weights": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 1},
    },
    "required": ["weights"],
    "oneOf": [{"required": ["directions"]}, {"required": ["angles"]}],
    "additionalProperties": False,
}

# documents produced by the CLI; plot reads these back
DOCUMENT_KINDS = ("torsion_report", "minkowski_solution", "minkowski_general", "checks")
DOCUMENT_SCHEMA = {
    "type": "object",
    "properties": {"format": {"const": FORMAT}, "kind": {"enum": list(DOCUMENT_KINDS)}},
    "required": ["format", "kind"],
}


# -- serialization -------------------------------------------------------------------

def format_float(x):
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def to_plain(obj):
    """Recursively convert dataclasses, numpy values and tuples to JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_plain(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_plain(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    return obj


def dumps(obj, indent=2):
    """JSON text with fixed float formatting; keys keep insertion order."""
    return _dump(to_plain(obj), indent, 0) + "\n"


def _dump(v, indent, level):
    if v is None:
        return "null"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return format_float(v)
    if isinstance(v, str):
        return json.dumps(v)
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(v, list):
        if not v:
            return "[]"
        if all(not isinstance(x, (list, dict)) for x in v):
            return "[" + ", ".join(_dump(x, indent, level + 1) for x in v) + "]"
        return "[\n" + ",\n".join(pad + _dump(x, indent, level + 1) for x in v) + "\n" + end + "]"
    if isinstance(v, dict):
        if not v:
            return "{}"
        items = (pad + json.dumps(k) + ": " + _dump(x, indent, level + 1) for k, x in v.items())
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    raise TypeError(f"cannot serialize {type(v).__name__}")


def write_json(path, obj):
    Path(path).write_text(dumps(obj), encoding="utf-8")


def read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc.strerror}", invariant="input-file") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise LoadError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})",
                        invariant="json-syntax") from exc


def _validate(doc, schema, what):
    try:
        jsonschema.validate(doc, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise LoadError(f"{what} does not match the tmk-1 schema at {where}: {exc.message}",
                        invariant="input-schema") from exc


def _unit_vectors(vecs, what):
    v = np.asarray(vecs, dtype=float)
    err = np.abs(np.linalg.norm(v, axis=1) - 1.0)
    if np.any(err > UNIT_TOL):
        k = int(np.argmax(err))
        raise LoadError(f"{what} {k} is not a unit vector (|norm - 1| = {err[k]:.3e})",
                        invariant="unit-normals")
    return v


# -- bodies and measures ---------------------------------------------------------------

def body_to_dict(body):
    return {"format": FORMAT, "n": 2, "normals": body.normals, "offsets": body.offsets}


def body_from_dict(doc):
    _validate(doc, BODY_SCHEMA, "body")
    if "normals" in doc:
        normals = _unit_vectors(doc["normals"], "normal")
        if len(normals) != len(doc["offsets"]):
            raise LoadError("normals and offsets differ in length", invariant="shape")
        return ConvexBodyH(normals, doc["offsets"])
    if len(doc["angles"]) != len(doc["offsets"]):
        raise LoadError("angles and offsets differ in length", invariant="shape")
    return ConvexBodyH.from_angles(doc["angles"], doc["offsets"])


def load_body(path):
    return body_from_dict(read_json(path))


def measure_to_dict(m):
    return {"format": FORMAT, "directions": m.directions, "weights": m.weights}


def measure_from_dict(doc):
    _validate(doc, MEASURE_SCHEMA, "measure")
    key = "directions" if "directions" in doc else "angles"
    if len(doc[key]) != len(doc["weights"]):
        raise LoadError(f"{key} and weights differ in length", invariant="shape")
    if key == "directions":
        return DiscreteMeasure(_unit_vectors(doc["directions"], "direction"), doc["weights"])
    return DiscreteMeasure(np.asarray(doc["angles"], dtype=float), doc["weights"])


def load_measure(path):
    return measure_from_dict(read_json(path))


def load_document(path):
    doc = read_json(path)
    _validate(doc, DOCUMENT_SCHEMA, "document")
    return doc


# -- CSV -------------------------------------------------------------------------------

def csv_text(header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_float(x) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def write_csv(path, header, rows):
    Path(path).write_text(csv_text(header, rows), encoding="utf-8")


def load_density(path):
    """Two-column table ``angle,value`` (radians); a header row is optional."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc.strerror}", invariant="input-file") from exc
    ang, val = [], []
    for i, row in enumerate(csv.reader(_io.StringIO(text))):
        if not row or row[0].lstrip().startswith("#"):
            continue
        try:
            a, v = (float(x) for x in row)
        except ValueError as exc:
            if i == 0 and not ang:
                continue
            raise LoadError(f"{path}:{i + 1}: expected two numbers", invariant="density-table") from exc
        ang.append(a)
        val.append(v)
    if len(ang) < 2:
        raise LoadError(f"{path}: density table needs at least two rows", invariant="density-table")
    a, v = np.array(ang), np.array(val)
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(v))) or np.any(v < 0):
        raise LoadError(f"{path}: density values must be finite and nonnegative",
                        invariant="density-table")
    return a, v


# -- manifests --------------------------------------------------------------------------

def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()


def manifest_path(out):
    return Path(str(out) + ".manifest.json")


def write_manifest(out, command, config, inputs, version, wall_time, seed):
    """Run manifest beside ``out``; only this file carries timing data."""
    doc = {
        "format": FORMAT,
        "kind": "manifest",
        "command": command,
        "config": config,
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "version": version,
        "wall_time_s": wall_time,
    }
    write_json(manifest_path(out), doc)
