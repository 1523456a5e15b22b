"""File formats: polynomial JSON, point-cloud and pair CSVs, JSON reports.

Reports are written with sorted keys and a fixed float format so that equal
inputs give byte-identical files.  Every report kind has a JSON schema that
the writers validate against.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import jsonschema
import numpy as np

from .poly import ComplexPolynomial

_COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_NUM = {"type": "number"}

POLY_SCHEMA = {
    "type": "object",
    "required": ["coeffs"],
    "properties": {"coeffs": {"type": "array", "items": _COMPLEX, "minItems": 1}},
}

ENTROPY_SCHEMA = {
    "type": "object",
    "required": ["method", "value", "stderr", "n_range", "epsilon", "samples"],
    "properties": {
        "method": {"enum": ["BowenBall", "Partition"]},
        "value": {"type": "number", "minimum": 0},
        "stderr": {"type": "number", "minimum": 0},
        "n_range": {"type": "array", "items": {"type": "integer"}},
        "epsilon": _NUM,
        "samples": {"type": "integer", "minimum": 0},
    },
}

MIRRORS_SCHEMA = {
    "type": "object",
    "required": ["N_hat", "M_hat", "unbroken_pairs", "evidence"],
    "properties": {
        "N_hat": {"type": "integer", "minimum": 1},
        "M_hat": {"type": "integer", "minimum": 0},
        "unbroken_pairs": {
            "type": "array",
            "items": {"type": "object", "required": ["z", "w"], "properties": {"z": _COMPLEX, "w": _COMPLEX}},
        },
        "evidence": {"type": "object"},
    },
}

CERTIFICATE_SCHEMA = {
    "type": "object",
    "required": ["escape", "projection_gap", "no_mirror"],
    "properties": {
        "escape": {"type": "object", "required": ["pass", "margin"]},
        "projection_gap": _NUM,
        "no_mirror": {"type": "object", "required": ["pass", "empirical_pairs"]},
    },
}

CLASSIFY_SCHEMA = {
    "type": "object",
    "required": ["kind", "invariant_lines", "a_dm1_nonzero"],
    "properties": {
        "kind": {"enum": ["StronglyExceptional", "WeaklyExceptional", "NonExceptional"]},
        "invariant_lines": {"type": "array", "items": _NUM},
        "julia_in_line": {"type": ["boolean", "null"]},
        "a_dm1_nonzero": {"type": "boolean"},
    },
}

TAU_SCHEMA = {
    "type": "object",
    "required": ["M", "N", "points", "max_error", "ambiguous", "no_preimage"],
    "properties": {
        "M": {"type": "integer", "minimum": 0},
        "N": {"type": "integer", "minimum": 1},
        "points": {"type": "integer", "minimum": 0},
        "max_error": {"type": ["number", "null"]},
        "ambiguous": {"type": "integer", "minimum": 0},
        "no_preimage": {"type": "integer", "minimum": 0},
    },
}

CSV_HEADERS = {
    "points": ["re", "im"],
    "measure": ["re", "im", "weight"],
    "mirrors": ["z_re", "z_im", "w_re", "w_im", "prefix_len", "break_time"],
    "variety": ["z_re", "z_im", "w_re", "w_im", "max_residual"],
}


def validate(obj, schema) -> None:
    jsonschema.validate(obj, schema)


def load_polynomial(source) -> ComplexPolynomial:
    """Read a polynomial from a path or a JSON string (``{"coeffs": [[re, im], ...]}``).

    A bare list of ``[re, im]`` pairs or of real numbers is accepted as well.
    Raises ``ValueError`` on malformed input.
    """
    text = source
    if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith(("{", "["))):
        try:
            text = Path(source).read_text()
        except OSError as exc:
            raise ValueError(f"cannot read polynomial file: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"invalid JSON: {exc}") from exc
    if isinstance(obj, list):
        obj = {"coeffs": [c if isinstance(c, list) else [c, 0.0] for c in obj]}
    try:
        validate(obj, POLY_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"invalid polynomial: {exc.message}") from exc
    return ComplexPolynomial.from_json_obj(obj)


def complex_pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _clean(obj):
    """Convert numpy scalars and non-finite floats to JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, complex):
        return complex_pair(obj)
    return obj


def dumps_report(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def write_text(path, text: str) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(text, encoding="utf-8")


def csv_text(kind: str, rows) -> str:
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(CSV_HEADERS[kind])
    for row in rows:
        wr.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def points_csv(points, weights=None) -> str:
    pts = np.asarray(points, dtype=complex).ravel()
    if weights is None:
        return csv_text("points", ([p.real, p.imag] for p in pts))
    return csv_text("measure", ([p.real, p.imag, w] for p, w in zip(pts, weights)))


def read_points_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if rd.fieldnames[:2] != ["re", "im"]:
            raise ValueError("point CSV must start with columns re,im")
        return np.array([complex(float(r["re"]), float(r["im"])) for r in rd])
