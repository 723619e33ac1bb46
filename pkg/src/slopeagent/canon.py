"""Canonical problem serialization and content hashing.

Canonical form is JSON with object keys sorted, no insignificant whitespace,
and every number printed with 12 significant digits (trailing zeros dropped,
-0 normalized to 0). Integers that are exactly representable print without a
decimal point. The content hash is 64-bit FNV-1a over the canonical UTF-8
bytes with the ``provenance`` key removed: problems that differ only in how
their fields were sourced hash identically.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict
from typing import Any

from .errors import InvalidProblem, ProblemFormatError
from .model import (
    AnalysisConfig,
    FieldProvenance,
    MaterialLayer,
    SearchConfig,
    SlopeGeometry,
    SlopeProblem,
    validate,
)

SCHEMA_VERSION = "1"

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


def format_number(v: float) -> str:
    """12-significant-digit shortest form; rejects non-finite values."""
    if isinstance(v, bool):
        raise InvalidProblem("booleans are not numbers")
    if not math.isfinite(v):
        raise InvalidProblem("non-finite number in canonical form")
    if isinstance(v, int):
        return str(v)
    if v == 0:
        return "0"  # normalizes -0.0
    s = f"{v:.12g}"
    # %g may emit exponents for very large/small magnitudes; keep them, they
    # round-trip exactly through float().
    return s


def _serialize(obj: Any, out: list[str]) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, float)):
        out.append(format_number(obj))
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=False))
    elif isinstance(obj, dict):
        out.append("{")
        for i, key in enumerate(sorted(obj)):
            if not isinstance(key, str):
                raise InvalidProblem("object keys must be strings")
            if i:
                out.append(",")
            out.append(json.dumps(key, ensure_ascii=False))
            out.append(":")
            _serialize(obj[key], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, item in enumerate(obj):
            if i:
                out.append(",")
            _serialize(item, out)
        out.append("]")
    else:
        raise InvalidProblem(f"unserializable value of type {type(obj).__name__}")


def canonical_bytes(data: Any) -> bytes:
    out: list[str] = []
    _serialize(data, out)
    return "".join(out).encode("utf-8")


def problem_to_dict(problem: SlopeProblem) -> dict:
    """Plain-dict canonical structure (schema_version stamped)."""
    d = {
        "schema_version": SCHEMA_VERSION,
        "geometry": {"surface": [list(p) for p in problem.geometry.surface]},
        "layers": [
            {
                "name": L.name,
                "unit_weight": L.unit_weight,
                "cohesion": L.cohesion,
                "friction_angle": L.friction_angle,
                "saturated_unit_weight": L.saturated_unit_weight,
                "bottom_elevation": L.bottom_elevation,
            }
            for L in problem.layers
        ],
        "water_table": None if problem.water_table is None else [list(p) for p in problem.water_table],
        "analysis": {
            "method": problem.analysis.method,
            "slice_count": problem.analysis.slice_count,
            "target": problem.analysis.target,
            "search": {
                "x_range": list(problem.analysis.search.x_range),
                "y_range": list(problem.analysis.search.y_range),
                "nx": problem.analysis.search.nx,
                "ny": problem.analysis.search.ny,
                "radius_samples": problem.analysis.search.radius_samples,
                "refine_rounds": problem.analysis.search.refine_rounds,
            },
        },
        "provenance": [
            {"field_path": p.field_path, "source": p.source} for p in problem.provenance
        ],
    }
    return d


def problem_from_dict(d: dict) -> SlopeProblem:
    """Inverse of problem_to_dict; raises ProblemFormatError on shape errors."""
    try:
        if str(d.get("schema_version")) != SCHEMA_VERSION:
            raise ProblemFormatError(
                f"unsupported schema_version {d.get('schema_version')!r}", field_path="schema_version"
            )
        geometry = SlopeGeometry(tuple((float(x), float(y)) for x, y in d["geometry"]["surface"]))
        layers = tuple(
            MaterialLayer(
                name=str(L["name"]),
                unit_weight=float(L["unit_weight"]),
                cohesion=float(L["cohesion"]),
                friction_angle=float(L["friction_angle"]),
                saturated_unit_weight=None if L.get("saturated_unit_weight") is None else float(L["saturated_unit_weight"]),
                bottom_elevation=None if L.get("bottom_elevation") is None else float(L["bottom_elevation"]),
            )
            for L in d["layers"]
        )
        wt = d.get("water_table")
        water = None if wt is None else tuple((float(x), float(y)) for x, y in wt)
        a = d["analysis"]
        s = a["search"]
        analysis = AnalysisConfig(
            method=str(a["method"]),
            slice_count=int(a["slice_count"]),
            target=str(a["target"]),
            search=SearchConfig(
                x_range=(float(s["x_range"][0]), float(s["x_range"][1])),
                y_range=(float(s["y_range"][0]), float(s["y_range"][1])),
                nx=int(s["nx"]),
                ny=int(s["ny"]),
                radius_samples=int(s["radius_samples"]),
                refine_rounds=int(s["refine_rounds"]),
            ),
        )
        provenance = tuple(
            FieldProvenance(str(p["field_path"]), str(p["source"])) for p in d.get("provenance", [])
        )
    except ProblemFormatError:
        raise
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ProblemFormatError(f"malformed problem document: {exc}") from exc
    return SlopeProblem(geometry, layers, water, analysis, provenance)


def canonical_problem_bytes(problem: SlopeProblem, include_provenance: bool = True) -> bytes:
    d = problem_to_dict(problem)
    if not include_provenance:
        d.pop("provenance")
    return canonical_bytes(d)


def canonical_hash(problem: SlopeProblem) -> str:
    """Lowercase-hex FNV-1a 64 of the provenance-free canonical bytes.

    Refuses to hash an invalid problem: the hash names a solvable artifact.
    """
    report = validate(problem)
    if report:
        first = report[0]
        raise InvalidProblem(f"{first.field_path}: {first.message}", field_path=first.field_path)
    return f"{fnv1a64(canonical_problem_bytes(problem, include_provenance=False)):016x}"


def dumps_problem(problem: SlopeProblem) -> str:
    return canonical_problem_bytes(problem).decode("utf-8")


def loads_problem(text: str) -> SlopeProblem:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    return problem_from_dict(data)


def save_problem(problem: SlopeProblem, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_problem(problem))
        fh.write("\n")


def load_problem(path) -> SlopeProblem:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_problem(fh.read())
