"""Unit tags and conversion to the canonical system (m, kN/m3, kPa, degrees).

Fixed factors: 1 ft = 0.3048 m, 1 pcf = 0.157087 kN/m3, 1 psf = 0.0478803 kPa,
radians converted through 180/pi. A value is "tagged" when it is carried as a
{"value": v, "unit": tag} mapping; plain numbers are assumed canonical already,
which is what makes normalize_units idempotent.

Converted values are quantized to 9 significant digits. That is the package's
canonical numeric resolution: script emitters print 9 digits, so every number
that enters through a unit tag survives a script round trip bit-exactly.
"""

from __future__ import annotations

import math
from typing import Any

from .errors import UnknownUnit

FT_TO_M = 0.3048
PCF_TO_KNM3 = 0.157087
PSF_TO_KPA = 0.0478803


def round_sig(x: float, digits: int = 9) -> float:
    """Round to a number of significant digits (exactly what %.{n}g prints)."""
    if x == 0:
        return 0.0
    return float(f"{x:.{digits}g}")

# dimension -> {tag alias: factor to canonical}
_TABLES = {
    "length": {
        "m": 1.0, "meter": 1.0, "meters": 1.0, "metre": 1.0, "metres": 1.0,
        "ft": FT_TO_M, "foot": FT_TO_M, "feet": FT_TO_M,
    },
    "unit_weight": {
        "kn/m3": 1.0, "kn/m³": 1.0, "knm3": 1.0,
        "pcf": PCF_TO_KNM3, "lb/ft3": PCF_TO_KNM3,
    },
    "stress": {
        "kpa": 1.0, "kn/m2": 1.0, "kn/m²": 1.0,
        "psf": PSF_TO_KPA, "lb/ft2": PSF_TO_KPA,
    },
    "angle": {
        "deg": 1.0, "degs": 1.0, "degree": 1.0, "degrees": 1.0, "°": 1.0,
        "rad": 180.0 / math.pi, "radian": 180.0 / math.pi, "radians": 180.0 / math.pi,
    },
}

# canonical field path (indices stripped) -> dimension
FIELD_DIMENSIONS = {
    "geometry.height": "length",
    "geometry.crest_extent": "length",
    "geometry.toe_extent": "length",
    "geometry.surface": "length",
    "geometry.slope_angle": "angle",
    "layers[].unit_weight": "unit_weight",
    "layers[].saturated_unit_weight": "unit_weight",
    "layers[].cohesion": "stress",
    "layers[].friction_angle": "angle",
    "layers[].bottom_elevation": "length",
    "water_table.elevation": "length",
    "water_table.depth": "length",
    "water_table.points": "length",
}


def strip_indices(field_path: str) -> str:
    """layers[3].cohesion -> layers[].cohesion"""
    out = []
    i = 0
    while i < len(field_path):
        ch = field_path[i]
        out.append(ch)
        if ch == "[":
            j = field_path.index("]", i)
            out.append("]")
            i = j
        i += 1
    return "".join(out)


def convert_value(value: float, unit: str, dimension: str) -> float:
    """Convert one tagged value to canonical units for the given dimension."""
    table = _TABLES.get(dimension)
    if table is None:
        raise UnknownUnit(f"no such dimension: {dimension}")
    factor = table.get(unit.strip().lower())
    if factor is None:
        raise UnknownUnit(f"unit tag {unit!r} not recognized for {dimension}", field_path=dimension)
    return round_sig(value * factor)


def is_tagged(value: Any) -> bool:
    return isinstance(value, dict) and set(value) == {"value", "unit"}


def normalize_field(field_path: str, value: Any):
    """Normalize one field value (tagged scalar, tagged point list, or plain)."""
    key = strip_indices(field_path)
    dim = FIELD_DIMENSIONS.get(key)
    if is_tagged(value):
        if dim is None:
            raise UnknownUnit(f"field {field_path!r} carries no unit dimension", field_path=field_path)
        inner = value["value"]
        if isinstance(inner, (list, tuple)):
            return [[convert_value(float(c), value["unit"], dim) for c in pt] for pt in inner]
        return convert_value(float(inner), value["unit"], dim)
    return value


def normalize_units(fields: dict[str, Any]) -> dict[str, Any]:
    """Convert every tagged value in a partial-problem field map to canonical units.

    Plain (untagged) values pass through unchanged, so the operation is
    idempotent. Raises UnknownUnit on an unrecognized tag.
    """
    return {path: normalize_field(path, v) for path, v in fields.items()}
