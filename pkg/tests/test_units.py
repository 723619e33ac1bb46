import math

import pytest
from hypothesis import given, strategies as st

from slopeagent.errors import UnknownUnit
from slopeagent.units import (
    FT_TO_M,
    PCF_TO_KNM3,
    PSF_TO_KPA,
    convert_value,
    is_tagged,
    normalize_units,
    strip_indices,
)


def test_fixed_factors():
    assert convert_value(1.0, "ft", "length") == 0.3048
    assert convert_value(1.0, "pcf", "unit_weight") == 0.157087
    assert convert_value(1.0, "psf", "stress") == 0.0478803
    assert convert_value(math.pi, "rad", "angle") == pytest.approx(180.0, abs=1e-12)
    assert convert_value(3.5, "m", "length") == 3.5


def test_alias_spellings():
    assert convert_value(2.0, "FEET", "length") == 2.0 * FT_TO_M
    assert convert_value(120.0, "lb/ft3", "unit_weight") == 120.0 * PCF_TO_KNM3
    assert convert_value(400.0, " psf ", "stress") == 400.0 * PSF_TO_KPA
    assert convert_value(30.0, "°", "angle") == 30.0


def test_unknown_unit_raises():
    with pytest.raises(UnknownUnit) as exc:
        convert_value(1.0, "furlong", "length")
    assert exc.value.code == "unknown_unit"
    with pytest.raises(UnknownUnit):
        convert_value(1.0, "m", "no_such_dimension")


def test_is_tagged():
    assert is_tagged({"value": 3, "unit": "m"})
    assert not is_tagged({"value": 3})
    assert not is_tagged({"value": 3, "unit": "m", "extra": 1})
    assert not is_tagged(3.0)


def test_strip_indices():
    assert strip_indices("layers[3].cohesion") == "layers[].cohesion"
    assert strip_indices("geometry.height") == "geometry.height"
    assert strip_indices("a[12].b[0].c") == "a[].b[].c"


def test_normalize_units_tagged_and_plain():
    fields = {
        "geometry.height": {"value": 30.0, "unit": "ft"},
        "geometry.slope_angle": 45.0,
        "layers[0].cohesion": {"value": 500.0, "unit": "psf"},
        "layers[0].unit_weight": {"value": 120.0, "unit": "pcf"},
    }
    out = normalize_units(fields)
    assert out["geometry.height"] == 30.0 * FT_TO_M
    assert out["geometry.slope_angle"] == 45.0
    assert out["layers[0].cohesion"] == 500.0 * PSF_TO_KPA
    assert out["layers[0].unit_weight"] == 120.0 * PCF_TO_KNM3


def test_normalize_units_point_list():
    fields = {"water_table.points": {"value": [(0.0, 10.0), (50.0, 20.0)], "unit": "ft"}}
    out = normalize_units(fields)
    assert out["water_table.points"] == [
        [0.0, 10.0 * FT_TO_M],
        [50.0 * FT_TO_M, 20.0 * FT_TO_M],
    ]


def test_normalize_units_rejects_tag_on_dimensionless_path():
    with pytest.raises(UnknownUnit):
        normalize_units({"analysis.slice_count": {"value": 50, "unit": "m"}})


_paths = st.sampled_from(
    ["geometry.height", "geometry.slope_angle", "layers[0].cohesion",
     "layers[1].unit_weight", "layers[0].friction_angle", "water_table.elevation"]
)
_units_for = {
    "length": ["m", "ft"],
    "angle": ["deg", "rad"],
    "stress": ["kpa", "psf"],
    "unit_weight": ["kn/m3", "pcf"],
}


@given(st.dictionaries(_paths, st.floats(0.1, 1000, allow_nan=False), max_size=6), st.randoms())
def test_normalize_is_idempotent(plain, rng):
    from slopeagent.units import FIELD_DIMENSIONS, strip_indices as strip

    fields = {}
    for path, v in plain.items():
        dim = FIELD_DIMENSIONS[strip(path)]
        if rng.random() < 0.5:
            fields[path] = {"value": v, "unit": rng.choice(_units_for[dim])}
        else:
            fields[path] = v
    once = normalize_units(fields)
    assert normalize_units(once) == once


def test_converted_values_are_nine_digit_clean():
    # quantization at the unit boundary: survives a 9-significant-digit print
    got = convert_value(0.5, "rad", "angle")
    assert got == float(f"{got:.9g}") == 28.6478898
    assert convert_value(1.0, "rad", "angle") == 57.2957795


@given(st.floats(1e-3, 1e6, allow_nan=False))
def test_any_conversion_is_nine_digit_clean(v):
    for unit, dim in (("ft", "length"), ("pcf", "unit_weight"),
                      ("psf", "stress"), ("rad", "angle")):
        got = convert_value(v, unit, dim)
        assert got == float(f"{got:.9g}")
