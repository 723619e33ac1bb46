import math

import pytest
from hypothesis import given, settings

from gen import clean, partial_problems
from slopeagent.errors import MissingGeometry
from slopeagent.model import (
    AnalysisConfig,
    MaterialLayer,
    PartialProblem,
    SearchConfig,
    SlopeGeometry,
    SlopeProblem,
    build_problem,
    default_search_config,
    fill_defaults,
    horizontal_water_table,
    round_sig,
    validate,
)


def _analysis(**over):
    base = dict(
        method="BISHOP_SIMPLIFIED",
        slice_count=50,
        target="NONE",
        search=SearchConfig((0.0, 30.0), (12.0, 30.0), 4, 4, 4, 1),
    )
    base.update(over)
    return AnalysisConfig(**base)


def _layer(**over):
    base = dict(name="fill", unit_weight=18.0, cohesion=5.0, friction_angle=20.0)
    base.update(over)
    return MaterialLayer(**base)


def test_parametric_expansion_four_vertices():
    g = SlopeGeometry.from_parametric(10.0, 45.0)
    assert g.surface == ((-20.0, 0.0), (0.0, 0.0), (10.0, 10.0), (30.0, 10.0))


def test_parametric_expansion_custom_extents():
    g = SlopeGeometry.from_parametric(10.0, 45.0, crest_extent=5.0, toe_extent=3.0)
    assert g.surface == ((-3.0, 0.0), (0.0, 0.0), (10.0, 10.0), (15.0, 10.0))


def test_parametric_vertices_are_nine_digit_clean():
    g = SlopeGeometry.from_parametric(10.0, 26.57)
    for x, y in g.surface:
        assert float(f"{x:.9g}") == x
        assert float(f"{y:.9g}") == y
    run = 10.0 / math.tan(math.radians(26.57))
    assert g.surface[2][0] == pytest.approx(run, rel=1e-9)


def test_surface_interpolation_and_extension():
    g = SlopeGeometry.from_parametric(10.0, 45.0)
    assert g.y_at(5.0) == pytest.approx(5.0)
    assert g.y_at(-100.0) == 0.0
    assert g.y_at(100.0) == 10.0


def test_validate_clean_problem(simple_problem):
    assert validate(simple_problem) == ()


def test_validate_friction_bound():
    p = SlopeProblem(
        SlopeGeometry.from_parametric(10.0, 45.0),
        (_layer(friction_angle=95.0),),
        None,
        _analysis(),
    )
    report = validate(p)
    assert len(report) == 1
    assert report[0].field_path == "layers[0].friction_angle"


def test_validate_water_above_surface():
    p = SlopeProblem(
        SlopeGeometry.from_parametric(10.0, 45.0),
        (_layer(),),
        ((-20.0, 11.0), (30.0, 11.0)),  # 1 m above the crest
        _analysis(),
    )
    report = validate(p)
    assert len(report) == 1
    assert report[0].field_path == "water_table"


def test_validate_nonmonotone_surface():
    p = SlopeProblem(
        SlopeGeometry(((0.0, 0.0), (5.0, 3.0), (5.0, 6.0))),
        (_layer(),),
        None,
        _analysis(),
    )
    assert any(v.field_path == "geometry.surface[2]" for v in validate(p))


def test_validate_strengthless_layer():
    p = SlopeProblem(
        SlopeGeometry.from_parametric(10.0, 45.0),
        (_layer(cohesion=0.0, friction_angle=0.0),),
        None,
        _analysis(),
    )
    assert any("strengthless" in v.message for v in validate(p))


def test_validate_layer_boundaries_descend():
    layers = (
        _layer(name="a", bottom_elevation=-2.0),
        _layer(name="b", bottom_elevation=-1.0),  # must be below -2
        _layer(name="c"),
    )
    p = SlopeProblem(SlopeGeometry.from_parametric(10.0, 45.0), layers, None, _analysis())
    assert any(v.field_path == "layers[1].bottom_elevation" for v in validate(p))


def test_validate_missing_interior_boundary():
    layers = (_layer(name="a"), _layer(name="b"))
    p = SlopeProblem(SlopeGeometry.from_parametric(10.0, 45.0), layers, None, _analysis())
    assert any(v.field_path == "layers[0].bottom_elevation" for v in validate(p))


def test_validate_report_sorted_and_deterministic():
    p = SlopeProblem(
        SlopeGeometry(((0.0, 0.0),)),  # too short
        (),
        None,
        _analysis(slice_count=3, search=SearchConfig((5.0, 1.0), (0.0, 1.0), 1, 4, 1, -1)),
    )
    r1 = validate(p)
    r2 = validate(p)
    assert r1 == r2
    paths = [v.field_path for v in r1]
    assert paths == sorted(paths)
    assert len(r1) >= 5


def test_fill_defaults_requires_geometry():
    with pytest.raises(MissingGeometry):
        fill_defaults(PartialProblem({"layers[0].cohesion": 10.0}))


def test_fill_defaults_never_overwrites(simple_partial):
    filled = fill_defaults(simple_partial)
    for k, v in simple_partial.fields.items():
        assert filled.fields[k] == v
        assert filled.provenance[k] == "USER"
    assert filled.fields["analysis.method"] == "BISHOP_SIMPLIFIED"
    assert filled.provenance["analysis.method"] == "DEFAULTED"
    assert filled.fields["analysis.slice_count"] == 50
    assert filled.fields["analysis.target"] == "NONE"


def test_fill_defaults_material_class_by_name():
    partial = PartialProblem(
        {
            "geometry.height": 8.0,
            "geometry.slope_angle": 30.0,
            "layers[0].name": "Soft Clay",
        }
    )
    filled = fill_defaults(partial)
    assert filled.fields["layers[0].unit_weight"] == 17.0
    assert filled.fields["layers[0].cohesion"] == 25.0
    assert filled.fields["layers[0].friction_angle"] == 0.0


def test_fill_defaults_generic_material():
    partial = PartialProblem({"geometry.height": 8.0, "geometry.slope_angle": 30.0})
    filled = fill_defaults(partial)
    assert filled.fields["layers[0].unit_weight"] == 19.0
    assert filled.fields["layers[0].cohesion"] == 5.0
    assert filled.fields["layers[0].friction_angle"] == 30.0


def test_fill_defaults_complete_partial_is_identity(simple_partial):
    fields = dict(simple_partial.fields)
    fields.update(
        {
            "analysis.method": "FELLENIUS",
            "analysis.slice_count": 40,
            "analysis.target": "NONE",
            "analysis.search": {
                "x_range": (0.0, 20.0),
                "y_range": (12.0, 30.0),
                "nx": 3,
                "ny": 3,
                "radius_samples": 3,
                "refine_rounds": 0,
            },
        }
    )
    partial = PartialProblem(fields, {k: "USER" for k in fields})
    filled = fill_defaults(partial)
    assert filled.fields == fields
    assert all(src == "USER" for src in filled.provenance.values())


def test_build_problem_simple(simple_problem):
    p = simple_problem
    assert p.layers[0].name == "fill"
    assert p.analysis.method == "BISHOP_SIMPLIFIED"
    assert p.water_table is None
    assert validate(p) == ()
    defaulted = {pr.field_path for pr in p.provenance if pr.source == "DEFAULTED"}
    assert "analysis.method" in defaulted
    assert "analysis.search" in defaulted


def test_build_problem_water_depth_clips_to_surface(simple_partial):
    partial = simple_partial.copy()
    partial.fields["water_table.depth"] = 2.0
    p = build_problem(partial)
    assert p.water_table is not None
    assert validate(p) == ()
    # at the crest the table sits depth below; downslope it follows the ground
    assert p.water_y_at(30.0) == pytest.approx(8.0)
    assert p.water_y_at(-20.0) == pytest.approx(0.0)
    assert p.water_y_at(4.0) == pytest.approx(4.0)  # on the face
    assert p.water_y_at(9.0) == pytest.approx(8.0)  # past the crossing at x=8


def test_build_problem_water_elevation(simple_partial):
    partial = simple_partial.copy()
    partial.fields["water_table.elevation"] = 4.0
    p = build_problem(partial)
    assert validate(p) == ()
    assert p.water_y_at(20.0) == pytest.approx(4.0)
    assert p.water_y_at(0.0) == pytest.approx(0.0)


def test_horizontal_water_table_monotone_x():
    g = SlopeGeometry.from_parametric(10.0, 45.0)
    pts = horizontal_water_table(g, 6.0)
    xs = [x for x, _ in pts]
    assert xs == sorted(xs)
    assert len(xs) == len(set(xs))


def test_default_search_spans_footprint():
    g = SlopeGeometry.from_parametric(10.0, 45.0)
    s = default_search_config(g)
    assert s.x_range == (-20.0, 30.0)
    assert s.y_range[0] == pytest.approx(12.5)
    assert s.y_range[1] == pytest.approx(30.0)
    assert (s.nx, s.ny, s.radius_samples, s.refine_rounds) == (10, 10, 10, 2)


def test_round_sig():
    assert round_sig(0.0) == 0.0
    assert round_sig(123456789.123) == 123456789.0
    assert round_sig(1.0 / 3.0) == 0.333333333


@settings(max_examples=60)
@given(partial_problems())
def test_random_partials_build_valid_problems(partial):
    p = build_problem(partial)
    assert validate(p) == ()


@settings(max_examples=60)
@given(clean(1.0, 80.0), clean(10.0, 80.0))
def test_parametric_problems_always_valid(h, beta):
    p = build_problem(PartialProblem({"geometry.height": h, "geometry.slope_angle": beta}))
    assert validate(p) == ()
