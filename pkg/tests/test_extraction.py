import json
import os

import pytest
from hypothesis import given, settings, strategies as st

from slopeagent.errors import (
    BackendUnavailable,
    MalformedBackendReply,
    ProblemFormatError,
)
from slopeagent.extraction import (
    Conflict,
    ExtractionResult,
    ImageAnnotation,
    LlmBackendConfig,
    annotation_fields,
    extract_llm,
    extract_rule_based,
    load_annotation,
    merge_turns,
    register_mock_backend,
    unregister_mock_backend,
    wants_defaults,
    wants_run,
)
from slopeagent.model import PartialProblem
from slopeagent.units import normalize_units


@pytest.fixture
def mock_backend():
    names = []

    def register(name, handler):
        register_mock_backend(name, handler)
        names.append(name)
        return LlmBackendConfig(endpoint=f"mock://{name}", max_retries=1, timeout=1.0)

    yield register
    for name in names:
        unregister_mock_backend(name)


def _reply(fields, conflicts=()):
    return {"tool": "report_extraction", "arguments": {"fields": fields, "conflicts": list(conflicts)}}


def test_full_sentence_matches_grammar():
    r = extract_rule_based(
        "a 10 m high slope at 45 degrees, cohesion 25 kPa, friction angle 20, unit weight 19 kN/m3"
    )
    assert r.partial.fields == {
        "geometry.height": 10.0,
        "geometry.slope_angle": 45.0,
        "layers[0].cohesion": 25.0,
        "layers[0].friction_angle": 20.0,
        "layers[0].unit_weight": 19.0,
    }
    assert r.missing_required == ()
    assert r.conflicts == ()


def test_nothing_matches_lists_required_fields():
    r = extract_rule_based("analyze my slope")
    assert r.partial.fields == {}
    assert r.missing_required == (
        "geometry.height",
        "geometry.slope_angle",
        "layers[0].unit_weight",
        "layers[0].cohesion",
        "layers[0].friction_angle",
    )


def test_duplicate_mention_conflicts_first_value_kept():
    r = extract_rule_based("cohesion 25 kPa today but cohesion 30 kPa yesterday")
    assert r.partial.fields["layers[0].cohesion"] == 25.0
    assert r.conflicts == (Conflict("layers[0].cohesion", 25.0, 30.0),)


def test_restatement_is_not_a_conflict():
    r = extract_rule_based("cohesion 25 kPa, and again cohesion 25 kPa")
    assert r.conflicts == ()


def test_intent_helpers():
    assert wants_defaults("assume typical values")
    assert wants_defaults("use the defaults")
    assert not wants_defaults("cohesion 25 kPa")
    assert wants_run("run the analysis")
    assert wants_run("what is the factor of safety here?")
    assert wants_run("solve it")
    assert not wants_run("the slope is 10 m high")


# -- merge -------------------------------------------------------------------


def _res(fields):
    partial = PartialProblem(dict(fields), {k: "USER" for k in fields})
    return ExtractionResult(partial, tuple(partial.missing_required()), ())


def test_merge_adds_new_fields():
    acc = PartialProblem({"geometry.height": 10.0}, {"geometry.height": "USER"})
    out = merge_turns(acc, _res({"geometry.slope_angle": 45.0}))
    assert out.merged.fields == {"geometry.height": 10.0, "geometry.slope_angle": 45.0}
    assert out.conflicts == ()


def test_merge_conflict_keeps_old_value():
    acc = PartialProblem({"layers[0].cohesion": 25.0}, {"layers[0].cohesion": "USER"})
    out = merge_turns(acc, _res({"layers[0].cohesion": 30.0}))
    assert out.merged.fields["layers[0].cohesion"] == 25.0
    assert out.conflicts == (Conflict("layers[0].cohesion", 25.0, 30.0),)


def test_merge_identity_on_empty():
    out = merge_turns(PartialProblem(), _res({}))
    assert out.merged.fields == {}
    assert out.conflicts == ()


_pool = st.sampled_from(
    ["geometry.height", "geometry.slope_angle", "layers[0].cohesion",
     "layers[0].unit_weight", "layers[0].friction_angle", "analysis.slice_count"]
)


@settings(max_examples=60)
@given(st.dictionaries(_pool, st.floats(1, 50, allow_nan=False), max_size=4),
       st.dictionaries(_pool, st.floats(1, 50, allow_nan=False), max_size=4))
def test_merge_disjoint_updates_commute(a_fields, b_fields):
    for k in set(a_fields) & set(b_fields):
        del b_fields[k]
    a, b = _res(a_fields), _res(b_fields)
    ab = merge_turns(merge_turns(PartialProblem(), a).merged, b).merged
    ba = merge_turns(merge_turns(PartialProblem(), b).merged, a).merged
    assert ab.fields == ba.fields
    assert ab.provenance == ba.provenance


# -- llm backend ---------------------------------------------------------------


def test_mock_backend_echo(mock_backend):
    config = mock_backend("echo", lambda payload: _reply({"geometry.height": 10.0, "geometry.slope_angle": 45.0}))
    r = extract_llm("ten meter slope at forty five", config=config)
    assert r.partial.fields == {"geometry.height": 10.0, "geometry.slope_angle": 45.0}
    assert r.partial.provenance["geometry.height"] == "LLM_EXTRACTED"


def test_mock_backend_applies_unit_normalization(mock_backend):
    config = mock_backend("units", lambda p: _reply({"geometry.height": {"value": 30.0, "unit": "ft"}}))
    r = extract_llm("thirty foot slope", config=config)
    assert r.partial.fields["geometry.height"] == normalize_units(
        {"geometry.height": {"value": 30.0, "unit": "ft"}}
    )["geometry.height"]


def test_malformed_reply_free_text(mock_backend):
    config = mock_backend("chatty", lambda p: "sure, the height is ten meters!")
    with pytest.raises(MalformedBackendReply):
        extract_llm("height?", config=config)


def test_malformed_reply_unknown_field(mock_backend):
    config = mock_backend("bogus", lambda p: _reply({"geometry.wingspan": 3.0}))
    with pytest.raises(MalformedBackendReply):
        extract_llm("hmm", config=config)


def test_malformed_reply_wrong_type(mock_backend):
    config = mock_backend("typed", lambda p: _reply({"geometry.height": "tall"}))
    with pytest.raises(MalformedBackendReply):
        extract_llm("hmm", config=config)


def test_malformed_reply_bad_unit(mock_backend):
    config = mock_backend("badunit", lambda p: _reply({"geometry.height": {"value": 1.0, "unit": "cubit"}}))
    with pytest.raises(MalformedBackendReply):
        extract_llm("hmm", config=config)


def test_backend_unavailable_after_retries(mock_backend):
    calls = []

    def flaky(payload):
        calls.append(1)
        raise ConnectionError("nope")

    config = mock_backend("down", flaky)
    with pytest.raises(BackendUnavailable):
        extract_llm("hello", config=config)
    assert len(calls) == config.max_retries + 1


def test_http_endpoint_unreachable_is_backend_unavailable():
    config = LlmBackendConfig(endpoint="http://127.0.0.1:9/extract", max_retries=0, timeout=0.5)
    with pytest.raises(BackendUnavailable):
        extract_llm("hello", config=config)


def test_credential_value_never_serialized(mock_backend, monkeypatch):
    secret = "hunter2-super-secret-token"
    monkeypatch.setenv("EXTRACT_TEST_CRED", secret)
    seen = {}

    def handler(payload):
        seen.update(payload)
        return _reply({"geometry.height": 10.0})

    config = LlmBackendConfig(
        endpoint="mock://cred", model="m1", credential_env="EXTRACT_TEST_CRED",
        max_retries=0, timeout=1.0,
    )
    register_mock_backend("cred", handler)
    try:
        r = extract_llm("height ten", config=config)
    finally:
        unregister_mock_backend("cred")
    assert secret not in json.dumps(seen)
    assert secret not in repr(r)
    assert secret not in repr(config)

    bad = LlmBackendConfig(
        endpoint="http://127.0.0.1:9/x", credential_env="EXTRACT_TEST_CRED",
        max_retries=0, timeout=0.5,
    )
    with pytest.raises(BackendUnavailable) as exc:
        extract_llm("hello", config=bad)
    assert secret not in str(exc.value)


# -- annotations -----------------------------------------------------------------


def test_annotation_only_skips_backend():
    ann = ImageAnnotation(labeled_dimensions=({"label": "H", "value": 32.8084, "unit": "ft"},))
    r = extract_llm("", annotations=ann, config=None)
    expected = normalize_units({"geometry.height": {"value": 32.8084, "unit": "ft"}})
    assert r.partial.fields["geometry.height"] == expected["geometry.height"]
    assert r.partial.fields["geometry.height"] == pytest.approx(10.0, rel=1e-6)
    assert r.partial.provenance["geometry.height"] == "IMAGE_ANNOTATION"


def test_annotation_material_callouts_group_by_layer():
    ann = ImageAnnotation(
        material_callouts=(
            {"layer_name": "fill", "property": "unit_weight", "value": 18.0, "unit": "kn/m3"},
            {"layer_name": "clay", "property": "cohesion", "value": 500.0, "unit": "psf"},
            {"layer_name": "fill", "property": "friction_angle", "value": 30.0, "unit": "deg"},
        )
    )
    fields = annotation_fields(ann)
    assert fields["layers[0].name"] == "fill"
    assert fields["layers[0].unit_weight"] == 18.0
    assert fields["layers[0].friction_angle"] == 30.0
    assert fields["layers[1].name"] == "clay"
    assert fields["layers[1].cohesion"] == normalize_units(
        {"layers[1].cohesion": {"value": 500.0, "unit": "psf"}}
    )["layers[1].cohesion"]


def test_annotation_surface_polyline():
    ann = ImageAnnotation(surface=((0.0, 0.0), (10.0, 10.0)), surface_unit="ft")
    fields = annotation_fields(ann)
    assert fields["geometry.surface"] == [[0.0, 0.0], [3.048, 3.048]]


def test_annotation_unknown_label_rejected():
    ann = ImageAnnotation(labeled_dimensions=({"label": "wingspan", "value": 3.0, "unit": "m"},))
    with pytest.raises(ProblemFormatError):
        annotation_fields(ann)


def test_annotation_conflicts_with_backend_kept_backend(mock_backend):
    config = mock_backend("conf", lambda p: _reply({"geometry.height": 10.0}))
    ann = ImageAnnotation(labeled_dimensions=({"label": "height", "value": 12.0, "unit": "m"},))
    r = extract_llm("slope sketch attached", annotations=ann, config=config)
    assert r.partial.fields["geometry.height"] == 10.0
    assert r.conflicts == (Conflict("geometry.height", 10.0, 12.0),)


def test_annotation_sidecar_round_trip(tmp_path):
    doc = {
        "annotations": {
            "labeled_dimensions": [{"label": "H", "value": 10.0, "unit": "m"}],
            "material_callouts": [
                {"layer_name": "fill", "property": "cohesion", "value": 5.0, "unit": "kpa"}
            ],
            "surface": [[0.0, 0.0], [10.0, 10.0]],
            "surface_unit": "m",
        }
    }
    path = tmp_path / "sketch.annotation.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    ann = load_annotation(path)
    fields = annotation_fields(ann)
    assert fields["geometry.height"] == 10.0
    assert fields["layers[0].cohesion"] == 5.0
    assert fields["geometry.surface"] == [[0.0, 0.0], [10.0, 10.0]]

    path.write_text("{}", encoding="utf-8")
    with pytest.raises(ProblemFormatError):
        load_annotation(path)
