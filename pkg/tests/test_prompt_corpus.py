"""Golden corpus: every shipped prompt fixture must match exactly."""

import json
from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from slopeagent.extraction import extract_rule_based, extraction_to_dict
from slopeagent.model import build_problem, validate

CORPUS = json.loads(
    (Path(__file__).resolve().parent.parent / "corpus" / "prompts.json").read_text("utf-8")
)


def test_corpus_size():
    assert len(CORPUS) >= 30


@pytest.mark.parametrize("fixture", CORPUS, ids=[f["id"] for f in CORPUS])
def test_prompt_golden_exact(fixture):
    result = extract_rule_based(fixture["text"])
    assert extraction_to_dict(result) == fixture["expect"]
    assert all(src == "USER" for src in result.partial.provenance.values())


@pytest.mark.parametrize("fixture", CORPUS, ids=[f["id"] for f in CORPUS])
def test_no_field_in_both_partial_and_missing(fixture):
    result = extract_rule_based(fixture["text"])
    overlap = set(result.partial.fields) & set(result.missing_required)
    assert overlap == set()


@pytest.mark.parametrize(
    "fixture",
    [f for f in CORPUS if f["geometry_complete"]],
    ids=[f["id"] for f in CORPUS if f["geometry_complete"]],
)
def test_geometry_complete_fixtures_build_valid_problems(fixture):
    result = extract_rule_based(fixture["text"])
    problem = build_problem(result.partial)
    assert validate(problem) == ()


def test_extraction_is_deterministic():
    for fixture in CORPUS:
        a = json.dumps(extraction_to_dict(extract_rule_based(fixture["text"])), sort_keys=True)
        b = json.dumps(extraction_to_dict(extract_rule_based(fixture["text"])), sort_keys=True)
        assert a == b


@settings(max_examples=80)
@given(st.text(max_size=200))
def test_arbitrary_text_never_crashes(text):
    result = extract_rule_based(text)
    assert set(result.partial.fields) & set(result.missing_required) == set()
