"""Script emission and parsing: round trips, grammar strictness, lint."""

import dataclasses
import glob
import json
import pathlib
from importlib import resources

import pytest
from hypothesis import given, settings

import gen
from slopeagent import (
    build_problem,
    canonical_hash,
    emit,
    get_profile,
    lint,
    loads_problem,
    parse_script,
)
from slopeagent.emitters import GRAMMAR_VERSION, METHOD_TOKENS, PROFILES
from slopeagent.errors import (
    ParseError,
    SlopeAgentError,
    UnknownProfile,
    UnsupportedFeature,
)

ROOT = pathlib.Path(__file__).resolve().parent.parent


def corpus_problems():
    out = []
    for path in sorted(glob.glob(str(ROOT / "corpus" / "p[0-9][0-9].json"))):
        out.append((pathlib.Path(path).stem, loads_problem(open(path).read())))
    bench = json.load(open(ROOT / "corpus" / "benchmark.json"))
    out.append(("benchmark", loads_problem(json.dumps(bench["problem"]))))
    return out


PROBLEMS = corpus_problems()


def forced(problem, target):
    return dataclasses.replace(
        problem, analysis=dataclasses.replace(problem.analysis, target=target))


def capable_pairs():
    """Every (problem, profile) combination the dialect can express."""
    pairs = []
    for pid, problem in PROBLEMS:
        for profile in PROFILES.values():
            if len(problem.layers) > 1 and not profile.supports_multilayer:
                continue
            pairs.append(pytest.param(problem, profile.target, id=f"{pid}-{profile.token}"))
    return pairs


# -- round trips -------------------------------------------------------------

@pytest.mark.parametrize("problem,target", capable_pairs())
def test_corpus_round_trip(problem, target):
    p = forced(problem, target)
    script = emit(p)
    back = parse_script(script.text)
    assert canonical_hash(back) == canonical_hash(p) == script.problem_hash
    # structural identity too, not just hash identity
    assert back == dataclasses.replace(p, provenance=())


@pytest.mark.parametrize("problem,target", capable_pairs())
def test_emission_is_deterministic(problem, target):
    p = forced(problem, target)
    assert emit(p).text == emit(p).text


def test_distinct_problems_emit_distinct_scripts():
    for profile in PROFILES.values():
        texts, hashes = set(), set()
        for _, problem in PROBLEMS:
            if len(problem.layers) > 1 and not profile.supports_multilayer:
                continue
            p = forced(problem, profile.target)
            texts.add(emit(p).text)
            hashes.add(canonical_hash(p))
        assert len(texts) == len(hashes)


@settings(max_examples=40, deadline=None)
@given(gen.partial_problems())
def test_adonis_round_trip_random(partial):
    p = forced(build_problem(partial), "ADONIS_PROFILE")
    assert canonical_hash(parse_script(emit(p).text)) == canonical_hash(p)


@settings(max_examples=40, deadline=None)
@given(gen.partial_problems(max_layers=1))
def test_hyrcan_round_trip_random(partial):
    p = forced(build_problem(partial), "HYRCAN_PROFILE")
    assert canonical_hash(parse_script(emit(p).text)) == canonical_hash(p)


def test_negative_zero_round_trips():
    base = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    pts = ((-20.0, -0.0),) + base.geometry.surface[1:]
    p = dataclasses.replace(base, geometry=dataclasses.replace(base.geometry, surface=pts))
    script = emit(p)
    assert " -0" not in script.text.replace("-0.", "-x.")  # zero prints as plain 0
    assert canonical_hash(parse_script(script.text)) == canonical_hash(p)


# -- script shape --------------------------------------------------------------

def test_emitted_script_metadata():
    p = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    script = emit(p)
    assert script.target == "ADONIS_PROFILE"
    assert script.grammar_version == GRAMMAR_VERSION
    assert script.problem_hash == canonical_hash(p)
    lines = script.text.split("\n")
    assert lines[1] == f"# problem {script.problem_hash}"
    assert script.text.endswith("\n")


def test_hash_comment_carries_no_authority():
    p = forced(PROBLEMS[0][1], "HYRCAN_PROFILE")
    script = emit(p)
    lines = script.text.split("\n")
    lines[1] = "# problem 0000000000000000"
    assert canonical_hash(parse_script("\n".join(lines))) == script.problem_hash


def test_comments_and_whitespace_are_insignificant():
    for _, problem in PROBLEMS[:4]:
        for profile in PROFILES.values():
            if len(problem.layers) > 1 and not profile.supports_multilayer:
                continue
            p = forced(problem, profile.target)
            script = emit(p)
            mangled = ["# injected banner", ""]
            for line in script.text.rstrip("\n").split("\n"):
                if line.startswith("#"):
                    continue
                mangled.append("\t " + line + "   # trailing note")
                mangled.append("")
            assert canonical_hash(parse_script("\n".join(mangled) + "\n")) == script.problem_hash


def test_call_dialect_tolerates_spread_punctuation():
    p = forced(PROBLEMS[2][1], "HYRCAN_PROFILE")
    script = emit(p)
    spread = []
    for line in script.text.rstrip("\n").split("\n"):
        if not line.startswith("#") and '"' not in line and "'" not in line:
            line = line.replace("(", "( ").replace(")", " )").replace(",", " , ")
        spread.append(line)
    assert canonical_hash(parse_script("\n".join(spread) + "\n")) == script.problem_hash


def test_expect_target():
    p = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    text = emit(p).text
    assert parse_script(text, expect_target="ADONIS_PROFILE")
    with pytest.raises(ParseError) as err:
        parse_script(text, expect_target="HYRCAN_PROFILE")
    assert err.value.expected == "hyrcan"


# -- grammar closure --------------------------------------------------------------

def _mutate(token: str) -> str:
    for i, ch in enumerate(token):
        if ch.isdigit():
            return token[:i] + str((int(ch) + 1) % 10) + token[i + 1:]
    return token + "x"


def test_single_token_mutations_never_collide():
    """Changing any one token either breaks the parse or changes the hash."""
    checked = 0
    for _, problem in PROBLEMS:
        for profile in PROFILES.values():
            if len(problem.layers) > 1 and not profile.supports_multilayer:
                continue
            p = forced(problem, profile.target)
            script = emit(p)
            lines = script.text.rstrip("\n").split("\n")
            for li, line in enumerate(lines):
                if line.startswith("#"):
                    continue
                tokens = line.split()
                for ti in range(len(tokens)):
                    mutated_line = " ".join(
                        _mutate(t) if k == ti else t for k, t in enumerate(tokens))
                    text = "\n".join(lines[:li] + [mutated_line] + lines[li + 1:]) + "\n"
                    checked += 1
                    try:
                        back = parse_script(text)
                        assert canonical_hash(back) != script.problem_hash, (
                            f"mutation survived unchanged at line {li + 1}: {mutated_line!r}")
                    except SlopeAgentError:
                        pass
    assert checked > 500


# -- parse errors -------------------------------------------------------------------

def test_empty_script():
    with pytest.raises(ParseError) as err:
        parse_script("")
    assert (err.value.line, err.value.column) == (1, 1)
    assert "set grammar" in err.value.expected


def test_wrong_keyword_position():
    with pytest.raises(ParseError) as err:
        parse_script("set grammar 1\nset turget adonis\n")
    assert (err.value.line, err.value.column) == (2, 5)
    assert err.value.expected == "'target'"


def test_unsupported_grammar_version():
    with pytest.raises(ParseError) as err:
        parse_script("set grammar 3\n")
    assert (err.value.line, err.value.column) == (1, 13)
    assert err.value.expected == "grammar version 1"
    with pytest.raises(ParseError) as err:
        parse_script("set_grammar(2)\n")
    assert (err.value.line, err.value.column) == (1, 13)


def test_float_where_integer_expected():
    p = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    text = emit(p).text.replace("set slices 50", "set slices 50.5")
    with pytest.raises(ParseError) as err:
        parse_script(text)
    assert err.value.expected == "an integer"


def test_unterminated_name():
    with pytest.raises(ParseError) as err:
        parse_script("set grammar 1\nset target adonis\nmodel new\n"
                     "surface point 0 0\nsurface point 10 5\nmaterial create 'fill\n")
    assert err.value.line == 6
    assert err.value.expected == "closing '"


def test_script_ended_early():
    with pytest.raises(ParseError) as err:
        parse_script("set grammar 1\nset target adonis\nmodel new\n")
    assert err.value.line == 4
    assert err.value.message == "script ended early"


def test_trailing_statement_rejected():
    p = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    with pytest.raises(ParseError) as err:
        parse_script(emit(p).text + "solve\n")
    assert err.value.expected == "end of script"


def test_single_water_point_rejected():
    p = forced(PROBLEMS[3][1], "ADONIS_PROFILE")  # has a water table
    lines = [ln for ln in emit(p).text.rstrip("\n").split("\n")]
    water = [i for i, ln in enumerate(lines) if ln.startswith("water point")]
    assert len(water) >= 2
    del lines[water[1]:water[-1] + 1]  # keep exactly one water point
    with pytest.raises(ParseError) as err:
        parse_script("\n".join(lines) + "\n")
    assert "'water'" in err.value.expected


def test_unknown_method_token():
    p = forced(PROBLEMS[2][1], "HYRCAN_PROFILE")
    text = emit(p).text.replace('method("bishop")', 'method("janbu")')
    with pytest.raises(ParseError) as err:
        parse_script(text)
    assert "bishop" in err.value.expected and "fellenius" in err.value.expected


def test_parse_error_payload_shape():
    try:
        parse_script("set grammar 3\n")
    except ParseError as err:
        payload = err.payload()
    assert payload["code"] == "parse_error"
    assert set(payload) == {"code", "message", "line", "column", "expected"}


# -- capability refusals ----------------------------------------------------------

def multilayer_problem():
    for _, problem in PROBLEMS:
        if len(problem.layers) > 1:
            return problem
    raise AssertionError("corpus lost its multilayer problems")


def test_hyrcan_refuses_multilayer():
    p = forced(multilayer_problem(), "HYRCAN_PROFILE")
    with pytest.raises(UnsupportedFeature) as err:
        emit(p)
    assert err.value.field_path == "layers"
    assert err.value.profile == "HYRCAN_PROFILE"


def test_emit_refuses_target_mismatch():
    p = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    with pytest.raises(UnsupportedFeature) as err:
        emit(p, target="HYRCAN_PROFILE")
    assert err.value.field_path == "analysis.target"


def test_emit_requires_a_profile():
    p = forced(PROBLEMS[0][1], "NONE")
    with pytest.raises(UnknownProfile):
        emit(p)
    with pytest.raises(UnknownProfile):
        get_profile("FLAC_PROFILE")


def test_name_charset_refusals():
    base = forced(PROBLEMS[0][1], "ADONIS_PROFILE")

    def named(problem, name):
        return dataclasses.replace(
            problem, layers=(dataclasses.replace(problem.layers[0], name=name),))

    with pytest.raises(UnsupportedFeature) as err:
        emit(named(base, "it's clay"))
    assert err.value.field_path == "layers[0].name"
    with pytest.raises(UnsupportedFeature):
        emit(named(base, "fill # 2"))
    # the other dialect's quote character is fine
    assert emit(named(base, 'the "good" fill')).text

    hyr = forced(PROBLEMS[2][1], "HYRCAN_PROFILE")
    with pytest.raises(UnsupportedFeature):
        emit(named(hyr, 'the "good" fill'))
    assert emit(named(hyr, "it's clay")).text


def test_emit_refuses_unprintable_values():
    base = forced(PROBLEMS[0][1], "ADONIS_PROFILE")
    dirty = 0.1 + 0.2  # 0.30000000000000004 does not survive 9-digit printing
    p = dataclasses.replace(
        base, layers=(dataclasses.replace(base.layers[0], cohesion=dirty),))
    with pytest.raises(UnsupportedFeature) as err:
        emit(p)
    assert err.value.field_path == "layers[0].cohesion"


# -- lint ---------------------------------------------------------------------------

def clean_problem():
    return PROBLEMS[0][1]


def test_lint_clean_problem_is_silent():
    assert lint(clean_problem()) == ()


def test_lint_rules_fire():
    p = clean_problem()
    coarse = dataclasses.replace(p, analysis=dataclasses.replace(
        p.analysis, slice_count=10,
        search=dataclasses.replace(p.analysis.search, nx=3)))
    codes = [w.code for w in lint(coarse)]
    assert codes == ["coarse_grid", "coarse_slices"]

    silly = dataclasses.replace(p, layers=(dataclasses.replace(
        p.layers[0], friction_angle=55.0, cohesion=1500.0,
        saturated_unit_weight=21.0),))
    warnings = lint(silly)
    assert [w.code for w in warnings] == [
        "implausible_cohesion", "implausible_friction", "satweight_without_water"]
    assert all(w.field_path.startswith("layers[0].") for w in warnings)


def test_lint_satweight_is_fine_with_water():
    wet = next(p for _, p in PROBLEMS
               if p.water_table is not None
               and any(L.saturated_unit_weight is not None for L in p.layers))
    assert not any(w.code == "satweight_without_water" for w in lint(wet))


# -- grammar files ------------------------------------------------------------------

@pytest.mark.parametrize("target", sorted(PROFILES))
def test_grammar_file_ships_and_matches_emitted_keywords(target):
    profile = PROFILES[target]
    grammar = (resources.files("slopeagent") / "profiles" / profile.grammar_file).read_text()
    assert f"version {GRAMMAR_VERSION}" in grammar
    assert profile.token in grammar

    rich = next(p for _, p in PROBLEMS
                if p.water_table is not None
                and (profile.supports_multilayer or len(p.layers) == 1))
    script = emit(forced(rich, target))
    for line in script.text.rstrip("\n").split("\n"):
        if line.startswith("#"):
            continue
        head = line.split("(")[0].split()[0]
        assert head in grammar, f"statement {head!r} missing from {profile.grammar_file}"
    for token in METHOD_TOKENS.values():
        assert token in grammar
