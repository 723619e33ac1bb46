"""Script emitters and parsers for the supported analysis targets.

Two dialects are shipped, each defined normatively by a grammar file under
profiles/ and implemented here:

  * ADONIS_PROFILE -- command-per-line statements (profiles/adonis.grammar)
  * HYRCAN_PROFILE -- function-call statements (profiles/hyrcan.grammar)

A script is UTF-8, LF line endings, one statement per line, `#` comments.
Statement order is fixed in both dialects: header (grammar version, target),
geometry, materials top-down, water table, analysis settings, solve, output.
The header also carries the problem's canonical hash as a comment; parsers
ignore comments, so round-trip identity is checked by re-hashing the parsed
problem, never by trusting the comment.

Numbers are printed with 9 significant digits. Values that cannot survive
that printing exactly are refused at emit time (UnsupportedFeature) rather
than silently rounded; every value produced by the package's own ingestion
paths is already 9-digit clean, so refusal only bites hand-crafted files.
Under that precondition parse(emit(p)) reproduces p's canonical hash.

Parsers accept exactly what the emitters produce, modulo whitespace and
comments: fixed statement order, fixed arity, grammar version 1 only.
Anything else raises ParseError with the 1-based line and column of the
offending token and a short description of what was expected.
"""

import re
from dataclasses import dataclass

from .canon import canonical_hash
from .errors import ParseError, UnknownProfile, UnsupportedFeature
from .model import (
    AnalysisConfig,
    MaterialLayer,
    SearchConfig,
    SlopeGeometry,
    SlopeProblem,
)
from .units import round_sig

GRAMMAR_VERSION = "1"

METHOD_TOKENS = {"BISHOP_SIMPLIFIED": "bishop", "FELLENIUS": "fellenius"}
METHODS_BY_TOKEN = {v: k for k, v in METHOD_TOKENS.items()}


@dataclass(frozen=True)
class TargetProfile:
    """Capabilities and wire details of one script dialect."""

    target: str
    token: str                       # target name as written in scripts
    dialect: str                     # "command" or "call"
    quote: str                       # character that delimits names
    supports_water_table: bool
    supports_multilayer: bool
    method_set: tuple[str, ...]
    grammar_file: str


PROFILES = {
    "ADONIS_PROFILE": TargetProfile(
        target="ADONIS_PROFILE",
        token="adonis",
        dialect="command",
        quote="'",
        supports_water_table=True,
        supports_multilayer=True,
        method_set=("BISHOP_SIMPLIFIED", "FELLENIUS"),
        grammar_file="adonis.grammar",
    ),
    "HYRCAN_PROFILE": TargetProfile(
        target="HYRCAN_PROFILE",
        token="hyrcan",
        dialect="call",
        quote='"',
        supports_water_table=True,
        supports_multilayer=False,
        method_set=("BISHOP_SIMPLIFIED", "FELLENIUS"),
        grammar_file="hyrcan.grammar",
    ),
}

_PROFILES_BY_TOKEN = {p.token: p for p in PROFILES.values()}


def get_profile(target: str) -> TargetProfile:
    profile = PROFILES.get(target)
    if profile is None:
        raise UnknownProfile(f"no script profile for target {target!r}")
    return profile


@dataclass(frozen=True)
class EmittedScript:
    target: str
    text: str
    problem_hash: str
    grammar_version: str


# --- emission ----------------------------------------------------------------

def _fmt(v, field_path: str, profile: TargetProfile) -> str:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise UnsupportedFeature(f"non-numeric value at {field_path}",
                                 field_path=field_path, profile=profile.target)
    if isinstance(v, int):
        return str(v)
    if v == 0.0:
        return "0"
    if round_sig(v) != v:
        raise UnsupportedFeature(
            f"value at {field_path} does not fit the script's 9-significant-digit "
            "number format; quantize it first",
            field_path=field_path, profile=profile.target)
    return f"{v:.9g}"


def _name(name: str, field_path: str, profile: TargetProfile) -> str:
    if profile.quote in name or "\n" in name or "#" in name:
        raise UnsupportedFeature(
            f"material name at {field_path} cannot be written in this dialect",
            field_path=field_path, profile=profile.target)
    return f"{profile.quote}{name}{profile.quote}"


def _check_capabilities(problem: SlopeProblem, profile: TargetProfile) -> None:
    if len(problem.layers) > 1 and not profile.supports_multilayer:
        raise UnsupportedFeature(
            f"{profile.token} scripts describe a single material",
            field_path="layers", profile=profile.target)
    if problem.water_table is not None and not profile.supports_water_table:
        raise UnsupportedFeature(
            f"{profile.token} scripts cannot describe a water table",
            field_path="water_table", profile=profile.target)
    if problem.analysis.method not in profile.method_set:
        raise UnsupportedFeature(
            f"{profile.token} scripts cannot request method {problem.analysis.method}",
            field_path="analysis.method", profile=profile.target)


def _emit_command(problem: SlopeProblem, profile: TargetProfile, header: list[str]) -> list[str]:
    f = lambda path, v: _fmt(v, path, profile)
    lines = list(header)
    lines.append(f"set grammar {GRAMMAR_VERSION}")
    lines.append(f"set target {profile.token}")
    lines.append("model new")
    for i, (x, y) in enumerate(problem.geometry.surface):
        lines.append(f"surface point {f(f'geometry.surface[{i}]', x)} "
                     f"{f(f'geometry.surface[{i}]', y)}")
    for i, L in enumerate(problem.layers):
        p = f"layers[{i}]"
        lines.append(f"material create {_name(L.name, p + '.name', profile)}")
        lines.append(f"material weight {f(p + '.unit_weight', L.unit_weight)}")
        lines.append(f"material cohesion {f(p + '.cohesion', L.cohesion)}")
        lines.append(f"material friction {f(p + '.friction_angle', L.friction_angle)}")
        if L.saturated_unit_weight is not None:
            lines.append(f"material satweight {f(p + '.saturated_unit_weight', L.saturated_unit_weight)}")
        if L.bottom_elevation is not None:
            lines.append(f"material bottom {f(p + '.bottom_elevation', L.bottom_elevation)}")
    if problem.water_table is not None:
        for i, (x, y) in enumerate(problem.water_table):
            lines.append(f"water point {f(f'water_table[{i}]', x)} "
                         f"{f(f'water_table[{i}]', y)}")
    a = problem.analysis
    s = a.search
    lines.append(f"set method {METHOD_TOKENS[a.method]}")
    lines.append(f"set slices {a.slice_count}")
    lines.append(f"search x {f('analysis.search.x_range', s.x_range[0])} "
                 f"{f('analysis.search.x_range', s.x_range[1])}")
    lines.append(f"search y {f('analysis.search.y_range', s.y_range[0])} "
                 f"{f('analysis.search.y_range', s.y_range[1])}")
    lines.append(f"search grid {s.nx} {s.ny}")
    lines.append(f"search radii {s.radius_samples}")
    lines.append(f"search refine {s.refine_rounds}")
    lines.append("solve")
    lines.append("output fos")
    return lines


def _emit_call(problem: SlopeProblem, profile: TargetProfile, header: list[str]) -> list[str]:
    f = lambda path, v: _fmt(v, path, profile)
    lines = list(header)
    lines.append(f"set_grammar({GRAMMAR_VERSION})")
    lines.append(f'set_target("{profile.token}")')
    lines.append("new_model()")
    for i, (x, y) in enumerate(problem.geometry.surface):
        lines.append(f"surface_point({f(f'geometry.surface[{i}]', x)}, "
                     f"{f(f'geometry.surface[{i}]', y)})")
    L = problem.layers[0]
    lines.append(f"material({_name(L.name, 'layers[0].name', profile)}, "
                 f"{f('layers[0].unit_weight', L.unit_weight)}, "
                 f"{f('layers[0].cohesion', L.cohesion)}, "
                 f"{f('layers[0].friction_angle', L.friction_angle)})")
    if L.saturated_unit_weight is not None:
        lines.append(f"material_satweight({f('layers[0].saturated_unit_weight', L.saturated_unit_weight)})")
    if problem.water_table is not None:
        for i, (x, y) in enumerate(problem.water_table):
            lines.append(f"water_point({f(f'water_table[{i}]', x)}, "
                         f"{f(f'water_table[{i}]', y)})")
    a = problem.analysis
    s = a.search
    lines.append(f'method("{METHOD_TOKENS[a.method]}")')
    lines.append(f"slices({a.slice_count})")
    lines.append(f"search_x({f('analysis.search.x_range', s.x_range[0])}, "
                 f"{f('analysis.search.x_range', s.x_range[1])})")
    lines.append(f"search_y({f('analysis.search.y_range', s.y_range[0])}, "
                 f"{f('analysis.search.y_range', s.y_range[1])})")
    lines.append(f"search_grid({s.nx}, {s.ny})")
    lines.append(f"search_radii({s.radius_samples})")
    lines.append(f"search_refine({s.refine_rounds})")
    lines.append("solve()")
    lines.append('output("fos")')
    return lines


def emit(problem: SlopeProblem, target: str | None = None) -> EmittedScript:
    """Render a problem as a script for one target dialect.

    The dialect is the problem's own analysis.target unless given explicitly,
    in which case the two must agree (the target statement is part of the
    problem's identity, so emitting under a different one could never round
    trip). Raises UnknownProfile for NONE or unrecognized targets and
    UnsupportedFeature for problems the dialect cannot express.
    """
    resolved = problem.analysis.target if target is None else target
    profile = get_profile(resolved)
    if resolved != problem.analysis.target:
        raise UnsupportedFeature(
            "script target must match the problem's analysis.target "
            f"({problem.analysis.target})",
            field_path="analysis.target", profile=profile.target)
    problem_hash = canonical_hash(problem)
    _check_capabilities(problem, profile)
    header = [
        f"# {profile.token}-profile slope stability script (grammar {GRAMMAR_VERSION})",
        f"# problem {problem_hash}",
    ]
    if profile.dialect == "command":
        lines = _emit_command(problem, profile, header)
    else:
        lines = _emit_call(problem, profile, header)
    return EmittedScript(
        target=profile.target,
        text="\n".join(lines) + "\n",
        problem_hash=problem_hash,
        grammar_version=GRAMMAR_VERSION,
    )


# --- tokenizing ---------------------------------------------------------------

_WORD = re.compile(r"[a-z_][a-z0-9_]*")
_NUMBER = re.compile(r"[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?")
_INT = re.compile(r"[-+]?\d+\Z")


@dataclass(frozen=True)
class _Tok:
    kind: str       # word | number | string | punct | end
    text: str
    line: int
    col: int        # 1-based


def _tokenize_line(line: str, lineno: int) -> list[_Tok]:
    toks = []
    i = 0
    n = len(line)
    while i < n:
        ch = line[i]
        if ch in " \t\r":
            i += 1
            continue
        if ch == "#":
            break
        if ch in "'\"":
            j = line.find(ch, i + 1)
            if j < 0:
                raise ParseError("unterminated name", line=lineno, column=i + 1,
                                 expected=f"closing {ch}")
            if "#" in line[i + 1:j]:
                raise ParseError("names cannot contain '#'", line=lineno,
                                 column=i + 2 + line[i + 1:j].index("#"),
                                 expected="a name without '#'")
            toks.append(_Tok("string", line[i + 1:j], lineno, i + 1))
            i = j + 1
            continue
        if ch in "(),":
            toks.append(_Tok("punct", ch, lineno, i + 1))
            i += 1
            continue
        w = _WORD.match(line, i)
        if w:
            toks.append(_Tok("word", w.group(), lineno, i + 1))
            i = w.end()
            continue
        m = _NUMBER.match(line, i)
        if m:
            toks.append(_Tok("number", m.group(), lineno, i + 1))
            i = m.end()
            continue
        raise ParseError(f"unexpected character {ch!r}", line=lineno, column=i + 1,
                         expected="a statement token")
    toks.append(_Tok("end", "", lineno, n + 1))
    return toks


class _Statements:
    """Comment- and blank-insensitive stream of tokenized statements."""

    def __init__(self, text: str):
        self.rows = []
        for lineno, raw in enumerate(text.split("\n"), start=1):
            toks = _tokenize_line(raw, lineno)
            if len(toks) > 1:
                self.rows.append(toks)
        self.pos = 0

    def peek_words(self, count: int = 2) -> tuple[str, ...]:
        if self.pos >= len(self.rows):
            return ()
        row = self.rows[self.pos]
        return tuple(t.text for t in row[:count] if t.kind == "word")

    def next_row(self, expected: str) -> "_Row":
        if self.pos >= len(self.rows):
            lineno = self.rows[-1][0].line + 1 if self.rows else 1
            raise ParseError("script ended early", line=lineno, column=1, expected=expected)
        row = _Row(self.rows[self.pos])
        self.pos += 1
        return row

    def at_end(self) -> bool:
        return self.pos >= len(self.rows)

    def fail_if_more(self) -> None:
        if not self.at_end():
            t = self.rows[self.pos][0]
            raise ParseError(f"unexpected statement {t.text!r}", line=t.line,
                             column=t.col, expected="end of script")


class _Row:
    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def _peek(self) -> _Tok:
        return self.toks[self.i]

    def word(self, *accept: str) -> str:
        t = self._peek()
        if t.kind != "word" or (accept and t.text not in accept):
            raise ParseError(f"unexpected token {t.text!r}", line=t.line, column=t.col,
                             expected=" or ".join(repr(a) for a in accept) or "a keyword")
        self.i += 1
        return t.text

    def words(self, *names: str) -> None:
        for name in names:
            self.word(name)

    def number(self) -> float:
        t = self._peek()
        if t.kind != "number":
            raise ParseError(f"unexpected token {t.text!r}", line=t.line, column=t.col,
                             expected="a number")
        self.i += 1
        return float(t.text)

    def integer(self) -> int:
        t = self._peek()
        if t.kind != "number" or not _INT.match(t.text):
            raise ParseError(f"unexpected token {t.text!r}", line=t.line, column=t.col,
                             expected="an integer")
        self.i += 1
        return int(t.text)

    def string(self) -> str:
        t = self._peek()
        if t.kind != "string":
            raise ParseError(f"unexpected token {t.text!r}", line=t.line, column=t.col,
                             expected="a quoted name")
        self.i += 1
        return t.text

    def punct(self, ch: str) -> None:
        t = self._peek()
        if t.kind != "punct" or t.text != ch:
            raise ParseError(f"unexpected token {t.text!r}", line=t.line, column=t.col,
                             expected=repr(ch))
        self.i += 1

    def close(self) -> None:
        self.punct(")")
        self.end()

    def end(self) -> None:
        t = self._peek()
        if t.kind != "end":
            raise ParseError(f"trailing token {t.text!r}", line=t.line, column=t.col,
                             expected="end of statement")


# --- parsing: command dialect ---------------------------------------------------

def _parse_command(stream: _Statements, profile: TargetProfile) -> dict:
    row = stream.next_row("'set grammar'")
    row.words("set", "grammar")
    version = row.integer()
    if str(version) != GRAMMAR_VERSION:
        t = row.toks[row.i - 1]
        raise ParseError(f"unsupported grammar version {version}", line=t.line,
                         column=t.col, expected=f"grammar version {GRAMMAR_VERSION}")
    row.end()

    row = stream.next_row("'set target'")
    row.words("set", "target", profile.token)
    row.end()

    row = stream.next_row("'model new'")
    row.words("model", "new")
    row.end()

    points = []
    while stream.peek_words() == ("surface", "point") or len(points) < 2:
        row = stream.next_row("'surface point'")
        row.words("surface", "point")
        points.append((row.number(), row.number()))
        row.end()

    materials = []
    while stream.peek_words() == ("material", "create") or not materials:
        row = stream.next_row("'material create'")
        row.words("material", "create")
        mat = {"name": row.string()}
        row.end()
        for prop, key in (("weight", "unit_weight"), ("cohesion", "cohesion"),
                          ("friction", "friction_angle")):
            row = stream.next_row(f"'material {prop}'")
            row.words("material", prop)
            mat[key] = row.number()
            row.end()
        if stream.peek_words() == ("material", "satweight"):
            row = stream.next_row("'material satweight'")
            row.words("material", "satweight")
            mat["saturated_unit_weight"] = row.number()
            row.end()
        if stream.peek_words() == ("material", "bottom"):
            row = stream.next_row("'material bottom'")
            row.words("material", "bottom")
            mat["bottom_elevation"] = row.number()
            row.end()
        materials.append(mat)

    water = []
    while stream.peek_words() == ("water", "point") or len(water) == 1:
        row = stream.next_row("'water point'")
        row.words("water", "point")
        water.append((row.number(), row.number()))
        row.end()

    row = stream.next_row("'set method'")
    row.words("set", "method")
    method = row.word(*sorted(METHODS_BY_TOKEN))
    row.end()

    row = stream.next_row("'set slices'")
    row.words("set", "slices")
    slices = row.integer()
    row.end()

    search = {}
    for axis in ("x", "y"):
        row = stream.next_row(f"'search {axis}'")
        row.words("search", axis)
        search[axis] = (row.number(), row.number())
        row.end()
    row = stream.next_row("'search grid'")
    row.words("search", "grid")
    search["nx"], search["ny"] = row.integer(), row.integer()
    row.end()
    row = stream.next_row("'search radii'")
    row.words("search", "radii")
    search["radius_samples"] = row.integer()
    row.end()
    row = stream.next_row("'search refine'")
    row.words("search", "refine")
    search["refine_rounds"] = row.integer()
    row.end()

    row = stream.next_row("'solve'")
    row.word("solve")
    row.end()
    row = stream.next_row("'output fos'")
    row.words("output", "fos")
    row.end()
    stream.fail_if_more()

    return {"points": points, "materials": materials, "water": water,
            "method": METHODS_BY_TOKEN[method], "slices": slices, "search": search}


# --- parsing: call dialect ------------------------------------------------------

def _call_row(stream: _Statements, name: str) -> _Row:
    row = stream.next_row(f"'{name}('")
    row.word(name)
    row.punct("(")
    return row


def _parse_call(stream: _Statements, profile: TargetProfile) -> dict:
    row = _call_row(stream, "set_grammar")
    version = row.integer()
    if str(version) != GRAMMAR_VERSION:
        t = row.toks[row.i - 1]
        raise ParseError(f"unsupported grammar version {version}", line=t.line,
                         column=t.col, expected=f"grammar version {GRAMMAR_VERSION}")
    row.close()

    row = _call_row(stream, "set_target")
    token = row.string()
    if token != profile.token:
        t = row.toks[row.i - 1]
        raise ParseError(f"target {token!r} does not belong to this dialect",
                         line=t.line, column=t.col, expected=repr(profile.token))
    row.close()

    row = _call_row(stream, "new_model")
    row.close()

    points = []
    while stream.peek_words(1) == ("surface_point",) or len(points) < 2:
        row = _call_row(stream, "surface_point")
        x = row.number()
        row.punct(",")
        y = row.number()
        row.close()
        points.append((x, y))

    row = _call_row(stream, "material")
    mat = {"name": row.string()}
    for key in ("unit_weight", "cohesion", "friction_angle"):
        row.punct(",")
        mat[key] = row.number()
    row.close()
    if stream.peek_words(1) == ("material_satweight",):
        row = _call_row(stream, "material_satweight")
        mat["saturated_unit_weight"] = row.number()
        row.close()

    water = []
    while stream.peek_words(1) == ("water_point",) or len(water) == 1:
        row = _call_row(stream, "water_point")
        x = row.number()
        row.punct(",")
        y = row.number()
        row.close()
        water.append((x, y))

    row = _call_row(stream, "method")
    token = row.string()
    if token not in METHODS_BY_TOKEN:
        t = row.toks[row.i - 1]
        raise ParseError(f"unknown method {token!r}", line=t.line, column=t.col,
                         expected=" or ".join(repr(k) for k in sorted(METHODS_BY_TOKEN)))
    row.close()
    method = METHODS_BY_TOKEN[token]

    row = _call_row(stream, "slices")
    slices = row.integer()
    row.close()

    search = {}
    for axis in ("x", "y"):
        row = _call_row(stream, f"search_{axis}")
        lo = row.number()
        row.punct(",")
        hi = row.number()
        row.close()
        search[axis] = (lo, hi)
    row = _call_row(stream, "search_grid")
    search["nx"] = row.integer()
    row.punct(",")
    search["ny"] = row.integer()
    row.close()
    row = _call_row(stream, "search_radii")
    search["radius_samples"] = row.integer()
    row.close()
    row = _call_row(stream, "search_refine")
    search["refine_rounds"] = row.integer()
    row.close()

    row = _call_row(stream, "solve")
    row.close()
    row = _call_row(stream, "output")
    out = row.string()
    if out != "fos":
        t = row.toks[row.i - 1]
        raise ParseError(f"unknown output {out!r}", line=t.line, column=t.col,
                         expected="'fos'")
    row.close()
    stream.fail_if_more()

    return {"points": points, "materials": [mat], "water": water,
            "method": method, "slices": slices, "search": search}


def _assemble(parsed: dict, profile: TargetProfile) -> SlopeProblem:
    layers = tuple(
        MaterialLayer(
            name=m["name"],
            unit_weight=m["unit_weight"],
            cohesion=m["cohesion"],
            friction_angle=m["friction_angle"],
            saturated_unit_weight=m.get("saturated_unit_weight"),
            bottom_elevation=m.get("bottom_elevation"),
        )
        for m in parsed["materials"]
    )
    s = parsed["search"]
    return SlopeProblem(
        geometry=SlopeGeometry(tuple(parsed["points"])),
        layers=layers,
        water_table=tuple(parsed["water"]) if parsed["water"] else None,
        analysis=AnalysisConfig(
            method=parsed["method"],
            slice_count=parsed["slices"],
            target=profile.target,
            search=SearchConfig(
                x_range=s["x"], y_range=s["y"], nx=s["nx"], ny=s["ny"],
                radius_samples=s["radius_samples"], refine_rounds=s["refine_rounds"],
            ),
        ),
        provenance=(),
    )


def parse_script(text: str, expect_target: str | None = None) -> SlopeProblem:
    """Parse a script back into a problem (provenance empty).

    The dialect is recognized from the script's own header; pass
    expect_target to additionally require a particular one.
    """
    stream = _Statements(text)
    first = stream.peek_words(1)
    if first == ("set",):
        profile = PROFILES["ADONIS_PROFILE"]
    elif first == ("set_grammar",):
        profile = PROFILES["HYRCAN_PROFILE"]
    else:
        t = stream.rows[0][0] if stream.rows else _Tok("end", "", 1, 1)
        raise ParseError("unrecognized script header", line=t.line, column=t.col,
                         expected="'set grammar' or 'set_grammar('")
    if expect_target is not None and profile.target != expect_target:
        t = stream.rows[0][0]
        raise ParseError(
            f"script is {profile.target}, not {expect_target}",
            line=t.line, column=t.col, expected=get_profile(expect_target).token)
    if profile.dialect == "command":
        parsed = _parse_command(stream, profile)
    else:
        parsed = _parse_call(stream, profile)
    return _assemble(parsed, profile)


# --- lint ----------------------------------------------------------------------

@dataclass(frozen=True)
class LintWarning:
    code: str
    field_path: str
    message: str


def lint(problem: SlopeProblem) -> tuple[LintWarning, ...]:
    """Advisory checks for numerically risky or implausible setups."""
    warnings = []
    a = problem.analysis
    if a.slice_count < 25:
        warnings.append(LintWarning(
            "coarse_slices", "analysis.slice_count",
            f"{a.slice_count} slices is coarse; results change visibly below 25"))
    if a.search.nx < 5 or a.search.ny < 5:
        warnings.append(LintWarning(
            "coarse_grid", "analysis.search",
            f"a {a.search.nx}x{a.search.ny} center grid is unlikely to bracket the critical circle"))
    for i, L in enumerate(problem.layers):
        if L.friction_angle > 50.0:
            warnings.append(LintWarning(
                "implausible_friction", f"layers[{i}].friction_angle",
                f"friction angle {L.friction_angle} exceeds 50 degrees"))
        if L.cohesion > 1000.0:
            warnings.append(LintWarning(
                "implausible_cohesion", f"layers[{i}].cohesion",
                f"cohesion {L.cohesion} kPa exceeds 1000 kPa"))
        if L.saturated_unit_weight is not None and problem.water_table is None:
            warnings.append(LintWarning(
                "satweight_without_water", f"layers[{i}].saturated_unit_weight",
                "saturated unit weight is set but there is no water table"))
    return tuple(sorted(warnings, key=lambda w: (w.field_path, w.code)))
