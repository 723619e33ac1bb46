"""Turn natural-language statements into partial problem field maps.

Two backends sit behind one result type. ``extract_rule_based`` applies the
pattern grammar documented below and runs with no network and no credentials;
``extract_llm`` prompts a remote (or registered mock) backend with a fixed
system instruction plus the machine-readable field schema and requires the
reply to be a structured tool call. Both normalize units before returning.

Pattern grammar (case-insensitive, applied in the order listed; every match
is masked out of the text so later rules cannot re-consume its characters):

* ``saturated unit weight <n> [unit]`` -> layers[0].saturated_unit_weight
* ``unit weight <n> [unit]``           -> layers[0].unit_weight
* ``friction [angle] | phi <n> [unit]``-> layers[0].friction_angle
* ``cohesion <n> [unit]``              -> layers[0].cohesion
* ``crest/toe extent <n> [unit]``      -> geometry.crest_extent / toe_extent
* water table / groundwater / phreatic surface, four shapes:
  ``... depth [of] <n> [unit]``, ``... at elevation <n> [unit]``,
  ``... <n> [unit] below|deep|depth``, ``... <n> [unit] elevation``
                                       -> water_table.depth / elevation
* ``height <n>``, ``H = <n>``, ``<n> [unit] high|tall``,
  ``<n> <unit> slope|embankment|cut|bank`` -> geometry.height
* ``<n> slices``, ``slice count <n>``  -> analysis.slice_count
* ``[slope] angle <n>``, ``slope of <n>``, ``[inclined] at <n> <angle unit>``,
  ``<n> <angle unit> slope``           -> geometry.slope_angle
* ``bishop`` / ``fellenius|ordinary method [of slices]|oms`` -> analysis.method
* ``adonis`` / ``hyrcan``              -> analysis.target
* ``soft clay`` / ``dense sand`` / ``generic soil`` -> layers[0].name

A field mentioned twice with differing values keeps the first value and
reports a conflict; an identical restatement is not a conflict. Optional
units default to the canonical system (m, kN/m3, kPa, degrees).

``wants_defaults`` and ``wants_run`` classify intent words ("assume",
"typical", "run", "solve", ...) for the clarification policy; they read the
raw text, never the extracted fields.
"""

from __future__ import annotations

import dataclasses
import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from typing import Any, Callable

from .errors import (
    BackendUnavailable,
    MalformedBackendReply,
    ProblemFormatError,
    UnknownUnit,
)
from .model import PartialProblem
from .units import normalize_field, normalize_units, strip_indices

_NUM = r"[-+]?(?:\d+\.?\d*|\.\d+)"
_LEN_U = r"(?:meters?|metres?|feet|foot|ft|m)\b"
_UW_U = r"(?:kn/m3\b|kn/m³|knm3\b|pcf\b|lb/ft3\b)"
_ST_U = r"(?:kpa\b|kn/m2\b|kn/m²|psf\b|lb/ft2\b)"
_ANG_U = r"(?:°|degrees?\b|degs?\b|radians?\b|rad\b)"
_MASK = "\x1f"
_GAP = r"[^.;,\d\x1f]*?"  # free words between keyword and number, same clause
_LEAD = r"\s*(?:of|is|=|:)?\s*"


@dataclass(frozen=True)
class _Rule:
    field_path: str
    pattern: re.Pattern
    fixed_value: Any = None  # flag rules carry their value here
    integer: bool = False


def _num_rule(path: str, body: str, integer: bool = False) -> _Rule:
    return _Rule(path, re.compile(body, re.IGNORECASE), integer=integer)


def _flag_rule(path: str, body: str, value: Any) -> _Rule:
    return _Rule(path, re.compile(body, re.IGNORECASE), fixed_value=value)


_WATER = r"(?:water\s*table|groundwater|phreatic\s+surface)"

GRAMMAR: tuple[_Rule, ...] = (
    _num_rule(
        "layers[0].saturated_unit_weight",
        rf"saturated\s+unit\s+weight{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_UW_U})?",
    ),
    _num_rule("layers[0].unit_weight", rf"unit\s+weight{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_UW_U})?"),
    _num_rule(
        "layers[0].friction_angle",
        rf"(?:friction\s+angle|friction|phi|φ){_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_ANG_U})?",
    ),
    _num_rule("layers[0].cohesion", rf"cohesion{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_ST_U})?"),
    _num_rule("geometry.crest_extent", rf"crest\s+extent{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?"),
    _num_rule("geometry.toe_extent", rf"toe\s+extent{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?"),
    _num_rule(
        "water_table.depth",
        rf"{_WATER}\s*(?:is|at|lies|sits)?\s*(?:a\s+)?depth\s*(?:of)?\s*(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?",
    ),
    _num_rule(
        "water_table.elevation",
        rf"{_WATER}\s*(?:is|lies|sits)?\s*at\s+(?:an?\s+)?elevation\s*(?:of)?\s*(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?",
    ),
    _num_rule(
        "water_table.depth",
        rf"{_WATER}{_GAP}(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?\s*(?:below|deep|depth)\b",
    ),
    _num_rule(
        "water_table.elevation",
        rf"{_WATER}{_GAP}(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?\s*elevation\b",
    ),
    _num_rule("geometry.height", rf"(?:slope\s+)?height{_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?"),
    _num_rule("geometry.height", rf"\bH\s*=\s*(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})?"),
    _num_rule("geometry.height", rf"(?P<value>{_NUM})[\s-]*(?P<unit>{_LEN_U})?[\s-]*(?:high|tall)\b"),
    _num_rule(
        "geometry.height",
        rf"(?P<value>{_NUM})\s*(?P<unit>{_LEN_U})\s+(?:slope|embankment|cut|bank)\b",
    ),
    _num_rule("analysis.slice_count", r"(?P<value>\d+)\s+slices\b", integer=True),
    _num_rule("analysis.slice_count", rf"slice\s+count{_LEAD}(?P<value>\d+)", integer=True),
    _num_rule("analysis.slice_count", r"slices\s*(?:=|:)\s*(?P<value>\d+)", integer=True),
    _num_rule(
        "geometry.slope_angle",
        rf"(?:slope\s+angle|angle){_LEAD}(?P<value>{_NUM})\s*(?P<unit>{_ANG_U})?",
    ),
    _num_rule("geometry.slope_angle", rf"slope\s+of\s+(?P<value>{_NUM})\s*(?P<unit>{_ANG_U})?"),
    _num_rule("geometry.slope_angle", rf"(?:inclined\s+at|at)\s+(?P<value>{_NUM})\s*(?P<unit>{_ANG_U})"),
    _num_rule("geometry.slope_angle", rf"(?P<value>{_NUM})\s*(?P<unit>{_ANG_U})\s*(?:slope|incline)s?\b"),
    _flag_rule("analysis.method", r"\bbishop\b", "BISHOP_SIMPLIFIED"),
    _flag_rule(
        "analysis.method",
        r"\b(?:fellenius|ordinary\s+method(?:\s+of\s+slices)?|oms)\b",
        "FELLENIUS",
    ),
    _flag_rule("analysis.target", r"\badonis\b", "ADONIS_PROFILE"),
    _flag_rule("analysis.target", r"\bhyrcan\b", "HYRCAN_PROFILE"),
    _flag_rule("layers[0].name", r"\bsoft\s+clay\b", "soft_clay"),
    _flag_rule("layers[0].name", r"\bdense\s+sand\b", "dense_sand"),
    _flag_rule("layers[0].name", r"\bgeneric\s+soil\b", "generic_soil"),
)

_DEFAULTS_INTENT = re.compile(
    r"\b(assume|assumes|assumed|assuming|typical|defaults?|reasonable)\b", re.IGNORECASE
)
_RUN_INTENT = re.compile(
    r"\b(run|solve|solving|analy[sz]e|analy[sz]ing|compute|calculate|factor\s+of\s+safety|fos)\b",
    re.IGNORECASE,
)


def wants_defaults(text: str) -> bool:
    return bool(_DEFAULTS_INTENT.search(text))


def wants_run(text: str) -> bool:
    return bool(_RUN_INTENT.search(text))


@dataclass(frozen=True)
class Conflict:
    field_path: str
    existing_value: Any
    new_value: Any


@dataclass(frozen=True)
class ExtractionResult:
    """A field_path never appears in both partial and missing_required."""

    partial: PartialProblem
    missing_required: tuple[str, ...]
    conflicts: tuple[Conflict, ...]


def _finish(fields: dict, prov: dict, conflicts: list) -> ExtractionResult:
    partial = PartialProblem(fields, prov)
    return ExtractionResult(partial, tuple(partial.missing_required()), tuple(conflicts))


def extract_rule_based(text: str) -> ExtractionResult:
    """Deterministic grammar backend; identical text yields identical results."""
    masked = list(text)
    fields: dict[str, Any] = {}
    prov: dict[str, str] = {}
    conflicts: list[Conflict] = []
    for rule in GRAMMAR:
        current = "".join(masked)
        for m in rule.pattern.finditer(current):
            if rule.fixed_value is not None:
                value = rule.fixed_value
            else:
                raw = float(m.group("value"))
                unit = m.groupdict().get("unit")
                value = {"value": raw, "unit": unit.strip().lower()} if unit else raw
                value = normalize_field(rule.field_path, value)
                if rule.integer:
                    value = int(value)
            if rule.field_path not in fields:
                fields[rule.field_path] = value
                prov[rule.field_path] = "USER"
            elif fields[rule.field_path] != value:
                conflicts.append(Conflict(rule.field_path, fields[rule.field_path], value))
            for i in range(m.start(), m.end()):
                masked[i] = _MASK
    return _finish(fields, prov, conflicts)


def extraction_to_dict(result: ExtractionResult) -> dict:
    """Stable plain-dict form used by the golden prompt corpus."""
    return {
        "fields": {k: result.partial.fields[k] for k in sorted(result.partial.fields)},
        "missing_required": list(result.missing_required),
        "conflicts": [dataclasses.asdict(c) for c in result.conflicts],
    }


# ---------------------------------------------------------------------------
# LLM backend path
# ---------------------------------------------------------------------------

SYSTEM_INSTRUCTION = (
    "You extract slope-stability problem parameters from the user's message. "
    "Reply with exactly one tool call named report_extraction whose arguments "
    "object has a 'fields' map keyed by the canonical field paths given in "
    "the schema. Attach units as {\"value\": v, \"unit\": tag} when the user "
    "stated any; never guess values the user did not state."
)

#: Machine-readable field schema sent with every backend prompt. Keys use
#: index-stripped canonical paths; replies may use concrete indices.
FIELD_SCHEMA: dict[str, dict] = {
    "geometry.height": {"type": "number", "dimension": "length"},
    "geometry.slope_angle": {"type": "number", "dimension": "angle"},
    "geometry.crest_extent": {"type": "number", "dimension": "length"},
    "geometry.toe_extent": {"type": "number", "dimension": "length"},
    "geometry.surface": {"type": "points", "dimension": "length"},
    "layers[].name": {"type": "string"},
    "layers[].unit_weight": {"type": "number", "dimension": "unit_weight"},
    "layers[].saturated_unit_weight": {"type": "number", "dimension": "unit_weight"},
    "layers[].cohesion": {"type": "number", "dimension": "stress"},
    "layers[].friction_angle": {"type": "number", "dimension": "angle"},
    "layers[].bottom_elevation": {"type": "number", "dimension": "length"},
    "water_table.depth": {"type": "number", "dimension": "length"},
    "water_table.elevation": {"type": "number", "dimension": "length"},
    "water_table.points": {"type": "points", "dimension": "length"},
    "analysis.method": {"type": "string", "enum": ["FELLENIUS", "BISHOP_SIMPLIFIED"]},
    "analysis.slice_count": {"type": "integer"},
    "analysis.target": {"type": "string", "enum": ["ADONIS_PROFILE", "HYRCAN_PROFILE", "NONE"]},
}


@dataclass(frozen=True)
class LlmBackendConfig:
    """credential_env names an environment variable; the credential value is
    read at call time, sent only in the request header, and never stored."""

    endpoint: str
    model: str = "default"
    credential_env: str = ""
    timeout: float = 30.0
    max_retries: int = 2


@dataclass(frozen=True)
class ImageAnnotation:
    """Structured sidecar for a problem sketch; the deterministic stand-in
    for vision extraction. Units come from the normalize_units set."""

    labeled_dimensions: tuple[dict, ...] = ()
    material_callouts: tuple[dict, ...] = ()
    surface: tuple[tuple[float, float], ...] | None = None
    surface_unit: str = "m"


_DIMENSION_LABELS = {
    "h": "geometry.height",
    "height": "geometry.height",
    "beta": "geometry.slope_angle",
    "β": "geometry.slope_angle",
    "angle": "geometry.slope_angle",
    "slope angle": "geometry.slope_angle",
    "crest extent": "geometry.crest_extent",
    "toe extent": "geometry.toe_extent",
    "water depth": "water_table.depth",
    "water elevation": "water_table.elevation",
}

_CALLOUT_PROPERTIES = (
    "unit_weight",
    "saturated_unit_weight",
    "cohesion",
    "friction_angle",
    "bottom_elevation",
)


def annotation_fields(ann: ImageAnnotation) -> dict[str, Any]:
    """Map an annotation to canonical-unit fields; strict about labels."""
    fields: dict[str, Any] = {}
    for i, d in enumerate(ann.labeled_dimensions):
        label = str(d.get("label", "")).strip().lower()
        path = _DIMENSION_LABELS.get(label)
        if path is None:
            raise ProblemFormatError(
                f"unknown dimension label {d.get('label')!r}",
                field_path=f"annotations.labeled_dimensions[{i}].label",
            )
        value = d["value"]
        fields[path] = {"value": value, "unit": d["unit"]} if d.get("unit") else value
    order: list[str] = []
    for i, c in enumerate(ann.material_callouts):
        name = str(c["layer_name"])
        if name not in order:
            order.append(name)
        idx = order.index(name)
        prop = str(c.get("property", ""))
        if prop not in _CALLOUT_PROPERTIES:
            raise ProblemFormatError(
                f"unknown material property {prop!r}",
                field_path=f"annotations.material_callouts[{i}].property",
            )
        fields[f"layers[{idx}].name"] = name
        value = c["value"]
        fields[f"layers[{idx}].{prop}"] = (
            {"value": value, "unit": c["unit"]} if c.get("unit") else value
        )
    if ann.surface is not None:
        fields["geometry.surface"] = {
            "value": [list(p) for p in ann.surface],
            "unit": ann.surface_unit,
        }
    return normalize_units(fields)


def load_annotation(path) -> ImageAnnotation:
    """Read an annotation sidecar file (top-level key ``annotations``)."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"annotation sidecar is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or "annotations" not in data:
        raise ProblemFormatError("annotation sidecar must carry a top-level 'annotations' key")
    a = data["annotations"]
    try:
        surface = a.get("surface")
        return ImageAnnotation(
            labeled_dimensions=tuple(a.get("labeled_dimensions", ())),
            material_callouts=tuple(a.get("material_callouts", ())),
            surface=None if surface is None else tuple((float(x), float(y)) for x, y in surface),
            surface_unit=str(a.get("surface_unit", "m")),
        )
    except (TypeError, ValueError, KeyError) as exc:
        raise ProblemFormatError(f"malformed annotation sidecar: {exc}") from exc


_MOCK_BACKENDS: dict[str, Callable[[dict], Any]] = {}


def register_mock_backend(name: str, handler: Callable[[dict], Any]) -> None:
    _MOCK_BACKENDS[name] = handler


def unregister_mock_backend(name: str) -> None:
    _MOCK_BACKENDS.pop(name, None)


def _call_backend(payload: dict, config: LlmBackendConfig) -> Any:
    attempts = config.max_retries + 1
    last = "unknown"
    if config.endpoint.startswith("mock://"):
        handler = _MOCK_BACKENDS.get(config.endpoint[len("mock://"):])
        if handler is None:
            raise BackendUnavailable(f"no mock backend registered at {config.endpoint}")
        for _ in range(attempts):
            try:
                return handler(payload)
            except (ConnectionError, TimeoutError, OSError) as exc:
                last = type(exc).__name__
        raise BackendUnavailable(f"backend failed after {attempts} attempts ({last})")
    body = json.dumps(payload).encode("utf-8")
    headers = {"Content-Type": "application/json"}
    if config.credential_env:
        # value lives only in this request object; never logged or stored
        headers["Authorization"] = "Bearer " + os.environ.get(config.credential_env, "")
    for _ in range(attempts):
        request = urllib.request.Request(config.endpoint, data=body, headers=headers)
        try:
            with urllib.request.urlopen(request, timeout=config.timeout) as resp:
                text = resp.read().decode("utf-8")
            try:
                return json.loads(text)
            except json.JSONDecodeError as exc:
                raise MalformedBackendReply(f"backend reply is not JSON: {exc}") from exc
        except (urllib.error.URLError, ConnectionError, TimeoutError, OSError) as exc:
            last = type(exc).__name__
    raise BackendUnavailable(f"backend failed after {attempts} attempts ({last})")


def _require(cond: bool, why: str) -> None:
    if not cond:
        raise MalformedBackendReply(f"backend reply rejected: {why}")


def _parse_backend_reply(reply: Any) -> tuple[dict, list]:
    _require(isinstance(reply, dict), "reply is not an object")
    _require(reply.get("tool") == "report_extraction", "missing report_extraction tool call")
    args = reply.get("arguments")
    _require(isinstance(args, dict), "arguments is not an object")
    raw_fields = args.get("fields")
    _require(isinstance(raw_fields, dict), "arguments.fields is not an object")
    fields: dict[str, Any] = {}
    for path, value in raw_fields.items():
        _require(isinstance(path, str), "field path is not a string")
        schema = FIELD_SCHEMA.get(strip_indices(path))
        _require(schema is not None, f"unknown field path {path!r}")
        kind = schema["type"]
        inner = value["value"] if isinstance(value, dict) and "value" in value else value
        if kind in ("number", "integer"):
            _require(isinstance(inner, (int, float)) and not isinstance(inner, bool),
                     f"{path} must be a number")
        elif kind == "string":
            _require(isinstance(inner, str), f"{path} must be a string")
            enum = schema.get("enum")
            _require(enum is None or inner in enum, f"{path} must be one of {enum}")
        elif kind == "points":
            _require(
                isinstance(inner, list)
                and all(isinstance(p, (list, tuple)) and len(p) == 2 for p in inner),
                f"{path} must be a list of [x, y] pairs",
            )
        fields[path] = value
    conflicts = []
    for c in args.get("conflicts", []):
        _require(
            isinstance(c, dict) and {"field_path", "existing_value", "new_value"} <= set(c),
            "conflict entries need field_path/existing_value/new_value",
        )
        conflicts.append(Conflict(c["field_path"], c["existing_value"], c["new_value"]))
    try:
        fields = normalize_units(fields)
    except UnknownUnit as exc:
        raise MalformedBackendReply(f"backend reply rejected: {exc.message}") from exc
    for path, schema in ((p, FIELD_SCHEMA[strip_indices(p)]) for p in fields):
        if schema["type"] == "integer":
            fields[path] = int(fields[path])
    return fields, conflicts


def extract_llm(
    text: str,
    annotations: ImageAnnotation | None = None,
    config: LlmBackendConfig | None = None,
) -> ExtractionResult:
    """Backend-assisted extraction; annotations are resolved in-process and
    never sent over the wire. Disagreements between backend fields and
    annotation fields surface as conflicts (backend value kept)."""
    fields: dict[str, Any] = {}
    prov: dict[str, str] = {}
    conflicts: list[Conflict] = []
    if text and text.strip():
        if config is None:
            raise BackendUnavailable("no backend configured")
        payload = {
            "system": SYSTEM_INSTRUCTION,
            "schema": FIELD_SCHEMA,
            "model": config.model,
            "text": text,
        }
        reply = _call_backend(payload, config)
        backend_fields, backend_conflicts = _parse_backend_reply(reply)
        for path, value in backend_fields.items():
            fields[path] = value
            prov[path] = "LLM_EXTRACTED"
        conflicts.extend(backend_conflicts)
    if annotations is not None:
        for path, value in annotation_fields(annotations).items():
            if path not in fields:
                fields[path] = value
                prov[path] = "IMAGE_ANNOTATION"
            elif fields[path] != value:
                conflicts.append(Conflict(path, fields[path], value))
    return _finish(fields, prov, conflicts)


# ---------------------------------------------------------------------------
# Multi-turn merge
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MergeOutcome:
    merged: PartialProblem
    conflicts: tuple[Conflict, ...]


def merge_turns(accumulated: PartialProblem, update: ExtractionResult) -> MergeOutcome:
    """Non-destructive merge: new fields join, a differing update to a set
    field is reported and NOT applied, an identical restatement is silent.
    Merging disjoint updates commutes."""
    merged = accumulated.copy()
    conflicts: list[Conflict] = []
    for path in sorted(update.partial.fields):
        value = update.partial.fields[path]
        if path not in merged.fields:
            merged.fields[path] = value
            merged.provenance[path] = update.partial.provenance.get(path, "USER")
        elif merged.fields[path] != value:
            conflicts.append(Conflict(path, merged.fields[path], value))
    return MergeOutcome(merged, tuple(conflicts))
