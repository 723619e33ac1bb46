"""Canonical slope-stability problem model.

The canonical problem is unit-normalized (m, kN/m3, kPa, degrees) and fully
immutable. Two construction paths exist:

* directly from complete data (``SlopeProblem(...)``), e.g. when parsing a
  canonical problem file or an emitted script;
* from a ``PartialProblem`` field map accumulated over chat turns, completed
  by ``fill_defaults`` (``build_problem``).

Geometry convention for parametric slopes: toe at the origin, ground rising
left to right. ``height`` H and ``slope_angle`` beta expand to the 4-vertex
polyline (-toe_extent, 0), (0, 0), (run, H), (run + crest_extent, H) with
run = H / tan(beta). Extents default to 2H. Expanded vertices are rounded to
9 significant digits so emitted scripts reproduce them exactly.

Validation never raises: ``validate`` returns a deterministic report of
violations ordered by field path. Constructors accept out-of-range values so
that parsed candidate structures can always be inspected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Iterable

from .errors import MissingGeometry
from .units import normalize_units, round_sig, strip_indices

METHODS = ("FELLENIUS", "BISHOP_SIMPLIFIED")
TARGETS = ("ADONIS_PROFILE", "HYRCAN_PROFILE", "NONE")
PROVENANCE_SOURCES = ("USER", "DEFAULTED", "LLM_EXTRACTED", "IMAGE_ANNOTATION")

GAMMA_W = 9.81  # kN/m3, fixed

DEFAULTS_VERSION = "1"

# Material classes are configuration constants of this artifact. A layer whose
# name matches a class is completed from that class, otherwise generic_soil.
MATERIAL_CLASSES = {
    "generic_soil": {"unit_weight": 19.0, "cohesion": 5.0, "friction_angle": 30.0},
    "soft_clay": {"unit_weight": 17.0, "cohesion": 25.0, "friction_angle": 0.0},
    "dense_sand": {"unit_weight": 20.0, "cohesion": 0.0, "friction_angle": 38.0},
}

# Flat defaults table. DEFAULTED provenance entries must resolve (after index
# stripping) to a key in this table. analysis.search holds the constants of the
# geometry-derived default grid rule, see default_search_config().
DEFAULTS_TABLE = {
    "layers[].unit_weight": MATERIAL_CLASSES["generic_soil"]["unit_weight"],
    "layers[].cohesion": MATERIAL_CLASSES["generic_soil"]["cohesion"],
    "layers[].friction_angle": MATERIAL_CLASSES["generic_soil"]["friction_angle"],
    "layers[].name": "layer",
    "analysis.method": "BISHOP_SIMPLIFIED",
    "analysis.slice_count": 50,
    "analysis.target": "NONE",
    "analysis.search": {
        "y_lift_lo": 0.25,  # fractions of relief added above the surface top
        "y_lift_hi": 2.0,
        "nx": 10,
        "ny": 10,
        "radius_samples": 10,
        "refine_rounds": 2,
    },
}


@dataclass(frozen=True)
class SlopeGeometry:
    """Ground surface as an x-monotone polyline of (x, y) meters."""

    surface: tuple[tuple[float, float], ...]

    @classmethod
    def from_parametric(
        cls,
        height: float,
        slope_angle: float,
        crest_extent: float | None = None,
        toe_extent: float | None = None,
    ) -> "SlopeGeometry":
        """Expand H/beta (+optional extents, default 2H each) to 4 vertices."""
        crest = 2.0 * height if crest_extent is None else crest_extent
        toe = 2.0 * height if toe_extent is None else toe_extent
        run = height / math.tan(math.radians(slope_angle))
        pts = [(-toe, 0.0), (0.0, 0.0), (run, height), (run + crest, height)]
        return cls(tuple((round_sig(x), round_sig(y)) for x, y in pts))

    def x_extent(self) -> tuple[float, float]:
        return self.surface[0][0], self.surface[-1][0]

    def y_at(self, x: float) -> float:
        """Piecewise-linear surface elevation; flat extension beyond the ends."""
        pts = self.surface
        if x <= pts[0][0]:
            return pts[0][1]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x <= x1:
                t = (x - x0) / (x1 - x0)
                return y0 + t * (y1 - y0)
        return pts[-1][1]


@dataclass(frozen=True)
class MaterialLayer:
    """Mohr-Coulomb layer. bottom_elevation is the horizontal boundary to the
    layer below; None marks the bottom layer (unbounded half-space)."""

    name: str
    unit_weight: float
    cohesion: float
    friction_angle: float
    saturated_unit_weight: float | None = None
    bottom_elevation: float | None = None


@dataclass(frozen=True)
class SearchConfig:
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    nx: int
    ny: int
    radius_samples: int
    refine_rounds: int


@dataclass(frozen=True)
class AnalysisConfig:
    method: str
    slice_count: int
    target: str
    search: SearchConfig


@dataclass(frozen=True)
class FieldProvenance:
    field_path: str
    source: str


@dataclass(frozen=True)
class SlopeProblem:
    geometry: SlopeGeometry
    layers: tuple[MaterialLayer, ...]
    water_table: tuple[tuple[float, float], ...] | None
    analysis: AnalysisConfig
    provenance: tuple[FieldProvenance, ...] = ()

    def water_y_at(self, x: float) -> float | None:
        """Water-table elevation at x (endpoint extension), None when absent."""
        if not self.water_table:
            return None
        pts = self.water_table
        if x <= pts[0][0]:
            return pts[0][1]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            if x <= x1:
                t = (x - x0) / (x1 - x0)
                return y0 + t * (y1 - y0)
        return pts[-1][1]


@dataclass(frozen=True)
class Violation:
    field_path: str
    message: str


ValidationReport = tuple  # tuple[Violation, ...]


def _finite(x: Any) -> bool:
    return isinstance(x, (int, float)) and math.isfinite(x)


def _check_polyline(pts: Iterable, path: str, out: list[Violation]) -> bool:
    pts = list(pts)
    ok = True
    if len(pts) < 2:
        out.append(Violation(path, "polyline needs at least 2 points"))
        return False
    for i, pt in enumerate(pts):
        if len(pt) != 2 or not (_finite(pt[0]) and _finite(pt[1])):
            out.append(Violation(f"{path}[{i}]", "coordinates must be finite numbers"))
            ok = False
    if ok:
        for i in range(1, len(pts)):
            if not pts[i][0] > pts[i - 1][0]:
                out.append(Violation(f"{path}[{i}]", "x must be strictly increasing"))
                ok = False
    return ok


def validate(problem: SlopeProblem) -> tuple[Violation, ...]:
    """Check every model invariant; returns violations sorted by field path.

    An empty report means the problem is canonical and solvable.
    """
    v: list[Violation] = []

    geom_ok = _check_polyline(problem.geometry.surface, "geometry.surface", v)

    if len(problem.layers) < 1:
        v.append(Violation("layers", "at least one layer is required"))
    prev_bottom = math.inf
    for i, layer in enumerate(problem.layers):
        p = f"layers[{i}]"
        if not (_finite(layer.unit_weight) and layer.unit_weight > 0):
            v.append(Violation(f"{p}.unit_weight", "unit weight must be > 0 kN/m3"))
        if not (_finite(layer.cohesion) and layer.cohesion >= 0):
            v.append(Violation(f"{p}.cohesion", "cohesion must be >= 0 kPa"))
        if not (_finite(layer.friction_angle) and 0 <= layer.friction_angle < 90):
            v.append(Violation(f"{p}.friction_angle", "friction angle must lie in [0, 90) degrees"))
        elif _finite(layer.cohesion) and layer.cohesion == 0 and layer.friction_angle == 0:
            v.append(Violation(f"{p}.cohesion", "strengthless layer: cohesion and friction angle are both zero"))
        if layer.saturated_unit_weight is not None:
            if not (_finite(layer.saturated_unit_weight) and layer.saturated_unit_weight >= layer.unit_weight):
                v.append(Violation(f"{p}.saturated_unit_weight", "saturated unit weight must be >= unit weight"))
        is_last = i == len(problem.layers) - 1
        if not is_last:
            if layer.bottom_elevation is None:
                v.append(Violation(f"{p}.bottom_elevation", "every layer above the bottom one needs a bottom elevation"))
            elif not _finite(layer.bottom_elevation):
                v.append(Violation(f"{p}.bottom_elevation", "bottom elevation must be finite"))
            elif not layer.bottom_elevation < prev_bottom:
                v.append(Violation(f"{p}.bottom_elevation", "layer boundaries must strictly descend top-down"))
            else:
                prev_bottom = layer.bottom_elevation
        elif layer.bottom_elevation is not None and not _finite(layer.bottom_elevation):
            v.append(Violation(f"{p}.bottom_elevation", "bottom elevation must be finite"))

    if problem.water_table is not None:
        if _check_polyline(problem.water_table, "water_table", v) and geom_ok:
            xs = sorted(
                {x for x, _ in problem.water_table}
                | {x for x, _ in problem.geometry.surface}
            )
            lo = max(problem.water_table[0][0], problem.geometry.surface[0][0])
            hi = min(problem.water_table[-1][0], problem.geometry.surface[-1][0])
            for x in xs:
                if lo <= x <= hi:
                    wy = _interp(problem.water_table, x)
                    # slack covers 9-significant-digit vertex quantization
                    if wy > problem.geometry.y_at(x) + 1e-6 * max(1.0, abs(wy)):
                        v.append(Violation("water_table", f"water table lies above the ground surface at x={x:g}"))
                        break

    a = problem.analysis
    if a.method not in METHODS:
        v.append(Violation("analysis.method", f"method must be one of {', '.join(METHODS)}"))
    if not isinstance(a.slice_count, int) or not 10 <= a.slice_count <= 10000:
        v.append(Violation("analysis.slice_count", "slice count must be an integer in [10, 10000]"))
    if a.target not in TARGETS:
        v.append(Violation("analysis.target", f"target must be one of {', '.join(TARGETS)}"))
    s = a.search
    for rng, name in ((s.x_range, "x_range"), (s.y_range, "y_range")):
        if len(rng) != 2 or not (_finite(rng[0]) and _finite(rng[1])):
            v.append(Violation(f"analysis.search.{name}", "range bounds must be finite"))
        elif not rng[0] < rng[1]:
            v.append(Violation(f"analysis.search.{name}", "range must be strictly ordered"))
    if not isinstance(s.nx, int) or s.nx < 2:
        v.append(Violation("analysis.search.nx", "grid counts must be integers >= 2"))
    if not isinstance(s.ny, int) or s.ny < 2:
        v.append(Violation("analysis.search.ny", "grid counts must be integers >= 2"))
    if not isinstance(s.radius_samples, int) or s.radius_samples < 2:
        v.append(Violation("analysis.search.radius_samples", "radius sample count must be >= 2"))
    if not isinstance(s.refine_rounds, int) or s.refine_rounds < 0:
        v.append(Violation("analysis.search.refine_rounds", "refine rounds must be >= 0"))

    for i, pr in enumerate(problem.provenance):
        p = f"provenance[{i}]"
        if pr.source not in PROVENANCE_SOURCES:
            v.append(Violation(f"{p}.source", f"source must be one of {', '.join(PROVENANCE_SOURCES)}"))
        elif pr.source == "DEFAULTED" and strip_indices(pr.field_path) not in DEFAULTS_TABLE:
            v.append(Violation(f"{p}.field_path", "DEFAULTED entry does not name a defaults-table key"))

    return tuple(sorted(v, key=lambda x: (x.field_path, x.message)))


def _interp(pts, x: float) -> float:
    if x <= pts[0][0]:
        return pts[0][1]
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        if x <= x1:
            return y0 + (x - x0) / (x1 - x0) * (y1 - y0)
    return pts[-1][1]


# ---------------------------------------------------------------------------
# Partial problems
# ---------------------------------------------------------------------------

#: Field paths the extraction layer must see before a problem can be built
#: without asking the user. Geometry is never defaulted.
REQUIRED_GEOMETRY = ("geometry.height", "geometry.slope_angle")
REQUIRED_MATERIAL = ("layers[0].unit_weight", "layers[0].cohesion", "layers[0].friction_angle")
REQUIRED_FIELDS = REQUIRED_GEOMETRY + REQUIRED_MATERIAL


@dataclass
class PartialProblem:
    """Accumulating field map: canonical field path -> value.

    Values are canonical-unit scalars, point lists, or {"value", "unit"}
    tagged scalars awaiting normalize_units.
    """

    fields: dict[str, Any] = field(default_factory=dict)
    provenance: dict[str, str] = field(default_factory=dict)

    def copy(self) -> "PartialProblem":
        return PartialProblem(dict(self.fields), dict(self.provenance))

    def has_geometry(self) -> bool:
        f = self.fields
        return "geometry.surface" in f or all(k in f for k in REQUIRED_GEOMETRY)

    def missing_required(self) -> list[str]:
        missing = []
        if "geometry.surface" not in self.fields:
            missing += [k for k in REQUIRED_GEOMETRY if k not in self.fields]
        missing += [k for k in REQUIRED_MATERIAL if k not in self.fields]
        return missing

    def layer_indices(self) -> list[int]:
        idx = set()
        for path in self.fields:
            if path.startswith("layers["):
                idx.add(int(path[len("layers["):path.index("]")]))
        return sorted(idx)


def normalize_partial(partial: PartialProblem) -> PartialProblem:
    """normalize_units lifted to PartialProblem; idempotent."""
    return PartialProblem(normalize_units(partial.fields), dict(partial.provenance))


def horizontal_water_table(
    geometry: SlopeGeometry, elevation: float
) -> tuple[tuple[float, float], ...]:
    """Expand a single phreatic elevation to a polyline clipped to the ground.

    The table sits at ``elevation`` wherever the ground allows and follows the
    surface where the horizontal line would emerge above it, so the on-or-below
    invariant holds by construction. Vertices land on surface vertices plus the
    crossing points, rounded to 9 significant digits.
    """
    xs = [p[0] for p in geometry.surface]
    for (x0, y0), (x1, y1) in zip(geometry.surface, geometry.surface[1:]):
        if (y0 - elevation) * (y1 - elevation) < 0:
            xs.append(x0 + (elevation - y0) / (y1 - y0) * (x1 - x0))
    pts = []
    for x in sorted(set(xs)):
        xr = round_sig(x)
        y = min(geometry.y_at(xr), elevation)
        pts.append((xr, round_sig(y)))
    out = [pts[0]]
    for p in pts[1:]:
        if p[0] > out[-1][0]:
            out.append(p)
    return tuple(out)


def default_search_config(geometry: SlopeGeometry) -> SearchConfig:
    """Geometry-derived default center grid: spans the surface footprint,
    lifted above the highest surface point by fractions of the total relief."""
    rule = DEFAULTS_TABLE["analysis.search"]
    xs = [p[0] for p in geometry.surface]
    ys = [p[1] for p in geometry.surface]
    relief = max(ys) - min(ys)
    if relief <= 0:
        relief = 10.0
    y_top = max(ys)
    return SearchConfig(
        x_range=(round_sig(min(xs)), round_sig(max(xs))),
        y_range=(round_sig(y_top + rule["y_lift_lo"] * relief), round_sig(y_top + rule["y_lift_hi"] * relief)),
        nx=rule["nx"],
        ny=rule["ny"],
        radius_samples=rule["radius_samples"],
        refine_rounds=rule["refine_rounds"],
    )


def fill_defaults(partial: PartialProblem, defaults: dict | None = None) -> PartialProblem:
    """Complete every missing material/analysis field from the defaults table.

    Geometry is never defaulted: raises MissingGeometry when absent. Filled
    fields gain DEFAULTED provenance; user-supplied fields are never touched.
    A layer whose name matches a material class is completed from that class.
    """
    defaults = DEFAULTS_TABLE if defaults is None else defaults
    if not partial.has_geometry():
        raise MissingGeometry("geometry is never assumed; provide height and slope angle or a surface polyline")
    out = partial.copy()

    for i in out.layer_indices() or [0]:
        name = out.fields.get(f"layers[{i}].name")
        cls = MATERIAL_CLASSES.get(str(name).strip().lower().replace(" ", "_")) if name else None
        for prop in ("unit_weight", "cohesion", "friction_angle"):
            path = f"layers[{i}].{prop}"
            if path not in out.fields:
                value = cls[prop] if cls else defaults[f"layers[].{prop}"]
                out.fields[path] = value
                out.provenance[path] = "DEFAULTED"
        if f"layers[{i}].name" not in out.fields:
            out.fields[f"layers[{i}].name"] = f"{defaults['layers[].name']}{i + 1}"
            out.provenance[f"layers[{i}].name"] = "DEFAULTED"

    for key in ("analysis.method", "analysis.slice_count", "analysis.target"):
        if key not in out.fields:
            out.fields[key] = defaults[key]
            out.provenance[key] = "DEFAULTED"
    if not any(k.startswith("analysis.search") for k in out.fields):
        out.fields["analysis.search"] = None  # derived from geometry at build time
        out.provenance["analysis.search"] = "DEFAULTED"
    return out


def build_problem(partial: PartialProblem) -> SlopeProblem:
    """Construct the canonical SlopeProblem from a completed field map.

    Applies fill_defaults first, so callers may pass a partial containing only
    geometry and whatever the user stated. Water given as a single elevation
    or depth expands to a horizontal polyline across the surface extent.
    """
    filled = fill_defaults(normalize_partial(partial))
    f = filled.fields

    if "geometry.surface" in f:
        geometry = SlopeGeometry(tuple((float(x), float(y)) for x, y in f["geometry.surface"]))
    else:
        geometry = SlopeGeometry.from_parametric(
            float(f["geometry.height"]),
            float(f["geometry.slope_angle"]),
            f.get("geometry.crest_extent"),
            f.get("geometry.toe_extent"),
        )

    layers = []
    for i in filled.layer_indices():
        g = lambda prop: f.get(f"layers[{i}].{prop}")
        layers.append(
            MaterialLayer(
                name=str(g("name")),
                unit_weight=float(g("unit_weight")),
                cohesion=float(g("cohesion")),
                friction_angle=float(g("friction_angle")),
                saturated_unit_weight=None if g("saturated_unit_weight") is None else float(g("saturated_unit_weight")),
                bottom_elevation=None if g("bottom_elevation") is None else float(g("bottom_elevation")),
            )
        )

    water = None
    if "water_table.points" in f:
        water = tuple((float(x), float(y)) for x, y in f["water_table.points"])
    elif "water_table.elevation" in f:
        water = horizontal_water_table(geometry, float(f["water_table.elevation"]))
    elif "water_table.depth" in f:
        # depth is measured below the crest (highest surface point)
        y = max(p[1] for p in geometry.surface) - float(f["water_table.depth"])
        water = horizontal_water_table(geometry, round_sig(y))

    search = f.get("analysis.search")
    if search is None:
        search_cfg = default_search_config(geometry)
    elif isinstance(search, SearchConfig):
        search_cfg = search
    else:
        search_cfg = SearchConfig(
            x_range=(float(search["x_range"][0]), float(search["x_range"][1])),
            y_range=(float(search["y_range"][0]), float(search["y_range"][1])),
            nx=int(search["nx"]),
            ny=int(search["ny"]),
            radius_samples=int(search["radius_samples"]),
            refine_rounds=int(search["refine_rounds"]),
        )

    analysis = AnalysisConfig(
        method=str(f["analysis.method"]),
        slice_count=int(f["analysis.slice_count"]),
        target=str(f["analysis.target"]),
        search=search_cfg,
    )

    provenance = tuple(
        FieldProvenance(path, src) for path, src in sorted(filled.provenance.items())
    )
    return SlopeProblem(geometry, tuple(layers), water, analysis, provenance)


def with_updated_layers(problem: SlopeProblem, layers: tuple[MaterialLayer, ...]) -> SlopeProblem:
    return replace(problem, layers=layers)
