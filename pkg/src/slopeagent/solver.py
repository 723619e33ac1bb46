"""Limit-equilibrium slope-stability solver.

Factor of safety by the Ordinary Method of Slices (Fellenius) and Bishop's
simplified method over circular slip surfaces, plus a deterministic
grid-and-refine search for the critical circle.

Conventions, shared by every routine here:

  * The slip mass is bounded by the circle's lower arc (y <= center y) and
    the ground surface; its x-extent is the outermost pair of
    circle/surface crossings.
  * Slices have equal width across that chord. The base inclination alpha
    is the circle tangent at the base midpoint (asin((x - cx)/r), positive
    where the base rises to the right), and the base length is b/cos(alpha).
  * Slice weight integrates layer unit weights over the column at the
    midpoint, switching to the saturated unit weight below the water table.
  * Pore pressure is vertical hydrostatics: u = 9.81 * head above the base
    midpoint. No flow net.
  * Slices in tension (W cos(alpha) - u*l < 0) contribute no frictional
    resistance; the clamp count is reported in result metadata.

All functions are pure; concurrent use needs no coordination.
"""

import math
from dataclasses import dataclass

from .errors import (
    DegenerateCircle,
    NoAdmissibleCircle,
    NoDrivingForce,
    NonConvergence,
)
from .model import GAMMA_W, SlopeProblem

BISHOP_TOL = 1e-8
BISHOP_MAX_ITER = 200


@dataclass(frozen=True)
class SlipCircle:
    """Trial slip surface: circle center (x, y) and radius, meters."""

    x: float
    y: float
    radius: float


@dataclass(frozen=True)
class Slice:
    x: float        # midpoint, m
    b: float        # width, m
    W: float        # weight per unit thickness, kN/m
    alpha: float    # base inclination, radians
    l: float        # base length, m
    c: float        # base cohesion, kPa
    phi: float      # base friction angle, radians
    u: float        # base pore pressure, kPa


@dataclass(frozen=True)
class SolveResult:
    critical: SlipCircle
    fos: float
    method: str
    slices: tuple[Slice, ...]
    bishop_iterations: int
    converged: bool
    grid_evaluations: int
    meta: dict


def _segment_circle_hits(p0, p1, cx, cy, r):
    """Parameter-clipped intersections of one surface segment with a circle."""
    dx = p1[0] - p0[0]
    dy = p1[1] - p0[1]
    a = dx * dx + dy * dy
    if a == 0.0:
        return []
    fx = p0[0] - cx
    fy = p0[1] - cy
    b = 2.0 * (fx * dx + fy * dy)
    c = fx * fx + fy * fy - r * r
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        return []
    root = math.sqrt(disc)
    hits = []
    for t in ((-b - root) / (2.0 * a), (-b + root) / (2.0 * a)):
        if -1e-12 <= t <= 1.0 + 1e-12:
            hits.append((p0[0] + t * dx, p0[1] + t * dy))
    return hits


def _chord(problem: SlopeProblem, circle: SlipCircle) -> tuple[float, float]:
    # Lower-arc crossings only; the outermost pair bounds the slip mass.
    xs = []
    surface = problem.geometry.surface
    for p0, p1 in zip(surface, surface[1:]):
        for px, py in _segment_circle_hits(p0, p1, circle.x, circle.y, circle.radius):
            if py <= circle.y + 1e-12:
                xs.append(px)
    xs.sort()
    distinct = []
    for x in xs:
        if not distinct or x - distinct[-1] > 1e-9:
            distinct.append(x)
    if len(distinct) < 2:
        raise DegenerateCircle("slip circle does not cross the ground surface at two points")
    return distinct[0], distinct[-1]


def _column_weight(problem: SlopeProblem, xm: float, y_base: float, y_surf: float) -> float:
    """Weight of the soil column [y_base, y_surf] at xm, kN per meter run."""
    wy = problem.water_y_at(xm)
    if wy is None:
        wy = -math.inf
    total = 0.0
    top = y_surf
    for layer in problem.layers:
        band_bot = -math.inf if layer.bottom_elevation is None else layer.bottom_elevation
        lo = max(y_base, band_bot)
        thick = max(0.0, top - lo)
        wet = min(max(0.0, min(top, wy) - lo), thick)
        gsat = layer.unit_weight if layer.saturated_unit_weight is None else layer.saturated_unit_weight
        total += (thick - wet) * layer.unit_weight + wet * gsat
        top = max(min(top, band_bot), y_base)
    return total


def _base_material(problem: SlopeProblem, y_base: float):
    for layer in problem.layers[:-1]:
        if y_base > layer.bottom_elevation:
            return layer
    return problem.layers[-1]


def build_slices(problem: SlopeProblem, circle: SlipCircle, n: int) -> tuple[Slice, ...]:
    """Discretize the slip mass into n equal-width slices.

    Raises DegenerateCircle when the circle misses the surface or bounds an
    empty mass. Slices whose column closes (surface at or below the arc)
    carry zero weight.
    """
    xl, xr = _chord(problem, circle)
    b = (xr - xl) / n
    slices = []
    any_mass = False
    for i in range(n):
        xm = xl + (i + 0.5) * b
        s = max(-1.0, min(1.0, (xm - circle.x) / circle.radius))
        alpha = math.asin(s)
        y_base = circle.y - circle.radius * math.cos(alpha)
        y_surf = problem.geometry.y_at(xm)
        W = b * _column_weight(problem, xm, y_base, y_surf) if y_surf > y_base else 0.0
        if W > 0.0:
            any_mass = True
        wy = problem.water_y_at(xm)
        u = GAMMA_W * max(0.0, wy - y_base) if wy is not None else 0.0
        layer = _base_material(problem, y_base)
        slices.append(
            Slice(
                x=xm,
                b=b,
                W=W,
                alpha=alpha,
                l=b / math.cos(alpha),
                c=layer.cohesion,
                phi=math.radians(layer.friction_angle),
                u=u,
            )
        )
    if not any_mass:
        raise DegenerateCircle("slip circle bounds no soil mass")
    return tuple(slices)


def _driving_sum(slices) -> float:
    den = 0.0
    for s in slices:
        den += s.W * math.sin(s.alpha)
    if den <= 0.0:
        raise NoDrivingForce("driving moment is not positive; nothing to resist")
    return den


def tension_clamped(slices) -> int:
    """Number of slices whose base normal force would be tensile."""
    return sum(1 for s in slices if s.W * math.cos(s.alpha) - s.u * s.l < 0.0)


def fos_fellenius(slices) -> float:
    """FS = sum(c*l + (W cos a - u*l) tan phi) / sum(W sin a)."""
    den = _driving_sum(slices)
    num = 0.0
    for s in slices:
        normal = s.W * math.cos(s.alpha) - s.u * s.l
        num += s.c * s.l + max(0.0, normal) * math.tan(s.phi)
    return num / den


@dataclass(frozen=True)
class IterativeFos:
    fos: float
    iterations: int
    converged: bool


def fos_bishop(slices, tol: float = BISHOP_TOL, max_iter: int = BISHOP_MAX_ITER) -> IterativeFos:
    """Bishop simplified FS by fixed-point iteration seeded from Fellenius.

    FS = sum((c*b + (W - u*b) tan phi) / m_a) / sum(W sin a),
    m_a = cos a (1 + tan a tan phi / FS).

    Raises NonConvergence after max_iter or if any m_a loses positivity.
    """
    den = _driving_sum(slices)
    terms = []
    for s in slices:
        tension = s.W * math.cos(s.alpha) - s.u * s.l < 0.0
        fric = 0.0 if tension else (s.W - s.u * s.b) * math.tan(s.phi)
        terms.append((s.c * s.b + fric, math.cos(s.alpha), math.tan(s.alpha), math.tan(s.phi)))
    fs = fos_fellenius(slices)
    for iteration in range(1, max_iter + 1):
        num = 0.0
        for numer, cos_a, tan_a, tan_p in terms:
            m = cos_a * (1.0 + tan_a * tan_p / fs)
            if m <= 1e-12:
                raise NonConvergence("Bishop m_alpha lost positivity")
            num += numer / m
        new = num / den
        if abs(new - fs) < tol:
            return IterativeFos(fos=new, iterations=iteration, converged=True)
        fs = new
    raise NonConvergence(f"Bishop iteration did not converge in {max_iter} steps")


def _evaluate(problem, circle, method, n):
    """(fos, slices, iterations) for one circle; raises the skip signals."""
    slices = build_slices(problem, circle, n)
    if method == "FELLENIUS":
        return fos_fellenius(slices), slices, 0
    result = fos_bishop(slices)
    return result.fos, slices, result.iterations


def solve_circle(problem: SlopeProblem, circle: SlipCircle,
                 method: str | None = None, slice_count: int | None = None) -> SolveResult:
    """Solve one fixed circle; method/slice count default from the problem."""
    method = problem.analysis.method if method is None else method
    n = problem.analysis.slice_count if slice_count is None else slice_count
    fos, slices, iterations = _evaluate(problem, circle, method, n)
    return SolveResult(
        critical=circle,
        fos=fos,
        method=method,
        slices=slices,
        bishop_iterations=iterations,
        converged=True,
        grid_evaluations=1,
        meta=_result_meta(slices, evaluations=None),
    )


def _point_segment_distance(px, py, a, b) -> float:
    ax, ay = a
    bx, by = b
    dx = bx - ax
    dy = by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def radius_bounds(problem: SlopeProblem, cx: float, cy: float) -> tuple[float, float]:
    """(closest approach to the surface, farthest surface vertex) from a center."""
    surface = problem.geometry.surface
    r_min = min(_point_segment_distance(cx, cy, p0, p1) for p0, p1 in zip(surface, surface[1:]))
    r_max = max(math.hypot(cx - px, cy - py) for px, py in surface)
    return r_min, r_max


def _candidate_radii(problem, cx, cy, samples):
    r_min, r_max = radius_bounds(problem, cx, cy)
    step = (r_max - r_min) / (samples + 1)
    return [r_min + (j + 1) * step for j in range(samples)], step


def _linspace(lo, hi, count):
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def search_critical(problem: SlopeProblem) -> SolveResult:
    """Minimum-FS circle over the configured center grid and radius samples.

    Radii per center span (r_min, r_max) exclusive, where r_min is the
    center's distance to the surface polyline and r_max its distance to the
    farthest surface vertex. Degenerate, driving-force-free, and
    non-convergent candidates are skipped but still counted. Ties break to
    the lowest (x, y, radius). refine_rounds rounds of 3x3x3 local grids
    with halved steps run around the incumbent; the incumbent is kept
    unless strictly beaten, so refinement never raises the reported FS.

    Raises NoAdmissibleCircle when no grid candidate survives.
    """
    cfg = problem.analysis.search
    method = problem.analysis.method
    n = problem.analysis.slice_count

    evaluations = 0
    skipped = {"degenerate": 0, "no_driving_force": 0, "non_converged": 0}
    best = None  # (fos, x, y, r, slices, iterations)

    def try_candidate(cx, cy, r):
        nonlocal evaluations, best
        evaluations += 1
        if r <= 0.0:
            skipped["degenerate"] += 1
            return
        try:
            fos, slices, iterations = _evaluate(problem, SlipCircle(cx, cy, r), method, n)
        except DegenerateCircle:
            skipped["degenerate"] += 1
            return
        except NoDrivingForce:
            skipped["no_driving_force"] += 1
            return
        except NonConvergence:
            skipped["non_converged"] += 1
            return
        key = (fos, cx, cy, r)
        if best is None or key < (best[0], best[1], best[2], best[3]):
            best = (fos, cx, cy, r, slices, iterations)

    for cx in _linspace(cfg.x_range[0], cfg.x_range[1], cfg.nx):
        for cy in _linspace(cfg.y_range[0], cfg.y_range[1], cfg.ny):
            radii, _ = _candidate_radii(problem, cx, cy, cfg.radius_samples)
            for r in radii:
                try_candidate(cx, cy, r)

    if best is None:
        raise NoAdmissibleCircle("no trial circle produced a solvable slip mass")

    dx = (cfg.x_range[1] - cfg.x_range[0]) / (cfg.nx - 1)
    dy = (cfg.y_range[1] - cfg.y_range[0]) / (cfg.ny - 1)
    _, dr = _candidate_radii(problem, best[1], best[2], cfg.radius_samples)
    for _ in range(cfg.refine_rounds):
        dx /= 2.0
        dy /= 2.0
        dr /= 2.0
        bx, by, br = best[1], best[2], best[3]
        for ox in (-dx, 0.0, dx):
            for oy in (-dy, 0.0, dy):
                for orr in (-dr, 0.0, dr):
                    try_candidate(bx + ox, by + oy, br + orr)

    fos, cx, cy, r, slices, iterations = best
    return SolveResult(
        critical=SlipCircle(cx, cy, r),
        fos=fos,
        method=method,
        slices=slices,
        bishop_iterations=iterations,
        converged=True,
        grid_evaluations=evaluations,
        meta=_result_meta(slices, evaluations=evaluations, skipped=skipped,
                          refine_rounds=cfg.refine_rounds),
    )


def _result_meta(slices, evaluations=None, skipped=None, refine_rounds=None) -> dict:
    meta = {
        "gamma_w": GAMMA_W,
        "pore_pressure_model": "vertical hydrostatic head above the slice base midpoint",
        "tension_clamped_slices": tension_clamped(slices),
    }
    if evaluations is not None:
        meta["search"] = {
            "grid_evaluations": evaluations,
            "skipped": dict(skipped),
            "refine_rounds": refine_rounds,
        }
    return meta


def result_to_dict(result: SolveResult, problem: SlopeProblem | None = None) -> dict:
    """Result-file shape: top-level fos, critical_circle, slices, meta.

    Passing the problem embeds its file form under meta.problem, making the
    result self-describing: plotting and re-solving need no sidecar file.
    """
    meta = dict(result.meta)
    meta.update(
        method=result.method,
        bishop_iterations=result.bishop_iterations,
        converged=result.converged,
        grid_evaluations=result.grid_evaluations,
    )
    if problem is not None:
        from .canon import problem_to_dict

        meta["problem"] = problem_to_dict(problem)
    return {
        "fos": result.fos,
        "critical_circle": {"x": result.critical.x, "y": result.critical.y,
                            "radius": result.critical.radius},
        "slices": [
            {"x": s.x, "b": s.b, "W": s.W, "alpha": s.alpha, "l": s.l,
             "c": s.c, "phi": s.phi, "u": s.u}
            for s in result.slices
        ],
        "meta": meta,
    }


def dumps_result(result: SolveResult, problem: SlopeProblem | None = None) -> str:
    from .canon import canonical_bytes

    return canonical_bytes(result_to_dict(result, problem)).decode("ascii")


def save_result(result: SolveResult, path, problem: SlopeProblem | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_result(result, problem))
        fh.write("\n")
