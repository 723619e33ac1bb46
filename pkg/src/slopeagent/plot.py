"""Cross-section rendering to SVG.

The renderer is deliberately hand-rolled: output must be byte-identical for
identical inputs (artifact ids are content hashes), which rules out plotting
libraries that embed versions, timestamps, or font metrics. Coordinates are
written with two decimals after an affine world-to-pixel transform, equal
scale on both axes, y up in world space.

A plot shows the ground surface, material bands clipped to grade, the water
table, and, when a result is supplied, the critical circle's failure arc,
chord, and center, with the factor of safety in the title line.
"""

import math
from xml.sax.saxutils import escape

from .errors import ProblemFormatError
from .model import SlopeProblem, horizontal_water_table
from .solver import SlipCircle, _chord

WIDTH, HEIGHT = 840.0, 560.0
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64.0, 24.0, 48.0, 56.0

BAND_COLORS = ("#d9c89e", "#c2a97c", "#a98f62", "#8f774e", "#76603d")
SURFACE_COLOR = "#3b3b3b"
WATER_COLOR = "#2f7fc1"
CIRCLE_COLOR = "#b03a2e"

METHOD_LABELS = {"BISHOP_SIMPLIFIED": "Bishop simplified", "FELLENIUS": "Fellenius"}


def _f(v: float) -> str:
    s = f"{v:.2f}"
    return "0.00" if s == "-0.00" else s


class _Frame:
    """Affine world->pixel transform with equal axis scales."""

    def __init__(self, x0, x1, y0, y1):
        span_x = max(x1 - x0, 1e-9)
        span_y = max(y1 - y0, 1e-9)
        inner_w = WIDTH - MARGIN_L - MARGIN_R
        inner_h = HEIGHT - MARGIN_T - MARGIN_B
        self.scale = min(inner_w / span_x, inner_h / span_y)
        # center the drawing in whichever direction has slack
        self.px0 = MARGIN_L + (inner_w - span_x * self.scale) / 2.0
        self.py0 = MARGIN_T + (inner_h - span_y * self.scale) / 2.0
        self.x0, self.x1, self.y0, self.y1 = x0, x1, y0, y1

    def x(self, wx: float) -> float:
        return self.px0 + (wx - self.x0) * self.scale

    def y(self, wy: float) -> float:
        return self.py0 + (self.y1 - wy) * self.scale

    def pt(self, p) -> str:
        return f"{_f(self.x(p[0]))},{_f(self.y(p[1]))}"

    def poly(self, points) -> str:
        return " ".join(self.pt(p) for p in points)


def _ticks(lo: float, hi: float, target: int = 8) -> list[float]:
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(max(raw, 1e-12)))
    step = next(m * mag for m in (1.0, 2.0, 5.0, 10.0) if raw <= m * mag)
    k = math.ceil(lo / step - 1e-9)
    out = []
    while k * step <= hi + 1e-9:
        out.append(k * step)
        k += 1
    return out


def _world_bounds(problem: SlopeProblem, circle: SlipCircle | None):
    xs = [p[0] for p in problem.geometry.surface]
    ys = [p[1] for p in problem.geometry.surface]
    if problem.water_table:
        ys += [p[1] for p in problem.water_table]
    for L in problem.layers[:-1]:
        if L.bottom_elevation is not None:
            ys.append(L.bottom_elevation)
    if circle is not None:
        ys.append(circle.y - circle.radius)          # arc bottom
        ys.append(min(circle.y, max(ys)))            # keep the center visible
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    pad = 0.06 * max(x1 - x0, y1 - y0, 1.0)
    return x0 - pad, x1 + pad, y0 - pad, y1 + pad


def _arc_points(circle: SlipCircle, entry, exit_, n: int = 80):
    """The lower arc between the chord endpoints, sampled densely.

    Both endpoints lie on the lower half of the circle, so their center
    angles sit in (-pi, 0) and direct interpolation stays below center.
    """
    a0 = math.atan2(entry[1] - circle.y, entry[0] - circle.x)
    a1 = math.atan2(exit_[1] - circle.y, exit_[0] - circle.x)
    pts = []
    for i in range(n + 1):
        a = a0 + (a1 - a0) * i / n
        pts.append((circle.x + circle.radius * math.cos(a),
                    circle.y + circle.radius * math.sin(a)))
    return pts


def render_svg(
    problem: SlopeProblem,
    circle: SlipCircle | None = None,
    fos: float | None = None,
    method: str | None = None,
) -> str:
    """Render the cross-section; overlay the slip circle when given."""
    frame = _Frame(*_world_bounds(problem, circle))
    surface = problem.geometry.surface
    x_lo, x_hi = surface[0][0], surface[-1][0]
    floor = frame.y0
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH:g} {HEIGHT:g}" '
        f'width="{WIDTH:g}" height="{HEIGHT:g}" font-family="monospace" font-size="13">',
        f'<rect width="{WIDTH:g}" height="{HEIGHT:g}" fill="#ffffff"/>',
    ]

    # material bands, top-down; horizontal_water_table is really "horizontal
    # line clipped to grade", which is exactly what band boundaries need
    for i, layer in enumerate(problem.layers):
        top = surface if i == 0 else horizontal_water_table(
            problem.geometry, problem.layers[i - 1].bottom_elevation)
        if layer.bottom_elevation is None:
            bottom = ((x_hi, floor), (x_lo, floor))
        else:
            bottom = tuple(reversed(horizontal_water_table(
                problem.geometry, max(layer.bottom_elevation, floor))))
        color = BAND_COLORS[i % len(BAND_COLORS)]
        parts.append(f'<polygon points="{frame.poly(tuple(top) + bottom)}" '
                     f'fill="{color}" stroke="#6b5b3e" stroke-width="0.6"/>')

    if problem.water_table:
        parts.append(f'<polyline points="{frame.poly(problem.water_table)}" fill="none" '
                     f'stroke="{WATER_COLOR}" stroke-width="1.8" stroke-dasharray="7,4"/>')

    parts.append(f'<polyline points="{frame.poly(surface)}" fill="none" '
                 f'stroke="{SURFACE_COLOR}" stroke-width="2.2"/>')

    if circle is not None:
        x_entry, x_exit = _chord(problem, circle)

        def on_arc(x):
            dy = math.sqrt(max(circle.radius ** 2 - (x - circle.x) ** 2, 0.0))
            return (x, circle.y - dy)

        entry, exit_ = on_arc(x_entry), on_arc(x_exit)
        arc = _arc_points(circle, entry, exit_)
        parts.append(f'<polyline points="{frame.poly(arc)}" fill="none" '
                     f'stroke="{CIRCLE_COLOR}" stroke-width="2"/>')
        parts.append(f'<line x1="{_f(frame.x(entry[0]))}" y1="{_f(frame.y(entry[1]))}" '
                     f'x2="{_f(frame.x(exit_[0]))}" y2="{_f(frame.y(exit_[1]))}" '
                     f'stroke="{CIRCLE_COLOR}" stroke-width="1" stroke-dasharray="4,4"/>')
        cx, cy = frame.x(circle.x), frame.y(circle.y)
        if MARGIN_T < cy < HEIGHT - MARGIN_B:
            parts.append(f'<path d="M {_f(cx - 6)} {_f(cy)} H {_f(cx + 6)} '
                         f'M {_f(cx)} {_f(cy - 6)} V {_f(cy + 6)}" '
                         f'stroke="{CIRCLE_COLOR}" stroke-width="1.4" fill="none"/>')

    # frame and ticks
    fx0, fy0 = frame.x(frame.x0), frame.y(frame.y1)
    fx1, fy1 = frame.x(frame.x1), frame.y(frame.y0)
    parts.append(f'<rect x="{_f(fx0)}" y="{_f(fy0)}" width="{_f(fx1 - fx0)}" '
                 f'height="{_f(fy1 - fy0)}" fill="none" stroke="#888888" stroke-width="1"/>')
    for t in _ticks(frame.x0, frame.x1):
        px = frame.x(t)
        parts.append(f'<line x1="{_f(px)}" y1="{_f(fy1)}" x2="{_f(px)}" y2="{_f(fy1 + 5)}" '
                     f'stroke="#888888" stroke-width="1"/>')
        parts.append(f'<text x="{_f(px)}" y="{_f(fy1 + 20)}" text-anchor="middle" '
                     f'fill="#444444">{t:g}</text>')
    for t in _ticks(frame.y0, frame.y1):
        py = frame.y(t)
        parts.append(f'<line x1="{_f(fx0 - 5)}" y1="{_f(py)}" x2="{_f(fx0)}" y2="{_f(py)}" '
                     f'stroke="#888888" stroke-width="1"/>')
        parts.append(f'<text x="{_f(fx0 - 9)}" y="{_f(py + 4)}" text-anchor="end" '
                     f'fill="#444444">{t:g}</text>')
    parts.append(f'<text x="{_f((fx0 + fx1) / 2)}" y="{HEIGHT - 12:g}" text-anchor="middle" '
                 f'fill="#444444">x (m)</text>')
    parts.append(f'<text x="16" y="{_f((fy0 + fy1) / 2)}" text-anchor="middle" '
                 f'fill="#444444" transform="rotate(-90 16 {_f((fy0 + fy1) / 2)})">'
                 f'elevation (m)</text>')

    # title
    if fos is not None:
        label = METHOD_LABELS.get(method or "", method or "")
        suffix = f" ({label})" if label else ""
        parts.append(f'<text x="{_f(fx0)}" y="30" font-size="17" fill="#222222">'
                     f'FS = {fos:.3f}{escape(suffix)}</text>')

    # legend, one swatch per layer plus the water table
    ly = 26.0
    lx = WIDTH - MARGIN_R - 220.0
    for i, layer in enumerate(problem.layers):
        color = BAND_COLORS[i % len(BAND_COLORS)]
        parts.append(f'<rect x="{_f(lx)}" y="{_f(ly - 10)}" width="14" height="10" '
                     f'fill="{color}" stroke="#6b5b3e" stroke-width="0.6"/>')
        parts.append(f'<text x="{_f(lx + 20)}" y="{_f(ly)}" fill="#333333">'
                     f'{escape(layer.name)}</text>')
        ly += 18.0
    if problem.water_table:
        parts.append(f'<line x1="{_f(lx)}" y1="{_f(ly - 4)}" x2="{_f(lx + 14)}" y2="{_f(ly - 4)}" '
                     f'stroke="{WATER_COLOR}" stroke-width="1.8" stroke-dasharray="7,4"/>')
        parts.append(f'<text x="{_f(lx + 20)}" y="{_f(ly)}" fill="#333333">water table</text>')

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_result(result_dict: dict) -> str:
    """Render a self-describing result file (meta.problem embedded)."""
    from .canon import problem_from_dict

    meta = result_dict.get("meta") or {}
    if "problem" not in meta:
        raise ProblemFormatError(
            "result has no embedded problem (meta.problem); re-run solve to produce "
            "a self-describing result", field_path="meta.problem")
    problem = problem_from_dict(meta["problem"])
    c = result_dict["critical_circle"]
    circle = SlipCircle(float(c["x"]), float(c["y"]), float(c["radius"]))
    return render_svg(problem, circle, fos=float(result_dict["fos"]),
                      method=meta.get("method"))


def save_svg(text: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
