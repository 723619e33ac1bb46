"""SVG cross-section rendering: determinism, structure, geometry."""

import dataclasses
import glob
import json
import math
import pathlib
import re
import xml.etree.ElementTree as ET

import pytest

from slopeagent import loads_problem, solve_circle
from slopeagent.errors import ProblemFormatError
from slopeagent.plot import _arc_points, _ticks, render_result, render_svg, save_svg
from slopeagent.solver import SlipCircle, result_to_dict, save_result

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load(pid):
    return loads_problem(open(ROOT / "corpus" / f"{pid}.json").read())


def trial_circle(problem):
    top = max(p[1] for p in problem.geometry.surface)
    base = min(p[1] for p in problem.geometry.surface)
    h = top - base
    run = next(p[0] for p in problem.geometry.surface if p[1] == top)
    return SlipCircle(0.5 * run, base + 1.6 * h, 1.89 * h)


ALL_IDS = sorted(pathlib.Path(p).stem for p in glob.glob(str(ROOT / "corpus" / "p[0-9][0-9].json")))


@pytest.mark.parametrize("pid", ALL_IDS)
def test_render_is_deterministic_and_well_formed(pid):
    problem = load(pid)
    circle = trial_circle(problem)
    res = solve_circle(problem, circle)
    svg = render_svg(problem, circle, fos=res.fos, method=res.method)
    assert svg == render_svg(problem, circle, fos=res.fos, method=res.method)
    ET.fromstring(svg)
    for points in re.findall(r'points="([^"]+)"', svg):
        for pair in points.split():
            x, y = map(float, pair.split(","))
            assert -1 <= x <= 841 and -1 <= y <= 561


def test_structure_reflects_problem_content():
    p5 = load("p05")  # three layers, water table
    svg = render_svg(p5)
    assert svg.count("<polygon") == len(p5.layers)
    assert "stroke-dasharray" in svg          # water table
    assert "water table" in svg
    assert "FS =" not in svg
    for layer in p5.layers:
        assert layer.name in svg

    p1 = load("p01")  # single dry layer
    svg = render_svg(p1)
    assert svg.count("<polygon") == 1
    assert "water table" not in svg

    res = solve_circle(p1, trial_circle(p1))
    annotated = render_svg(p1, res.critical, fos=res.fos, method=res.method)
    assert f"FS = {res.fos:.3f}" in annotated
    assert "Bishop simplified" in annotated


def test_arc_points_lie_on_the_lower_arc():
    circle = SlipCircle(10.0, 16.0, 18.9)

    def at(angle):
        return (circle.x + circle.radius * math.cos(angle),
                circle.y + circle.radius * math.sin(angle))

    entry, exit_ = at(-2.5), at(-0.4)
    pts = _arc_points(circle, entry, exit_)
    assert pts[0] == pytest.approx(entry, rel=1e-12)
    assert pts[-1] == pytest.approx(exit_, rel=1e-12)
    assert any(y < entry[1] and y < exit_[1] for _, y in pts)  # dips below both ends
    for x, y in pts:
        assert math.hypot(x - circle.x, y - circle.y) == pytest.approx(circle.radius, rel=1e-12)
        assert y <= circle.y


def test_render_result_matches_direct_render():
    problem = load("p04")
    res = solve_circle(problem, trial_circle(problem))
    d = result_to_dict(res, problem)
    assert render_result(d) == render_svg(problem, res.critical, fos=res.fos, method=res.method)


def test_render_result_requires_embedded_problem():
    problem = load("p01")
    res = solve_circle(problem, trial_circle(problem))
    with pytest.raises(ProblemFormatError) as err:
        render_result(result_to_dict(res))
    assert err.value.field_path == "meta.problem"


def test_result_file_renders_after_disk_round_trip(tmp_path):
    problem = load("p09")
    res = solve_circle(problem, trial_circle(problem))
    path = tmp_path / "result.json"
    save_result(res, path, problem)
    rendered = render_result(json.loads(path.read_text()))
    assert rendered == render_result(result_to_dict(res, problem))


def test_layer_names_are_escaped():
    p = load("p01")
    spiky = dataclasses.replace(
        p, layers=(dataclasses.replace(p.layers[0], name='till <"dense" & hard>'),))
    svg = render_svg(spiky)
    ET.fromstring(svg)
    assert "till &lt;" in svg


def test_save_svg(tmp_path):
    svg = render_svg(load("p01"))
    out = tmp_path / "x.svg"
    save_svg(svg, out)
    assert out.read_text() == svg


def test_ticks_are_round_numbers():
    assert _ticks(0.0, 10.0) == [0.0, 2.0, 4.0, 6.0, 8.0, 10.0]
    assert _ticks(-24.0, 38.3) == [-20.0, -10.0, 0.0, 10.0, 20.0, 30.0]
    ticks = _ticks(0.0, 0.9)
    assert ticks[0] == 0.0 and len(ticks) >= 4
