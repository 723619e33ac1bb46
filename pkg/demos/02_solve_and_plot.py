"""
Factor of safety for the benchmark slope
========================================

Solves the committed benchmark problem two ways, searches for the critical
circle, and renders a cross-section plot.

    python3 demos/02_solve_and_plot.py
"""

import json
import tempfile
from pathlib import Path

from slopeagent.canon import problem_from_dict
from slopeagent.solver import SlipCircle, solve_circle, search_critical, result_to_dict
from slopeagent.plot import render_result

bench = json.loads(Path("corpus/benchmark.json").read_text(encoding="utf-8"))
problem = problem_from_dict(bench["problem"])
circle = SlipCircle(**bench["circle"])

# Fellenius ignores interslice forces; Bishop iterates on an FS-dependent
# term and usually lands higher for frictional soils.
fell = solve_circle(problem, circle, method="FELLENIUS")
bish = solve_circle(problem, circle, method="BISHOP_SIMPLIFIED")
print(f"fixed circle x={circle.x} y={circle.y} r={circle.radius}")
print(f"  Fellenius          FS = {fell.fos:.4f}")
print(f"  Bishop simplified  FS = {bish.fos:.4f} "
      f"({bish.bishop_iterations} iterations)")

# Grid search over circle centers and radii, then local refinement.
# The critical circle is the one that minimizes FS.
result = search_critical(problem)
print(f"\ncritical circle after search over "
      f"{result.grid_evaluations} candidates:")
print(f"  x={result.critical.x:.2f} y={result.critical.y:.2f} "
      f"r={result.critical.radius:.2f}  FS = {result.fos:.4f}")

# Results embed their own problem, so the plot needs nothing else.
payload = result_to_dict(result, problem)
svg = render_result(payload)
out = Path(tempfile.mkdtemp()) / "benchmark.svg"
out.write_text(svg, encoding="utf-8")
print(f"\ncross-section written to {out}")
print("slices drawn:", len(payload["slices"]))
