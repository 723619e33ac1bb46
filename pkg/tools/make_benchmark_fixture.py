"""Record the golden benchmark fixture: a homogeneous dry 10 m slope at
26.57 degrees (2H:1V) with a fixed slip circle, solved by the reference
oracle in lem_oracle.py at n=20000 slices and Bishop tolerance 1e-12.

Run once from the repository root:

    python3 tools/make_benchmark_fixture.py

The output (corpus/benchmark.json) is committed; tests compare the library
solver against it and never regenerate it.
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import lem_oracle

HEIGHT = 10.0
SLOPE_ANGLE = 26.57
GAMMA = 18.0
COHESION = 20.0
FRICTION = 20.0
CIRCLE = {"x": 10.0, "y": 16.0, "radius": 18.9}
N_ORACLE = 20000
BISHOP_TOL = 1e-12


def sig9(v):
    return float(f"{v:.9g}")


def benchmark_problem():
    run = sig9(HEIGHT / math.tan(math.radians(SLOPE_ANGLE)))
    toe = 2.0 * HEIGHT
    crest = 2.0 * HEIGHT
    surface = [
        [sig9(-toe), 0.0],
        [0.0, 0.0],
        [run, sig9(HEIGHT)],
        [sig9(run + crest), sig9(HEIGHT)],
    ]
    stated = [
        "geometry.height", "geometry.slope_angle",
        "layers[0].name", "layers[0].unit_weight",
        "layers[0].cohesion", "layers[0].friction_angle",
        "analysis.method", "analysis.slice_count",
        "analysis.target", "analysis.search",
    ]
    return {
        "schema_version": "1",
        "geometry": {"surface": surface},
        "layers": [
            {
                "name": "benchmark_soil",
                "unit_weight": GAMMA,
                "cohesion": COHESION,
                "friction_angle": FRICTION,
                "saturated_unit_weight": None,
                "bottom_elevation": None,
            }
        ],
        "water_table": None,
        "analysis": {
            "method": "BISHOP_SIMPLIFIED",
            "slice_count": 200,
            "target": "NONE",
            "search": {
                "x_range": [-20.0, 40.0],
                "y_range": [12.0, 36.0],
                "nx": 10,
                "ny": 10,
                "radius_samples": 10,
                "refine_rounds": 2,
            },
        },
        "provenance": [{"field_path": p, "source": "USER"} for p in sorted(stated)],
    }


def main():
    problem = benchmark_problem()
    table = lem_oracle.slice_table(problem, CIRCLE, N_ORACLE)
    fell = lem_oracle.fos_fellenius(table)
    bish, iters, converged = lem_oracle.fos_bishop(table, tol=BISHOP_TOL)
    if not converged:
        raise SystemExit("oracle Bishop iteration failed to converge")

    fixture = {
        "description": (
            "Homogeneous dry benchmark slope with a fixed slip circle; "
            "golden factor-of-safety values from the vectorized reference oracle."
        ),
        "problem": problem,
        "circle": CIRCLE,
        "oracle": {
            "slice_count": N_ORACLE,
            "bishop_tol": BISHOP_TOL,
            "fos_fellenius": fell,
            "fos_bishop": bish,
            "bishop_iterations": iters,
            "chord": list(table["chord"]),
            "cross_section_area": table["area"],
            "tolerance_rel": 0.005,
        },
    }
    out = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "corpus", "benchmark.json")
    out = os.path.normpath(out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(fixture, fh, indent=2)
        fh.write("\n")
    print(f"chord        ({table['chord'][0]:.6f}, {table['chord'][1]:.6f})")
    print(f"area         {table['area']:.6f}")
    print(f"fellenius    {fell:.12f}")
    print(f"bishop       {bish:.12f} ({iters} iterations)")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
