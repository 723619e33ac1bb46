"""Generate the committed problem corpus (corpus/p01.json .. p12.json) and
the per-problem golden factor-of-safety table (corpus/corpus_fos.json).

Each corpus entry pairs a problem file with one recorded trial circle and
the reference-oracle Fellenius and Bishop values at n=20000 slices, so the
library can be checked against frozen numbers on geometry it did not
choose itself.

Run once from the repository root:

    python3 tools/make_corpus.py
"""

import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
import lem_oracle

FT = 0.3048
PCF = 0.157087
PSF = 0.0478803

N_ORACLE = 20000
BISHOP_TOL = 1e-12


def sig9(v):
    return float(f"{v:.9g}")


def surface_points(height, slope_deg, toe=None, crest=None):
    toe = 2.0 * height if toe is None else toe
    crest = 2.0 * height if crest is None else crest
    run = sig9(height / math.tan(math.radians(slope_deg)))
    return [
        [sig9(-toe), 0.0],
        [0.0, 0.0],
        [run, sig9(height)],
        [sig9(run + crest), sig9(height)],
    ]


def clipped_horizontal_water(surface, level):
    """Horizontal table clipped to grade: y = min(level, surface)."""
    pts = []
    for (x0, y0), (x1, y1) in zip(surface, surface[1:]):
        pts.append([x0, min(y0, level)])
        if (y0 - level) * (y1 - level) < 0.0:
            xc = x0 + (level - y0) / (y1 - y0) * (x1 - x0)
            pts.append([sig9(xc), level])
    last = surface[-1]
    pts.append([last[0], min(last[1], level)])
    out = []
    for p in pts:
        if not out or p[0] > out[-1][0]:
            out.append(p)
    return out


def layer(name, gamma, c, phi, gsat=None, bottom=None):
    return {
        "name": name,
        "unit_weight": gamma,
        "cohesion": c,
        "friction_angle": phi,
        "saturated_unit_weight": gsat,
        "bottom_elevation": bottom,
    }


def problem(surface, layers, water, method, slice_count, target,
            height, defaulted=()):
    x_lo = surface[0][0]
    x_hi = surface[-1][0]
    stated = ["geometry.height", "geometry.slope_angle",
              "analysis.method", "analysis.slice_count",
              "analysis.target", "analysis.search"]
    for i in range(len(layers)):
        for prop in ("name", "unit_weight", "cohesion", "friction_angle"):
            stated.append(f"layers[{i}].{prop}")
    provenance = [
        {"field_path": p, "source": "DEFAULTED" if p in defaulted else "USER"}
        for p in sorted(stated)
    ]
    return {
        "schema_version": "1",
        "geometry": {"surface": surface},
        "layers": layers,
        "water_table": water,
        "analysis": {
            "method": method,
            "slice_count": slice_count,
            "target": target,
            "search": {
                "x_range": [x_lo, x_hi],
                "y_range": [sig9(1.25 * height), sig9(3.0 * height)],
                "nx": 10, "ny": 10, "radius_samples": 10, "refine_rounds": 2,
            },
        },
        "provenance": provenance,
    }


def trial_circle(height, slope_deg):
    run = height / math.tan(math.radians(slope_deg))
    return {"x": sig9(0.5 * run), "y": sig9(1.6 * height), "radius": sig9(1.89 * height)}


def build_all():
    entries = {}

    s = surface_points(10.0, 30.0)
    entries["p01"] = (problem(s, [layer("stiff fill", 19.0, 12.0, 25.0)], None,
                              "BISHOP_SIMPLIFIED", 50, "NONE", 10.0),
                      trial_circle(10.0, 30.0))

    s = surface_points(8.0, 35.0)
    entries["p02"] = (problem(s, [layer("soft_clay", 17.0, 25.0, 0.0)], None,
                              "FELLENIUS", 50, "ADONIS_PROFILE", 8.0),
                      trial_circle(8.0, 35.0))

    s = surface_points(12.0, 40.0)
    entries["p03"] = (problem(s, [layer("dense_sand", 20.0, 0.0, 38.0)], None,
                              "BISHOP_SIMPLIFIED", 80, "HYRCAN_PROFILE", 12.0),
                      trial_circle(12.0, 40.0))

    s = surface_points(10.0, 26.57)
    water = clipped_horizontal_water(s, 10.0 - 3.0)
    entries["p04"] = (problem(s, [layer("crust", 18.5, 8.0, 30.0, bottom=5.0),
                                  layer("marine clay", 16.5, 30.0, 0.0)],
                              water, "BISHOP_SIMPLIFIED", 60, "NONE", 10.0),
                      trial_circle(10.0, 26.57))

    s = surface_points(15.0, 30.0)
    water = clipped_horizontal_water(s, 15.0 - 5.0)
    entries["p05"] = (problem(s, [layer("embankment fill", 19.0, 10.0, 28.0, bottom=8.0),
                                  layer("silty sand", 18.0, 4.0, 32.0, gsat=20.0, bottom=2.0),
                                  layer("till", 21.0, 20.0, 24.0)],
                              water, "FELLENIUS", 100, "ADONIS_PROFILE", 15.0),
                      trial_circle(15.0, 30.0))

    h = sig9(30.0 * FT)
    s = surface_points(h, 33.69)
    entries["p06"] = (problem(s, [layer("imported fill", sig9(120.0 * PCF),
                                        sig9(500.0 * PSF), 25.0)], None,
                              "BISHOP_SIMPLIFIED", 50, "HYRCAN_PROFILE", h),
                      trial_circle(h, 33.69))

    s = surface_points(6.0, 18.43)
    water = clipped_horizontal_water(s, 6.0 - 2.0)
    entries["p07"] = (problem(s, [layer("levee sand", 19.0, 10.0, 28.0, gsat=21.0)],
                              water, "BISHOP_SIMPLIFIED", 50, "NONE", 6.0),
                      trial_circle(6.0, 18.43))

    s = surface_points(20.0, 50.0)
    entries["p08"] = (problem(s, [layer("cemented fill", 21.0, 40.0, 15.0)], None,
                              "BISHOP_SIMPLIFIED", 75, "ADONIS_PROFILE", 20.0),
                      trial_circle(20.0, 50.0))

    s = surface_points(10.0, 26.57)
    water = [[-20.0, -1.0], [0.0, -1.0], [s[2][0], 7.0], [s[3][0], 7.0]]
    entries["p09"] = (problem(s, [layer("river sand", 18.0, 2.0, 33.0, gsat=20.0)],
                              water, "BISHOP_SIMPLIFIED", 50, "NONE", 10.0),
                      trial_circle(10.0, 26.57))

    s = surface_points(12.0, 45.0)
    entries["p10"] = (problem(s, [layer("cut clay", 18.0, 60.0, 5.0)], None,
                              "FELLENIUS", 50, "HYRCAN_PROFILE", 12.0),
                      trial_circle(12.0, 45.0))

    s = surface_points(10.0, 30.0, toe=5.0, crest=30.0)
    entries["p11"] = (problem(s, [layer("bench fill", 19.5, 15.0, 22.0)], None,
                              "BISHOP_SIMPLIFIED", 50, "HYRCAN_PROFILE", 10.0),
                      trial_circle(10.0, 30.0))

    s = surface_points(4.0, 20.0)
    entries["p12"] = (problem(s, [layer("generic_soil", 19.0, 5.0, 30.0)], None,
                              "BISHOP_SIMPLIFIED", 120, "NONE", 4.0,
                              defaulted=("layers[0].name", "layers[0].unit_weight",
                                         "layers[0].cohesion", "layers[0].friction_angle",
                                         "analysis.method", "analysis.target")),
                      trial_circle(4.0, 20.0))

    return entries


def main():
    root = os.path.normpath(os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
    table = {}
    for pid, (prob, circle) in sorted(build_all().items()):
        t = lem_oracle.slice_table(prob, circle, N_ORACLE)
        fell = lem_oracle.fos_fellenius(t)
        bish, iters, converged = lem_oracle.fos_bishop(t, tol=BISHOP_TOL)
        if not converged:
            raise SystemExit(f"{pid}: oracle Bishop did not converge")
        with open(os.path.join(root, "corpus", f"{pid}.json"), "w", encoding="utf-8") as fh:
            json.dump(prob, fh, indent=2)
            fh.write("\n")
        table[pid] = {
            "circle": circle,
            "oracle_slice_count": N_ORACLE,
            "bishop_tol": BISHOP_TOL,
            "fos_fellenius": fell,
            "fos_bishop": bish,
            "bishop_iterations": iters,
            "max_friction_angle": max(float(L["friction_angle"]) for L in prob["layers"]),
        }
        print(f"{pid}  fellenius={fell:.6f}  bishop={bish:.6f}  "
              f"ratio={bish / fell:.4f}  iters={iters}")
    out = os.path.join(root, "corpus", "corpus_fos.json")
    with open(out, "w", encoding="utf-8") as fh:
        json.dump({"tolerance_rel": 0.005, "problems": table}, fh, indent=2)
        fh.write("\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
