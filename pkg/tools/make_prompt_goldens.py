#!/usr/bin/env python3
"""Write corpus/prompts.json: hand-written golden extraction fixtures.

Expectations are spelled out per prompt against the documented grammar, with
unit arithmetic done inline here. Deliberately imports nothing from the
package so the goldens stay an independent oracle.
"""

import json
import math
from pathlib import Path

FT = 0.3048
PCF = 0.157087
PSF = 0.0478803
RAD = 180.0 / math.pi


def q(v):
    """Converted values are quantized to 9 significant digits."""
    return float(f"{v:.9g}")

GEOM = ["geometry.height", "geometry.slope_angle"]
TRIO = ["layers[0].unit_weight", "layers[0].cohesion", "layers[0].friction_angle"]


def expect(fields, conflicts=()):
    missing = [k for k in GEOM if k not in fields] + [k for k in TRIO if k not in fields]
    return {
        "fields": {k: fields[k] for k in sorted(fields)},
        "missing_required": missing,
        "conflicts": list(conflicts),
    }


def conflict(path, old, new):
    return {"field_path": path, "existing_value": old, "new_value": new}


FIXTURES = [
    ("p01",
     "A 10 m high slope at 45 degrees, cohesion 25 kPa, friction angle 20, unit weight 19 kN/m3.",
     expect({"geometry.height": 10.0, "geometry.slope_angle": 45.0,
             "layers[0].cohesion": 25.0, "layers[0].friction_angle": 20.0,
             "layers[0].unit_weight": 19.0})),
    ("p02", "analyze my slope", expect({})),
    ("p03",
     "cohesion 25 kPa for the upper fill, though the lab later reported cohesion 30 kPa",
     expect({"layers[0].cohesion": 25.0},
            [conflict("layers[0].cohesion", 25.0, 30.0)])),
    ("p04", "slope height 8 m, angle 30",
     expect({"geometry.height": 8.0, "geometry.slope_angle": 30.0})),
    ("p05", "The embankment is 25 feet high with a slope of 35 degrees.",
     expect({"geometry.height": q(25 * FT), "geometry.slope_angle": 35.0})),
    ("p06", "unit weight 120 pcf, cohesion 500 psf, friction angle 30 degrees",
     expect({"layers[0].unit_weight": q(120 * PCF), "layers[0].cohesion": q(500 * PSF),
             "layers[0].friction_angle": 30.0})),
    ("p07", "height 12 m, angle 40 degrees, soft clay",
     expect({"geometry.height": 12.0, "geometry.slope_angle": 40.0,
             "layers[0].name": "soft_clay"})),
    ("p08", "dense sand slope, 6 m tall, inclined at 38 degrees",
     expect({"geometry.height": 6.0, "geometry.slope_angle": 38.0,
             "layers[0].name": "dense_sand"})),
    ("p09",
     "A slope 10 m high at 45 degrees with the water table at a depth of 2 m; "
     "unit weight 18 kN/m3, cohesion 5 kPa, friction angle 20 degrees.",
     expect({"geometry.height": 10.0, "geometry.slope_angle": 45.0,
             "water_table.depth": 2.0, "layers[0].unit_weight": 18.0,
             "layers[0].cohesion": 5.0, "layers[0].friction_angle": 20.0})),
    ("p10", "water table at elevation 4 m", expect({"water_table.elevation": 4.0})),
    ("p11", "use bishop with 60 slices",
     expect({"analysis.method": "BISHOP_SIMPLIFIED", "analysis.slice_count": 60})),
    ("p12", "run fellenius with 30 slices",
     expect({"analysis.method": "FELLENIUS", "analysis.slice_count": 30})),
    ("p13", "use the ordinary method of slices", expect({"analysis.method": "FELLENIUS"})),
    ("p14", "emit a hyrcan script", expect({"analysis.target": "HYRCAN_PROFILE"})),
    ("p15", "friction 28°, cohesion 12.5 kPa",
     expect({"layers[0].friction_angle": 28.0, "layers[0].cohesion": 12.5})),
    ("p16", "phi 0, cohesion 40 kPa",
     expect({"layers[0].friction_angle": 0.0, "layers[0].cohesion": 40.0})),
    ("p17", "saturated unit weight 20 kN/m3 and unit weight 18 kN/m3",
     expect({"layers[0].saturated_unit_weight": 20.0, "layers[0].unit_weight": 18.0})),
    ("p18", "H = 10 m, slope angle 26.57 degrees, unit weight of 18 kN/m3",
     expect({"geometry.height": 10.0, "geometry.slope_angle": 26.57,
             "layers[0].unit_weight": 18.0})),
    ("p19", "a 9.5 m high slope", expect({"geometry.height": 9.5})),
    ("p20", "slope of 45 degrees", expect({"geometry.slope_angle": 45.0})),
    ("p21", "cohesion 25 kPa and cohesion 25 kPa", expect({"layers[0].cohesion": 25.0})),
    ("p22", "a 30 ft tall embankment at 0.5 rad",
     expect({"geometry.height": q(30 * FT), "geometry.slope_angle": q(0.5 * RAD)})),
    ("p23", "friction angle of 33 degrees", expect({"layers[0].friction_angle": 33.0})),
    ("p24", "slices: 100", expect({"analysis.slice_count": 100})),
    ("p25", "height 15 meters angle 50",
     expect({"geometry.height": 15.0, "geometry.slope_angle": 50.0})),
    ("p26", "unit weight 19.5 kN/m³", expect({"layers[0].unit_weight": 19.5})),
    ("p27",
     "a 10 m high slope at 45 degrees, cohesion 5 kPa, friction angle 20 deg, "
     "unit weight 18, bishop, 50 slices, water table 3 m below the crest, target adonis",
     expect({"geometry.height": 10.0, "geometry.slope_angle": 45.0,
             "layers[0].cohesion": 5.0, "layers[0].friction_angle": 20.0,
             "layers[0].unit_weight": 18.0, "analysis.method": "BISHOP_SIMPLIFIED",
             "analysis.slice_count": 50, "water_table.depth": 3.0,
             "analysis.target": "ADONIS_PROFILE"})),
    ("p28", "tell me about bishop vs fellenius",
     expect({"analysis.method": "BISHOP_SIMPLIFIED"},
            [conflict("analysis.method", "BISHOP_SIMPLIFIED", "FELLENIUS")])),
    ("p29", "the slope is dry", expect({})),
    ("p30", "assume typical values for a 10 m slope at 40 degrees",
     expect({"geometry.height": 10.0, "geometry.slope_angle": 40.0})),
    ("p31", "water table 1.5 m below the ground surface",
     expect({"water_table.depth": 1.5})),
    ("p32", "crest extent 15 m and toe extent 12 m, height 10 m, angle 35 degrees",
     expect({"geometry.crest_extent": 15.0, "geometry.toe_extent": 12.0,
             "geometry.height": 10.0, "geometry.slope_angle": 35.0})),
    ("p33", "unit weight 18, cohesion 20, friction 20, height 10, angle 26.57",
     expect({"layers[0].unit_weight": 18.0, "layers[0].cohesion": 20.0,
             "layers[0].friction_angle": 20.0, "geometry.height": 10.0,
             "geometry.slope_angle": 26.57})),
    ("p34", "water table at 3 m elevation", expect({"water_table.elevation": 3.0})),
    ("p35", "groundwater at a depth of 1 m, H = 6 m, slope angle 30°",
     expect({"water_table.depth": 1.0, "geometry.height": 6.0,
             "geometry.slope_angle": 30.0})),
    ("p36", "soft clay, 5 m high at 20 degrees, assume the rest",
     expect({"layers[0].name": "soft_clay", "geometry.height": 5.0,
             "geometry.slope_angle": 20.0})),
]


def main():
    out = []
    for pid, text, exp in FIXTURES:
        out.append({
            "id": pid,
            "text": text,
            "expect": exp,
            "geometry_complete": all(k in exp["fields"] for k in GEOM),
        })
    path = Path(__file__).resolve().parent.parent / "corpus" / "prompts.json"
    path.write_text(json.dumps(out, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    print(f"wrote {len(out)} fixtures to {path}")


if __name__ == "__main__":
    main()
