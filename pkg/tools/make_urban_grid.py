"""Regenerate the bundled urban_grid scenario."""

from __future__ import annotations

import json
import sys
from pathlib import Path

from gladsim.grid import grid_document, road_id

OUT = Path(__file__).resolve().parents[1] / "src" / "gladsim" / "data" / "urban_grid.json"
SPACING_X = [50.0, 50.0, 400.0]
SPACING_Y = [60.0, 60.0, 50.0]

# name, category, (from node, to node), station
POIS = [
    ("work", "other", ((2, 1), (2, 0)), 5.0),
    ("gas_station_1", "gas_station", ((1, 3), (1, 2)), 25.0),
    ("gas_station_2", "gas_station", ((2, 2), (3, 2)), 25.0),
    ("school", "school", ((2, 3), (1, 3)), 25.0),
    ("grocery_1", "grocery", ((0, 2), (1, 2)), 25.0),
    ("grocery_2", "grocery", ((1, 0), (0, 0)), 25.0),
    ("home", "home", ((1, 2), (1, 1)), 25.0),
]


def build(pois_spec=POIS, spacing_x=SPACING_X, spacing_y=SPACING_Y) -> dict:
    # every POI sits on the left lane of a two-lane street
    pois = [
        {"name": n, "category": c, "lane": [road_id(a, b), 1], "station": s} for n, c, (a, b), s in pois_spec
    ]
    work = pois[0]
    doc = grid_document(
        len(spacing_x) + 1, len(spacing_y) + 1, two_lane=[r for _, _, r, _ in pois_spec], pois=pois,
        start={"lane": work["lane"], "station": work["station"]}, name="urban_grid",
        spacing_x=list(spacing_x), spacing_y=list(spacing_y),
    )
    doc["request"] = {
        "required": [["school"], ["gas_station_1", "gas_station_2"], ["grocery_1", "grocery_2"]],
        "terminal": "home",
    }
    doc["preferences"] = [
        {"name": "fuel_before_school", "relation": "before", "first": "gas_station", "second": "school",
         "violation_cost": 300.0},
        {"name": "groceries_after_school", "relation": "after", "first": "grocery", "second": "school",
         "violation_cost": 300.0},
    ]
    return doc


if __name__ == "__main__":
    out = Path(sys.argv[1]) if len(sys.argv) > 1 else OUT
    out.write_text(json.dumps(build(), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {out}")
