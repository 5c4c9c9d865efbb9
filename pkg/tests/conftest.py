"""Shared scenario builders for the test suite."""

from __future__ import annotations

import math
import random

import pytest

from gladsim.lane_map import load_scenario, parse_scenario
from gladsim.service_layer import load_service

LANE_WIDTH = 3.5


def road(rid: str, n_lanes: int, start=(0.0, 0.0), heading=0.0, length=100.0) -> dict:
    """Straight road; lane k sits LANE_WIDTH * k to the left of lane 0."""
    ux, uy = math.cos(heading), math.sin(heading)
    lx, ly = -uy, ux
    lanes = []
    for k in range(n_lanes):
        x0, y0 = start[0] + k * LANE_WIDTH * lx, start[1] + k * LANE_WIDTH * ly
        lanes.append({"index": k, "centerline": [[x0, y0], [x0 + length * ux, y0 + length * uy]]})
    return {"id": rid, "lanes": lanes}


def single_road_doc(n_lanes: int = 2, length: float = 100.0, pois=(), start_lane=0, start_station=0.0) -> dict:
    return {
        "roads": [road("r0", n_lanes, length=length)],
        "connections": [],
        "pois": [
            {"name": n, "category": c, "lane": ["r0", lane], "station": s} for n, c, lane, s in pois
        ],
        "start": {"lane": ["r0", start_lane], "station": start_station},
    }


def random_doc(seed: int, max_lanes: int = 6, density: int = 2) -> dict:
    """Random lane graph with at most ``max_lanes`` lanes and one goal POI.

    Roads are straight with 1-3 lanes; connections join random lane pairs
    across roads, up to ``density`` per lane. The POI is placed far enough along its lane that a merge
    onto that lane can still reach it.
    """
    rng = random.Random(seed)
    roads, lane_ids = [], []
    while True:
        budget = max_lanes - len(lane_ids)
        if budget <= 0 or (len(roads) >= 2 and rng.random() < 0.3):
            break
        n = rng.randint(1, min(3, budget))
        rid = f"r{len(roads)}"
        roads.append(
            road(rid, n, (rng.uniform(-200, 200), rng.uniform(-200, 200)), rng.uniform(0, 2 * math.pi),
                 rng.choice([40.0, 60.0, 90.0]))
        )
        lane_ids.extend((rid, k) for k in range(n))
    conns = set()
    for _ in range(rng.randint(1, density * len(lane_ids))):
        a, b = rng.sample(lane_ids, 2) if len(lane_ids) > 1 else (lane_ids[0], lane_ids[0])
        if a[0] != b[0]:
            conns.add((a, b, rng.choice(["straight", "turn_left", "turn_right"])))
    start = rng.choice(lane_ids)
    goal = rng.choice(lane_ids)
    return {
        "roads": roads,
        "connections": [{"from": list(a), "to": list(b), "kind": k} for a, b, k in sorted(conns)],
        "pois": [{"name": "goal", "category": "other", "lane": list(goal), "station": rng.choice([20.0, 30.0])}],
        "start": {"lane": list(start), "station": 0.0},
    }


def random_scenario(seed: int, max_lanes: int = 6, density: int = 2):
    """Like ``random_doc`` but retried until the goal is reachable from the start."""
    for attempt in range(1000):
        doc = random_doc(seed * 1000 + attempt, max_lanes, density)
        try:
            return parse_scenario(doc)
        except Exception:
            continue
    raise RuntimeError("no reachable random map found")


@pytest.fixture(scope="session")
def urban():
    return load_scenario("urban_grid")


@pytest.fixture(scope="session")
def urban_service():
    return load_service("urban_grid")


CATEGORIES = ("gas_station", "school", "grocery", "home")


def random_service_doc(seed: int, max_lanes: int = 8) -> dict:
    """Random map with four POIs, a two-group request and one preference."""
    rng = random.Random(seed)
    doc = random_doc(seed, max_lanes)
    lanes = [(r["id"], l["index"]) for r in doc["roads"] for l in r["lanes"]]
    # densify so that POI-to-POI legs exist more often
    extra = {(tuple(c["from"]), tuple(c["to"])) for c in doc["connections"]}
    for _ in range(2 * len(lanes)):
        a, b = rng.sample(lanes, 2)
        if a[0] != b[0] and (a, b) not in extra:
            extra.add((a, b))
            doc["connections"].append({"from": list(a), "to": list(b), "kind": rng.choice(["straight", "turn_left"])})
    names = ["p0", "p1", "p2", "p3"]
    doc["pois"] = [
        {"name": n, "category": c, "lane": list(rng.choice(lanes)), "station": rng.choice([20.0, 30.0])}
        for n, c in zip(names, rng.sample(CATEGORIES, 4))
    ]
    doc["request"] = {"required": [["p0"], ["p1", "p2"]], "terminal": "p3"}
    doc["preferences"] = [
        {"name": "order", "relation": rng.choice(["before", "after"]), "first": doc["pois"][1]["category"],
         "second": doc["pois"][0]["category"], "violation_cost": rng.choice([50.0, 300.0])}
    ]
    return doc


def random_service_scenario(seed: int):
    """A random multi-POI scenario whose request has at least one feasible plan."""
    from gladsim.plan_optimizer import PlanOptimizer
    from gladsim.service_layer import parse_service

    for attempt in range(5000):
        doc = random_service_doc(seed * 5000 + attempt)
        try:
            m = parse_scenario(doc)
            rqst, prefs = parse_service(doc)
            PlanOptimizer(m, horizon=6, k_max=None).optimal_plan(rqst, prefs, m.start)
        except Exception:
            continue
        return m, rqst, prefs
    raise RuntimeError("no feasible random service scenario found")


# acceptance results, filled by test_acceptance.py and printed at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
