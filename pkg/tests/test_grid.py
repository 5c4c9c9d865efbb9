import math

import pytest

from gladsim.grid import LANE_WIDTH, grid_document, road_id
from gladsim.lane_map import LaneId, parse_scenario


def _doc(**kw):
    kw.setdefault("pois", [{"name": "p", "category": "other", "lane": [road_id((0, 0), (1, 0)), 0], "station": 10}])
    kw.setdefault("start", {"lane": [road_id((1, 0), (1, 1)), 0], "station": 0.0})
    return grid_document(3, 3, 100.0, **kw)


def test_every_block_edge_has_two_directions():
    doc = _doc()
    ids = {r["id"] for r in doc["roads"]}
    # 3x3 nodes: 12 undirected edges, 24 one-way streets
    assert len(ids) == 24
    assert road_id((0, 0), (1, 0)) in ids and road_id((1, 0), (0, 0)) in ids


def test_two_lane_streets_are_adjacent_and_parallel():
    edge = ((0, 0), (1, 0))
    m = parse_scenario(_doc(two_lane=[edge]))
    a = m.lanes[LaneId(road_id(*edge), 0)]
    b = m.lanes[LaneId(road_id(*edge), 1)]
    assert math.dist(a.centerline[0], b.centerline[0]) == pytest.approx(LANE_WIDTH)
    assert a.length == pytest.approx(b.length) == pytest.approx(80.0)


def test_left_lane_is_entered_only_by_left_turns():
    edge = ((1, 1), (2, 1))
    doc = _doc(two_lane=[edge])
    into = {(c["to"][1], c["kind"]) for c in doc["connections"] if c["to"][0] == road_id(*edge)}
    assert into == {(1, "turn_left"), (0, "straight"), (0, "turn_right")}
    sources = {tuple(c["from"]) for c in doc["connections"]}
    assert (road_id(*edge), 1) in sources


def test_no_u_turns():
    doc = _doc()
    for c in doc["connections"]:
        a, b = c["from"][0].split("-")
        b2, d = c["to"][0].split("-")
        assert b == b2 and d != a


def test_uneven_spacing_sets_block_lengths():
    doc = grid_document(3, 2, spacing_x=[50.0, 200.0], spacing_y=[80.0],
                        start={"lane": [road_id((0, 0), (1, 0)), 0], "station": 0.0})
    m = parse_scenario(doc)
    assert m.lanes[LaneId(road_id((1, 0), (2, 0)), 0)].length == pytest.approx(180.0)
    assert m.lanes[LaneId(road_id((0, 0), (0, 1)), 0)].length == pytest.approx(60.0)


def test_bad_spacing_and_unknown_street():
    with pytest.raises(ValueError):
        grid_document(3, 3, spacing_x=[10.0])
    with pytest.raises(ValueError):
        grid_document(3, 3, two_lane=[((0, 0), (2, 2))])
