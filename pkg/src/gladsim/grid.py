"""Programmatic construction of Manhattan-style scenarios.

Every block edge carries two one-way streets, one per direction. Streets
have a single lane except the ones listed as two-lane. A left turn into a
two-lane street lands in its left lane (index 1); straight and right-turn
entries land in the right lane (index 0). Either lane may be left in any
direction. So a POI on the left lane is reached either by a merge or by
arriving with a left turn. Lanes stop short of the intersection box, which
is crossed by straight, right-turn and left-turn connections (no U-turns).
"""

from __future__ import annotations

import math
from typing import Any, Iterable

LANE_WIDTH = 3.5
INSET = 10.0

Node = tuple[int, int]


def node_name(n: Node) -> str:
    return f"n{n[0]}{n[1]}"


def road_id(a: Node, b: Node) -> str:
    return f"{node_name(a)}-{node_name(b)}"


def _turn(d_in: tuple[int, int], d_out: tuple[int, int]) -> str | None:
    cross = d_in[0] * d_out[1] - d_in[1] * d_out[0]
    if d_in == d_out:
        return "straight"
    if cross > 0:
        return "turn_left"
    if cross < 0:
        return "turn_right"
    return None  # u-turn


def grid_document(
    nx: int,
    ny: int,
    spacing: float = 100.0,
    *,
    two_lane: Iterable[tuple[Node, Node]] = (),
    pois: Iterable[dict[str, Any]] = (),
    start: dict[str, Any] | None = None,
    name: str = "grid",
    d_merge: float = 15.0,
    spacing_x: list[float] | None = None,
    spacing_y: list[float] | None = None,
) -> dict[str, Any]:
    """Scenario document for an ``nx`` by ``ny`` grid of intersections.

    ``spacing_x``/``spacing_y`` give per-gap block lengths when blocks are
    not uniform. POI and start lanes use ``[road_id(a, b), index]``.
    """
    xs = [0.0]
    for gap in spacing_x or [spacing] * (nx - 1):
        xs.append(xs[-1] + gap)
    ys = [0.0]
    for gap in spacing_y or [spacing] * (ny - 1):
        ys.append(ys[-1] + gap)
    if len(xs) != nx or len(ys) != ny:
        raise ValueError("spacing lists must have one entry per gap")
    wide = {(tuple(a), tuple(b)) for a, b in two_lane}

    edges: list[tuple[Node, Node]] = []
    for i in range(nx):
        for j in range(ny):
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                k, m = i + di, j + dj
                if 0 <= k < nx and 0 <= m < ny:
                    edges.append(((i, j), (k, m)))
    unknown = wide - set(edges)
    if unknown:
        raise ValueError(f"two-lane streets not in the grid: {sorted(unknown)}")

    def lanes_of(a: Node, b: Node) -> tuple[int, ...]:
        return (0, 1) if (a, b) in wide else (0,)

    roads = []
    for a, b in edges:
        ax, ay, bx, by = xs[a[0]], ys[a[1]], xs[b[0]], ys[b[1]]
        length = math.hypot(bx - ax, by - ay)
        ux, uy = (bx - ax) / length, (by - ay) / length
        rx, ry = uy, -ux  # right-hand normal
        lanes = []
        for index in lanes_of(a, b):
            off = LANE_WIDTH * (1.5 - index)
            ends = [[round(ax + c * ux + off * rx, 6), round(ay + c * uy + off * ry, 6)] for c in (INSET, length - INSET)]
            lanes.append({"index": index, "centerline": ends})
        roads.append({"id": road_id(a, b), "lanes": lanes})

    connections = []
    for a, b in edges:
        d_in = (b[0] - a[0], b[1] - a[1])
        for b2, c in edges:
            if b2 != b:
                continue
            kind = _turn(d_in, (c[0] - b[0], c[1] - b[1]))
            if kind is None:
                continue
            entry = 1 if kind == "turn_left" and (b, c) in wide else 0
            for idx in lanes_of(a, b):
                connections.append({"from": [road_id(a, b), idx], "to": [road_id(b, c), entry], "kind": kind})

    doc: dict[str, Any] = {
        "name": name,
        "d_merge": d_merge,
        "roads": roads,
        "connections": connections,
        "pois": list(pois),
    }
    if start is not None:
        doc["start"] = start
    return doc
