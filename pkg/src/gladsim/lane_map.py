"""Lane-graph world model and scenario-file ingestion.

A map is a set of directed lanes grouped into roads. Lane ``index`` 0 is the
rightmost lane of its road, so ``leftof``/``rightof`` are derived from the
index instead of being stored. Intersections are explicit successor edges
tagged with a :class:`ConnectionKind`.
"""

from __future__ import annotations

import bisect
import enum
import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

from .errors import ParseError, StationOutOfRange, UnknownLane, ValidationError

Point = tuple[float, float]

DEFAULT_D_MERGE = 15.0
POI_CATEGORIES = ("home", "gas_station", "grocery", "school", "other")
_DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True, order=True)
class LaneId:
    road: str
    index: int

    def __hash__(self) -> int:
        # lane ids key most caches; hash once
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.road, self.index))
            object.__setattr__(self, "_hash", h)
        return h

    def __getstate__(self) -> dict:
        # string hashes differ between interpreters
        return {"road": self.road, "index": self.index}

    def __str__(self) -> str:
        return f"{self.road}:{self.index}"


class ConnectionKind(str, enum.Enum):
    STRAIGHT = "straight"
    TURN_LEFT = "turn_left"
    TURN_RIGHT = "turn_right"


@dataclass(frozen=True)
class Lane:
    id: LaneId
    centerline: tuple[Point, ...]
    successors: tuple[tuple[LaneId, ConnectionKind], ...] = ()
    length: float = field(init=False)
    _cumulative: tuple[float, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        pts = tuple((float(x), float(y)) for x, y in self.centerline)
        if len(pts) < 2:
            raise ValidationError(f"lane {self.id} needs at least two centerline points")
        for a, b in zip(pts, pts[1:]):
            if a == b:
                raise ValidationError(f"lane {self.id} has repeated consecutive points {a}")
        cumulative = tuple(itertools.accumulate((math.dist(a, b) for a, b in zip(pts, pts[1:])), initial=0.0))
        object.__setattr__(self, "centerline", pts)
        object.__setattr__(self, "successors", tuple(self.successors))
        object.__setattr__(self, "length", cumulative[-1])
        object.__setattr__(self, "_cumulative", cumulative)

    def point_at(self, station: float) -> Point:
        if station < 0.0 or station > self.length + 1e-9:
            raise StationOutOfRange(f"station {station} outside lane {self.id} of length {self.length}")
        if station >= self.length:
            return self.centerline[-1]
        i = bisect.bisect_right(self._cumulative, station) - 1
        s0 = self._cumulative[i]
        (x0, y0), (x1, y1) = self.centerline[i], self.centerline[i + 1]
        t = (station - s0) / (self._cumulative[i + 1] - s0)
        return (x0 + t * (x1 - x0), y0 + t * (y1 - y0))

    def sub_polyline(self, s0: float, s1: float) -> list[Point]:
        """Centerline points between stations ``s0 <= s1``, endpoints included."""
        pts = [self.point_at(s0)]
        for s, p in zip(self._cumulative, self.centerline):
            if s0 < s < s1:
                pts.append(p)
        end = self.point_at(s1)
        if end != pts[-1]:
            pts.append(end)
        return pts


@dataclass(frozen=True)
class Poi:
    name: str
    category: str
    lane: LaneId
    station: float


@dataclass(frozen=True)
class Pose:
    lane: LaneId
    station: float

    def key(self) -> tuple[LaneId, float]:
        """Pose quantized to 0.1 m of station; used for memo and override keys."""
        return (self.lane, round(self.station, 1))


@dataclass(frozen=True)
class ScenarioMap:
    lanes: Mapping[LaneId, Lane]
    pois: Mapping[str, Poi]
    start: Pose
    d_merge: float = DEFAULT_D_MERGE
    name: str = "scenario"
    _pois_by_lane: Mapping[LaneId, tuple[Poi, ...]] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        by_lane: dict[LaneId, list[Poi]] = {}
        for poi in self.pois.values():
            by_lane.setdefault(poi.lane, []).append(poi)
        object.__setattr__(
            self, "_pois_by_lane", {k: tuple(sorted(v, key=lambda p: p.name)) for k, v in by_lane.items()}
        )

    def lane(self, lane_id: LaneId) -> Lane:
        try:
            return self.lanes[lane_id]
        except KeyError:
            raise UnknownLane(f"unknown lane {lane_id}") from None

    def poi(self, name: str) -> Poi:
        try:
            return self.pois[name]
        except KeyError:
            raise ValidationError(f"unknown POI {name!r}") from None

    def pois_on(self, lane_id: LaneId) -> tuple[Poi, ...]:
        return self._pois_by_lane.get(lane_id, ())

    def left_neighbor(self, lane_id: LaneId) -> LaneId | None:
        left = LaneId(lane_id.road, lane_id.index + 1)
        return left if left in self.lanes else None

    def right_neighbor(self, lane_id: LaneId) -> LaneId | None:
        right = LaneId(lane_id.road, lane_id.index - 1)
        return right if right in self.lanes else None

    def reachable_lanes(self, origin: LaneId) -> set[LaneId]:
        seen = {origin}
        queue = deque([origin])
        while queue:
            lid = queue.popleft()
            nxt = [s for s, _ in self.lane(lid).successors]
            nxt += [n for n in (self.left_neighbor(lid), self.right_neighbor(lid)) if n is not None]
            for n in nxt:
                if n not in seen:
                    seen.add(n)
                    queue.append(n)
        return seen


def left_of(scenario: ScenarioMap, a: LaneId, b: LaneId) -> bool:
    """``leftof(a, b)``: lane ``a`` lies immediately left of lane ``b``."""
    scenario.lane(a)
    scenario.lane(b)
    return a.road == b.road and a.index == b.index + 1


def right_of(scenario: ScenarioMap, a: LaneId, b: LaneId) -> bool:
    scenario.lane(a)
    scenario.lane(b)
    return a.road == b.road and a.index == b.index - 1


def position_at(scenario: ScenarioMap, pose: Pose) -> Point:
    return scenario.lane(pose.lane).point_at(pose.station)


# ---------------------------------------------------------------------------
# scenario files


def _lane_ref(raw: Any) -> LaneId:
    if not isinstance(raw, (list, tuple)) or len(raw) != 2:
        raise ParseError(f"lane reference must be [road, index], got {raw!r}")
    road, index = raw
    if not isinstance(index, int) or index < 0:
        raise ParseError(f"lane index must be a non-negative integer, got {index!r}")
    return LaneId(str(road), index)


def parse_scenario(data: Mapping[str, Any]) -> ScenarioMap:
    """Build and validate a map from the decoded scenario document."""
    try:
        roads = data["roads"]
        raw_pois = data.get("pois", [])
        raw_start = data["start"]
    except (KeyError, TypeError) as exc:
        raise ParseError(f"scenario is missing required key: {exc}") from None

    successors: dict[LaneId, list[tuple[LaneId, ConnectionKind]]] = {}
    for conn in data.get("connections", []):
        try:
            src, dst = _lane_ref(conn["from"]), _lane_ref(conn["to"])
            kind = ConnectionKind(conn["kind"])
        except (KeyError, ValueError) as exc:
            raise ParseError(f"bad connection {conn!r}: {exc}") from None
        successors.setdefault(src, []).append((dst, kind))

    lanes: dict[LaneId, Lane] = {}
    try:
        for road in roads:
            for raw_lane in road["lanes"]:
                lid = LaneId(str(road["id"]), int(raw_lane["index"]))
                if lid in lanes:
                    raise ValidationError(f"duplicate lane {lid}")
                centerline = [(float(x), float(y)) for x, y in raw_lane["centerline"]]
                lanes[lid] = Lane(lid, tuple(centerline), tuple(successors.pop(lid, [])))
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ParseError(f"malformed road entry: {exc}") from None
    if successors:
        raise ValidationError(f"connections from unknown lanes: {sorted(map(str, successors))}")
    for lane in lanes.values():
        for dst, _ in lane.successors:
            if dst not in lanes:
                raise ValidationError(f"lane {lane.id} connects to unknown lane {dst}")

    pois: dict[str, Poi] = {}
    for raw in raw_pois:
        try:
            poi = Poi(str(raw["name"]), str(raw["category"]), _lane_ref(raw["lane"]), float(raw["station"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed POI {raw!r}: {exc}") from None
        if poi.category not in POI_CATEGORIES:
            raise ValidationError(f"POI {poi.name} has unknown category {poi.category!r}")
        if poi.lane not in lanes:
            raise ValidationError(f"POI {poi.name} references unknown lane {poi.lane}")
        if not 0.0 <= poi.station <= lanes[poi.lane].length:
            raise ValidationError(f"POI {poi.name} station {poi.station} is off lane {poi.lane}")
        if poi.name in pois:
            raise ValidationError(f"duplicate POI {poi.name}")
        pois[poi.name] = poi

    try:
        start = Pose(_lane_ref(raw_start["lane"]), float(raw_start["station"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"malformed start pose: {exc}") from None
    if start.lane not in lanes:
        raise ValidationError(f"start pose references unknown lane {start.lane}")
    if not 0.0 <= start.station <= lanes[start.lane].length:
        raise ValidationError("start station is off its lane")

    scenario = ScenarioMap(
        lanes=lanes,
        pois=pois,
        start=start,
        d_merge=float(data.get("d_merge", DEFAULT_D_MERGE)),
        name=str(data.get("name", "scenario")),
    )
    reachable = scenario.reachable_lanes(start.lane)
    for poi in pois.values():
        if poi.lane not in reachable:
            raise ValidationError(f"POI {poi.name} is unreachable from the start lane")
    return scenario


def read_document(path: str | Path) -> dict[str, Any]:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top level must be an object")
    return data


def load_scenario(path: str | Path) -> ScenarioMap:
    return parse_scenario(read_document(resolve_scenario(path)))


def resolve_scenario(path: str | Path) -> Path:
    """Accept a file path or the name of a bundled scenario such as ``urban_grid``."""
    p = Path(path)
    if p.exists():
        return p
    bundled = _DATA_DIR / f"{path}.json"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no scenario file or bundled scenario named {path}")


def scenario_to_dict(scenario: ScenarioMap, extra: Mapping[str, Any] | None = None) -> dict[str, Any]:
    roads: dict[str, list[dict[str, Any]]] = {}
    connections = []
    for lid in sorted(scenario.lanes):
        lane = scenario.lanes[lid]
        roads.setdefault(lid.road, []).append({"index": lid.index, "centerline": [list(p) for p in lane.centerline]})
        for dst, kind in lane.successors:
            connections.append({"from": [lid.road, lid.index], "to": [dst.road, dst.index], "kind": kind.value})
    doc: dict[str, Any] = {
        "name": scenario.name,
        "d_merge": scenario.d_merge,
        "roads": [{"id": rid, "lanes": lanes} for rid, lanes in roads.items()],
        "connections": connections,
        "pois": [
            {"name": p.name, "category": p.category, "lane": [p.lane.road, p.lane.index], "station": p.station}
            for p in scenario.pois.values()
        ],
        "start": {"lane": [scenario.start.lane.road, scenario.start.lane.index], "station": scenario.start.station},
    }
    if extra:
        doc.update(extra)
    return doc


def save_scenario(scenario: ScenarioMap, path: str | Path, extra: Mapping[str, Any] | None = None) -> None:
    Path(path).write_text(json.dumps(scenario_to_dict(scenario, extra), indent=1), encoding="utf-8")


