"""Geometric realization of behavior plans and motion cost.

Every behavior maps to one polyline segment:

* ``gostraight``/``turnleft``/``turnright`` follow the rest of the source
  lane, then the chord across the intersection to the start of the target.
* ``mergeleft``/``mergeright`` take a straight chord from the current pose to
  the adjacent lane, ``d_merge`` metres further along.
* ``park`` follows the lane up to the POI; ``stop`` is a zero-length segment.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

from . import behaviors as bh
from .behaviors import Behavior, BehaviorPlan
from .errors import InconsistentPlan, MergeBeyondLaneEnd, PoiBehindVehicle
from .lane_map import Point, Pose, ScenarioMap

MIN_MERGE_LENGTH = 5.0
NOMINAL_SPEED = 30.0 / 3.6  # m/s
COST_UNITS = ("distance", "time")


def polyline_length(points: tuple[Point, ...] | list[Point]) -> float:
    return sum(math.dist(a, b) for a, b in zip(points, points[1:]))


@dataclass(frozen=True)
class TrajectorySegment:
    behavior_index: int
    polyline: tuple[Point, ...]
    length: float
    start_pose: Pose
    end_pose: Pose


@dataclass(frozen=True)
class Trajectory:
    segments: tuple[TrajectorySegment, ...] = ()
    total_length: float = 0.0

    @classmethod
    def from_segments(cls, segments: list[TrajectorySegment] | tuple[TrajectorySegment, ...]) -> Trajectory:
        segments = tuple(segments)
        return cls(segments, sum(s.length for s in segments))

    @property
    def start_point(self) -> Point | None:
        return self.segments[0].polyline[0] if self.segments else None

    @property
    def end_point(self) -> Point | None:
        return self.segments[-1].polyline[-1] if self.segments else None


def segment_for(
    scenario: ScenarioMap, pose: Pose, b: Behavior, index: int = 0, d_merge: float | None = None
) -> TrajectorySegment:
    """Realize a single behavior from ``pose``."""
    if b.from_lane != pose.lane:
        raise InconsistentPlan(f"{b} does not start on lane {pose.lane}")
    src = scenario.lane(pose.lane)
    s = pose.station
    kind = b.kind
    if kind in bh.MERGE_KINDS:
        dst = scenario.lane(b.to_lane)
        d = scenario.d_merge if d_merge is None else d_merge
        target = s + d
        if target > dst.length:
            if dst.length - s < MIN_MERGE_LENGTH:
                raise MergeBeyondLaneEnd(f"{b} at station {s:.1f} runs past the end of {dst.id}")
            target = dst.length
        pts = [src.point_at(s), dst.point_at(target)]
        end = Pose(dst.id, target)
    elif kind == bh.PARK:
        poi = scenario.poi(b.target_poi)
        if poi.station < s:
            raise PoiBehindVehicle(f"{poi.name} at {poi.station} is behind station {s}")
        pts = src.sub_polyline(s, poi.station)
        end = Pose(src.id, poi.station)
    elif kind == bh.STOP:
        pts = [src.point_at(s)]
        end = pose
    else:
        dst = scenario.lane(b.to_lane)
        pts = src.sub_polyline(s, src.length)
        entry = dst.centerline[0]
        if entry != pts[-1]:
            pts.append(entry)
        end = Pose(dst.id, 0.0)
    if len(pts) == 1:
        pts.append(pts[0])
    poly = tuple(pts)
    return TrajectorySegment(index, poly, polyline_length(poly), pose, end)


def realize(scenario: ScenarioMap, start: Pose, plan: BehaviorPlan, d_merge: float | None = None) -> Trajectory:
    if not plan.steps:
        return Trajectory()
    if plan.steps[0].from_lane != start.lane:
        raise InconsistentPlan(f"plan starts on {plan.steps[0].from_lane}, vehicle is on {start.lane}")
    segments = []
    pose = start
    for i, b in enumerate(plan.steps):
        seg = segment_for(scenario, pose, b, i, d_merge)
        segments.append(seg)
        pose = seg.end_pose
    return Trajectory.from_segments(segments)


def cost(traj: Trajectory, unit: str = "distance") -> float:
    """Motion cost of a trajectory: metres travelled, or seconds at nominal speed."""
    if unit == "distance":
        return traj.total_length
    if unit == "time":
        return traj.total_length / NOMINAL_SPEED
    raise ValueError(f"unknown cost unit {unit!r}")


def trajectory_csv(traj: Trajectory, plan: BehaviorPlan | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["segment", "behavior", "x", "y"])
    for seg in traj.segments:
        name = plan.steps[seg.behavior_index].kind if plan is not None else seg.behavior_index
        for x, y in seg.polyline:
            writer.writerow([seg.behavior_index, name, repr(x), repr(y)])
    return buf.getvalue()
