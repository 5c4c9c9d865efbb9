"""Abstract driving world: risky behaviors turn out unsafe with probability lambda.

Ground truth for a (pose, behavior) pair is drawn once per visit to that
pose, from a stream derived from the trial seed, the pair and the visit
index. Every policy run with the same seed therefore faces the same hazards
regardless of query order. Standing still cannot resample a hazard, while
driving away and coming back meets fresh traffic.
"""

from __future__ import annotations

import csv
import io
import zlib
from dataclasses import dataclass, field

import numpy as np

from .behaviors import MERGE_KINDS, Behavior
from .errors import PoseMismatch, ValidationError
from .lane_map import Pose
from .motion_planner import TrajectorySegment
from .safety_estimation import GroundTruth, SafetyLevel

TRAFFIC_LAMBDA = {"normal": 0.05, "heavy": 0.08}


@dataclass(frozen=True)
class TrafficCondition:
    name: str
    lam: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"lambda must be a probability, got {self.lam}")

    @classmethod
    def named(cls, name: str, lam: float | None = None) -> TrafficCondition:
        if lam is None:
            try:
                lam = TRAFFIC_LAMBDA[name]
            except KeyError:
                raise ValidationError(f"unknown traffic condition {name!r}") from None
        return cls(name, lam)


NORMAL = TrafficCondition.named("normal")
HEAVY = TrafficCondition.named("heavy")


@dataclass(frozen=True)
class ExecutionEvent:
    behavior: Behavior
    pose: Pose
    truth_unsafe: bool
    mu_observed: SafetyLevel | None
    distance: float
    end_pose: Pose


def _key_entropy(key: tuple) -> int:
    (lane, station), b, visit = key
    text = f"{lane}|{station:.1f}|{b}|{visit}"
    return zlib.crc32(text.encode("utf-8"))


@dataclass
class WorldState:
    pose: Pose
    seed: int
    traffic: TrafficCondition = HEAVY
    risky_kinds: frozenset[str] = MERGE_KINDS
    truth_cache: dict = field(default_factory=dict)
    rng: np.random.Generator = field(init=False)
    arrivals: dict = field(init=False)

    def __post_init__(self) -> None:
        # estimator noise stream; hazards use per-key streams instead
        self.rng = np.random.default_rng([self.seed, 1])
        self.arrivals = {self.pose.key(): 0}

    def visit_index(self, pose: Pose) -> int:
        """How many earlier visits the vehicle has paid to ``pose``."""
        return self.arrivals.get(pose.key(), 0)

    def ground_truth(self, pose: Pose, b: Behavior) -> GroundTruth:
        if b.kind not in self.risky_kinds:
            return GroundTruth(False)
        key = (pose.key(), b, self.visit_index(pose))
        truth = self.truth_cache.get(key)
        if truth is None:
            draw = np.random.default_rng([self.seed, 0, _key_entropy(key)]).random()
            truth = GroundTruth(bool(draw < self.traffic.lam))
            self.truth_cache[key] = truth
        return truth

    def execute_behavior(
        self, b: Behavior, segment: TrajectorySegment, mu: SafetyLevel | None = None
    ) -> ExecutionEvent:
        if segment.start_pose.key() != self.pose.key() or b.from_lane != self.pose.lane:
            raise PoseMismatch(f"vehicle at {self.pose}, segment starts at {segment.start_pose}")
        unsafe = self.ground_truth(self.pose, b).unsafe
        event = ExecutionEvent(b, self.pose, unsafe, mu, segment.length, segment.end_pose)
        end = segment.end_pose.key()
        if end != self.pose.key():
            self.arrivals[end] = self.arrivals[end] + 1 if end in self.arrivals else 0
        self.pose = segment.end_pose
        return event


def events_csv(events: list[ExecutionEvent]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["step", "behavior", "lane", "station", "truth_unsafe", "mu", "distance"])
    for i, e in enumerate(events):
        mu = "" if e.mu_observed is None else repr(e.mu_observed.mu)
        writer.writerow([i, str(e.behavior), str(e.pose.lane), repr(e.pose.station), int(e.truth_unsafe), mu,
                         repr(e.distance)])
    return buf.getvalue()
