"""Symbolic driving behaviors as precondition/effect rules over lane occupancy.

The rule set is the hand-compiled equivalent of a small ASP action theory.
Each behavior moves the vehicle from ``inlane(L1, I)`` to ``inlane(L2, I+1)``
when its precondition holds::

    inlane(L2,I+1) :- mergeleft(I),  inlane(L1,I), leftof(L2,L1).
    inlane(L2,I+1) :- mergeright(I), inlane(L1,I), rightof(L2,L1).
    inlane(L2,I+1) :- gostraight(I), inlane(L1,I), connected(L1,L2,straight).
    inlane(L2,I+1) :- turnleft(I),   inlane(L1,I), connected(L1,L2,turn_left).
    inlane(L2,I+1) :- turnright(I),  inlane(L1,I), connected(L1,L2,turn_right).
    parked(P,I+1)  :- park(P,I),     inlane(L,I),  poi_lane(P,L).
    inlane(L,I+1)  :- stop(I),       inlane(L,I).

No behavior is applicable once the vehicle is parked.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Iterator

from .errors import InapplicableBehavior, ValidationError
from .lane_map import ConnectionKind, LaneId, ScenarioMap

MERGELEFT = "mergeleft"
MERGERIGHT = "mergeright"
TURNLEFT = "turnleft"
TURNRIGHT = "turnright"
GOSTRAIGHT = "gostraight"
PARK = "park"
STOP = "stop"

KINDS = (MERGELEFT, MERGERIGHT, TURNLEFT, TURNRIGHT, GOSTRAIGHT, PARK, STOP)
MERGE_KINDS = frozenset({MERGELEFT, MERGERIGHT})

_CONNECTION_KIND = {
    GOSTRAIGHT: ConnectionKind.STRAIGHT,
    TURNLEFT: ConnectionKind.TURN_LEFT,
    TURNRIGHT: ConnectionKind.TURN_RIGHT,
}
_BEHAVIOR_FOR_CONNECTION = {v: k for k, v in _CONNECTION_KIND.items()}


@dataclass(frozen=True)
class Behavior:
    kind: str
    from_lane: LaneId
    to_lane: LaneId
    target_poi: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValidationError(f"unknown behavior kind {self.kind!r}")
        if self.kind in (PARK, STOP) and self.to_lane != self.from_lane:
            raise ValidationError(f"{self.kind} must keep the vehicle in its lane")
        if (self.kind == PARK) != (self.target_poi is not None):
            raise ValidationError("target_poi is required for park and only for park")

    def __hash__(self) -> int:
        h = self.__dict__.get("_hash")
        if h is None:
            h = hash((self.kind, self.from_lane, self.to_lane, self.target_poi))
            object.__setattr__(self, "_hash", h)
        return h

    def __getstate__(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "_hash"}

    @property
    def sort_key(self) -> tuple:
        return (self.kind, self.from_lane, self.to_lane, self.target_poi or "")

    def __str__(self) -> str:
        text = f"{self.kind}({self.from_lane}→{self.to_lane})"
        return f"{text}@{self.target_poi}" if self.target_poi else text


@dataclass(frozen=True)
class SymbolicState:
    lane: LaneId
    step: int = 0
    parked_at: str | None = None


@dataclass(frozen=True)
class BehaviorPlan:
    """Ordered behaviors plus the safety level used for each (default 0.0)."""

    steps: tuple[Behavior, ...]
    mu: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        steps = tuple(self.steps)
        mu = tuple(self.mu) if self.mu else (0.0,) * len(steps)
        if len(mu) != len(steps):
            raise ValidationError("one safety level per behavior is required")
        if any(not -1.0 <= m <= 0.0 for m in mu):
            raise ValidationError("safety levels must lie in [-1, 0]")
        for a, b in zip(steps, steps[1:]):
            if a.to_lane != b.from_lane:
                raise ValidationError(f"plan is not chain-consistent at {a} -> {b}")
        object.__setattr__(self, "steps", steps)
        object.__setattr__(self, "mu", mu)

    def __len__(self) -> int:
        return len(self.steps)

    @property
    def sort_key(self) -> tuple:
        return tuple(b.sort_key for b in self.steps)

    def with_mu(self, mu: tuple[float, ...]) -> BehaviorPlan:
        return replace(self, mu=mu)

    def serialize(self) -> str:
        """Line-oriented ``kind(from→to)`` form used in logs and golden files."""
        return "\n".join(str(b) for b in self.steps)


def _relation_holds(scenario: ScenarioMap, b: Behavior) -> bool:
    src = scenario.lane(b.from_lane)
    scenario.lane(b.to_lane)
    if b.kind == MERGELEFT:
        return b.to_lane.road == b.from_lane.road and b.to_lane.index == b.from_lane.index + 1
    if b.kind == MERGERIGHT:
        return b.to_lane.road == b.from_lane.road and b.to_lane.index == b.from_lane.index - 1
    if b.kind in _CONNECTION_KIND:
        return (b.to_lane, _CONNECTION_KIND[b.kind]) in src.successors
    if b.kind == PARK:
        poi = scenario.pois.get(b.target_poi)
        return poi is not None and poi.lane == b.from_lane
    return b.kind == STOP


def applicable(scenario: ScenarioMap, state: SymbolicState, b: Behavior) -> bool:
    scenario.lane(state.lane)
    if state.parked_at is not None or b.from_lane != state.lane:
        scenario.lane(b.from_lane)
        scenario.lane(b.to_lane)
        return False
    return _relation_holds(scenario, b)


def apply(scenario: ScenarioMap, state: SymbolicState, b: Behavior) -> SymbolicState:
    if not applicable(scenario, state, b):
        raise InapplicableBehavior(f"{b} is not applicable in {state}")
    parked = b.target_poi if b.kind == PARK else None
    return SymbolicState(lane=b.to_lane, step=state.step + 1, parked_at=parked)


def candidate_behaviors(
    scenario: ScenarioMap, lane: LaneId, goal: str | None = None, include_stop: bool = False
) -> Iterator[Behavior]:
    """All behaviors whose precondition holds on ``lane`` (unparked).

    With ``goal`` set, ``park`` is only offered for that POI.
    """
    left = scenario.left_neighbor(lane)
    if left is not None:
        yield Behavior(MERGELEFT, lane, left)
    right = scenario.right_neighbor(lane)
    if right is not None:
        yield Behavior(MERGERIGHT, lane, right)
    for dst, conn in scenario.lane(lane).successors:
        yield Behavior(_BEHAVIOR_FOR_CONNECTION[conn], lane, dst)
    for poi in scenario.pois_on(lane):
        if goal is None or poi.name == goal:
            yield Behavior(PARK, lane, lane, poi.name)
    if include_stop:
        yield Behavior(STOP, lane, lane)


def replay(scenario: ScenarioMap, start: SymbolicState, plan: BehaviorPlan) -> SymbolicState:
    state = start
    for b in plan.steps:
        state = apply(scenario, state, b)
    return state
