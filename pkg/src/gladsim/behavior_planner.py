"""Forward search over symbolic states for goal-directed behavior plans."""

from __future__ import annotations

import heapq
import itertools
import math
from typing import NamedTuple

from . import behaviors as bh
from .behaviors import Behavior, BehaviorPlan, SymbolicState
from .errors import RealizationError, ValidationError
from .lane_map import Poi, Pose, ScenarioMap
from .motion_planner import segment_for

DEFAULT_HORIZON = 30
DEFAULT_K_MAX = 50
DEFAULT_BEHAVIOR_COST = 40.0
_TIE_EPS = 1e-9


class SearchMemo:
    """Per-map caches shared by repeated searches: candidates, step outcomes, positions."""

    def __init__(self, scenario: ScenarioMap) -> None:
        self.scenario = scenario
        self._candidates: dict[tuple, tuple[Behavior, ...]] = {}
        self._steps: dict[tuple, tuple[float, Pose] | None] = {}
        self._points: dict[Pose, tuple[float, float]] = {}
        self.expansions: dict[tuple, tuple] = {}
        self._reverse: dict[Pose, list[tuple[Pose, float]]] | None = None
        self._cost_to_go: dict[tuple, dict[Pose, float]] = {}
        self._adjacent: dict | None = None
        self._goal_entries: dict[str, tuple] = {}
        self._goal_masks: dict[str, tuple] = {}
        self._bits: dict | None = None

    def candidates(self, lane, goal: str) -> tuple[Behavior, ...]:
        key = (lane, goal)
        found = self._candidates.get(key)
        if found is None:
            found = self._candidates[key] = tuple(bh.candidate_behaviors(self.scenario, lane, goal=goal))
        return found

    def step(self, pose: Pose, b: Behavior) -> tuple[float, Pose] | None:
        """Length and end pose of ``b`` from ``pose``; None when it cannot be realized."""
        key = (pose, b)
        if key in self._steps:
            return self._steps[key]
        try:
            seg = segment_for(self.scenario, pose, b)
        except RealizationError:
            out = None
        else:
            out = (seg.length, seg.end_pose)
        self._steps[key] = out
        return out

    def point(self, pose: Pose) -> tuple[float, float]:
        xy = self._points.get(pose)
        if xy is None:
            xy = self._points[pose] = self.scenario.lane(pose.lane).point_at(pose.station)
        return xy

    def _pose_graph(self) -> dict[Pose, list[tuple[Pose, float]]]:
        """Reverse drive edges over every pose reachable from a lane start or a POI."""
        if self._reverse is not None:
            return self._reverse
        frontier = [Pose(lid, 0.0) for lid in self.scenario.lanes]
        frontier += [Pose(p.lane, p.station) for p in self.scenario.pois.values()]
        seen = set(frontier)
        reverse: dict[Pose, list[tuple[Pose, float]]] = {}
        while frontier:
            u = frontier.pop()
            for b in self.candidates(u.lane, ""):
                outcome = self.step(u, b)
                if outcome is None:
                    continue
                length, v = outcome
                reverse.setdefault(v, []).append((u, length))
                if v not in seen:
                    seen.add(v)
                    frontier.append(v)
        self._reverse = reverse
        return reverse

    def _lane_graph(self) -> dict:
        if self._adjacent is None:
            self._adjacent = {
                lid: tuple(b.to_lane for b in self.candidates(lid, "")) for lid in self.scenario.lanes
            }
        return self._adjacent

    def _entries(self, goal: Poi) -> tuple[frozenset, dict]:
        """Lanes that can enter the goal lane short of the POI, and hop counts to them."""
        found = self._goal_entries.get(goal.name)
        if found is None:
            adjacent = self._lane_graph()
            entries = set()
            reverse: dict = {}
            for lid, targets in adjacent.items():
                for v in targets:
                    reverse.setdefault(v, []).append(lid)
                if goal.lane in targets and lid != goal.lane:
                    # a merge lands d_merge ahead; a connection lands at station 0
                    if lid.road != goal.lane.road or self.scenario.d_merge <= goal.station:
                        entries.add(lid)
            hops = {e: 0 for e in entries}
            frontier = list(entries)
            while frontier:
                nxt = []
                for v in frontier:
                    for u in reverse.get(v, ()):
                        if u not in hops:
                            hops[u] = hops[v] + 1
                            nxt.append(u)
                frontier = nxt
            found = self._goal_entries[goal.name] = (frozenset(entries), hops)
        return found

    def bit(self, lane) -> int:
        """Single-bit mask for ``lane``; lane sets in the search are plain ints."""
        if self._bits is None:
            self._bits = {lid: 1 << i for i, lid in enumerate(sorted(self.scenario.lanes))}
        return self._bits[lane]

    def mask(self, lanes) -> int:
        out = 0
        for lid in lanes:
            out |= self.bit(lid)
        return out

    def _masks(self, goal: Poi) -> tuple[int, int, list[int], dict]:
        found = self._goal_masks.get(goal.name)
        if found is None:
            entries, hops = self._entries(goal)
            adjacent = self._lane_graph()
            adj = [0] * len(self.scenario.lanes)
            for lid, targets in adjacent.items():
                adj[self.bit(lid).bit_length() - 1] = self.mask(targets)
            # lanes after the first one on some fewest-hop route to an entry
            ahead: dict = {}
            for u in sorted(hops, key=hops.get):
                if hops[u] == 0:
                    ahead[u] = 0
                    continue
                v = min((v for v in adjacent[u] if hops.get(v) == hops[u] - 1), key=self.bit)
                ahead[u] = ahead[v] | self.bit(v)
            found = self._goal_masks[goal.name] = (self.mask(entries), self.mask(hops), adj, ahead)
        return found

    def can_reach(self, lane, goal: Poi, blocked) -> bool:
        """Lane-level test: can the goal lane still be entered without using a ``blocked`` lane?

        ``blocked`` is a lane collection or a bit mask. A relaxation
        (station geometry is ignored apart from merges that would land past
        the POI), so False is a proof of a dead end.
        """
        if lane == goal.lane:
            return True
        if not isinstance(blocked, int):
            blocked = self.mask(blocked)
        entries, useful, adj, ahead = self._masks(goal)
        route = ahead.get(lane)
        if route is not None and not route & blocked:
            return True
        allowed = useful & ~blocked
        reach = frontier = self.bit(lane)
        while frontier:
            if frontier & entries:
                return True
            nxt = 0
            while frontier:
                low = frontier & -frontier
                nxt |= adj[low.bit_length() - 1]
                frontier ^= low
            frontier = nxt & allowed & ~reach
            reach |= frontier
        return False

    def cost_to_go(self, goal: Poi, behavior_cost: float | None = None, avoid=None):
        """Exact remaining cost to park at ``goal``, ignoring lane revisits and the horizon.

        Distance when ``behavior_cost`` is None, otherwise a constant per
        behavior. Paths through lane ``avoid`` are not counted, which keeps
        the value a lower bound for any search that has already used that
        lane. A relaxation of the search problem, so it never
        overestimates and makes the best-first search consistent.
        """
        key = (goal.name, behavior_cost, avoid)
        table = self._cost_to_go.get(key)
        if table is None:
            table = self._cost_to_go[key] = self._solve(goal, behavior_cost, avoid)

        def h(pose: Pose) -> float:
            value = table.get(pose)
            if value is None:
                value = table[pose] = self._cost_from(pose, goal, behavior_cost, h, avoid)
            return value

        return h

    def _cost_from(self, pose: Pose, goal: Poi, behavior_cost: float | None, h, avoid) -> float:
        # poses off the precomputed graph only arise mid-lane; merges move strictly forward
        best = math.inf
        for b in self.candidates(pose.lane, goal.name):
            if pose.lane == goal.lane and b.kind != bh.PARK:
                continue
            if b.kind != bh.PARK and b.to_lane == avoid:
                continue
            outcome = self.step(pose, b)
            if outcome is None:
                continue
            w = outcome[0] if behavior_cost is None else behavior_cost
            best = min(best, w if b.kind == bh.PARK else w + h(outcome[1]))
        return best

    def _solve(self, goal: Poi, behavior_cost: float | None, avoid=None) -> dict[Pose, float]:
        reverse = self._pose_graph()
        dist: dict[Pose, float] = {}
        heap: list[tuple[float, int, Pose]] = []
        counter = itertools.count()
        park = bh.Behavior(bh.PARK, goal.lane, goal.lane, goal.name)
        for pose in [p for p in reverse if p.lane == goal.lane] + [Pose(goal.lane, 0.0)]:
            outcome = self.step(pose, park)
            if outcome is not None:
                heapq.heappush(heap, (outcome[0] if behavior_cost is None else behavior_cost, next(counter), pose))
        while heap:
            d, _, v = heapq.heappop(heap)
            if v in dist:
                continue
            dist[v] = d
            if v.lane == avoid:
                continue
            for u, length in reverse.get(v, ()):
                if u not in dist and u.lane != goal.lane:
                    heapq.heappush(heap, (d + (length if behavior_cost is None else behavior_cost), next(counter), u))
        for u in reverse:
            dist.setdefault(u, math.inf)
        return dist


class RankedPlan(NamedTuple):
    plan: BehaviorPlan
    cost: float


def enumerate_ranked(
    scenario: ScenarioMap,
    start: SymbolicState,
    goal: Poi | str,
    horizon: int = DEFAULT_HORIZON,
    k_max: int | None = DEFAULT_K_MAX,
    *,
    start_station: float = 0.0,
    cost_mode: str = "distance",
    behavior_cost: float = DEFAULT_BEHAVIOR_COST,
    memo: SearchMemo | None = None,
) -> list[RankedPlan]:
    """Acyclic plans ending in ``park`` at ``goal``, cheapest first.

    A plan counts only if it also realizes geometrically (no merge past a
    lane end, no park behind the vehicle). Best-first search over partial
    plans keyed by ``(cost + bound, plan)``; the bound is the exact
    cost-to-go on the pose graph with the acyclicity and horizon limits
    dropped, so it never overestimates. ``k_max=None`` returns every plan. Pass a ``memo`` to share geometry
    work between searches on the same map.
    """
    if horizon < 1:
        raise ValidationError("horizon must be at least 1")
    if k_max is not None and k_max < 1:
        raise ValidationError("k_max must be at least 1")
    if cost_mode not in ("distance", "constant"):
        raise ValidationError(f"unknown cost mode {cost_mode!r}")
    goal_poi = scenario.poi(goal) if isinstance(goal, str) else goal
    scenario.lane(start.lane)
    if start.parked_at is not None or goal_poi.lane not in scenario.reachable_lanes(start.lane):
        return []
    if memo is None or memo.scenario is not scenario:
        memo = SearchMemo(scenario)
    by_distance = cost_mode == "distance"
    # every partial plan has already used the start lane and may not return to it
    avoid = None if start.lane == goal_poi.lane else start.lane
    h_of = memo.cost_to_go(goal_poi, None if by_distance else behavior_cost, avoid)

    ahead = memo._masks(goal_poi)[3]

    def expansions(pose: Pose | None, lane) -> tuple:
        # (behavior, sort key, to_lane bit, is_park, length or None, end pose, bound at end pose,
        #  lanes that must stay free for the quick reachability test)
        key = (pose, lane, goal_poi.name, by_distance, behavior_cost, avoid)
        found = memo.expansions.get(key)
        if found is not None:
            return found
        rows = []
        for b in memo.candidates(lane, goal_poi.name):
            outcome = memo.step(pose, b) if pose is not None else None
            length, pose2 = outcome if outcome is not None else (None, None)
            h = h_of(pose2) if pose2 is not None and b.kind != bh.PARK else 0.0
            route = 0 if b.to_lane == goal_poi.lane else ahead.get(b.to_lane, -1)
            rows.append((b, b.sort_key, memo.bit(b.to_lane), b.kind == bh.PARK, length, pose2, h, route))
        found = memo.expansions[key] = tuple(rows)
        return found

    counter = itertools.count()
    start_pose = Pose(start.lane, start_station)
    h0 = h_of(start_pose)
    if h0 == math.inf:
        return []
    # heap entry: (f, plan sort key, tiebreak, g, steps, pose, lane, visited lane mask)
    heap = [(h0, (), next(counter), 0.0, (), start_pose, start.lane, memo.bit(start.lane))]
    done: list[tuple[float, tuple, tuple[Behavior, ...]]] = []
    cutoff = math.inf
    best_k: list[float] = []
    while heap:
        f, key, _, g, steps, pose, lane, visited = heapq.heappop(heap)
        if f > cutoff + _TIE_EPS:
            break
        # leaving the goal lane can never end in a park there without a revisit
        stuck = len(steps) + 1 >= horizon or lane == goal_poi.lane
        for b, skey, to_bit, is_park, length, pose2, h, route in expansions(pose, lane):
            if length is None or (not is_park and (stuck or to_bit & visited)):
                continue
            g2 = g + (length if by_distance else behavior_cost)
            if is_park:
                done.append((g2, key + (skey,), steps + (b,)))
                if k_max is not None:
                    # max-heap of the k cheapest completions
                    if len(best_k) < k_max:
                        heapq.heappush(best_k, -g2)
                    elif g2 < -best_k[0]:
                        heapq.heapreplace(best_k, -g2)
                    if len(best_k) == k_max:
                        cutoff = -best_k[0]
                continue
            f2 = g2 + h
            if f2 > cutoff + _TIE_EPS or h == math.inf:
                continue
            visited2 = visited | to_bit
            if cutoff == math.inf and route & visited2 and not memo.can_reach(b.to_lane, goal_poi, visited2):
                continue  # dead end: every way to the goal re-enters a visited lane
            heapq.heappush(heap, (f2, key + (skey,), next(counter), g2, steps + (b,), pose2, b.to_lane, visited2))
    done.sort(key=lambda d: (d[0], d[1]))
    if k_max is not None:
        done = done[:k_max]
    return [RankedPlan(BehaviorPlan(steps), g) for g, _, steps in done]


def enumerate_plans(
    scenario: ScenarioMap,
    start: SymbolicState,
    goal: Poi | str,
    horizon: int = DEFAULT_HORIZON,
    k_max: int | None = DEFAULT_K_MAX,
    **kwargs,
) -> list[BehaviorPlan]:
    return [r.plan for r in enumerate_ranked(scenario, start, goal, horizon, k_max, **kwargs)]
