"""Cross-layer plan selection: POI sequences x behavior plans x trajectories.

Candidates are scored with the expected utility

    alpha0 * Cost(p) + alpha1 * Pref(p) + alpha2 * Safe(p)

where Safe(p) sums the safety level of every behavior (0.0 unless an
estimate exists for that behavior at that pose). Because Cost and Safe are
additive over legs and Pref depends only on the visit order, the argmax is
found per leg within each sequence instead of over the full product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .behavior_planner import DEFAULT_BEHAVIOR_COST, DEFAULT_HORIZON, DEFAULT_K_MAX, SearchMemo, enumerate_ranked
from .behaviors import Behavior, BehaviorPlan, SymbolicState
from .errors import InfeasibleRequest, ValidationError
from .lane_map import Pose, ScenarioMap
from .motion_planner import NOMINAL_SPEED, Trajectory, realize
from .service_layer import PoiSequence, Preference, ServiceRequest, enumerate_sequences, pref_cost

COST_MODES = ("distance", "time", "constant")
_ROUND = 6

OverrideKey = tuple[tuple, Behavior]


@dataclass(frozen=True)
class UtilityCoefficients:
    alpha0: float = -1.0
    alpha1: float = -1.0
    alpha2: float = 500.0

    def __post_init__(self) -> None:
        # zero is tolerated so single terms can be switched off in experiments
        if self.alpha0 > 0 or self.alpha1 > 0 or self.alpha2 < 0:
            raise ValidationError("alpha0 and alpha1 must be negative and alpha2 positive")


DEFAULT_COEFFS = UtilityCoefficients()


@dataclass(frozen=True)
class LegOption:
    plan: BehaviorPlan
    cost: float
    distance: float
    step_costs: tuple[float, ...]
    keys: tuple[OverrideKey, ...]
    trajectory: Trajectory
    sort_key: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self) -> None:
        if not self.sort_key:
            object.__setattr__(self, "sort_key", self.plan.sort_key)


@dataclass(frozen=True)
class TaskMotionPlan:
    sequence: PoiSequence
    behavior_plans: tuple[BehaviorPlan, ...]
    trajectories: tuple[Trajectory, ...]
    cost: float
    pref: float
    safe: float
    utility: float
    distance: float = 0.0
    step_costs: tuple[tuple[float, ...], ...] = field(default=(), repr=False, compare=False)
    coeffs: UtilityCoefficients = field(default=DEFAULT_COEFFS, repr=False, compare=False)

    @property
    def behaviors(self) -> list[Behavior]:
        return [b for p in self.behavior_plans for b in p.steps]

    @property
    def first_behavior(self) -> Behavior | None:
        for p in self.behavior_plans:
            if p.steps:
                return p.steps[0]
        return None

    @property
    def first_segment(self):
        return self.trajectories[0].segments[0]

    @property
    def sort_key(self) -> tuple:
        return (self.sequence.visits, tuple(p.sort_key for p in self.behavior_plans))

    def advance(self) -> TaskMotionPlan:
        """The plan left after executing its first behavior."""
        lead, traj, costs = self.behavior_plans[0], self.trajectories[0], self.step_costs[0]
        plans, trajs, step_costs = list(self.behavior_plans), list(self.trajectories), list(self.step_costs)
        visits = self.sequence.visits
        if len(lead.steps) == 1:
            del plans[0], trajs[0], step_costs[0]
            visits = visits[1:]
        else:
            plans[0] = BehaviorPlan(lead.steps[1:], lead.mu[1:])
            trajs[0] = Trajectory.from_segments(traj.segments[1:])
            step_costs[0] = costs[1:]
        cost = sum(c for leg in step_costs for c in leg)
        safe = sum(m for p in plans for m in p.mu)
        return TaskMotionPlan(
            PoiSequence(visits), tuple(plans), tuple(trajs), cost, self.pref, safe,
            utility_of(cost, self.pref, safe, self.coeffs), sum(t.total_length for t in trajs),
            tuple(step_costs), self.coeffs,
        )


def utility_of(cost: float, pref: float, safe: float, coeffs: UtilityCoefficients) -> float:
    return coeffs.alpha0 * cost + coeffs.alpha1 * pref + coeffs.alpha2 * safe


def utility(plan: TaskMotionPlan, coeffs: UtilityCoefficients = DEFAULT_COEFFS) -> float:
    return utility_of(plan.cost, plan.pref, plan.safe, coeffs)


def normalize_overrides(overrides: Mapping | None) -> dict[OverrideKey, float]:
    """Accept keys as (Pose, Behavior) or (pose key, Behavior); values as floats or SafetyLevel."""
    out: dict[OverrideKey, float] = {}
    for (pose, b), mu in (overrides or {}).items():
        key = pose.key() if isinstance(pose, Pose) else pose
        out[(key, b)] = float(getattr(mu, "mu", mu))
    return out


class PlanOptimizer:
    """Selects the utility-maximizing task-motion plan, caching per-leg candidates.

    Leg candidate sets depend only on the leg's start pose and goal, so they
    are computed once per optimizer and reused across replanning calls.
    """

    def __init__(
        self,
        scenario: ScenarioMap,
        *,
        horizon: int = DEFAULT_HORIZON,
        k_max: int | None = DEFAULT_K_MAX,
        cost_mode: str = "distance",
        behavior_cost: float = DEFAULT_BEHAVIOR_COST,
    ) -> None:
        if cost_mode not in COST_MODES:
            raise ValidationError(f"unknown cost mode {cost_mode!r}")
        self.scenario = scenario
        self.horizon = horizon
        self.k_max = k_max
        self.cost_mode = cost_mode
        self.behavior_cost = behavior_cost
        self._legs: dict[tuple, tuple[LegOption, ...]] = {}
        self._leg_keys: dict[tuple, dict[OverrideKey, tuple[int, ...]]] = {}
        self._base_best: dict[tuple, list[int]] = {}
        self._tables: dict[tuple, list[tuple]] = {}
        self._sequences: dict[ServiceRequest, list[PoiSequence]] = {}
        self._prefs: dict[tuple, float] = {}
        self._memo = SearchMemo(scenario)

    def _step_cost(self, length: float) -> float:
        if self.cost_mode == "distance":
            return length
        if self.cost_mode == "time":
            return length / NOMINAL_SPEED
        return self.behavior_cost

    def leg_options(self, pose: Pose, goal: str) -> tuple[LegOption, ...]:
        cache_key = (pose.key(), goal)
        opts = self._legs.get(cache_key)
        if opts is not None:
            return opts
        ranked = enumerate_ranked(
            self.scenario,
            SymbolicState(pose.lane),
            goal,
            self.horizon,
            self.k_max,
            start_station=pose.station,
            cost_mode="constant" if self.cost_mode == "constant" else "distance",
            behavior_cost=self.behavior_cost,
            memo=self._memo,
        )
        built = []
        for r in ranked:
            traj = realize(self.scenario, pose, r.plan)
            step_costs = tuple(self._step_cost(s.length) for s in traj.segments)
            keys = tuple((s.start_pose.key(), b) for s, b in zip(traj.segments, r.plan.steps))
            built.append(LegOption(r.plan, sum(step_costs), traj.total_length, step_costs, keys, traj))
        opts = tuple(built)
        self._legs[cache_key] = opts
        by_key: dict[OverrideKey, list[int]] = {}
        for i, o in enumerate(opts):
            for k in o.keys:
                by_key.setdefault(k, []).append(i)
        self._leg_keys[cache_key] = {k: tuple(v) for k, v in by_key.items()}
        return opts

    @staticmethod
    def _leg_rank(score: float, opt: LegOption) -> tuple:
        return (-round(score, _ROUND), round(opt.cost, _ROUND), opt.sort_key)

    def _ordered(self, cache_key: tuple, alpha0: float) -> list[int]:
        """Option indices from best to worst when no estimate applies."""
        order = self._base_best.get((cache_key, alpha0))
        if order is None:
            opts = self._legs[cache_key]
            order = sorted(range(len(opts)), key=lambda i: self._leg_rank(alpha0 * opts[i].cost, opts[i]))
            self._base_best[(cache_key, alpha0)] = order
        return order

    def best_leg(
        self, pose: Pose, goal: str, coeffs: UtilityCoefficients, overrides: Mapping[OverrideKey, float]
    ) -> tuple[LegOption, float] | None:
        """Best leg option and its Safe term under ``overrides``."""
        return self._best_leg((pose.key(), goal), pose, goal, coeffs, overrides)

    def _best_leg(self, cache_key, pose, goal, coeffs, overrides):
        opts = self._legs.get(cache_key)
        if opts is None:
            opts = self.leg_options(pose, goal)
        order = self._ordered(cache_key, coeffs.alpha0)
        if not order:
            return None
        safe: dict[int, float] = {}
        if overrides:
            index = self._leg_keys[cache_key]
            for k, mu in overrides.items():
                for i in index.get(k, ()):
                    safe[i] = safe.get(i, 0.0) + mu
        if not safe:
            return opts[order[0]], 0.0
        # untouched options keep their base order; only the first can win
        best = next((i for i in order if i not in safe), None)
        best_rank = None if best is None else self._leg_rank(coeffs.alpha0 * opts[best].cost, opts[best])
        best_safe = 0.0
        for i, s in safe.items():
            rank = self._leg_rank(coeffs.alpha0 * opts[i].cost + coeffs.alpha2 * s, opts[i])
            if best_rank is None or rank < best_rank:
                best, best_rank, best_safe = i, rank, s
        return opts[best], best_safe

    def sequences(self, rqst: ServiceRequest) -> list[PoiSequence]:
        seqs = self._sequences.get(rqst)
        if seqs is None:
            seqs = self._sequences[rqst] = enumerate_sequences(self.scenario, rqst)
        return seqs

    def _pref(self, visits: tuple[str, ...], prefs: tuple[Preference, ...]) -> float:
        key = (visits, prefs)
        val = self._prefs.get(key)
        if val is None:
            val = self._prefs[key] = pref_cost(self.scenario, visits, prefs)
        return val

    def _base_table(self, rqst, prefs, start: Pose, coeffs, visited) -> list[tuple]:
        """Per sequence: leg keys, base legs, pref and the override keys it can touch."""
        state = (rqst, prefs, start.key(), coeffs, visited)
        table = self._tables.get(state)
        if table is not None:
            return table
        table = []
        for seq in self.sequences(rqst):
            pose, leg_keys, legs = start, [], []
            for name in seq.visits:
                ck = (pose.key(), name)
                found = self._best_leg(ck, pose, name, coeffs, None)
                if found is None:
                    break
                leg_keys.append((ck, pose, name))
                legs.append(found)
                poi = self.scenario.pois[name]
                pose = Pose(poi.lane, poi.station)
            else:
                touch = frozenset(k for ck, _, _ in leg_keys for k in self._leg_keys[ck])
                table.append((seq, tuple(leg_keys), tuple(legs), self._pref(visited + seq.visits, prefs), touch))
        self._tables[state] = table
        return table

    def optimal_plan(
        self,
        rqst: ServiceRequest,
        prefs: Iterable[Preference],
        start: Pose,
        coeffs: UtilityCoefficients = DEFAULT_COEFFS,
        mu_overrides: Mapping | None = None,
        visited: Iterable[str] = (),
    ) -> TaskMotionPlan:
        """Argmax of the expected utility from ``start``.

        ``visited`` lists POIs already served; preferences are scored over
        the visited prefix followed by each candidate sequence.
        """
        overrides = normalize_overrides(mu_overrides)
        prefs = tuple(prefs)
        visited = tuple(visited)
        best_rank, best = None, None
        rescored: dict[tuple, tuple] = {}
        for seq, leg_keys, legs, pref, touch in self._base_table(rqst, prefs, start, coeffs, visited):
            if overrides and not touch.isdisjoint(overrides):
                legs = list(legs)
                for j, (ck, pose, name) in enumerate(leg_keys):
                    index = self._leg_keys[ck]
                    if any(k in index for k in overrides):
                        if ck not in rescored:
                            rescored[ck] = self._best_leg(ck, pose, name, coeffs, overrides)
                        legs[j] = rescored[ck]
            cost = sum(o.cost for o, _ in legs)
            safe = sum(s for _, s in legs)
            u = utility_of(cost, pref, safe, coeffs)
            rank = (-round(u, _ROUND), round(cost, _ROUND), (seq.visits, tuple(o.sort_key for o, _ in legs)))
            if best_rank is None or rank < best_rank:
                best_rank, best = rank, (seq, legs, cost, safe, pref, u)
        if best is None:
            raise InfeasibleRequest("no visit sequence has a realizable chain of legs")
        seq, legs, cost, safe, pref, u = best
        plans = tuple(
            o.plan.with_mu(tuple(overrides.get(k, 0.0) for k in o.keys)) if s else o.plan for o, s in legs
        )
        return TaskMotionPlan(
            sequence=seq,
            behavior_plans=plans,
            trajectories=tuple(o.trajectory for o, _ in legs),
            cost=cost,
            pref=pref,
            safe=safe,
            utility=u,
            distance=sum(o.distance for o, _ in legs),
            step_costs=tuple(o.step_costs for o, _ in legs),
            coeffs=coeffs,
        )

    def realized_trajectories(self) -> list[tuple[Pose, Trajectory]]:
        """Every trajectory realized so far (for invariant checks)."""
        out = []
        for opts in self._legs.values():
            for o in opts:
                out.append((o.trajectory.segments[0].start_pose, o.trajectory))
        return out


def optimal_plan(
    scenario: ScenarioMap,
    rqst: ServiceRequest,
    prefs: Iterable[Preference],
    mu_overrides: Mapping | None,
    start: Pose,
    coeffs: UtilityCoefficients = DEFAULT_COEFFS,
    **optimizer_kwargs,
) -> TaskMotionPlan:
    return PlanOptimizer(scenario, **optimizer_kwargs).optimal_plan(rqst, prefs, start, coeffs, mu_overrides)


def format_plan(plan: TaskMotionPlan) -> str:
    """Structured text report of a selected plan."""
    lines = [f"sequence: {' -> '.join(plan.sequence.visits)}"]
    for name, bp, traj in zip(plan.sequence.visits, plan.behavior_plans, plan.trajectories):
        lines.append(f"leg to {name}: cost {traj.total_length:.2f} m")
        for b, mu in zip(bp.steps, bp.mu):
            lines.append(f"  {b}" + (f"  mu={mu:.3f}" if mu else ""))
    lines.append(
        f"utility {plan.utility:.3f} = cost {plan.cost:.3f}, pref {plan.pref:.1f}, safe {plan.safe:.3f}"
    )
    return "\n".join(lines)
