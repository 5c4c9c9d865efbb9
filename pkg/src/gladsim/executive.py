"""Execution loop: estimate the imminent behavior's safety, replan, execute or switch.

Also defines the three ablation baselines and execution-time scoring, where
every truly unsafe behavior costs a fixed 15000 penalty.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable

from . import behaviors as bh
from .abstract_sim import ExecutionEvent, WorldState
from .behaviors import Behavior
from .errors import NonTermination, ValidationError
from .lane_map import ScenarioMap
from .plan_optimizer import DEFAULT_COEFFS, PlanOptimizer, TaskMotionPlan, UtilityCoefficients
from .safety_estimation import EstimationContext, SafetyEstimator, SafetyLevel
from .service_layer import Preference, ServiceRequest, pref_cost

logger = logging.getLogger(__name__)

UNSAFE_PENALTY = -15000.0
POLICY_NAMES = ("GLAD", "NoSafe", "NoPref", "NoCost")


@dataclass(frozen=True)
class PolicyConfig:
    name: str
    use_safety: bool = True
    use_pref: bool = True
    cost_mode: str = "distance"
    constant_behavior_cost: float = 40.0

    def __post_init__(self) -> None:
        expected = {
            "GLAD": (True, True, "distance"),
            "NoSafe": (False, True, "distance"),
            "NoPref": (True, False, "distance"),
            "NoCost": (True, True, "constant_per_behavior"),
        }.get(self.name)
        if expected is None:
            raise ValidationError(f"unknown policy {self.name!r}")
        if (self.use_safety, self.use_pref, self.cost_mode) != expected:
            raise ValidationError(f"{self.name} requires use_safety, use_pref, cost_mode = {expected}")

    @classmethod
    def named(cls, name: str) -> PolicyConfig:
        return {
            "GLAD": cls("GLAD"),
            "NoSafe": cls("NoSafe", use_safety=False),
            "NoPref": cls("NoPref", use_pref=False),
            "NoCost": cls("NoCost", cost_mode="constant_per_behavior"),
        }[name]

    @property
    def optimizer_cost_mode(self) -> str:
        return "constant" if self.cost_mode == "constant_per_behavior" else "distance"


@dataclass
class ExecutionTrace:
    events: list[ExecutionEvent] = field(default_factory=list)
    visits: list[str] = field(default_factory=list)
    total_cost: float = 0.0
    pref_cost: float = 0.0
    unsafe_count: int = 0
    replans: int = 0
    exec_utility: float = 0.0
    log: list[str] = field(default_factory=list)

    @property
    def unsafe_penalty(self) -> float:
        return UNSAFE_PENALTY * self.unsafe_count

    def physical(self) -> tuple:
        """Everything that happened on the road, without estimator readings."""
        return (
            tuple((e.behavior, e.pose, e.truth_unsafe, e.distance) for e in self.events),
            tuple(self.visits), self.total_cost, self.pref_cost, self.unsafe_count, self.exec_utility,
        )


def exec_utility(total_cost: float, pref: float, unsafe_count: int, coeffs: UtilityCoefficients,
                 pref_coeff: float | None = None) -> float:
    """Execution-time utility; Pref is weighted by alpha1 unless ``pref_coeff`` is given."""
    w = coeffs.alpha1 if pref_coeff is None else pref_coeff
    return coeffs.alpha0 * total_cost + w * pref + UNSAFE_PENALTY * unsafe_count


def plan_equal(a: TaskMotionPlan, b: TaskMotionPlan) -> bool:
    """Symbolic equality: same remaining visits and same behaviors leg by leg."""
    return a.sequence.visits == b.sequence.visits and [p.steps for p in a.behavior_plans] == [
        p.steps for p in b.behavior_plans
    ]


def make_optimizer(scenario: ScenarioMap, policy: PolicyConfig, **kwargs) -> PlanOptimizer:
    return PlanOptimizer(
        scenario, cost_mode=policy.optimizer_cost_mode, behavior_cost=policy.constant_behavior_cost, **kwargs
    )


def run_trial(
    scenario: ScenarioMap,
    rqst: ServiceRequest,
    prefs: Iterable[Preference],
    policy: PolicyConfig,
    estimator: SafetyEstimator | None,
    world: WorldState,
    coeffs: UtilityCoefficients = DEFAULT_COEFFS,
    *,
    optimizer: PlanOptimizer | None = None,
    max_iterations: int | None = None,
    pref_coeff: float | None = None,
) -> ExecutionTrace:
    """Drive one service request to completion in ``world``.

    Each iteration takes the first behavior of the incumbent plan, estimates
    its safety (risky kinds only, and only for policies that use safety),
    recomputes the optimal plan from the current pose, and either executes
    the behavior (plans agree) or adopts the new plan. An estimate made at a
    pose is kept until the vehicle leaves it, so a switch cannot flip back
    on a fresh sample.
    """
    prefs = tuple(prefs)
    plan_prefs = prefs if policy.use_pref else ()
    if optimizer is None:
        optimizer = make_optimizer(scenario, policy)
    if max_iterations is None:
        max_iterations = 10 * optimizer.horizon

    trace = ExecutionTrace()
    overrides: dict[tuple, float] = {}
    remaining = rqst
    p_star = optimizer.optimal_plan(remaining, plan_prefs, world.pose, coeffs, overrides, trace.visits)
    utility_so_far = 0.0
    for iteration in range(max_iterations):
        if remaining.is_empty:
            break
        b = p_star.first_behavior
        pose = world.pose
        mu: SafetyLevel | None = None
        key = (pose.key(), b)
        if policy.use_safety and estimator is not None and b.kind in estimator.kinds:
            if key in overrides:
                mu = SafetyLevel(overrides[key])
            else:
                ctx = EstimationContext(pose, b, world.ground_truth(pose, b), world.rng)
                mu = estimator.estimate(ctx)
                overrides[key] = mu.mu
        p_new = optimizer.optimal_plan(remaining, plan_prefs, pose, coeffs, overrides, trace.visits)
        same = plan_equal(p_star, p_new)
        if same:
            event = world.execute_behavior(b, p_star.first_segment, mu)
            trace.events.append(event)
            trace.total_cost += event.distance
            trace.unsafe_count += event.truth_unsafe
            utility_so_far += coeffs.alpha0 * event.distance + (UNSAFE_PENALTY if event.truth_unsafe else 0.0)
            if b.kind == bh.PARK:
                trace.visits.append(b.target_poi)
                remaining = remaining.without(b.target_poi)
            if event.end_pose.key() != pose.key():
                overrides.clear()
            p_star = p_star.advance()
        else:
            p_star = p_new
            trace.replans += 1
        trace.log.append(
            f"{iteration},{b},{'' if mu is None else f'{mu.mu:.4f}'},{int(not same)},{utility_so_far:.3f}"
        )
    else:
        if not remaining.is_empty:
            raise NonTermination(f"request unfinished after {max_iterations} iterations")

    trace.pref_cost = pref_cost(scenario, trace.visits, prefs)
    trace.exec_utility = exec_utility(trace.total_cost, trace.pref_cost, trace.unsafe_count, coeffs, pref_coeff)
    trace.log.append(
        f"summary,cost={trace.total_cost:.3f},pref={trace.pref_cost:.1f},unsafe={trace.unsafe_count},"
        f"replans={trace.replans},utility={trace.exec_utility:.3f}"
    )
    return trace


def trace_log(trace: ExecutionTrace) -> str:
    return "\n".join(["iter,action,mu,replanned,utility_so_far", *trace.log])


def executed_behaviors(trace: ExecutionTrace) -> list[Behavior]:
    return [e.behavior for e in trace.events]
