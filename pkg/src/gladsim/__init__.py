"""Layered task-motion planning with safety-aware replanning."""

from .abstract_sim import TrafficCondition, WorldState
from .behavior_planner import enumerate_plans
from .behaviors import Behavior, BehaviorPlan, SymbolicState
from .errors import GladError
from .executive import PolicyConfig, run_trial
from .harness import ExperimentConfig, emit_report, run_experiment
from .lane_map import LaneId, Pose, ScenarioMap, load_scenario
from .motion_planner import cost, realize
from .plan_optimizer import PlanOptimizer, TaskMotionPlan, UtilityCoefficients, optimal_plan
from .safety_estimation import SafetyLevel, SensorEstimator, SensorModel
from .service_layer import Preference, ServiceRequest, load_service

__all__ = [
    "Behavior",
    "BehaviorPlan",
    "ExperimentConfig",
    "GladError",
    "LaneId",
    "PlanOptimizer",
    "PolicyConfig",
    "Pose",
    "Preference",
    "SafetyLevel",
    "ScenarioMap",
    "SensorEstimator",
    "SensorModel",
    "ServiceRequest",
    "SymbolicState",
    "TaskMotionPlan",
    "TrafficCondition",
    "UtilityCoefficients",
    "WorldState",
    "cost",
    "emit_report",
    "enumerate_plans",
    "load_scenario",
    "load_service",
    "optimal_plan",
    "realize",
    "run_experiment",
    "run_trial",
]
