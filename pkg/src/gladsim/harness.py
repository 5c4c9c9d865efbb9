"""Batch experiments: paired-seed trials per (policy, traffic) cell and their summaries."""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
import yaml
from scipy import stats

from .abstract_sim import TrafficCondition, WorldState
from .behavior_planner import DEFAULT_HORIZON, DEFAULT_K_MAX
from .behaviors import KINDS, MERGE_KINDS
from .errors import EmptyResults, ParseError, ValidationError
from .executive import POLICY_NAMES, UNSAFE_PENALTY, PolicyConfig, make_optimizer, run_trial
from .lane_map import ScenarioMap, load_scenario
from .plan_optimizer import PlanOptimizer, UtilityCoefficients
from .safety_estimation import SensorEstimator, SensorModel
from .service_layer import Preference, ServiceRequest, load_service

CSV_COLUMNS = ("policy", "traffic", "n", "mean_utility", "std_utility", "mean_cost", "mean_pref", "mean_unsafe")
SEED_ENV = "GLAD_SEED"


@dataclass(frozen=True)
class SensorParams:
    recall: float = 0.85
    precision: float = 0.84
    base_rate: float = 0.465
    histogram: str | None = None
    perfect: bool = False  # error-free and certain; overrides the rates above

    def model(self) -> SensorModel:
        if self.perfect:
            return SensorModel.perfect()
        m = SensorModel(self.recall, self.precision, self.base_rate)
        return m.with_histogram(self.histogram) if self.histogram else m


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "urban_grid"
    policies: tuple[str, ...] = POLICY_NAMES
    traffic: tuple[TrafficCondition, ...] = (TrafficCondition.named("normal"), TrafficCondition.named("heavy"))
    trials_per_cell: int = 6400
    base_seed: int = 0
    sensor: SensorParams = SensorParams()
    coefficients: UtilityCoefficients = UtilityCoefficients()
    horizon: int = DEFAULT_HORIZON
    k_max: int | None = DEFAULT_K_MAX
    risky_kinds: frozenset[str] = MERGE_KINDS
    pref_weight: str = "alpha1"  # which coefficient scores Pref at execution time
    jobs: int = 1

    def __post_init__(self) -> None:
        if self.trials_per_cell < 1:
            raise ValidationError("trials_per_cell must be at least 1")
        if self.jobs < 1:
            raise ValidationError("jobs must be at least 1")
        for p in self.policies:
            if p not in POLICY_NAMES:
                raise ValidationError(f"unknown policy {p!r}; choose from {', '.join(POLICY_NAMES)}")
        if not self.policies or not self.traffic:
            raise ValidationError("at least one policy and one traffic condition are required")
        if self.pref_weight not in ("alpha1", "alpha2"):
            raise ValidationError("pref_weight must be alpha1 or alpha2")
        if not set(self.risky_kinds) <= set(KINDS):
            raise ValidationError(f"unknown behavior kinds in {sorted(self.risky_kinds)}")

    @property
    def pref_coeff(self) -> float:
        c = self.coefficients
        # the alpha2 reading keeps the penalty sign: Pref counts against utility
        return c.alpha1 if self.pref_weight == "alpha1" else -c.alpha2

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario,
            "policies": list(self.policies),
            "traffic": [{"name": t.name, "lambda": t.lam} for t in self.traffic],
            "trials_per_cell": self.trials_per_cell,
            "base_seed": self.base_seed,
            "sensor": asdict(self.sensor),
            "coefficients": asdict(self.coefficients),
            "horizon": self.horizon,
            "k_max": self.k_max,
            "risky_kinds": sorted(self.risky_kinds),
            "pref_weight": self.pref_weight,
            "jobs": self.jobs,
        }


def parse_traffic(spec: str | Iterable[Any]) -> tuple[TrafficCondition, ...]:
    """``"normal,heavy"``, ``"heavy=0.1"``, or a list of names / {name, lambda} objects."""
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = []
    for item in items:
        if isinstance(item, Mapping):
            lam = item.get("lambda", item.get("lam"))
            out.append(TrafficCondition.named(str(item["name"]), None if lam is None else float(lam)))
            continue
        name, _, lam = str(item).strip().partition("=")
        out.append(TrafficCondition.named(name, float(lam) if lam else None))
    return tuple(out)


def config_from_dict(data: Mapping[str, Any], base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    known = {f for f in ExperimentConfig.__dataclass_fields__}
    unknown = set(data) - known
    if unknown:
        raise ValidationError(f"unknown config keys: {sorted(unknown)}")
    updates: dict[str, Any] = {}
    try:
        for key, value in data.items():
            if key == "policies":
                updates[key] = tuple(value.split(",") if isinstance(value, str) else value)
            elif key == "traffic":
                updates[key] = parse_traffic(value)
            elif key == "sensor":
                updates[key] = SensorParams(**value)
            elif key == "coefficients":
                updates[key] = UtilityCoefficients(**value)
            elif key == "risky_kinds":
                updates[key] = frozenset(KINDS if value == "all" else value)
            elif key in ("trials_per_cell", "base_seed", "horizon", "jobs"):
                updates[key] = int(value)
            elif key == "k_max":
                updates[key] = None if value is None else int(value)
            else:
                updates[key] = value
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"bad config value: {exc}") from None
    return replace(cfg, **updates)


def load_config(path: str | Path) -> ExperimentConfig:
    """Read a YAML or JSON experiment config."""
    try:
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a mapping")
    return config_from_dict(data)


def seed_from_env(default: int) -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


@dataclass(frozen=True)
class TrialRecord:
    policy: str
    traffic: str
    index: int
    seed: int
    cost: float
    pref: float
    unsafe: int
    utility: float
    replans: int
    estimator_calls: int


@dataclass(frozen=True)
class CellSummary:
    policy: str
    traffic: str
    mean_utility: float
    mean_cost: float
    mean_pref: float
    mean_unsafe_penalty: float
    std_utility: float
    n: int
    ci_low: float = math.nan
    ci_high: float = math.nan
    mean_unsafe_count: float = 0.0

    def recombined(self, alpha0: float, pref_coeff: float) -> float:
        return alpha0 * self.mean_cost + pref_coeff * self.mean_pref + self.mean_unsafe_penalty


@dataclass
class Workspace:
    """Scenario, request and one optimizer per planning cost mode, reused across trials."""

    scenario: ScenarioMap
    rqst: ServiceRequest
    prefs: list[Preference]
    horizon: int
    k_max: int | None
    optimizers: dict[str, PlanOptimizer] = field(default_factory=dict)

    @classmethod
    def load(cls, cfg: ExperimentConfig) -> Workspace:
        scenario = load_scenario(cfg.scenario)
        rqst, prefs = load_service(cfg.scenario)
        return cls(scenario, rqst, prefs, cfg.horizon, cfg.k_max)

    def optimizer(self, policy: PolicyConfig) -> PlanOptimizer:
        mode = policy.optimizer_cost_mode
        if mode not in self.optimizers:
            self.optimizers[mode] = make_optimizer(self.scenario, policy, horizon=self.horizon, k_max=self.k_max)
        return self.optimizers[mode]


def run_one(ws: Workspace, cfg: ExperimentConfig, policy_name: str, traffic: TrafficCondition, index: int):
    """One paired-seed trial; returns the record and its trace."""
    policy = PolicyConfig.named(policy_name)
    seed = cfg.base_seed + index
    world = WorldState(ws.scenario.start, seed, traffic, cfg.risky_kinds)
    estimator = SensorEstimator(cfg.sensor.model(), kinds=frozenset(cfg.risky_kinds))
    trace = run_trial(
        ws.scenario, ws.rqst, ws.prefs, policy, estimator if policy.use_safety else None, world,
        cfg.coefficients, optimizer=ws.optimizer(policy), pref_coeff=cfg.pref_coeff,
    )
    record = TrialRecord(
        policy_name, traffic.name, index, seed, trace.total_cost, trace.pref_cost, trace.unsafe_count,
        trace.exec_utility, trace.replans, estimator.calls,
    )
    return record, trace


_WORKER: dict[str, Workspace] = {}


def _run_chunk(cfg: ExperimentConfig, policy: str, traffic: TrafficCondition, indices: Sequence[int]):
    key = json.dumps(cfg.to_dict(), sort_keys=True)
    ws = _WORKER.get(key)
    if ws is None:
        ws = _WORKER[key] = Workspace.load(cfg)
    return [run_one(ws, cfg, policy, traffic, i)[0] for i in indices]


def run_records(cfg: ExperimentConfig, workspace: Workspace | None = None) -> list[TrialRecord]:
    """Per-trial records for every cell, sorted by (policy, traffic, index)."""
    records: list[TrialRecord] = []
    cells = [(p, t) for t in cfg.traffic for p in cfg.policies]
    if cfg.jobs == 1:
        ws = workspace or Workspace.load(cfg)
        for p, t in cells:
            records.extend(run_one(ws, cfg, p, t, i)[0] for i in range(cfg.trials_per_cell))
    else:
        chunk = max(1, math.ceil(cfg.trials_per_cell / cfg.jobs))
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            futures = [
                pool.submit(_run_chunk, cfg, p, t, range(lo, min(lo + chunk, cfg.trials_per_cell)))
                for p, t in cells
                for lo in range(0, cfg.trials_per_cell, chunk)
            ]
            for fut in futures:
                records.extend(fut.result())
    order = {p: i for i, p in enumerate(cfg.policies)}
    torder = {t.name: i for i, t in enumerate(cfg.traffic)}
    records.sort(key=lambda r: (torder[r.traffic], order[r.policy], r.index))
    return records


def bootstrap_ci(values: np.ndarray, confidence: float = 0.95, n_resamples: int = 2000, seed: int = 0):
    """Percentile bootstrap interval for the mean."""
    if len(values) < 2 or np.all(values == values[0]):
        m = float(np.mean(values))
        return m, m
    res = stats.bootstrap(
        (values,), np.mean, confidence_level=confidence, n_resamples=n_resamples, method="percentile",
        random_state=np.random.default_rng(seed),
    )
    return float(res.confidence_interval.low), float(res.confidence_interval.high)


def summarize(records: Sequence[TrialRecord], cfg: ExperimentConfig, with_ci: bool = True) -> list[CellSummary]:
    groups: dict[tuple[str, str], list[TrialRecord]] = {}
    for r in records:
        groups.setdefault((r.policy, r.traffic), []).append(r)
    out = []
    for (policy, traffic), rs in groups.items():
        rs = sorted(rs, key=lambda r: r.index)
        n = len(rs)
        util = np.array([r.utility for r in rs])
        mean_cost = math.fsum(r.cost for r in rs) / n
        mean_pref = math.fsum(r.pref for r in rs) / n
        mean_pen = UNSAFE_PENALTY * sum(r.unsafe for r in rs) / n + 0.0  # no -0.0 in reports
        # recombine from components so the decomposition holds exactly
        mean_util = cfg.coefficients.alpha0 * mean_cost + cfg.pref_coeff * mean_pref + mean_pen
        lo, hi = bootstrap_ci(util, seed=cfg.base_seed) if with_ci else (math.nan, math.nan)
        out.append(
            CellSummary(
                policy, traffic, mean_util, mean_cost, mean_pref, mean_pen,
                float(np.std(util, ddof=1)) if n > 1 else 0.0, n, lo, hi, sum(r.unsafe for r in rs) / n,
            )
        )
    return out


def run_experiment(cfg: ExperimentConfig, workspace: Workspace | None = None) -> list[CellSummary]:
    return summarize(run_records(cfg, workspace), cfg)


def emit_report(summaries: Sequence[CellSummary], format: str = "table") -> str:
    if not summaries:
        raise EmptyResults("no summaries to report")
    rows = [
        [s.policy, s.traffic, str(s.n), repr(s.mean_utility), repr(s.std_utility), repr(s.mean_cost),
         repr(s.mean_pref), repr(s.mean_unsafe_penalty)]
        for s in summaries
    ]
    if format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        writer.writerows(rows)
        return buf.getvalue()
    if format != "table":
        raise ValidationError(f"unknown report format {format!r}")
    header = ["policy", "traffic", "n", "utility", "std", "cost", "pref", "unsafe", "95% CI"]
    body = [
        [s.policy, s.traffic, str(s.n), f"{s.mean_utility:.1f}", f"{s.std_utility:.1f}", f"{s.mean_cost:.1f}",
         f"{s.mean_pref:.1f}", f"{s.mean_unsafe_penalty:.1f}",
         "" if math.isnan(s.ci_low) else f"[{s.ci_low:.1f}, {s.ci_high:.1f}]"]
        for s in summaries
    ]
    widths = [max(len(r[i]) for r in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(r, widths)))
             for r in [header, *body]]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"


def sweep(cfg: ExperimentConfig, recalls: Sequence[float], precisions: Sequence[float]) -> str:
    """Utility as a function of estimator quality, as plot-ready CSV."""
    ws = Workspace.load(cfg)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("recall", "precision", *CSV_COLUMNS))
    for r in recalls:
        for p in precisions:
            c = replace(cfg, sensor=replace(cfg.sensor, recall=r, precision=p))
            for s in summarize(run_records(c, ws if c.jobs == 1 else None), c, with_ci=False):
                writer.writerow([r, p, s.policy, s.traffic, s.n, repr(s.mean_utility), repr(s.std_utility),
                                 repr(s.mean_cost), repr(s.mean_pref), repr(s.mean_unsafe_penalty)])
    return buf.getvalue()
