import csv
import hashlib
import io
import math

import numpy as np
import pytest

from gladsim.abstract_sim import TrafficCondition, WorldState
from gladsim.errors import EmptyResults, ParseError, ValidationError
from gladsim.executive import PolicyConfig, run_trial
from gladsim.harness import (
    CellSummary,
    ExperimentConfig,
    SensorParams,
    bootstrap_ci,
    config_from_dict,
    emit_report,
    load_config,
    parse_traffic,
    Workspace,
    run_experiment,
    run_records,
    seed_from_env,
    summarize,
    sweep,
)
from gladsim.safety_estimation import SensorEstimator

CALM = (TrafficCondition("calm", 0.0),)


def _summary(policy="GLAD", traffic="heavy"):
    return CellSummary(policy, traffic, -100.0, 100.0, 0.0, 0.0, 1.0, 3)


def test_parse_traffic_forms():
    assert [t.lam for t in parse_traffic("normal,heavy")] == [0.05, 0.08]
    assert parse_traffic("heavy=0.2")[0].lam == 0.2
    assert parse_traffic([{"name": "x", "lambda": 0.3}])[0] == TrafficCondition("x", 0.3)


def test_config_validation():
    with pytest.raises(ValidationError):
        ExperimentConfig(trials_per_cell=0)
    with pytest.raises(ValidationError):
        ExperimentConfig(policies=("Chaos",))
    with pytest.raises(ValidationError):
        config_from_dict({"warp": 9})
    with pytest.raises(ValidationError):
        ExperimentConfig(pref_weight="alpha7")


def test_config_round_trip(tmp_path):
    cfg = ExperimentConfig(trials_per_cell=5, base_seed=9, traffic=parse_traffic("heavy=0.1"), k_max=None)
    path = tmp_path / "c.yaml"
    import yaml

    path.write_text(yaml.safe_dump(cfg.to_dict()), encoding="utf-8")
    assert load_config(path) == cfg


def test_bad_config_file(tmp_path):
    p = tmp_path / "c.yaml"
    p.write_text("- just\n- a list\n", encoding="utf-8")
    with pytest.raises(ParseError):
        load_config(p)


def test_seed_from_env(monkeypatch):
    monkeypatch.delenv("GLAD_SEED", raising=False)
    assert seed_from_env(4) == 4
    monkeypatch.setenv("GLAD_SEED", "17")
    assert seed_from_env(4) == 17
    monkeypatch.setenv("GLAD_SEED", "x")
    with pytest.raises(ValidationError):
        seed_from_env(4)


def test_pref_weight_readings():
    assert ExperimentConfig().pref_coeff == -1.0
    assert ExperimentConfig(pref_weight="alpha2").pref_coeff == -500.0


def test_no_hazard_cell_glad_equals_nosafe():
    cfg = ExperimentConfig(trials_per_cell=1, traffic=CALM, sensor=SensorParams(perfect=True))
    s = {x.policy: x for x in run_experiment(cfg)}
    assert all(math.isfinite(x.mean_utility) for x in s.values())
    assert s["GLAD"].mean_utility == s["NoSafe"].mean_utility


def test_records_are_paired_and_ordered():
    cfg = ExperimentConfig(trials_per_cell=3, traffic=parse_traffic("heavy"), policies=("GLAD", "NoSafe"))
    recs = run_records(cfg)
    assert [(r.policy, r.index) for r in recs] == [("GLAD", 0), ("GLAD", 1), ("GLAD", 2),
                                                   ("NoSafe", 0), ("NoSafe", 1), ("NoSafe", 2)]
    assert [r.seed for r in recs[:3]] == [r.seed for r in recs[3:]]


def test_rerun_reproduces_report_bit_exactly():
    cfg = ExperimentConfig(trials_per_cell=4, traffic=parse_traffic("heavy"), base_seed=21)

    def digest():
        return hashlib.sha256(emit_report(run_experiment(cfg), "csv").encode()).hexdigest()

    assert digest() == digest()


def test_hazard_worlds_are_shared_across_policies():
    cfg = ExperimentConfig(trials_per_cell=1, traffic=parse_traffic("heavy"))
    ws = Workspace.load(cfg)
    shared = 0
    for index in range(6):
        caches = []
        for name in ("GLAD", "NoSafe"):
            policy = PolicyConfig.named(name)
            world = WorldState(ws.scenario.start, cfg.base_seed + index, cfg.traffic[0], cfg.risky_kinds)
            estimator = SensorEstimator(cfg.sensor.model(), kinds=frozenset(cfg.risky_kinds))
            run_trial(ws.scenario, ws.rqst, ws.prefs, policy, estimator if policy.use_safety else None, world,
                      cfg.coefficients, optimizer=ws.optimizer(policy))
            caches.append(world.truth_cache)
        common = caches[0].keys() & caches[1].keys()
        assert all(caches[0][k] == caches[1][k] for k in common)
        shared += len(common)
    assert shared > 0


def test_parallel_matches_serial():
    base = dict(trials_per_cell=6, traffic=parse_traffic("heavy"), policies=("GLAD", "NoCost"))
    a = run_records(ExperimentConfig(**base))
    b = run_records(ExperimentConfig(**base, jobs=2))
    assert a == b


def test_summary_decomposition():
    cfg = ExperimentConfig(trials_per_cell=8, traffic=parse_traffic("heavy"))
    recs = run_records(cfg)
    for s in summarize(recs, cfg):
        rs = [r for r in recs if r.policy == s.policy]
        assert s.mean_utility == pytest.approx(np.mean([r.utility for r in rs]), abs=1e-9)
        assert s.mean_utility == pytest.approx(s.recombined(-1.0, -1.0), abs=1e-12)
        assert s.ci_low <= s.mean_utility <= s.ci_high or s.ci_low == s.ci_high


def test_bootstrap_ci_covers_normal_mean():
    rng = np.random.default_rng(0)
    x = rng.normal(10.0, 2.0, 4000)
    lo, hi = bootstrap_ci(x)
    half = 1.96 * 2.0 / math.sqrt(4000)
    assert lo < 10.0 < hi or abs(x.mean() - 10.0) > half
    assert hi - lo == pytest.approx(2 * half, rel=0.15)
    assert bootstrap_ci(np.array([3.0, 3.0])) == (3.0, 3.0)


def test_emit_report_csv_rows():
    text = emit_report([_summary()], "csv")
    rows = list(csv.reader(io.StringIO(text)))
    assert len(rows) == 2 and rows[0][0] == "policy"
    eight = [_summary(p, t) for t in ("normal", "heavy") for p in ("GLAD", "NoSafe", "NoPref", "NoCost")]
    assert len(emit_report(eight, "csv").strip().splitlines()) == 9
    assert len(emit_report(eight, "table").strip().splitlines()) == 10


def test_csv_parses_back_to_the_same_values():
    cfg = ExperimentConfig(trials_per_cell=3, traffic=parse_traffic("normal,heavy"), policies=("GLAD", "NoPref"))
    summaries = run_experiment(cfg)
    rows = list(csv.DictReader(io.StringIO(emit_report(summaries, "csv"))))
    assert len(rows) == len(summaries)
    for row, s in zip(rows, summaries):
        assert (row["policy"], row["traffic"], int(row["n"])) == (s.policy, s.traffic, s.n)
        assert float(row["mean_utility"]) == s.mean_utility
        assert float(row["std_utility"]) == s.std_utility
        assert float(row["mean_cost"]) == s.mean_cost
        assert float(row["mean_pref"]) == s.mean_pref
        assert float(row["mean_unsafe"]) == s.mean_unsafe_penalty


def test_emit_report_errors():
    with pytest.raises(EmptyResults):
        emit_report([], "csv")
    with pytest.raises(ValidationError):
        emit_report([_summary()], "xml")


def test_sweep_csv():
    cfg = ExperimentConfig(trials_per_cell=2, traffic=parse_traffic("heavy"), policies=("GLAD",))
    rows = list(csv.reader(io.StringIO(sweep(cfg, [0.5, 0.9], [0.84]))))
    assert rows[0][:3] == ["recall", "precision", "policy"]
    assert [r[0] for r in rows[1:]] == ["0.5", "0.9"]
