import csv
import io
import json
import subprocess
import sys

import pytest

from conftest import single_road_doc
from gladsim.cli import EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK, build_parser, config_from_args, main


def test_plan_prints_sequence(capsys):
    assert main(["plan"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("sequence: gas_station_1 -> school -> grocery_1 -> home")


def test_run_log_and_events(capsys, tmp_path):
    assert main(["run", "--seed", "4"]) == EXIT_OK
    log = capsys.readouterr().out.splitlines()
    assert log[0] == "iter,action,mu,replanned,utility_so_far"
    assert log[-1].startswith("summary,")
    out = tmp_path / "ev.csv"
    assert main(["run", "--seed", "4", "--events", "--out", str(out)]) == EXIT_OK
    rows = list(csv.DictReader(io.StringIO(out.read_text(encoding="utf-8"))))
    assert rows and rows[-1]["behavior"].startswith("park(")


def test_run_is_reproducible(capsys, monkeypatch):
    main(["run", "--seed", "8"])
    a = capsys.readouterr().out
    monkeypatch.setenv("GLAD_SEED", "8")
    main(["run", "--seed", "1"])
    assert capsys.readouterr().out == a


def test_bench_csv(capsys):
    code = main(["bench", "--trials", "2", "--traffic", "heavy", "--policies", "GLAD,NoSafe", "--format", "csv"])
    assert code == EXIT_OK
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert rows[0][0] == "policy" and [r[0] for r in rows[1:]] == ["GLAD", "NoSafe"]


def test_sweep(capsys):
    assert main(["sweep", "--trials", "1", "--traffic", "heavy", "--policies", "GLAD", "--recalls", "0.6,0.9"]) == 0
    rows = list(csv.reader(io.StringIO(capsys.readouterr().out)))
    assert len(rows) == 3


def test_config_file_and_flag_override(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"trials_per_cell": 7, "traffic": "normal"}), encoding="utf-8")
    args = build_parser().parse_args(["bench", "--config", str(cfg_path), "--trials", "3"])
    cfg = config_from_args(args)
    assert cfg.trials_per_cell == 3 and cfg.traffic[0].name == "normal"


def test_bad_policy_list_is_config_error(capsys):
    assert main(["bench", "--policies", "Chaos"]) == EXIT_CONFIG
    assert "error:" in capsys.readouterr().err


def test_missing_scenario_is_config_error():
    assert main(["plan", "--scenario", "/nonexistent/map.json"]) == EXIT_CONFIG


def test_infeasible_request_exit_code(tmp_path):
    doc = single_road_doc(1, pois=[("home", "home", 0, 10.0)], start_station=50.0)
    doc["pois"].append({"name": "start", "category": "other", "lane": ["r0", 0], "station": 60.0})
    doc["start"]["station"] = 50.0
    doc["request"] = {"required": [["home"]], "terminal": None}
    path = tmp_path / "m.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["plan", "--scenario", str(path)]) == EXIT_INFEASIBLE


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "gladsim", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "plan" in res.stdout


def test_unknown_subcommand_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["fly"])
    assert exc.value.code == 2
