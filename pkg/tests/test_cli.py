import csv
import json

import pytest

from portfolio_recovery.cli import main
from portfolio_recovery.community import load_community
from portfolio_recovery.damage import catalog_to_dict, default_catalog
from portfolio_recovery.pipeline import CURVE_HEADER, GRID_HEADER

SMALL = {
    "seed": 3,
    "community": {"testbed": {"n_rows": 2, "n_cols": 2, "width_km": 2.0, "height_km": 2.0,
                              "n_buildings": 40, "total_population": 130}},
    "scenario": {"magnitude": 7.2, "epicentral_distance_km": 5.0},
    "outputs": "out",
}


def write(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def test_run_writes_documented_files(tmp_path, capsys):
    cfg = write(tmp_path, SMALL)
    assert main(["run", str(cfg)]) == 0
    out = tmp_path / "out"
    assert (out / "summary.json").is_file() and (out / "community.json").is_file()
    curve = rows(out / "rep_000" / "recovery_curve.csv")
    grid = rows(out / "rep_000" / "grid_timeline.csv")
    assert curve[0] == CURVE_HEADER and grid[0] == GRID_HEADER
    assert {r[0] for r in curve[1:]} == {"base", "rollout"}
    summary = json.loads((out / "summary.json").read_text())
    for p in ("base", "rollout"):
        rec = summary["replications"][0]["policies"][p]
        assert rec["invariant_violations"] == []
        assert rec["final_housed"] == summary["community"]["occupied_population"]
    assert "rollout:" in capsys.readouterr().out


def test_curves_monotone_and_checkpoints(tmp_path):
    cfg = write(tmp_path, {**SMALL, "checkpoints": [0, 15, 100]})
    assert main(["run", str(cfg), "--policy", "base"]) == 0
    curve = rows(tmp_path / "out" / "rep_000" / "recovery_curve.csv")[1:]
    days = [int(r[3]) for r in curve]
    totals = [int(r[4]) for r in curve]
    assert days == sorted(days)
    assert totals == sorted(totals)
    assert all(int(r[4]) == int(r[5]) + int(r[6]) + int(r[7]) for r in curve)
    kinds = {int(r[3]): r[1] for r in curve if r[1] == "checkpoint"}
    assert set(kinds) <= {15, 100}


def test_undamaged_scenario_single_row(tmp_path):
    data = {**SMALL, "scenario": {"magnitude": 4.5, "gmpe": {"c0": -30.0, "tau": 0.0, "phi": 0.0}}}
    assert main(["run", str(write(tmp_path, data))]) == 0
    curve = rows(tmp_path / "out" / "rep_000" / "recovery_curve.csv")[1:]
    assert len(curve) == 2  # one per policy
    for r in curve:
        assert r[3] == "0" and int(r[4]) == 130


def test_flags_override_config(tmp_path):
    cfg = write(tmp_path, SMALL)
    assert main(["run", str(cfg), "--seed", "9", "--out-dir", str(tmp_path / "o2"),
                 "--replications", "2", "--policy", "rollout"]) == 0
    summary = json.loads((tmp_path / "o2" / "summary.json").read_text())
    assert summary["master_seed"] == 9
    assert len(summary["replications"]) == 2
    assert set(summary["aggregate"]) == {"rollout"}


def test_repeat_run_byte_identical(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a")])
    main(["run", str(cfg), "--out-dir", str(tmp_path / "b")])
    for name in ("summary.json", "community.json", "rep_000/recovery_curve.csv",
                 "rep_000/grid_timeline.csv", "rep_000/realization.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_replay_reproduces_trace(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", str(cfg), "--out-dir", str(tmp_path / "a")])
    real = tmp_path / "a" / "rep_000" / "realization.json"
    assert main(["run", str(cfg), "--out-dir", str(tmp_path / "r"), "--replay", str(real)]) == 0
    for name in ("recovery_curve.csv", "grid_timeline.csv", "realization.json"):
        assert (tmp_path / "a" / "rep_000" / name).read_bytes() == (tmp_path / "r" / "rep_000" / name).read_bytes()


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, SMALL))]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_lists_every_violation(tmp_path, capsys):
    data = {**SMALL, "solver": {"gamma": 1.5}, "catalog": "missing.json", "replications": 0}
    assert main(["validate", str(write(tmp_path, data))]) == 1
    out = capsys.readouterr().out
    assert "gamma=1.5" in out and "< 1" in out
    assert "catalog" in out and "replications" in out


def test_validate_parse_error_location(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{"seed": 3,\n  "solver": {,}}')
    assert main(["validate", str(p)]) == 1
    assert "line 2" in capsys.readouterr().out


def test_run_error_names_stage(tmp_path, capsys):
    data = {**SMALL, "solver": {"gamma": 1.5}}
    assert main(["run", str(write(tmp_path, data))]) == 1
    assert "error [config]" in capsys.readouterr().err


def test_missing_archetype_fails_in_community_stage(tmp_path, capsys):
    cat = catalog_to_dict(default_catalog())
    (tmp_path / "cat.json").write_text(json.dumps(cat))
    data = {**SMALL, "catalog": "cat.json"}
    data["community"] = {"testbed": {**SMALL["community"]["testbed"], "archetype_weights": [1.0, 1.0]}}
    assert main(["run", str(write(tmp_path, data))]) == 1
    assert "error [community]" in capsys.readouterr().err


def test_unwritable_output_fails_in_output_stage(tmp_path, capsys):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    cfg = write(tmp_path, SMALL)
    assert main(["run", str(cfg), "--out-dir", str(blocker / "sub")]) == 1
    assert "error [" in capsys.readouterr().err


def test_generate_community(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "community.json"
    assert main(["generate-community", str(cfg), str(out)]) == 0
    m = load_community(out)
    assert m.n_buildings == 40 and m.total_population == 130


def test_run_from_community_file(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["generate-community", str(cfg), str(tmp_path / "c.json")])
    data = {**SMALL, "community": {"path": "c.json"}}
    assert main(["run", str(write(tmp_path, data, "cfg2.json")), "--out-dir", str(tmp_path / "x")]) == 0


def test_bad_policy_flag(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", str(write(tmp_path, SMALL)), "--policy", "oracle"])
