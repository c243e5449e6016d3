"""Scenario schema, CLI commands, output file contracts."""

import json
import re
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from nhidapbc import cli, models, scenario
from nhidapbc.errors import ScenarioError
from nhidapbc.scenario import load_scenario, parse_scenario


def write_scenario(tmp_path, doc, name="case.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc), encoding="utf-8")
    return path


def quick_scenario(t_final=5.0, dt=1e-3):
    """Diff drive starting next to its goal: converges in well under a second."""
    return {
        "integrator": {"dt": dt, "t_final": t_final, "log_every": 5},
        "agents": [
            {"id": "robot", "kind": "diff_drive",
             "params": {"mass": 2.0, "inertia": 0.2},
             "q0": [0.95, 1.0, 0.0],
             "goal": {"s_star": [1.0, 1.0], "r_star": "free"},
             "controller": {"q_s": 4.0, "q_r": 1.0, "k_v": [6.0, 2.0]}},
        ],
    }


class TestLoadScenario:
    def test_shipped_scenario1(self, scenario_dir):
        spec = load_scenario(scenario_dir / "scenario1.json")
        assert len(spec.agents) == 1
        agent = spec.agents[0]
        assert agent.kind == "diff_drive"
        np.testing.assert_allclose(agent.q0, [1.0, 1.0, 0.0])
        np.testing.assert_allclose(agent.goal["s_star"], [4.0, 4.0])
        assert agent.goal["r_star"] is None
        assert spec.integrator.dt == 1e-3

    def test_shipped_consensus4(self, scenario_dir):
        spec = load_scenario(scenario_dir / "consensus4.json")
        assert len(spec.agents) == 4
        assert len(spec.edges) == 6  # pairwise-connected

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "nope.json")

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"agents": [,]}', encoding="utf-8")
        with pytest.raises(ScenarioError, match="line"):
            load_scenario(path)

    def test_empty_agents_rejected(self):
        with pytest.raises(ScenarioError, match="agents"):
            parse_scenario({"agents": []})

    def test_unknown_edge_id_named(self):
        doc = quick_scenario()
        doc["edges"] = [{"i": "robot", "j": "ghost", "weight": 1.0}]
        with pytest.raises(ScenarioError, match=r"edges\[0\].j"):
            parse_scenario(doc)

    def test_duplicate_ids(self):
        doc = quick_scenario()
        doc["agents"].append(dict(doc["agents"][0]))
        with pytest.raises(ScenarioError, match="duplicate"):
            parse_scenario(doc)

    def test_zero_dt_rejected(self):
        doc = quick_scenario()
        doc["integrator"]["dt"] = 0.0
        with pytest.raises(ScenarioError, match="integrator.dt"):
            parse_scenario(doc)

    def test_wrong_q0_length_field_path(self):
        doc = quick_scenario()
        doc["agents"][0]["q0"] = [1.0, 2.0]
        with pytest.raises(ScenarioError, match=r"agents\[0\].q0"):
            parse_scenario(doc)

    def test_r_star_requires_s_star(self):
        doc = quick_scenario()
        doc["agents"][0]["goal"] = {"r_star": 0.5}
        with pytest.raises(ScenarioError, match="r_star requires s_star"):
            parse_scenario(doc)

    def test_unknown_kind(self):
        doc = quick_scenario()
        doc["agents"][0]["kind"] = "hovercraft"
        with pytest.raises(ScenarioError, match="kind"):
            parse_scenario(doc)

    def test_nonfinite_rejected(self):
        doc = quick_scenario()
        doc["agents"][0]["q0"] = [float("nan"), 1.0, 0.0]
        with pytest.raises(ScenarioError, match="finite"):
            parse_scenario(doc)

    def test_gain_matrix_forms(self):
        doc = quick_scenario()
        doc["agents"][0]["controller"]["q_s"] = [[2.0, 0.1], [0.1, 1.0]]
        spec = parse_scenario(doc)
        from nhidapbc.scenario import build_world
        world, _ = build_world(spec)
        np.testing.assert_allclose(world.agents[0].cfg.q_s,
                                   [[2.0, 0.1], [0.1, 1.0]])

    def test_negative_weight_rejected(self):
        doc = quick_scenario()
        doc["agents"].append({
            "id": "r2", "kind": "diff_drive",
            "params": {"mass": 1.0, "inertia": 0.1}, "q0": [0, 0, 0]})
        doc["edges"] = [{"i": "robot", "j": "r2", "weight": -1.0}]
        with pytest.raises(ScenarioError, match="weight"):
            parse_scenario(doc)


class TestRunCommand:
    def test_quick_run_exit0_and_outputs(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        out = tmp_path / "out"
        result = CliRunner().invoke(cli.main,
                                    ["run", str(path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        assert (out / "trajectory.csv").exists()
        assert (out / "report.json").exists()
        assert (out / "plotdata" / "robot_path.txt").exists()
        assert (out / "figures" / "trajectory.png").exists()
        report = json.loads((out / "report.json").read_text())
        assert report["all_converged"] is True
        assert report["converged"]["robot"] is True
        assert report["exit_code"] == 0
        assert report["defaults"]["dt"] == 1e-3

    def test_zero_horizon_exit2(self, tmp_path, scenario_dir):
        out = tmp_path / "out"
        result = CliRunner().invoke(cli.main, [
            "run", str(scenario_dir / "scenario1.json"), "--out", str(out),
            "--t-final", "0", "--no-figures"])
        assert result.exit_code == 2

    def test_invalid_scenario_exit3(self, tmp_path):
        doc = quick_scenario()
        doc["integrator"]["dt"] = 0.0
        path = write_scenario(tmp_path, doc)
        result = CliRunner().invoke(cli.main, [
            "run", str(path), "--out", str(tmp_path / "o"), "--no-figures"])
        assert result.exit_code == 3

    def test_missing_file_exit3(self, tmp_path):
        result = CliRunner().invoke(cli.main, [
            "run", str(tmp_path / "missing.json"), "--out",
            str(tmp_path / "o"), "--no-figures"])
        assert result.exit_code == 3

    def test_multiple_scenarios_subdirs(self, tmp_path):
        p1 = write_scenario(tmp_path, quick_scenario(), "one.json")
        p2 = write_scenario(tmp_path, quick_scenario(), "two.json")
        out = tmp_path / "out"
        result = CliRunner().invoke(cli.main, [
            "run", str(p1), str(p2), "--out", str(out), "--no-figures"])
        assert result.exit_code == 0
        assert (out / "one" / "trajectory.csv").exists()
        assert (out / "two" / "trajectory.csv").exists()

    def test_csv_schema(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        out = tmp_path / "out"
        CliRunner().invoke(cli.main,
                           ["run", str(path), "--out", str(out), "--no-figures"])
        lines = (out / "trajectory.csv").read_text().splitlines()
        assert lines[0] == ("t,agent,mode,q0,q1,q2,ptilde0,ptilde1,"
                            "tau0,tau1,H_d,constraint_viol")
        numeric = re.compile(r"^-?\d+(\.\d+)?$")  # plain decimals only
        for line in lines[1:]:
            cells = line.split(",")
            assert cells[1] == "robot"
            assert cells[2] in ("1", "2")
            for cell in cells[3:]:
                if cell:
                    assert numeric.match(cell), f"not plain decimal: {cell!r}"
        # 12 significant digits survive for a known irrational-ish value
        t_vals = [line.split(",")[0] for line in lines[1:]]
        assert t_vals[1] == "0.005"

    def test_csv_deterministic(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        outs = []
        for name in ("o1", "o2"):
            out = tmp_path / name
            CliRunner().invoke(cli.main, ["run", str(path), "--out", str(out),
                                          "--no-figures"])
            outs.append((out / "trajectory.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_report_round_trip(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        out = tmp_path / "out"
        CliRunner().invoke(cli.main,
                           ["run", str(path), "--out", str(out), "--no-figures"])
        raw = (out / "report.json").read_text()
        assert json.dumps(json.loads(raw), indent=2, sort_keys=True) + "\n" == raw

    def test_plotdata_two_columns(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        out = tmp_path / "out"
        CliRunner().invoke(cli.main,
                           ["run", str(path), "--out", str(out), "--no-figures"])
        for series in (out / "plotdata").iterdir():
            for line in series.read_text().splitlines():
                assert len(line.split()) == 2

    def test_overrides(self, tmp_path):
        path = write_scenario(tmp_path, quick_scenario())
        out = tmp_path / "out"
        result = CliRunner().invoke(cli.main, [
            "run", str(path), "--out", str(out), "--dt", "0.0005",
            "--t-final", "0.1", "--no-figures"])
        assert result.exit_code == 2  # too short to converge
        report = json.loads((out / "report.json").read_text())
        assert report["steps"] == 200


class TestValidateCommand:
    def test_shipped_scenarios_pass(self, scenario_dir):
        for name in ("scenario1.json", "consensus4.json", "crossing.json"):
            result = CliRunner().invoke(
                cli.main, ["validate", str(scenario_dir / name), "--samples", "50"])
            assert result.exit_code == 0, result.output
            assert "PASSED" in result.output

    def test_holonomic_reports_not_applicable(self, tmp_path):
        doc = {
            "agents": [{"id": "arm", "kind": "arm3dof", "q0": [0, 0, 0]}],
        }
        path = write_scenario(tmp_path, doc)
        result = CliRunner().invoke(cli.main, ["validate", str(path)])
        assert result.exit_code == 0
        assert "not applicable" in result.output

    def test_corrupted_model_fails_named_assumption(self, tmp_path, monkeypatch):
        import dataclasses
        real = models.build_diff_drive

        def corrupted(mass, inertia):
            model, pcd = real(mass, inertia)
            return model, dataclasses.replace(
                pcd, a_s=lambda r: np.array([[np.sin(r[0])], [np.cos(r[0])]]))

        monkeypatch.setattr(scenario.models, "build_diff_drive", corrupted)
        path = write_scenario(tmp_path, quick_scenario())
        result = CliRunner().invoke(cli.main,
                                    ["validate", str(path), "--samples", "20"])
        assert result.exit_code == 1
        assert "unconstrained_dist" in result.output
        assert "FAIL" in result.output

    def test_parse_error_exit3(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{", encoding="utf-8")
        result = CliRunner().invoke(cli.main, ["validate", str(path)])
        assert result.exit_code == 3
