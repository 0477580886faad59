"""Command-line interface: exit codes, report schema, output formats."""

import json

import numpy as np
import pytest

from coop2.cli import main

GOODWIN_ARGS = ["--model", "goodwin", "--alpha", "0.5", "--beta", "0.4", "--gamma", "0.6", "--m", "10"]
FN_ARGS = ["--model", "field-noyes", "--s", "0.3", "--q", "8.375e-6", "--f", "1", "--w", "0.2934"]


class TestCertifyCommand:
    def test_goodwin_example(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["certify", *GOODWIN_ARGS, "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["schema_version"] == 1
        assert doc["model"] == "goodwin"
        cert = doc["certification"]
        assert cert["conclusion"] == "certified"
        assert cert["equilibrium"][2] == pytest.approx(1.1956, abs=1e-3)
        assert cert["charpoly"]["c2"] == pytest.approx(1.5, abs=1e-3)
        assert cert["routh"] == "unstable"
        inv = doc["invariant_set"]
        assert inv["eta_star"] > 0.0 and inv["xi"] > 0.0 and inv["kappa"] > 0.0
        assert "timing" in doc

    def test_field_noyes_example(self, tmp_path):
        out = tmp_path / "report.json"
        code = main(["certify", *FN_ARGS, "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["certification"]["det"] == pytest.approx(-1.1722, abs=1e-3)
        assert doc["certification"]["signature"] == [1.0, -1.0, -1.0]

    def test_stable_goodwin_refuted(self, tmp_path):
        out = tmp_path / "report.json"
        code = main([
            "certify", "--model", "goodwin",
            "--alpha", "1", "--beta", "1", "--gamma", "1", "--m", "1",
            "--out", str(out),
        ])
        assert code == 2
        doc = json.loads(out.read_text())
        assert doc["certification"]["conclusion"] == "refuted"
        assert doc["invariant_set"] is None

    def test_missing_params_is_usage_error(self):
        assert main(["certify", "--model", "goodwin", "--alpha", "0.5"]) == 1

    def test_generic_model_json(self, tmp_path):
        cfg = {
            "name": "goodwin-generic",
            "params": {"a": 0.5, "b": 0.4, "g": 0.6},
            "f": ["-a*x1 + 1/(1 + x3**10)", "-b*x2 + x1", "-g*x3 + x2"],
            "box": {"lower": [0, 0, 0], "upper": [2, 5, 8.3333333333]},
        }
        path = tmp_path / "model.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "report.json"
        code = main(["certify", "--model-json", str(path), "--grid-n", "7", "--out", str(out)])
        assert code == 0
        doc = json.loads(out.read_text())
        assert doc["certification"]["conclusion"] == "certified"


class TestSimulateCommand:
    def test_csv_output(self, tmp_path):
        out = tmp_path / "traj.csv"
        code = main([
            "simulate", *GOODWIN_ARGS,
            "--x0", "0.1,0.1,0.1", "--t-end", "50", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "t,x1,x2,x3"
        first = [float(v) for v in lines[1].split(",")]
        assert first == [0.0, 0.1, 0.1, 0.1]
        last = [float(v) for v in lines[-1].split(",")]
        assert last[0] == 50.0

    def test_t_end_zero_empty_trajectory(self, tmp_path):
        out = tmp_path / "traj.csv"
        code = main([
            "simulate", *GOODWIN_ARGS,
            "--x0", "0.1,0.1,0.1", "--t-end", "0", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert len(lines) == 2  # header plus the initial state

    def test_detect_orbit_json(self, tmp_path):
        out = tmp_path / "traj.csv"
        orbit = tmp_path / "orbit.json"
        code = main([
            "simulate", *GOODWIN_ARGS,
            "--x0", "0.1,0.1,0.1", "--t-end", "50", "--out", str(out),
            "--detect-orbit", "--horizon", "400", "--rtol", "1e-9",
            "--orbit-out", str(orbit),
        ])
        assert code == 0
        doc = json.loads(orbit.read_text())
        assert doc["converged"] is True
        # the detected loop closes to well under a thousandth of its size
        assert doc["closure_distance"] <= doc["abs_tol"]
        assert doc["period"] == pytest.approx(7.3548, rel=1e-3)

    def test_bad_x0_usage_error(self):
        assert main(["simulate", *GOODWIN_ARGS, "--x0", "0.1,0.1", "--t-end", "1"]) == 1

    def test_deterministic_bytes(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert main([
                "simulate", *GOODWIN_ARGS,
                "--x0", "0.1,0.1,0.1", "--t-end", "20", "--out", str(path),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()


class TestSweepCommand:
    def test_goodwin_hill_exponent_sweep(self, tmp_path):
        out = tmp_path / "sweep.csv"
        code = main([
            "sweep", *GOODWIN_ARGS,
            "--sweep-param", "m", "--sweep-start", "1", "--sweep-stop", "12",
            "--sweep-steps", "12", "--grid-n", "7", "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().strip().split("\n")
        assert lines[0] == "value,certified,period"
        rows = [line.split(",") for line in lines[1:]]
        assert len(rows) == 12
        flags = [r[1] == "true" for r in rows]
        # instability appears at some Hill exponent <= 10 and persists
        assert not flags[0]
        first_true = flags.index(True)
        assert first_true <= 9
        assert all(flags[first_true:])
        by_value = {int(float(r[0])): r for r in rows}
        assert by_value[10][1] == "true"
        assert by_value[10][2] != ""
        assert by_value[1][2] == ""

    def test_zero_steps_is_usage_error(self, tmp_path):
        code = main([
            "sweep", *GOODWIN_ARGS,
            "--sweep-param", "m", "--sweep-start", "1", "--sweep-stop", "3",
            "--sweep-steps", "0", "--out", str(tmp_path / "s.csv"),
        ])
        assert code == 1

    def test_seeded_reruns_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        for path in (a, b):
            assert main([
                "sweep", *GOODWIN_ARGS,
                "--sweep-param", "m", "--sweep-start", "8", "--sweep-stop", "11",
                "--sweep-steps", "4", "--grid-n", "7", "--seed", "0",
                "--out", str(path),
            ]) == 0
        assert a.read_bytes() == b.read_bytes()


def test_unknown_command_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc_info:
        main(["frobnicate"])
    assert exc_info.value.code == 1
