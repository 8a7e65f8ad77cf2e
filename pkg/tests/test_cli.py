import csv
import json
import math

import pytest

from expfunctional.activation import ControlParams, Identity
from expfunctional.cli import fmt, main
from expfunctional.functional import build_form, j_along_trajectory
from expfunctional.simulate import ScalarIntegrator, SimConfig, exponential_law, simulate_closed_loop


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def cell(row, key):
    return float(row[key]) if row[key] else None


@pytest.fixture
def out(tmp_path):
    return str(tmp_path / "out.csv")


class TestFormat:
    def test_seventeen_digits(self):
        assert fmt(0.1) == "0.10000000000000001"

    @pytest.mark.parametrize("x", [None, math.nan, math.inf])
    def test_missing(self, x):
        assert fmt(x) == ""


class TestTabulate:
    def test_energy_curve(self, out):
        assert main(["tabulate", "--curve", "G", "--c", "2", "--from", "-2", "--to", "2", "--step", "0.01", "--out", out]) == 0
        rows = {float(r["x"]): r for r in read_csv(out)}
        assert len(rows) == 401
        assert cell(rows[1.0], "value") == pytest.approx(-1 / math.log(2), rel=1e-15)
        values = [(cell(r, "value"), x) for x, r in rows.items()]
        assert abs(min(values)[1]) == 1.0

    def test_conjugate_curve(self, out):
        main(["tabulate", "--curve", "g", "--c", "2", "--from", "-2", "--to", "2", "--step", "0.01", "--out", out])
        rows = {float(r["x"]): r for r in read_csv(out)}
        assert cell(rows[1.0], "value") == 0 and cell(rows[-1.0], "value") == 0
        assert rows[0.0]["value"] == ""

    def test_reciprocal_state_singular_cell(self, out):
        main(["tabulate", "--curve", "F", "--case", "reciprocal", "--c", "2", "--from", "-1", "--to", "1", "--step", "0.5", "--out", out])
        rows = read_csv(out)
        assert [r["x"] for r in rows] == ["-1", "-0.5", "0", "0.5", "1"]
        assert rows[2]["value"] == "" and all(r["value"] for i, r in enumerate(rows) if i != 2)

    def test_line_endings_and_manifest(self, out):
        main(["tabulate", "--curve", "U", "--from", "0", "--to", "1", "--step", "0.5", "--out", out])
        raw = open(out, "rb").read()
        assert b"\r" not in raw and raw.endswith(b"\n")
        manifest = json.load(open(out + ".manifest.json"))
        assert manifest["command"] == "tabulate" and manifest["status"] == "ok"
        assert manifest["outputs"] == [out]

    def test_plot_script(self, out, tmp_path):
        script = str(tmp_path / "plot.py")
        main(["tabulate", "--curve", "G", "--out", out, "--plot-script", script])
        compile(open(script).read(), script, "exec")

    def test_bad_step(self, out):
        assert main(["tabulate", "--curve", "G", "--step", "0", "--out", out]) == 2


class TestConstruct:
    def run(self, capsys, *argv):
        assert main(["construct", *argv]) == 0
        return json.loads(capsys.readouterr().out)

    def test_identity(self, capsys):
        d = self.run(capsys, "--case", "identity", "--c", "2")
        assert d["closed_form_valid"] is True and d["f_closed_form"] == "C1*C^|S|"

    def test_power_fallback(self, capsys):
        d = self.run(capsys, "--case", "power", "--c", "2", "--alpha", "0.3")
        assert d["closed_form_valid"] is False
        assert d["validity_reason"] == "negative gamma argument; quadrature fallback"

    def test_additive(self, capsys):
        d = self.run(capsys, "--case", "additive", "--c", "2", "--weights", "1,1")
        assert "erf (not implemented in closed form)" in d["special_functions_used"]

    @pytest.mark.parametrize("argv", [["--c", "1"], ["--c", "-2"], ["--case", "power"]])
    def test_usage_errors(self, argv, capsys):
        assert main(["construct", *argv]) == 2

    def test_unknown_case(self, capsys):
        assert main(["construct", "--case", "cubic"]) == 2


class TestSimulate:
    def test_final_jcum_matches_functional(self, out):
        assert main(["simulate", "--case", "identity", "--c", "2", "--s0", "1", "--t", "1", "--dt", "1e-3", "--out", out]) == 0
        rows = read_csv(out)
        cfg = SimConfig(horizon=1.0, initial_state=1.0, dt=1e-3)
        p = ControlParams(2)
        traj = simulate_closed_loop(ScalarIntegrator(), exponential_law(p, Identity()), cfg)
        j = j_along_trajectory(build_form(p, Identity()), traj)
        assert cell(rows[-1], "Jcum") == j.j_total
        manifest = json.load(open(out + ".manifest.json"))
        assert manifest["j_breakdown"]["j_total"] == j.j_total
        assert manifest["reached_origin_at"] == traj.reached_origin_at

    def test_relay(self, out):
        main(["simulate", "--law", "power", "--alpha", "0", "--t", "1.5", "--out", out])
        rows = read_csv(out)
        first_zero = next(cell(r, "t") for r in rows if cell(r, "S") == 0)
        assert abs(first_zero - 1.0) <= 2e-4

    def test_equilibrium_start(self, out):
        main(["simulate", "--s0", "0", "--t", "0.1", "--dt", "1e-2", "--out", out])
        rows = read_csv(out)
        assert all(cell(r, "S") == 0 and cell(r, "U") == 0 for r in rows)

    def test_baseline(self, out):
        main(["simulate", "--s0", "0", "--t", "0.1", "--dt", "1e-2", "--baseline", "equilibrium", "--out", out])
        assert cell(read_csv(out)[-1], "Jcum") == 0

    def test_reciprocal_blank_after_reach(self, out):
        assert main(["simulate", "--case", "reciprocal", "--c", "2", "--t", "0.5", "--dt", "1e-3", "--out", out]) == 0
        last = read_csv(out)[-1]
        assert last["S"] == "0" and last["F"] == "" and last["Jcum"] == ""
        assert json.load(open(out + ".manifest.json"))["j_breakdown"] is None

    def test_divergence(self, out):
        code = main(["simulate", "--case", "reciprocal", "--c", "2", "--s0", "0.0005", "--u-max", "inf", "--out", out])
        assert code == 3
        manifest = json.load(open(out + ".manifest.json"))
        assert manifest["status"] == "diverged" and manifest["failure_time"] > 0
        assert len(read_csv(out)) >= 1

    def test_double_integrator(self, out):
        assert main(["simulate", "--plant", "double", "--t", "2", "--dt", "1e-3", "--out", out]) == 0
        assert cell(read_csv(out)[-1], "S") == 0

    def test_power_law_needs_alpha(self, out):
        assert main(["simulate", "--law", "power", "--out", out]) == 2


class TestSweep:
    def test_c_sweep_analytic(self, out):
        assert main(["sweep", "--kind", "C", "--values", "1.5,2,3", "--s0", "1", "--t", "1.5", "--out", out]) == 0
        rows = read_csv(out)
        assert [cell(r, "param") for r in rows] == [1.5, 2.0, 3.0]
        for r in rows:
            C = cell(r, "param")
            assert abs(cell(r, "reach_time") - (1 - 1 / C) / math.log(C)) <= 2e-4

    def test_alpha_input_order_and_demo(self, out):
        main(["sweep", "--kind", "alpha", "--values", "0.5,0.25", "--t", "12", "--adaptive-demo", "--out", out])
        rows = read_csv(out)
        assert [r["param"] for r in rows] == ["0.5", "0.25", ""]

    @pytest.mark.parametrize("values", ["", ","])
    def test_empty_list(self, out, values):
        assert main(["sweep", "--kind", "alpha", "--values", values, "--out", out]) == 2

    def test_missing_values_flag(self, out):
        assert main(["sweep", "--kind", "alpha", "--out", out]) == 2


class TestConfig:
    def test_flags_override_config(self, tmp_path, out):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"curve": "G", "c": 3.0, "from_": 0, "to": 1, "step": 0.5}))
        main(["tabulate", "--config", str(cfg), "--c", "2", "--out", out])
        params = json.load(open(out + ".manifest.json"))["parameters"]
        assert params["c"] == 2.0 and params["step"] == 0.5

    def test_unknown_key(self, tmp_path, out):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps({"curve": "G", "colour": "red"}))
        assert main(["tabulate", "--config", str(cfg), "--out", out]) == 2


class TestReplay:
    @pytest.mark.parametrize(
        "argv",
        [
            ["tabulate", "--curve", "F", "--case", "sqrt", "--step", "0.25"],
            ["simulate", "--case", "sqrt", "--t", "0.8", "--dt", "1e-3"],
            ["sweep", "--kind", "C", "--values", "2,3", "--t", "1", "--dt", "1e-3"],
            ["construct", "--case", "power", "--c", "0.5", "--alpha", "0.7"],
        ],
    )
    def test_byte_identical(self, tmp_path, argv):
        first = str(tmp_path / "a.out")
        second = str(tmp_path / "b.out")
        assert main([*argv, "--out", first]) == 0
        assert main(["replay", first + ".manifest.json", "--out", second]) == 0
        assert open(first, "rb").read() == open(second, "rb").read()

    def test_missing_manifest(self, tmp_path):
        assert main(["replay", str(tmp_path / "none.json")]) == 2


@pytest.fixture(scope="module")
def verify_runs(tmp_path_factory):
    d = tmp_path_factory.mktemp("verify")
    paths = [str(d / "one.json"), str(d / "two.json")]
    codes = [main(["verify", "--json", "--out", p]) for p in paths]
    return codes, paths


class TestVerify:
    def test_deterministic(self, verify_runs):
        _, (a, b) = verify_runs
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_exit_code_matches_report(self, verify_runs):
        codes, (a, _) = verify_runs
        report = json.load(open(a))
        assert codes[0] == (0 if report["passed"] else 1)
        assert report["passed"] == all(c["pass"] for c in report["checks"])

    def test_report_shape(self, verify_runs):
        report = json.load(open(verify_runs[1][0]))
        names = [c["name"] for c in report["checks"]]
        assert len(names) == len(set(names)) >= 9
        assert all(set(c) == {"name", "tolerance", "observed", "pass"} for c in report["checks"])

    def test_only_known_failure(self, verify_runs):
        # the second-order ratio check at eps = 0.1 is a documented failure
        report = json.load(open(verify_runs[1][0]))
        failing = [c["name"] for c in report["checks"] if not c["pass"]]
        assert failing == ["simulate.variational_identity_second_order_ratio"]

    def test_unattainable_tolerance(self, capsys):
        code = main(["verify", "--json", "--set-tol", "functional.closed_vs_quadrature=1e-15"])
        report = json.loads(capsys.readouterr().out)
        check = next(c for c in report["checks"] if c["name"] == "functional.closed_vs_quadrature")
        assert code == 1 and not check["pass"]

    def test_unknown_tolerance_name(self):
        assert main(["verify", "--set-tol", "nope=1"]) == 2
