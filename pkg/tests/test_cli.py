import json
import subprocess
import sys

import pytest

from riskbandit import cli
from riskbandit.core import InvariantViolation

DRIFT = {
    "kind": "drift",
    "arms": 4,
    "beta": 0.3,
    "params": {"base_cost": [0, 0.5, 0.7, 1.0], "base_risk": [1.0, 0, 0.2, 0], "period": 7},
    "policies": {"random": {"n_experts": 8, "seed": 3}},
}


def write(tmp_path, name, obj):
    p = tmp_path / name
    p.write_text(json.dumps(obj))
    return p


def run_cli(argv, capsys):
    code = cli.main([str(a) for a in argv])
    return code, capsys.readouterr()


def test_run_exp4r_writes_traces(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4r", "environment": DRIFT, "horizon": [50, 100], "seeds": [0, 1]})
    code, out = run_cli(["run-exp4r", "--config", cfg, "--out", tmp_path / "o"], capsys)
    assert code == 0
    summary = json.loads(out.out)
    assert set(summary) == {"50", "100"}
    assert (tmp_path / "o" / "exp4r_T100_seed1.csv").exists()
    assert (tmp_path / "o" / "exp4r_T100_mean.json").exists()


def test_run_overrides(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4r", "environment": DRIFT, "horizon": 1000})
    code, out = run_cli(["run-exp4r", "--config", cfg, "--horizon", 30, "--seed", 9, "--override-mu", 0.2, "--override-delta", 1.5], capsys)
    assert code == 0
    footer = json.loads(out.out)["30"]
    assert footer["mu"] == 0.2 and footer["delta"] == 1.5 and footer["T"] == 30


def test_run_ocp_and_map(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"environment": {"kind": "prop1"}, "horizon": 40})
    code, out = run_cli(["run-ocp", "--config", cfg, "--map", "euclidean", "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert (tmp_path / "o" / "ocp-euclidean_T40_seed0.csv").exists()
    assert "phase_two_entries" in json.loads(out.out)["40"]


def test_run_exp4pr_flags(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4pr", "environment": DRIFT, "horizon": 60})
    code, out = run_cli(["run-exp4pr", "--config", cfg, "--epsilon", 0.25, "--override-kappa", 0.0], capsys)
    assert code == 0
    footer = json.loads(out.out)["60"]
    assert footer["epsilon"] == 0.25 and footer["kappa"] == 0.0


@pytest.mark.parametrize(
    "cfg",
    [
        {"algorithm": "exp4r", "environment": DRIFT, "horizon": 10, "typo": 1},
        {"algorithm": "exp4pr", "environment": DRIFT, "horizon": 10, "mu": 0.5, "delta": 10.0},
        {"algorithm": "exp4r", "environment": dict(DRIFT, beta=0.1), "horizon": 10},
        {"algorithm": "ocp-entropy", "environment": DRIFT, "horizon": 10},
    ],
)
def test_rejected_configs_exit_2(tmp_path, capsys, cfg):
    path = write(tmp_path, "c.json", cfg)
    cmd = "run-exp4pr" if cfg["algorithm"] == "exp4pr" else "run-exp4r"
    code, out = run_cli([cmd, "--config", path], capsys)
    assert code == 2
    assert "error" in out.err


def test_missing_and_malformed_config_exit_2(tmp_path, capsys):
    assert run_cli(["run-exp4r", "--config", tmp_path / "nope.json"], capsys)[0] == 2
    (tmp_path / "bad.json").write_text("{")
    assert run_cli(["run-exp4r", "--config", tmp_path / "bad.json"], capsys)[0] == 2


def test_wrong_subcommand_for_algorithm_exit_2(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4pr", "environment": DRIFT, "horizon": 10})
    assert run_cli(["run-exp4r", "--config", cfg], capsys)[0] == 2


def test_invariant_violation_exit_3(tmp_path, capsys, monkeypatch):
    def boom(*a, **k):
        raise InvariantViolation("dual variable above cap")

    monkeypatch.setattr(cli, "run", boom)
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4pr", "environment": DRIFT, "horizon": 10})
    code, out = run_cli(["run-exp4pr", "--config", cfg], capsys)
    assert code == 3 and "invariant" in out.err


def test_fit_rate_values(capsys):
    code, out = run_cli(["fit-rate", "--horizons", "1000,10000,100000", "--values", "1000,10000,100000"], capsys)
    assert code == 0
    assert json.loads(out.out)["slope"] == pytest.approx(1.0, abs=1e-9)
    assert run_cli(["fit-rate", "--horizons", "1,2", "--values", "1,2"], capsys)[0] == 2
    assert run_cli(["fit-rate"], capsys)[0] == 2


def test_fit_rate_and_report_from_traces(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4r", "environment": DRIFT, "horizon": [50, 100, 200], "seeds": [0, 1]})
    run_cli(["run-exp4r", "--config", cfg, "--out", tmp_path / "o"], capsys)
    code, out = run_cli(["fit-rate", tmp_path / "o", "--metric", "cum_violation"], capsys)
    assert code == 0 and json.loads(out.out)["horizons"] == [50, 100, 200]
    code, out = run_cli(["report", tmp_path / "o", "--out", tmp_path / "r"], capsys)
    assert code == 0
    assert (tmp_path / "r" / "summary.json").exists()
    assert list((tmp_path / "r").glob("*.dat"))


def test_comparator_problem(tmp_path, capsys):
    prob = write(tmp_path, "p.json", {"objective": [-10, 0], "rows": [[1, 0]], "bounds": [0.5]})
    code, out = run_cli(["comparator", "--problem", prob], capsys)
    res = json.loads(out.out)
    assert code == 0 and res["feasible"] and res["value"] == pytest.approx(-5.0)
    bad = write(tmp_path, "q.json", {"objective": [1, 0], "rows": [[1, 0], [-1, 0]], "bounds": [0.2, -0.8]})
    code, out = run_cli(["comparator", "--problem", bad], capsys)
    assert code == 0 and not json.loads(out.out)["feasible"]


def test_comparator_config(tmp_path, capsys):
    cfg = write(tmp_path, "c.json", {"algorithm": "exp4r", "environment": DRIFT, "horizon": 100})
    code, out = run_cli(["comparator", "--config", cfg, "--mode", "on_average"], capsys)
    assert code == 0 and json.loads(out.out)["feasible"]
    adaptive = write(tmp_path, "a.json", {"algorithm": "ocp-entropy", "environment": {"kind": "prop1"}, "horizon": 10})
    assert run_cli(["comparator", "--config", adaptive], capsys)[0] == 2


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "riskbandit", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for name in ("run-ocp", "run-exp4r", "run-exp4pr", "fit-rate", "comparator", "report"):
        assert name in res.stdout
