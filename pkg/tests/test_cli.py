import json
from pathlib import Path

import numpy as np
import pytest

from gqc.cli import main

DEMO_DIR = Path(__file__).resolve().parent.parent / "demos" / "configs"


def write_config(tmp_path, payload, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return str(path)


def grid_block(dim=2, n=16, side=1.0):
    return {
        "dim": dim,
        "bounds": [[0.0, side]] * dim,
        "n": [n] * dim,
    }


# ---------------------------------------------------------------------------
# config validation


def test_missing_config_is_usage_error(capsys):
    assert main(["check", "--config", "/nonexistent/cfg.json"]) == 1
    assert "config" in capsys.readouterr().err


def test_no_subcommand_is_usage_error():
    assert main([]) == 1


def test_schema_violation_reports_path(tmp_path, capsys):
    cfg = write_config(tmp_path, {"grid": {"dim": 7, "bounds": [[0, 1]], "n": [8]}})
    assert main(["check", "--config", cfg]) == 1
    err = capsys.readouterr().err
    assert "grid" in err and "dim" in err


def test_unknown_key_rejected(tmp_path):
    cfg = write_config(tmp_path, {"grid": grid_block(), "unknown_key": 1})
    assert main(["check", "--config", cfg]) == 1


def test_bad_expression_is_usage_error(tmp_path, capsys):
    cfg = write_config(
        tmp_path,
        {"grid": grid_block(), "coefficients": {"c": "1 +", "mu": "1", "h": "0"}},
    )
    assert main(["check", "--config", cfg]) == 1
    assert "position" in capsys.readouterr().err


def test_missing_coefficient_file(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(),
            "coefficients": {"c": "1", "mu": "1", "h": {"file": "nope.txt"}},
        },
    )
    assert main(["check", "--config", cfg]) == 1


# ---------------------------------------------------------------------------
# check


def test_check_favorable_signs_exit0(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(),
            "coefficients": {"c": "1", "mu": "1", "h": "0-1"},
        },
    )
    out = tmp_path / "out"
    assert main(["check", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    byname = {r["condition"]: r for r in report["conditions"]}
    assert byname["H0"]["holds"] and byname["H0"]["margin"] > 0
    assert byname["H0"]["sub_infima"] == [1.0, 1.0]
    assert "config_sha256" in report and "seed" in report


def test_check_large_h_fails_exit2(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(n=32),
            "coefficients": {"c": "1", "mu": "1", "h": "25"},
            "conditions": ["H0"],
        },
    )
    out = tmp_path / "out"
    assert main(["check", "--config", cfg, "--out", str(out), "--quiet"]) == 2
    report = json.loads((out / "report.json").read_text())
    assert report["conditions"][0]["holds"] is False


def test_check_hc_vacuous_note(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(),
            "coefficients": {"c": "1", "mu": "3", "h": "40"},
            "conditions": ["Hc"],
        },
    )
    out = tmp_path / "out"
    assert main(["check", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert "vacuous" in report["conditions"][0]["note"]


def test_check_reports_gamma1(tmp_path):
    cfg = write_config(
        tmp_path,
        {"grid": grid_block(n=32), "coefficients": {"c": "1", "mu": "1", "h": "1"}},
    )
    out = tmp_path / "out"
    main(["check", "--config", cfg, "--out", str(out), "--quiet"])
    report = json.loads((out / "report.json").read_text())
    assert report["eigen"]["gamma1"] == pytest.approx(2 * np.pi**2, rel=0.01)


# ---------------------------------------------------------------------------
# solve


def test_solve_trivial_writes_zero_solution(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(dim=1, n=16),
            "coefficients": {"c": "1", "mu": "1", "h": "0"},
            "lambda": -1.0,
        },
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    vals = np.loadtxt(out / "solution.txt")
    assert np.max(np.abs(vals)) == 0.0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] and report["strategy"] == "newton"


def test_solve_requires_lambda(tmp_path):
    cfg = write_config(
        tmp_path,
        {"grid": grid_block(), "coefficients": {"c": "1", "mu": "1", "h": "0"}},
    )
    assert main(["solve", "--config", cfg, "--quiet"]) == 1


def test_solve_manufactured_demo_recovers(tmp_path):
    out = tmp_path / "out"
    code = main(["solve", "--config", str(DEMO_DIR / "demo_manufactured.json"),
                 "--out", str(out), "--quiet"])
    assert code == 0
    u = np.loadtxt(out / "solution.txt")
    u_star = np.loadtxt(DEMO_DIR / "data" / "u_star_d2_n32.txt")
    assert np.max(np.abs(u - u_star)) <= 1e-10


def test_solve_at_eigenvalue_exits3(tmp_path, fold_demo):
    from gqc import first_eigen

    gamma1 = first_eigen(fold_demo["problem"].c.field, fold_demo["ops"]).gamma
    cfg = write_config(
        tmp_path,
        {
            "grid": {"dim": 1, "bounds": [[0.0, 1.0]], "n": [64]},
            "coefficients": {"c": "1", "mu": "1", "h": "0.1*sin(pi*x1)"},
            "profile": "A2",
            "lambda": gamma1,
            "solver": {"max_newton": 30, "max_fixed_point": 40},
        },
    )
    out = tmp_path / "out"
    assert main(["solve", "--config", cfg, "--out", str(out), "--quiet"]) == 3
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is False
    assert {a["strategy"] for a in report["attempts"]} >= {"newton", "fixed_point"}


# ---------------------------------------------------------------------------
# branch


def test_branch_demo_csv_and_analysis(tmp_path):
    out = tmp_path / "out"
    code = main(["branch", "--config", str(DEMO_DIR / "demo_fig2.json"),
                 "--out", str(out), "--quiet"])
    assert code == 0
    lines = (out / "branch.csv").read_text().strip().splitlines()
    assert lines[0] == "idx,lambda,sup_norm,h10_norm,arclength,newton_iters"
    analysis = json.loads((out / "analysis.json").read_text())
    assert len(lines) - 1 == analysis["points"]
    assert analysis["termination"] == "norm_cap"
    assert analysis["blowup_side"] == "right"
    assert 0.0 < analysis["fold_lambda"] < np.pi**2
    assert analysis["two_solutions"]["sup_gap"] >= 1e-2
    assert (out / "solution_low.txt").exists()
    assert (out / "solution_high.txt").exists()


def test_branch_deterministic_csv(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    cfg = str(DEMO_DIR / "demo_fig1.json")
    assert main(["branch", "--config", cfg, "--out", str(out1), "--quiet"]) == 0
    assert main(["branch", "--config", cfg, "--out", str(out2), "--quiet"]) == 0
    assert (out1 / "branch.csv").read_bytes() == (out2 / "branch.csv").read_bytes()


def test_branch_seed_failure_exits3(tmp_path):
    # no solution exists at the requested start on this instance
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(n=32),
            "coefficients": {"c": "1", "mu": "1", "h": "6*pi^2"},
            "continuation": {"lambda0": -2.0, "max_points": 40},
            "solver": {"max_newton": 20, "max_fixed_point": 20},
        },
    )
    out = tmp_path / "out"
    assert main(["branch", "--config", cfg, "--out", str(out), "--quiet"]) == 3
    analysis = json.loads((out / "analysis.json").read_text())
    assert "error" in analysis


def test_check_restricted_conditions(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": {"dim": 1, "bounds": [[0.0, 1.0]], "n": [64]},
            "coefficients": {"c": "indicator(1, 0.5, 1.0)", "mu": "1", "h": "30"},
            "lambda": -1.0,
            "conditions": ["H", "k1"],
        },
    )
    out = tmp_path / "out"
    assert main(["check", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    byname = {r["condition"]: r for r in report["conditions"]}
    assert byname["H"]["holds"] and byname["k1"]["holds"]


def test_branch_requires_negative_lambda0(tmp_path):
    cfg = write_config(
        tmp_path,
        {
            "grid": grid_block(dim=1, n=16),
            "coefficients": {"c": "1", "mu": "1", "h": "0"},
            "continuation": {"lambda0": 1.0},
        },
    )
    assert main(["branch", "--config", cfg, "--quiet"]) == 1


# ---------------------------------------------------------------------------
# eigen and exponents


def test_eigen_command(tmp_path):
    cfg = write_config(
        tmp_path,
        {"grid": {"dim": 1, "bounds": [[0.0, 1.0]], "n": [64]},
         "coefficients": {"c": "1", "mu": "1", "h": "0"}},
    )
    out = tmp_path / "out"
    assert main(["eigen", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["gamma1"] == pytest.approx(np.pi**2, rel=0.01)
    phi = np.loadtxt(out / "eigenfunction.txt")
    assert np.all(phi > 0)


def test_exponents_command(tmp_path):
    cfg = write_config(tmp_path, {"exponents": {"p": 2.0, "theta": 0.5, "N": 3}})
    out = tmp_path / "out"
    assert main(["exponents", "--config", cfg, "--out", str(out), "--quiet"]) == 0
    w = json.loads((out / "report.json").read_text())["witness"]
    q = 1 + w["r"] + (1 + w["theta"] * w["alpha"]) / (1 - w["alpha"])
    assert q == pytest.approx(w["q"], rel=1e-14)


def test_exponents_invalid_p_is_usage_error(tmp_path):
    cfg = write_config(tmp_path, {"exponents": {"p": 1.2, "theta": 0.5, "N": 3}})
    assert main(["exponents", "--config", cfg, "--quiet"]) == 1


def test_seed_override_lands_in_report(tmp_path):
    cfg = write_config(
        tmp_path,
        {"grid": grid_block(dim=1, n=16), "coefficients": {"c": "1", "mu": "1", "h": "0"},
         "lambda": -1.0, "seed": 7},
    )
    out = tmp_path / "out"
    main(["solve", "--config", cfg, "--out", str(out), "--quiet", "--seed", "11"])
    assert json.loads((out / "report.json").read_text())["seed"] == 11
