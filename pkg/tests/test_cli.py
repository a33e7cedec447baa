from __future__ import annotations

import json
import math
from pathlib import Path

import pandas as pd
import pytest

import config
from commons_cli import build_parser, main


def test_solve_prints_fields_and_writes_one_row(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = main(["solve", "--k", "0.5", "--env", "ai", "--out", str(tmp_path)])
    assert code == config.EXIT_OK
    out = capsys.readouterr().out
    assert "alpha_star" in out and "c_star" in out
    df = pd.read_csv(tmp_path / "solve_ai_k0.5_eta0.csv")
    assert len(df) == 1
    assert df.loc[0, "phi"] == pytest.approx(df.loc[0, "h"] / 0.5)


def test_solve_with_query_lifetimes(tmp_path: Path) -> None:
    assert main(["solve", "--k", "1", "--t-life", "3", "--out", str(tmp_path)]) == config.EXIT_OK
    df = pd.read_csv(tmp_path / "solve_ai_k1_eta0.csv")
    assert df.loc[0, "t_life"] == 3
    assert df.loc[0, "stock"] >= df.loc[0, "q_total"]


def test_simulate_from_empty_archive(tmp_path: Path) -> None:
    code = main(["simulate", "--k0", "0", "--steps", "5", "--out", str(tmp_path)])
    assert code == config.EXIT_OK
    df = pd.read_csv(tmp_path / "trajectory_ai_eta0_k00.csv")
    assert list(df.columns) == ["t", "k"]
    assert (df["k"] == 0.0).all()


def test_race_at_an_explicit_stock(tmp_path: Path) -> None:
    assert main(["race", "--k", "1.0", "--out", str(tmp_path)]) == config.EXIT_OK
    df = pd.read_csv(tmp_path / "race.csv")
    assert {"pool_ratio", "composition_ratio", "congestion_ratio", "race_holds"} <= set(df.columns)


def test_human_only_conversion_is_a_config_error(tmp_path: Path, capsys: pytest.CaptureFixture) -> None:
    code = main(["solve", "--k", "1", "--env", "ho", "--eta", "0.3", "--out", str(tmp_path)])
    assert code == config.EXIT_CONFIG_ERROR
    assert capsys.readouterr().out.startswith("Error:")


@pytest.mark.parametrize(
    "argv",
    [
        ["curve", "--grid", "4:1:10"],
        ["sensitivity", "--vary", "ai.gama_w=0.3"],
        ["steady", "--preset", "appendix-z"],
        ["curve", "--n-jobs", "0"],
    ],
)
def test_bad_inputs_exit_with_config_error(tmp_path: Path, argv: list[str]) -> None:
    assert main(argv + ["--out", str(tmp_path)]) == config.EXIT_CONFIG_ERROR


def test_bad_config_file_exits_with_config_error(tmp_path: Path) -> None:
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"shared": {"lamda": 0.2}}), encoding="utf-8")
    assert main(["steady", "--config", str(path), "--out", str(tmp_path)]) == config.EXIT_CONFIG_ERROR


def test_directory_as_config_exits_with_config_error(tmp_path: Path) -> None:
    assert main(["steady", "--config", str(tmp_path), "--out", str(tmp_path)]) == config.EXIT_CONFIG_ERROR


def test_missing_threshold_exits_with_solver_error(tmp_path: Path) -> None:
    # no unstable threshold on a grid that starts inside the viable basin
    code = main(["eta", "--grid", "0.5:1.0:8", "--out", str(tmp_path)])
    assert code == config.EXIT_SOLVER_ERROR


def test_subcommand_is_required() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args([])


@pytest.mark.slow
def test_sensitivity_csv_layout(tmp_path: Path) -> None:
    code = main(["sensitivity", "--grid", "0.01:3:60", "--vary", "ai.gamma_w=0.3", "--out", str(tmp_path)])
    assert code == config.EXIT_OK
    df = pd.read_csv(tmp_path / "sensitivity.csv")
    assert list(df.columns) == [
        "run", "parameter", "value", "k_u_ai", "k_h_ai", "peak_phi_ai", "k_ho", "two_crossings",
    ]
    assert df["run"].tolist() == [0, 1]
    assert df.loc[1, "parameter"] == "ai.gamma_w"


@pytest.mark.slow
def test_curve_and_steady_outputs(tmp_path: Path) -> None:
    for command in ("curve", "steady"):
        argv = [command, "--env", "ho", "--grid", "0.01:3:60", "--out", str(tmp_path)]
        assert main(argv) == config.EXIT_OK
    curve = pd.read_csv(tmp_path / "curve_ho_eta0.csv")
    assert list(curve.columns) == ["k", "h", "phi", "sigma"]
    assert len(curve) == 60
    steady = pd.read_csv(tmp_path / "steady_ho_eta0.csv")
    assert set(steady["kind"]) <= {"stable", "unstable"}


def test_solve_at_empty_archive_is_collapsed(tmp_path: Path) -> None:
    assert main(["solve", "--k", "0", "--out", str(tmp_path)]) == config.EXIT_OK
    df = pd.read_csv(tmp_path / "solve_ai_k0_eta0.csv")
    assert bool(df.loc[0, "collapsed"])
    assert df.loc[0, "h"] == 0.0


def test_solve_conversion_shift_is_additive(tmp_path: Path) -> None:
    for eta in ("0", "0.25"):
        assert main(["solve", "--k", "1", "--eta", eta, "--out", str(tmp_path)]) == config.EXIT_OK
    base = pd.read_csv(tmp_path / "solve_ai_k1_eta0.csv").loc[0, "h"]
    shifted = pd.read_csv(tmp_path / "solve_ai_k1_eta0.25.csv").loc[0, "h"]
    assert shifted - base == pytest.approx(0.6 * 0.25 * (1.0 - math.exp(-0.5)), abs=1e-10)


@pytest.mark.slow
def test_solve_near_the_ai_peak(tmp_path: Path) -> None:
    assert main(["solve", "--k", "0.51", "--out", str(tmp_path)]) == config.EXIT_OK
    df = pd.read_csv(tmp_path / "solve_ai_k0.51_eta0.csv")
    assert df.loc[0, "phi"] == pytest.approx(config.REFERENCE["peak_phi_ai"], abs=0.02)


@pytest.mark.parametrize("k", ["50", "1000"])
def test_solve_at_a_large_archive(tmp_path: Path, k: str) -> None:
    assert main(["solve", "--k", k, "--out", str(tmp_path)]) == config.EXIT_OK
    df = pd.read_csv(tmp_path / f"solve_ai_k{k}_eta0.csv")
    assert df.loc[0, "h"] <= 1e-6


def test_simulate_from_a_large_archive(tmp_path: Path) -> None:
    code = main(["simulate", "--k0", "60", "--steps", "40", "--out", str(tmp_path)])
    assert code == config.EXIT_OK
    df = pd.read_csv(tmp_path / "trajectory_ai_eta0_k060.csv")
    assert len(df) == 41
    assert df["k"].iloc[1] < 60.0
    assert df["k"].iloc[-1] < 10.0


@pytest.mark.slow
def test_parallel_curve_matches_serial_byte_for_byte(tmp_path: Path) -> None:
    for n_jobs in ("1", "2"):
        out = tmp_path / f"jobs{n_jobs}"
        argv = ["curve", "--env", "ai", "--grid", "0.05:2:24", "--n-jobs", n_jobs, "--out", str(out)]
        assert main(argv) == config.EXIT_OK
    serial = (tmp_path / "jobs1" / "curve_ai_eta0.csv").read_bytes()
    parallel = (tmp_path / "jobs2" / "curve_ai_eta0.csv").read_bytes()
    assert serial == parallel
