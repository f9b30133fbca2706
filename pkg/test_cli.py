#!/usr/bin/env python3
"""
Tests for the eaqga command line and environment settings.
"""

import json

import pytest

from eaqga import __version__
from eaqga.cli import cli
from eaqga.config import Settings, load_settings
from eaqga.core.problem import QuboProblem, evaluate_fitness, load_problem, save_problem
from eaqga.errors import UsageError
from eaqga.main import main

ENV_NAMES = ("EAQGA_THREADS", "EAQGA_LOG_LEVEL", "EAQGA_ORACLE_LIMIT")

PRICES = (
    "date,AAA,BBB,CCC,DDD\n"
    "2024-01-02,100,50,20,10\n"
    "2024-01-03,101,49,21,10.5\n"
    "2024-01-04,103,51,20.5,10.2\n"
    "2024-01-05,102,52,21.5,10.4\n"
)


@pytest.fixture
def toy_file(tmp_path):
    path = tmp_path / "toy.json"
    save_problem(QuboProblem(mu=[0.1, 0.2], sigma=[[0.04, 0.01], [0.01, 0.09]], q=0.5, meta={"id": "toy"}), str(path))
    return str(path)


@pytest.fixture
def clean_env(monkeypatch):
    for name in ENV_NAMES:
        monkeypatch.setenv(name, "")
        monkeypatch.delenv(name)
    return monkeypatch


def test_synth_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert cli(["synth", "--n", "20", "--seed", "7", "-o", str(a)]) == 0
    assert cli(["synth", "--n", "20", "--seed", "7", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_problem(str(a)).problem_id == "synth-n20-s7"


def test_synth_to_stdout_with_risk_aversion(capsys):
    assert cli(["synth", "--n", "3", "--seed", "1", "--q", "0.8"]) == 0
    assert json.loads(capsys.readouterr().out)["q"] == 0.8


def test_oracle_on_toy_problem(toy_file, capsys):
    assert cli(["oracle", "--problem", toy_file]) == 0
    result = json.loads(capsys.readouterr().out)
    assert result["best_x"] == "11"
    assert result["fitness"] == pytest.approx(0.225)
    assert result["count"] == 4


def test_oracle_limit(tmp_path, capsys):
    path = tmp_path / "p.json"
    cli(["synth", "--n", "10", "--seed", "1", "-o", str(path)])
    assert cli(["oracle", "--problem", str(path), "--limit", "5"]) == 1
    assert "exceeds limit" in capsys.readouterr().err
    assert cli(["oracle", "--problem", str(path)], Settings(oracle_limit=9)) == 1
    assert cli(["oracle", "--problem", str(path), "--blocks", "4", "--workers", "2"]) == 0


def test_unknown_flag_is_a_usage_error(capsys):
    assert cli(["synth", "--n", "3", "--seed", "1", "--bogus"]) == 1
    assert "unrecognized arguments" in capsys.readouterr().err
    assert cli(["solve", "--algo", "sa", "--problem", "x.json"]) == 1
    assert cli([]) == 1


def test_missing_problem_file_is_a_data_error(tmp_path, capsys):
    assert cli(["solve", "--algo", "eaqga", "--problem", str(tmp_path / "none.json")]) == 2
    assert capsys.readouterr().err.startswith("eaqga: error:")


def test_undecodable_inputs_are_data_errors(tmp_path, capsys):
    problem = tmp_path / "latin1.json"
    problem.write_bytes(b'{"n": 1, "mu": [0.1], "sigma": [[0.04]], "meta": {"id": "caf\xe9"}}')
    assert cli(["solve", "--algo", "ga", "--problem", str(problem)]) == 2
    prices = tmp_path / "latin1.csv"
    prices.write_bytes(b"date,caf\xe9\n2024-01-02,100\n2024-01-03,101\n")
    assert cli(["ingest", str(prices)]) == 2
    config = tmp_path / "latin1.toml"
    config.write_bytes(b"[problems]\nfiles = [\"caf\xe9.json\"]\n")
    assert cli(["bench", "--config", str(config)]) == 2
    assert capsys.readouterr().err.count("eaqga: error:") == 3


def test_ingest_rejects_empty_subsets(tmp_path):
    prices = tmp_path / "market.csv"
    prices.write_text(PRICES)
    out_dir = str(tmp_path / "subsets")
    assert cli(["ingest", str(prices), "--subsets", "0", "-o", out_dir]) == 1
    assert cli(["ingest", str(prices), "--subsets", "2", "--subset-size", "0", "-o", out_dir]) == 1


def test_solve_writes_run_record(toy_file, tmp_path):
    out = tmp_path / "run.json"
    argv = ["solve", "--algo", "GA", "--problem", toy_file, "--pop", "6", "--iters", "4", "--seed", "3", "-o", str(out)]
    assert cli(argv) == 0
    record = json.loads(out.read_text())
    assert (record["algorithm"], record["population"], record["seed"]) == ("GA", 6, 3)
    assert len(record["best_per_iteration"]) == 4
    assert record["wall_time"] is None
    assert record["final_fitness"] == evaluate_fitness(load_problem(toy_file), record["final_x"])


def test_solve_timing_and_stdout(toy_file, capsys):
    assert cli(["solve", "--algo", "aqga", "--problem", toy_file, "--iters", "3", "--timing"]) == 0
    assert json.loads(capsys.readouterr().out)["wall_time"] >= 0.0


def test_dump_plan(tmp_path):
    problem = tmp_path / "p.json"
    plan = tmp_path / "plan.json"
    cli(["synth", "--n", "6", "--seed", "2", "-o", str(problem)])
    argv = ["solve", "--algo", "eaqga", "--problem", str(problem), "--iters", "3", "--dump-plan", str(plan)]
    assert cli(argv + ["-o", str(tmp_path / "run.json")]) == 0
    dump = json.loads(plan.read_text())
    assert dump["plan"]["n"] == 6
    assert set(dump["stats"]) == {"ry", "x", "cx", "depth"}
    assert cli(["solve", "--algo", "ga", "--problem", str(problem), "--dump-plan", str(plan)]) == 1
    assert cli(["solve", "--algo", "eaqga", "--problem", str(problem), "--iters", "1", "--dump-plan", str(plan)]) == 1


def test_ingest(tmp_path):
    prices = tmp_path / "market.csv"
    prices.write_text(PRICES)
    single = tmp_path / "market.json"
    assert cli(["ingest", str(prices), "--q", "0.5", "-o", str(single)]) == 0
    problem = load_problem(str(single))
    assert (problem.n, problem.problem_id, problem.q) == (4, "market", 0.5)

    out_dir = tmp_path / "subsets"
    argv = ["ingest", str(prices), "--subsets", "2", "--subset-size", "2", "--seed", "5", "-o", str(out_dir)]
    assert cli(argv) == 0
    assert sorted(p.name for p in out_dir.iterdir()) == ["market-sub1.json", "market-sub2.json"]
    assert cli(["ingest", str(prices), "--subsets", "2"]) == 1


def test_bench(tmp_path, toy_file):
    config = tmp_path / "exp.toml"
    config.write_text(
        "[problems]\n"
        'files = ["toy.json"]\n'
        "synth = [{ n = 4, seeds = [1, 2] }]\n\n"
        "[algorithms.EAQGA]\n"
        "p_a = 0.9\n\n"
        "[algorithms.GA]\n\n"
        "[run]\n"
        "repeats = 2\n"
        "iterations = 3\n"
        "populations = [4]\n"
    )
    out_dir = tmp_path / "out"
    assert cli(["bench", "--config", str(config), "-o", str(out_dir)]) == 0
    summary = (out_dir / "summary.csv").read_text().splitlines()
    assert summary[0] == "problem_id,optimum,algo,population,avg,std"
    assert len(summary) == 1 + 6 + 2
    assert summary[1].startswith("toy,0.2250,EAQGA,4,")
    assert (out_dir / "runs" / "synth-n4-s2" / "GA_pop4_r1.json").is_file()


def test_bench_with_bad_config(tmp_path):
    config = tmp_path / "exp.toml"
    config.write_text("[run]\nrepeats = 2\n")
    assert cli(["bench", "--config", str(config)]) == 1
    assert cli(["bench", "--config", str(tmp_path / "missing.toml")]) == 2


def test_version(capsys):
    assert cli(["version"]) == 0
    assert capsys.readouterr().out == f"eaqga {__version__}\n"


def test_main_exits_with_status(clean_env, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["version"])
    assert exc.value.code == 0
    clean_env.setenv("EAQGA_THREADS", "many")
    with pytest.raises(SystemExit) as exc:
        main(["version"])
    assert exc.value.code == 1
    assert "EAQGA_THREADS" in capsys.readouterr().err


def test_settings_from_env_file(tmp_path, clean_env):
    env = tmp_path / ".env"
    env.write_text("EAQGA_THREADS=3\nEAQGA_LOG_LEVEL=debug\n")
    assert load_settings(str(env)) == Settings(threads=3, log_level="DEBUG", oracle_limit=26)


def test_environment_wins_over_env_file(tmp_path, clean_env):
    env = tmp_path / ".env"
    env.write_text("EAQGA_ORACLE_LIMIT=12\n")
    clean_env.setenv("EAQGA_ORACLE_LIMIT", "18")
    assert load_settings(str(env)).oracle_limit == 18


@pytest.mark.parametrize("name, value", [("EAQGA_THREADS", "0"), ("EAQGA_ORACLE_LIMIT", "x"), ("EAQGA_LOG_LEVEL", "LOUD")])
def test_invalid_settings(tmp_path, clean_env, name, value):
    clean_env.setenv(name, value)
    with pytest.raises(UsageError):
        load_settings(str(tmp_path / "absent.env"))
