#!/usr/bin/env python3
"""
Tests for the QUBO problem model: fitness, portfolio estimation, coupling
normalization, synthetic instances and the problem/price file formats.
"""

import json

import numpy as np
import pandas as pd
import pytest

from eaqga.core.problem import (
    PriceSeries,
    QuboProblem,
    SynthSpec,
    as_bitstring,
    bit_table,
    build_portfolio,
    dump_problem,
    evaluate_fitness,
    load_prices,
    load_problem,
    normalize_coupling,
    permute,
    save_problem,
    select_subsets,
    synth_problem,
)
from eaqga.errors import DataError, UsageError


def toy_problem():
    """The two-asset example whose optimum [1, 1] has fitness 0.225."""
    return QuboProblem(mu=[0.1, 0.2], sigma=[[0.04, 0.01], [0.01, 0.09]], q=0.5, meta={"id": "toy"})


def generate_prices(columns, dates=None):
    """Wrap per-asset price lists into a PriceSeries."""
    matrix = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    dates = dates or list(pd.date_range("2024-01-01", periods=matrix.shape[0]).strftime("%Y-%m-%d"))
    return PriceSeries(dates=dates, prices=matrix, tickers=[f"T{i}" for i in range(matrix.shape[1])])


def naive_fitness(problem, x):
    total = sum(problem.mu[i] * x[i] for i in range(problem.n))
    quad = sum(x[i] * problem.sigma[i, j] * x[j] for i in range(problem.n) for j in range(problem.n))
    return total - problem.q * quad


@pytest.mark.parametrize(
    "x, expected",
    [([0, 0], 0.0), ([1, 1], 0.225), ([1, 0], 0.08), ([0, 1], 0.155)],
)
def test_toy_fitness(x, expected):
    assert evaluate_fitness(toy_problem(), x) == pytest.approx(expected, abs=1e-15)


def test_fitness_accepts_bit_strings():
    assert evaluate_fitness(toy_problem(), "11") == evaluate_fitness(toy_problem(), [1, 1])


def test_fitness_rejects_dimension_mismatch():
    with pytest.raises(UsageError):
        evaluate_fitness(toy_problem(), [1, 0, 1])
    with pytest.raises(UsageError):
        evaluate_fitness(toy_problem(), [2, 0])


def test_fitness_matches_naive_loops():
    rng = np.random.default_rng(11)
    for _ in range(200):
        n = int(rng.integers(1, 33))
        a = rng.normal(size=(n, n))
        problem = QuboProblem(mu=rng.normal(size=n), sigma=a @ a.T, q=float(rng.uniform(0, 2)))
        x = rng.integers(0, 2, size=n)
        expected = naive_fitness(problem, x)
        assert evaluate_fitness(problem, x) == pytest.approx(expected, rel=1e-12, abs=1e-12)


def test_zero_risk_aversion_is_linear():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(6, 6))
    problem = QuboProblem(mu=rng.normal(size=6), sigma=a @ a.T, q=0.0)
    x = np.array([1, 0, 1, 1, 0, 1])
    assert evaluate_fitness(problem, x) == float(problem.mu @ x.astype(float))


def test_problem_validation():
    with pytest.raises(UsageError):
        QuboProblem(mu=[0.1, 0.2], sigma=[[0.04, 0.02], [0.01, 0.09]])
    with pytest.raises(UsageError):
        QuboProblem(mu=[0.1, 0.2], sigma=[[0.04]])
    with pytest.raises(UsageError):
        QuboProblem(mu=[0.1], sigma=[[0.04]], q=-1)
    with pytest.raises(UsageError):
        QuboProblem(mu=[np.nan], sigma=[[0.04]])


def test_sigma_is_exactly_symmetric_and_frozen():
    tiny = 1e-15
    problem = QuboProblem(mu=[0.0, 0.0], sigma=[[1.0, 0.3 + tiny], [0.3, 1.0]])
    assert np.array_equal(problem.sigma, problem.sigma.T)
    with pytest.raises(ValueError):
        problem.sigma[0, 0] = 2.0


def test_single_asset_portfolio():
    problem = build_portfolio(generate_prices([[100, 110, 121]]))
    assert problem.mu == pytest.approx([0.10])
    np.testing.assert_allclose(problem.sigma, [[0.0]], atol=1e-18)


def test_constant_prices_give_zero_problem():
    problem = build_portfolio(generate_prices([[5, 5, 5, 5], [7, 7, 7, 7]]))
    assert np.all(problem.mu == 0)
    assert np.all(problem.sigma == 0)


def test_perfectly_correlated_assets():
    base = [100, 103, 99, 104, 108]
    problem = build_portfolio(generate_prices([base, [2 * p for p in base]]))
    s = problem.sigma
    assert s[0, 1] == pytest.approx(s[0, 0], rel=1e-12)
    assert s[1, 1] == pytest.approx(s[0, 0], rel=1e-12)


def test_portfolio_matches_pandas_estimates():
    rng = np.random.default_rng(5)
    prices = 100 * np.cumprod(1 + rng.normal(0.001, 0.02, size=(40, 4)), axis=0)
    problem = build_portfolio(generate_prices(list(prices.T)))
    returns = pd.DataFrame(prices).pct_change().dropna()
    np.testing.assert_allclose(problem.mu, returns.mean().to_numpy(), rtol=1e-10)
    np.testing.assert_allclose(problem.sigma, returns.cov().to_numpy(), rtol=1e-10)


def test_portfolio_invariant_under_price_scaling():
    rng = np.random.default_rng(8)
    prices = 50 * np.cumprod(1 + rng.normal(0, 0.01, size=(30, 3)), axis=0)
    a = build_portfolio(generate_prices(list(prices.T)))
    b = build_portfolio(generate_prices(list((prices * [1.0, 3.0, 0.25]).T)))
    np.testing.assert_allclose(a.mu, b.mu, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(a.sigma, b.sigma, rtol=1e-10, atol=1e-15)


def test_price_series_validation():
    with pytest.raises(DataError):
        generate_prices([[100, -1, 120]])
    with pytest.raises(DataError):
        generate_prices([[100]])
    with pytest.raises(DataError):
        generate_prices([[100, 101, 102]], dates=["2024-01-03", "2024-01-02", "2024-01-04"])


@pytest.mark.parametrize(
    "sigma, expected",
    [
        ([[2, -1], [-1, 0.5]], [[1, -0.5], [-0.5, 0.25]]),
        ([[0, 0], [0, 0]], [[0, 0], [0, 0]]),
        ([[1]], [[1]]),
    ],
)
def test_normalize_coupling(sigma, expected):
    problem = QuboProblem(mu=[0.0] * len(sigma), sigma=sigma)
    np.testing.assert_array_equal(normalize_coupling(problem).sigma_n, np.array(expected, dtype=float))


def test_normalize_coupling_preserves_signs():
    problem = synth_problem(12, seed=4, spec=SynthSpec(loading_mean=0.0))
    sn = normalize_coupling(problem).sigma_n
    assert np.abs(sn).max() == 1.0
    np.testing.assert_array_equal(np.sign(sn), np.sign(problem.sigma))


def test_synth_is_deterministic_and_psd():
    a = synth_problem(5, seed=7)
    b = synth_problem(5, seed=7)
    assert dump_problem(a) == dump_problem(b)
    assert a.problem_id == "synth-n5-s7"
    for seed in range(10):
        problem = synth_problem(15, seed=seed)
        assert np.linalg.eigvalsh(problem.sigma).min() >= -1e-9


def test_synth_rejects_bad_spec():
    with pytest.raises(UsageError):
        SynthSpec(mu_low=1.0, mu_high=0.0)
    with pytest.raises(UsageError):
        SynthSpec.from_dict({"volatility": 2})
    with pytest.raises(UsageError):
        SynthSpec(systematic=1.5)
    with pytest.raises(UsageError):
        SynthSpec(factors=0)
    with pytest.raises(UsageError):
        synth_problem(0, seed=1)


def test_synth_factor_structure():
    spec = SynthSpec()
    problem = synth_problem(60, seed=3)
    vol = np.sqrt(np.diag(problem.sigma))
    corr = problem.sigma / np.outer(vol, vol)
    off = corr[~np.eye(60, dtype=bool)]
    # factor correlations are bounded by the systematic share
    assert np.abs(off).max() <= spec.systematic + 1e-12
    assert off.mean() > 0.0
    assert np.diag(problem.sigma).max() == pytest.approx(spec.variance_scale, rel=1e-12)
    assert np.all(problem.mu >= spec.mu_low) and np.all(problem.mu <= spec.mu_high)


def test_problem_file_round_trip(tmp_path):
    path = tmp_path / "toy.json"
    save_problem(toy_problem(), str(path))
    loaded = load_problem(str(path))
    assert loaded.problem_id == "toy"
    assert evaluate_fitness(loaded, [1, 1]) == evaluate_fitness(toy_problem(), [1, 1])
    assert path.read_text().endswith("\n")


@pytest.mark.parametrize(
    "document",
    [
        {"n": 2, "mu": [0.1, 0.2]},
        {"n": 3, "mu": [0.1, 0.2], "sigma": [[1, 0], [0, 1]]},
        {"n": 2, "mu": [0.1, 0.2], "sigma": [[1, 0.5], [0, 1]]},
        {"n": 2, "mu": ["a", 0.2], "sigma": [[1, 0], [0, 1]]},
    ],
)
def test_malformed_problem_files(tmp_path, document):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(document))
    with pytest.raises(DataError):
        load_problem(str(path))


def test_unreadable_problem_file(tmp_path):
    with pytest.raises(DataError):
        load_problem(str(tmp_path / "missing.json"))
    (tmp_path / "garbage.json").write_text("{not json")
    with pytest.raises(DataError):
        load_problem(str(tmp_path / "garbage.json"))


def test_load_prices(tmp_path):
    path = tmp_path / "prices.csv"
    path.write_text("date,AAA,BBB\n2024-01-02,100,50\n2024-01-03,110,55\n2024-01-04,121,52\n")
    prices = load_prices(str(path))
    assert prices.tickers == ("AAA", "BBB")
    assert prices.periods == 2
    assert build_portfolio(prices).mu[0] == pytest.approx(0.10)


@pytest.mark.parametrize(
    "text",
    [
        "day,AAA\n2024-01-02,100\n2024-01-03,110\n",
        "date,AAA\n2024-01-02,100\n2024-01-03,\n",
        "date,AAA\n2024-01-02,100\n2024-01-03,abc\n",
        "date,AAA\n2024-01-02,100\n2024-01-03,0\n",
        "date,AAA\n2024-01-03,100\n2024-01-02,110\n",
    ],
)
def test_load_prices_rejects_bad_files(tmp_path, text):
    path = tmp_path / "prices.csv"
    path.write_text(text)
    with pytest.raises(DataError):
        load_prices(str(path))


def test_select_subsets_are_disjoint_and_seeded():
    prices = generate_prices([[100 + i, 101 + i, 103 + i] for i in range(12)])
    subsets = select_subsets(prices, size=4, count=3, seed=9)
    tickers = [t for s in subsets for t in s.tickers]
    assert len(tickers) == len(set(tickers)) == 12
    again = select_subsets(prices, size=4, count=3, seed=9)
    assert [s.tickers for s in subsets] == [s.tickers for s in again]
    with pytest.raises(UsageError):
        select_subsets(prices, size=5, count=3, seed=9)


def test_permute_relabels_variables():
    problem = synth_problem(6, seed=2)
    order = [3, 0, 5, 1, 4, 2]
    moved = permute(problem, order)
    x = np.array([1, 0, 1, 1, 0, 0])
    y = x[order]
    assert evaluate_fitness(moved, y) == pytest.approx(evaluate_fitness(problem, x), abs=1e-15)
    with pytest.raises(UsageError):
        permute(problem, [0, 0, 1, 2, 3, 4])


def test_bit_helpers():
    table = bit_table(3)
    assert table.shape == (8, 3)
    assert table[1].tolist() == [0, 0, 1]
    assert table[4].tolist() == [1, 0, 0]
    assert as_bitstring("0110").tolist() == [0, 1, 1, 0]
    with pytest.raises(UsageError):
        as_bitstring("012")
