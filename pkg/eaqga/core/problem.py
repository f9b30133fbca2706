"""
QUBO problem model: portfolio instances, fitness evaluation and coupling normalization.

The objective is the mean-variance portfolio form, maximized over binary
selection vectors::

    fitness(x) = mu . x - q * x^T Sigma x
"""

import hashlib
import json
import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from ..errors import DataError, UsageError

logger = logging.getLogger(__name__)

SYMMETRY_TOLERANCE = 1e-12
DEFAULT_RISK_AVERSION = 0.5


def as_bitstring(x, n: Optional[int] = None) -> np.ndarray:
    """Coerce ``x`` to a read-only uint8 bit vector.

    Accepts sequences of 0/1 values or a string such as ``"0101"``.

    Raises:
        UsageError: On non-binary entries or when ``len(x) != n``.
    """
    if isinstance(x, str):
        if not set(x) <= {"0", "1"}:
            raise UsageError(f"bitstring must contain only 0/1, got {x!r}")
        bits = np.frombuffer(x.encode("ascii"), dtype=np.uint8) - ord("0")
    else:
        arr = np.asarray(x)
        if arr.ndim != 1:
            raise UsageError(f"bitstring must be one-dimensional, got shape {arr.shape}")
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise UsageError("bitstring entries must be 0 or 1")
        bits = arr.astype(np.uint8)
    if n is not None and bits.size != n:
        raise UsageError(f"bitstring length {bits.size} does not match problem size {n}")
    bits = bits.copy()
    bits.setflags(write=False)
    return bits


def bits_to_str(x: np.ndarray) -> str:
    """Render a bit vector as ``"0101..."``."""
    return "".join("1" if b else "0" for b in x)


def bit_table(n: int) -> np.ndarray:
    """All ``2**n`` bit vectors as rows, in lexicographic order (x[0] most significant)."""
    codes = np.arange(1 << n, dtype=np.int64)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    return ((codes[:, None] >> shifts) & 1).astype(np.uint8)


def bits_key(x: np.ndarray) -> bytes:
    """Sort key that orders equal-length bit vectors lexicographically."""
    return np.asarray(x, dtype=np.uint8).tobytes()


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class QuboProblem:
    """A binary mean-variance problem.

    Attributes:
        mu: Expected per-period returns, length n.
        sigma: Symmetric n x n return covariance matrix.
        q: Risk-aversion coefficient (>= 0).
        names: Optional asset labels.
        meta: Free-form metadata; ``meta["id"]`` names the problem.
    """

    mu: np.ndarray
    sigma: np.ndarray
    q: float = DEFAULT_RISK_AVERSION
    names: Optional[Tuple[str, ...]] = None
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        mu = np.array(self.mu, dtype=float)
        sigma = np.array(self.sigma, dtype=float)
        if mu.ndim != 1 or mu.size < 1:
            raise UsageError("mu must be a non-empty vector")
        n = mu.size
        if sigma.shape != (n, n):
            raise UsageError(f"sigma must be {n}x{n}, got shape {sigma.shape}")
        if not (np.isfinite(mu).all() and np.isfinite(sigma).all()):
            raise UsageError("mu and sigma must be finite")
        q = float(self.q)
        if not np.isfinite(q) or q < 0:
            raise UsageError(f"risk aversion q must be finite and >= 0, got {self.q}")

        scale = max(1.0, float(np.abs(sigma).max()))
        if np.abs(sigma - sigma.T).max() > SYMMETRY_TOLERANCE * scale:
            raise UsageError("sigma must be symmetric")
        # (a + b) and (b + a) round identically, so this is exactly symmetric
        sigma = 0.5 * (sigma + sigma.T)

        names = self.names
        if names is not None:
            names = tuple(str(s) for s in names)
            if len(names) != n:
                raise UsageError(f"expected {n} names, got {len(names)}")

        object.__setattr__(self, "mu", _readonly(mu))
        object.__setattr__(self, "sigma", _readonly(sigma))
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return int(self.mu.size)

    @property
    def problem_id(self) -> str:
        """``meta["id"]`` when set, otherwise a stable content hash."""
        if self.meta.get("id"):
            return str(self.meta["id"])
        digest = hashlib.sha1()
        digest.update(self.mu.tobytes())
        digest.update(self.sigma.tobytes())
        digest.update(np.float64(self.q).tobytes())
        return f"qubo-{digest.hexdigest()[:12]}"

    def to_dict(self) -> Dict[str, Any]:
        data: Dict[str, Any] = {
            "n": self.n,
            "q": self.q,
            "mu": self.mu.tolist(),
            "sigma": self.sigma.tolist(),
        }
        if self.names is not None:
            data["names"] = list(self.names)
        if self.meta:
            data["meta"] = dict(self.meta)
        return data

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "QuboProblem":
        """Build a problem from the JSON document layout.

        Raises:
            DataError: On missing keys, bad shapes or asymmetric sigma.
        """
        try:
            n = int(data["n"])
            mu = np.asarray(data["mu"], dtype=float)
            sigma = np.asarray(data["sigma"], dtype=float)
            q = float(data.get("q", DEFAULT_RISK_AVERSION))
        except KeyError as e:
            raise DataError(f"problem document is missing key {e}")
        except (TypeError, ValueError) as e:
            raise DataError(f"problem document has malformed values: {e}")
        if mu.shape != (n,):
            raise DataError(f"mu has shape {mu.shape}, expected ({n},)")
        try:
            return cls(mu=mu, sigma=sigma, q=q, names=data.get("names"), meta=data.get("meta") or {})
        except UsageError as e:
            raise DataError(f"invalid problem document: {e}")


@dataclass(frozen=True, eq=False)
class NormalizedCoupling:
    """Covariance divided by its largest absolute entry; entries lie in [-1, 1]."""

    sigma_n: np.ndarray


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Rectangular price history: ``prices[t, i]`` is asset i at ``dates[t]``."""

    dates: Tuple[str, ...]
    prices: np.ndarray
    tickers: Tuple[str, ...]

    def __post_init__(self):
        prices = np.array(self.prices, dtype=float)
        dates = tuple(str(d) for d in self.dates)
        tickers = tuple(str(t) for t in self.tickers)
        if prices.ndim != 2:
            raise DataError("price matrix must be two-dimensional")
        if prices.shape[0] < 2:
            raise DataError("at least two price rows are required")
        if prices.shape != (len(dates), len(tickers)):
            raise DataError(
                f"price matrix shape {prices.shape} does not match "
                f"{len(dates)} dates x {len(tickers)} tickers"
            )
        if not np.isfinite(prices).all():
            raise DataError("price matrix has missing or non-finite values")
        if (prices <= 0).any():
            raise DataError("prices must be positive")
        parsed = pd.to_datetime(pd.Index(dates))
        if not parsed.is_monotonic_increasing or not parsed.is_unique:
            raise DataError("dates must be strictly increasing")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", _readonly(prices))
        object.__setattr__(self, "tickers", tickers)

    @property
    def periods(self) -> int:
        """Number of return periods T."""
        return self.prices.shape[0] - 1


@dataclass(frozen=True)
class SynthSpec:
    """Distribution parameters for synthetic portfolio problems.

    Returns are drawn uniformly from ``[mu_low, mu_high]``. The covariance
    follows a factor model: each asset has ``factors`` loadings drawn from
    ``Normal(loading_mean, 1)``, and the common factors explain a
    ``systematic`` share of its variance while the rest is idiosyncratic.
    Volatilities are log-normal with log-spread ``vol_dispersion``. The result
    is rescaled so the largest variance equals ``variance_scale``.
    """

    mu_low: float = -0.0005
    mu_high: float = 0.002
    factors: int = 3
    loading_mean: float = 1.0
    systematic: float = 0.2
    vol_dispersion: float = 0.5
    variance_scale: float = 1e-3
    q: float = DEFAULT_RISK_AVERSION

    def __post_init__(self):
        if not (np.isfinite(self.mu_low) and np.isfinite(self.mu_high)) or self.mu_low > self.mu_high:
            raise UsageError(f"invalid return interval [{self.mu_low}, {self.mu_high}]")
        if self.factors < 1:
            raise UsageError(f"factors must be >= 1, got {self.factors}")
        if not np.isfinite(self.loading_mean):
            raise UsageError("loading_mean must be finite")
        if not 0.0 <= self.systematic <= 1.0:
            raise UsageError(f"systematic must be in [0, 1], got {self.systematic}")
        if not np.isfinite(self.vol_dispersion) or self.vol_dispersion < 0:
            raise UsageError(f"vol_dispersion must be >= 0, got {self.vol_dispersion}")
        if not np.isfinite(self.variance_scale) or self.variance_scale <= 0:
            raise UsageError(f"variance_scale must be positive, got {self.variance_scale}")
        if not np.isfinite(self.q) or self.q < 0:
            raise UsageError(f"q must be >= 0, got {self.q}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SynthSpec":
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise UsageError(f"unknown synth parameters: {sorted(unknown)}")
        return cls(**data)


def evaluate_fitness(problem: QuboProblem, x) -> float:
    """Objective value ``mu.x - q * x^T Sigma x`` of a bit vector.

    Raises:
        UsageError: When ``len(x) != problem.n``.
    """
    xf = as_bitstring(x, problem.n).astype(float)
    return float(problem.mu @ xf - problem.q * (xf @ problem.sigma @ xf))


def normalize_coupling(problem: QuboProblem) -> NormalizedCoupling:
    """Scale sigma so its largest absolute entry is 1 (all-zero stays all-zero)."""
    peak = float(np.abs(problem.sigma).max())
    if peak == 0.0:
        return NormalizedCoupling(_readonly(np.zeros_like(problem.sigma)))
    return NormalizedCoupling(_readonly(problem.sigma / peak))


def build_portfolio(prices: PriceSeries, q: float = DEFAULT_RISK_AVERSION, problem_id: Optional[str] = None) -> QuboProblem:
    """Estimate mean returns and covariance from a price history.

    Simple returns ``R_t = P_t / P_{t-1} - 1``; ``mu`` is their sample mean and
    sigma the sample covariance with ``1/(T-1)`` normalization (all-zero when
    only one return period exists).
    """
    p = prices.prices
    # Simple returns per period
    returns = p[1:] / p[:-1] - 1.0
    periods = returns.shape[0]
    mu = returns.mean(axis=0)
    if periods >= 2:
        sigma = np.atleast_2d(np.cov(returns, rowvar=False, ddof=1))
    else:
        logger.warning("only one return period; covariance is set to zero")
        sigma = np.zeros((p.shape[1], p.shape[1]))
    meta: Dict[str, Any] = {"source": "prices", "periods": periods}
    if problem_id:
        meta["id"] = problem_id
    if prices.dates:
        meta["start"] = prices.dates[0]
        meta["end"] = prices.dates[-1]
    return QuboProblem(mu=mu, sigma=sigma, q=q, names=prices.tickers, meta=meta)


def synth_problem(n: int, seed: int, spec: Optional[SynthSpec] = None) -> QuboProblem:
    """Deterministic synthetic portfolio problem with a PSD covariance."""
    if n < 1:
        raise UsageError(f"n must be >= 1, got {n}")
    spec = spec or SynthSpec()
    rng = np.random.default_rng(seed)
    mu = rng.uniform(spec.mu_low, spec.mu_high, size=n)
    loadings = rng.normal(spec.loading_mean, 1.0, size=(n, spec.factors))
    norms = np.linalg.norm(loadings, axis=1, keepdims=True)
    loadings /= np.where(norms > 0, norms, 1.0)
    vol = np.exp(spec.vol_dispersion * rng.normal(size=n))

    # A = [sqrt(s) D L | sqrt(1 - s) D], so off-diagonal correlations stay within +-s
    a = np.hstack([np.sqrt(spec.systematic) * vol[:, None] * loadings, np.diag(np.sqrt(1.0 - spec.systematic) * vol)])
    sigma = a @ a.T
    peak = float(np.diag(sigma).max())
    if peak > 0:
        sigma *= spec.variance_scale / peak
    sigma = 0.5 * (sigma + sigma.T)
    return QuboProblem(
        mu=mu,
        sigma=sigma,
        q=spec.q,
        names=tuple(f"A{i:03d}" for i in range(n)),
        meta={"id": f"synth-n{n}-s{seed}", "source": "synth", "seed": seed},
    )


def permute(problem: QuboProblem, order: Sequence[int]) -> QuboProblem:
    """Relabel variables so new variable k is old variable ``order[k]``."""
    order = np.asarray(order, dtype=int)
    if sorted(order.tolist()) != list(range(problem.n)):
        raise UsageError("order must be a permutation of range(n)")
    names = tuple(problem.names[i] for i in order) if problem.names else None
    return QuboProblem(
        mu=problem.mu[order],
        sigma=problem.sigma[np.ix_(order, order)],
        q=problem.q,
        names=names,
        meta=problem.meta,
    )


def load_problem(path: str) -> QuboProblem:
    """Read a problem JSON file.

    Raises:
        DataError: When the file cannot be read or parsed.
    """
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise DataError(f"cannot read problem file {path}: {e}")
    if not isinstance(data, dict):
        raise DataError(f"problem file {path} must hold a JSON object")
    return QuboProblem.from_dict(data)


def dump_problem(problem: QuboProblem) -> str:
    return json.dumps(problem.to_dict(), sort_keys=True) + "\n"


def save_problem(problem: QuboProblem, path: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(dump_problem(problem))
    logger.info("wrote problem %s (n=%d) to %s", problem.problem_id, problem.n, path)


def load_prices(path: str) -> PriceSeries:
    """Read a price CSV whose first column is ``date`` and the rest are tickers.

    Raises:
        DataError: On a wrong header, missing values, non-numeric or
            non-positive prices, or unordered dates.
    """
    try:
        frame = pd.read_csv(path)
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"cannot read price file {path}: {e}")
    # Validate the header, then the price block
    if frame.columns.empty or frame.columns[0] != "date":
        raise DataError(f"price file {path}: first column must be 'date'")
    if frame.shape[1] < 2:
        raise DataError(f"price file {path}: no ticker columns")
    values = frame.iloc[:, 1:]
    if values.isna().any().any():
        raise DataError(f"price file {path}: missing values")
    try:
        matrix = values.to_numpy(dtype=float)
    except ValueError as e:
        raise DataError(f"price file {path}: non-numeric price: {e}")
    try:
        dates = pd.to_datetime(frame["date"])
    except (ValueError, TypeError) as e:
        raise DataError(f"price file {path}: unparseable date: {e}")
    series = PriceSeries(
        dates=tuple(d.isoformat() for d in dates),
        prices=matrix,
        tickers=tuple(values.columns),
    )
    logger.info("loaded %d assets x %d periods from %s", len(series.tickers), series.periods, path)
    return series


def select_subsets(prices: PriceSeries, size: int, count: int, seed: int) -> List[PriceSeries]:
    """Draw ``count`` disjoint random ticker subsets of ``size`` assets each."""
    n = len(prices.tickers)
    if size < 1 or count < 1:
        raise UsageError("subset size and count must be >= 1")
    if size * count > n:
        raise UsageError(f"{count} disjoint subsets of {size} need {size * count} assets, have {n}")
    rng = np.random.default_rng(seed)
    drawn = rng.permutation(n)[: size * count].reshape(count, size)
    subsets = []
    for columns in drawn:
        columns = np.sort(columns)
        subsets.append(
            PriceSeries(
                dates=prices.dates,
                prices=prices.prices[:, columns],
                tickers=tuple(prices.tickers[i] for i in columns),
            )
        )
    return subsets
