"""Instance construction: price ingestion, moment estimation, instance files.

An instance file is JSON with the fields
``{names, mean, covariance, alpha, epsilon, beta, cash_index,
semicontinuous: {l, u}}`` (the last two optional).  Floats are serialized at
full precision, so write/read round-trips are bit-exact.

The shipped default instance is synthetic: twenty risky assets with means in
[1.02, 1.15] and factor-model covariance scaled to annual volatilities in
[0.05, 0.35], plus a unit-return cash column.  Real price panels can be
ingested from CSV instead.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np

from .certificate import RiskSpec
from .errors import ConfigError
from .gaussian import GaussianModel
from .mip import SemiContinuousSpec
from .saa import ChanceProgramSpec

DEFAULT_INSTANCE_SEED = 90210


@dataclass(frozen=True)
class PricePanel:
    """Monthly price history, time-major: rows are months, columns assets."""

    names: tuple
    prices: np.ndarray
    timestamps: tuple       # "YYYY-MM" strings, consecutive months

    def __post_init__(self):
        p = np.asarray(self.prices, dtype=float)
        if p.ndim != 2 or p.shape != (len(self.timestamps), len(self.names)):
            raise ValueError("prices must be T x n matching timestamps and names")
        if not np.all(p > 0.0):
            raise ValueError("prices must be strictly positive")
        months = [_month_number(t) for t in self.timestamps]
        if any(b - a != 1 for a, b in zip(months, months[1:])):
            raise ValueError("timestamps must be consecutive months")
        object.__setattr__(self, "prices", p)


def _month_number(stamp: str) -> int:
    try:
        year, month = stamp.split("-")[:2]
        m = int(month)
        if not 1 <= m <= 12:
            raise ValueError
        return 12 * int(year) + (m - 1)
    except (ValueError, AttributeError):
        raise ValueError(f"bad year-month timestamp {stamp!r}") from None


def read_price_csv(path) -> PricePanel:
    """CSV with header ``date,a1,...,an`` and ISO year-month date values."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0].strip().lower() != "date":
            raise ConfigError(f"{path}: first column must be 'date'")
        names = tuple(h.strip() for h in header[1:])
        stamps, rows = [], []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            stamps.append(rec[0].strip())
            try:
                rows.append([float(v) for v in rec[1:]])
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: non-numeric price") from None
    try:
        return PricePanel(names, np.array(rows), tuple(stamps))
    except ValueError as e:
        raise ConfigError(f"{path}: {e}") from None


def returns_from_prices(panel: PricePanel, lag_months: int = 12) -> np.ndarray:
    """Gross returns: each month's price over the price ``lag_months`` back."""
    if lag_months < 1:
        raise ValueError("lag_months must be positive")
    T = panel.prices.shape[0]
    if T <= lag_months:
        raise ValueError(f"need more than {lag_months} months of prices, got {T}")
    return panel.prices[lag_months:] / panel.prices[:-lag_months]


def estimate_moments(returns) -> tuple:
    """Sample mean and unbiased covariance, symmetrized."""
    r = np.asarray(returns, dtype=float)
    if r.ndim != 2 or r.shape[0] < 2:
        raise ValueError("need at least two return rows")
    mean = r.mean(axis=0)
    cov = np.cov(r.T, ddof=1).reshape(r.shape[1], r.shape[1])
    cov = 0.5 * (cov + cov.T)
    return mean, cov


# ----------------------------------------------------------------------
# instance files
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class Instance:
    """Everything a solve needs: distribution, thresholds, and options."""

    names: tuple
    model: GaussianModel
    alpha: float
    epsilon: float
    beta: float
    cash_index: int | None = None
    semicontinuous: SemiContinuousSpec | None = None

    @property
    def n_assets(self) -> int:
        return self.model.n_assets

    @property
    def risk_spec(self) -> RiskSpec:
        # certificates use the affine dimension of the budget simplex
        return RiskSpec(self.epsilon, self.beta, max(1, self.n_assets - 1))

    @property
    def program_spec(self) -> ChanceProgramSpec:
        return ChanceProgramSpec(self.alpha, self.model.mean,
                                 cash_index=self.cash_index)


def _require(cond, field, message):
    if not cond:
        raise ConfigError(f"instance field {field}: {message}")


def instance_from_dict(raw: dict) -> Instance:
    for field in ("names", "mean", "covariance", "alpha", "epsilon", "beta"):
        _require(field in raw, field, "missing")
    names = raw["names"]
    _require(isinstance(names, list) and all(isinstance(s, str) for s in names),
             "names", "must be a list of strings")
    n = len(names)
    mean = np.asarray(raw["mean"], dtype=float)
    _require(mean.shape == (n,), "mean", f"must have length {n}")
    cov = np.asarray(raw["covariance"], dtype=float)
    _require(cov.shape == (n, n), "covariance", f"must be {n} x {n}")
    sym_err = float(np.abs(cov - cov.T).max()) if n else 0.0
    _require(sym_err <= 1e-12 * max(1.0, float(np.abs(cov).max())),
             "covariance", f"asymmetric by {sym_err:.3g}")
    alpha = float(raw["alpha"])
    epsilon = float(raw["epsilon"])
    beta = float(raw["beta"])
    _require(0.0 < epsilon < 1.0, "epsilon", "must be in (0,1)")
    _require(0.0 < beta < 1.0, "beta", "must be in (0,1)")
    cash = raw.get("cash_index")
    if cash is not None:
        cash = int(cash)
        _require(0 <= cash < n, "cash_index", f"must be in 0..{n - 1}")
        _require(alpha <= 1.0, "alpha",
                 "must be <= 1 when a cash column is declared")
    semi = None
    if raw.get("semicontinuous") is not None:
        block = raw["semicontinuous"]
        _require(isinstance(block, dict) and {"l", "u"} <= set(block),
                 "semicontinuous", "must be an object with fields l and u")
        try:
            semi = SemiContinuousSpec(float(block["l"]), float(block["u"]))
        except ValueError as e:
            raise ConfigError(f"instance field semicontinuous: {e}") from None
    try:
        model = GaussianModel(mean, cov)
    except Exception as e:
        raise ConfigError(f"instance field covariance: {e}") from None
    return Instance(tuple(names), model, alpha, epsilon, beta, cash, semi)


def instance_to_dict(inst: Instance) -> dict:
    raw = {
        "names": list(inst.names),
        "mean": inst.model.mean.tolist(),
        "covariance": inst.model.covariance.tolist(),
        "alpha": inst.alpha,
        "epsilon": inst.epsilon,
        "beta": inst.beta,
        "cash_index": inst.cash_index,
    }
    if inst.semicontinuous is not None:
        raw["semicontinuous"] = {"l": inst.semicontinuous.lower,
                                 "u": inst.semicontinuous.upper}
    return raw


def read_instance(path) -> Instance:
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"instance file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: not valid JSON ({e})") from None
    return instance_from_dict(raw)


def write_instance(path, inst: Instance) -> None:
    with open(path, "w") as fh:
        json.dump(instance_to_dict(inst), fh, indent=1)
        fh.write("\n")


def default_instance(seed: int = DEFAULT_INSTANCE_SEED) -> Instance:
    """Synthetic twenty-risky-assets-plus-cash instance, fully seeded.

    alpha = 0.95 is the value floor (at most a 5% loss), epsilon = 0.05 the
    risk level, beta = 5e-6 the certificate confidence; the semi-continuous
    band for integer runs is [0.05, 0.30].
    """
    rng = np.random.default_rng(seed)
    n_risky = 20
    means = np.sort(rng.uniform(1.02, 1.15, n_risky))[::-1]
    factors = rng.normal(size=(n_risky, 4))
    idio = rng.uniform(0.2, 1.0, n_risky)
    raw_cov = factors @ factors.T + np.diag(idio)
    target_vol = rng.uniform(0.05, 0.35, n_risky)
    scale = target_vol / np.sqrt(np.diag(raw_cov))
    cov_risky = raw_cov * np.outer(scale, scale)
    n = n_risky + 1
    mean = np.append(means, 1.0)
    cov = np.zeros((n, n))
    cov[:n_risky, :n_risky] = cov_risky
    names = tuple(f"A{i + 1:02d}" for i in range(n_risky)) + ("CASH",)
    return Instance(names, GaussianModel(mean, cov), alpha=0.95, epsilon=0.05,
                    beta=5e-6, cash_index=n_risky,
                    semicontinuous=SemiContinuousSpec(0.05, 0.30))
