"""Stochastic adjustment factors for mortality and lapse.

Four independent drivers are simulated per path:

* trend: mean-one geometric Brownian motion ``exp(s W(t) - s^2 t / 2)``
  multiplying the base mortality rate,
* basis: a lognormal level factor with mean one, drawn once per path,
* calamity: an absolute excess mortality rate, i.i.d. Pareto per year,
* lapse: a mean-one geometric Brownian motion multiplying lapse rates.

The stochastic mortality rate of a cell with best-estimate rate ``q`` is
``trend * basis * (q - mean_load) + calamity``: the best estimate already
contains the expected calamity load, so every adjustment factor keeps mean one.

Random numbers come from counter-based Philox substreams keyed by
``(seed, driver, block)`` where a block is a fixed run of ``BLOCK_SIZE`` path
indices.  A path therefore depends only on the seed and its own index, no
matter how many paths are requested or how many threads generate them.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .errors import CalibrationError

BLOCK_SIZE = 1024

TREND, LAPSE, BASIS, CALAMITY = 0, 1, 2, 3

DEFAULT_FUNNEL_QUANTILES = (0.05, 0.25, 0.75, 0.95)


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator addressed by ``seed`` and an integer key path."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True)
class TrendModel:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("trend volatility must be non-negative")

    def quantile(self, p: float, year: float) -> float:
        """Analytic quantile of the trend factor at ``year``."""
        s = self.sigma
        return math.exp(s * norm.ppf(p) * math.sqrt(year) - 0.5 * s * s * year)


@dataclass(frozen=True)
class CalamityModel:
    """Pareto excess mortality: ``P(C > x) = (xm / x) ** alpha`` for ``x >= xm``."""

    alpha: float
    xm: float

    def __post_init__(self):
        if not self.alpha > 1:
            raise CalibrationError(f"Pareto shape {self.alpha} must exceed 1 for the mean to exist")
        if not self.xm > 0:
            raise ValueError("Pareto scale must be positive")

    @property
    def mean_load(self) -> float:
        return self.alpha * self.xm / (self.alpha - 1)

    def quantile(self, p):
        return self.xm * (1.0 - np.asarray(p, dtype=float)) ** (-1.0 / self.alpha)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x < self.xm, 0.0, 1.0 - (self.xm / np.maximum(x, self.xm)) ** self.alpha)

    def from_uniform(self, u):
        """Inverse-transform sample from exceedance probabilities ``u`` in (0, 1]."""
        return self.xm * u ** (-1.0 / self.alpha)


@dataclass(frozen=True)
class FixedCalamity:
    """Degenerate calamity driver that always realizes its mean load."""

    load: float = 0.0

    @property
    def mean_load(self) -> float:
        return self.load

    def from_uniform(self, u):
        return np.full_like(u, self.load)


@dataclass(frozen=True)
class BasisRiskModel:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("basis-risk standard deviation must be non-negative")

    @property
    def log_sigma(self) -> float:
        return math.sqrt(math.log1p(self.sigma**2))


@dataclass(frozen=True)
class LapseDriverModel:
    sigma: float

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("lapse volatility must be non-negative")


@dataclass(frozen=True)
class RiskModels:
    trend: TrendModel
    calamity: CalamityModel | FixedCalamity
    basis: BasisRiskModel
    lapse: LapseDriverModel

    @classmethod
    def degenerate(cls, load: float = 0.0) -> "RiskModels":
        return cls(TrendModel(0.0), FixedCalamity(load), BasisRiskModel(0.0), LapseDriverModel(0.0))

    def describe(self) -> dict:
        cal = self.calamity
        calamity = (
            {"kind": "pareto", "alpha": cal.alpha, "xm": cal.xm, "mean_load": cal.mean_load}
            if isinstance(cal, CalamityModel)
            else {"kind": "fixed", "load": cal.load}
        )
        return {
            "sigma_trend": self.trend.sigma,
            "sigma_basis": self.basis.sigma,
            "sigma_lapse": self.lapse.sigma,
            "calamity": calamity,
        }


def calibrate_calamity(q_a: float = 0.98, x_a: float = 0.0004, q_b: float = 0.999, x_b: float = 0.005) -> CalamityModel:
    """Pareto parameters matching two quantile anchors exactly."""
    if not 0 < q_a < q_b < 1:
        raise CalibrationError("need 0 < q_a < q_b < 1")
    if not 0 < x_a < x_b:
        raise CalibrationError("need 0 < x_a < x_b")
    alpha = math.log((1 - q_a) / (1 - q_b)) / math.log(x_b / x_a)
    if alpha <= 1 + 1e-12:
        raise CalibrationError(f"anchors imply Pareto shape {alpha:.6g} <= 1; the calamity mean would not exist")
    xm = x_a * (1 - q_a) ** (1 / alpha)
    return CalamityModel(alpha, xm)


def calibrate_trend(target_quantile: float = 0.95, target_factor: float = 1.45, at_year: int = 40) -> TrendModel:
    """Trend volatility putting the ``target_quantile`` of the factor at ``target_factor``.

    Solves ``(a/2) s^2 - z sqrt(a) s + ln(f) = 0`` and keeps the smaller root.
    """
    if not target_factor > 1:
        raise CalibrationError("target factor must exceed 1")
    if not 0.5 < target_quantile < 1:
        raise CalibrationError("target quantile must lie in (0.5, 1)")
    if at_year <= 0:
        raise CalibrationError("anchor year must be positive")
    z = norm.ppf(target_quantile)
    a = float(at_year)
    disc = z * z * a - 2.0 * a * math.log(target_factor)
    if disc < 0:
        reachable = math.exp(z * z / 2)
        raise CalibrationError(
            f"a mean-one trend cannot put its {target_quantile:g} quantile above {reachable:.4g} "
            f"(requested {target_factor:g})"
        )
    sigma = (z * math.sqrt(a) - math.sqrt(disc)) / a
    return TrendModel(sigma)


def calibrate_basis(smoker_share_be: float, smoker_share_adverse: float, smoker_multiplier: float = 2.0) -> BasisRiskModel:
    """Basis volatility from a smoker-share mismatch; the non-smoker rate cancels."""
    for share in (smoker_share_be, smoker_share_adverse):
        if not 0 <= share <= 1:
            raise CalibrationError("smoker shares must lie in [0, 1]")
    if smoker_share_adverse < smoker_share_be:
        raise CalibrationError("adverse smoker share must not be below the best-estimate share")
    if smoker_multiplier <= 0:
        raise CalibrationError("smoker multiplier must be positive")
    m = smoker_multiplier
    ratio = (smoker_share_adverse * m + 1 - smoker_share_adverse) / (smoker_share_be * m + 1 - smoker_share_be)
    return BasisRiskModel(ratio - 1)


@dataclass(frozen=True)
class AdjustmentFactorPath:
    """One simulated path.  ``af_mort`` is relative to the run's reference rates."""

    trend: np.ndarray
    basis: float
    calamity: np.ndarray
    af_lapse: np.ndarray
    af_mort: np.ndarray
    mean_load: float = 0.0

    @classmethod
    def from_factors(cls, af_mort, af_lapse) -> "AdjustmentFactorPath":
        """Path applying plain multipliers to every mortality and lapse rate."""
        af_mort = np.asarray(af_mort, dtype=float)
        return cls(af_mort, 1.0, np.zeros_like(af_mort), np.asarray(af_lapse, dtype=float), af_mort, 0.0)

    @property
    def horizon(self) -> int:
        return self.trend.shape[0]


@dataclass
class PathSet:
    """``n`` simulated driver paths over ``T`` years, stored column-wise.

    ``reference_rates`` is the best-estimate rate against which the combined
    mortality factor ``af_mort`` is expressed (for a portfolio, its
    claims-weighted average rate; see ``projection.reference_rates``).
    """

    trend: np.ndarray
    basis: np.ndarray
    calamity: np.ndarray
    af_lapse: np.ndarray
    mean_load: float
    reference_rates: np.ndarray
    seed: int

    def __len__(self):
        return self.trend.shape[0]

    @property
    def horizon(self) -> int:
        return self.trend.shape[1]

    @property
    def mort_scale(self) -> np.ndarray:
        return self.trend * self.basis[:, None]

    @property
    def mort_shift(self) -> np.ndarray:
        return self.calamity - self.mort_scale * self.mean_load

    @property
    def af_mort(self) -> np.ndarray:
        q = self.reference_rates[None, :]
        return (q * self.mort_scale + self.mort_shift) / q

    def __getitem__(self, i: int) -> AdjustmentFactorPath:
        return AdjustmentFactorPath(
            trend=self.trend[i],
            basis=float(self.basis[i]),
            calamity=self.calamity[i],
            af_lapse=self.af_lapse[i],
            af_mort=self.af_mort[i],
            mean_load=self.mean_load,
        )

    def component(self, name: str) -> np.ndarray:
        if name == "mort":
            return self.af_mort
        if name == "lapse":
            return self.af_lapse
        if name == "trend":
            return self.trend
        raise ValueError(f"unknown component {name!r}; expected mort, lapse or trend")


def _geometric(sigma: float, z: np.ndarray, start: int = 1) -> np.ndarray:
    t = np.arange(start, start + z.shape[1], dtype=float)
    return np.exp(sigma * np.cumsum(z, axis=1) - 0.5 * sigma * sigma * t)


def _simulate_block(models: RiskModels, horizon: int, seed: int, block: int, size: int):
    z_trend = substream(seed, TREND, block).standard_normal((size, horizon))
    z_lapse = substream(seed, LAPSE, block).standard_normal((size, horizon))
    z_basis = substream(seed, BASIS, block).standard_normal(size)
    u = 1.0 - substream(seed, CALAMITY, block).random((size, horizon))
    s = models.basis.log_sigma
    return (
        _geometric(models.trend.sigma, z_trend),
        np.exp(s * z_basis - 0.5 * s * s),
        models.calamity.from_uniform(u),
        _geometric(models.lapse.sigma, z_lapse),
    )


def simulate_paths(
    models: RiskModels,
    assumptions,
    n_sims: int,
    seed: int,
    *,
    reference_rates: Sequence[float] | None = None,
    threads: int = 1,
) -> PathSet:
    """Simulate ``n_sims`` adjustment-factor paths over the assumptions' horizon.

    Without ``reference_rates`` the combined mortality factor is expressed
    against the age-averaged best-estimate table rate of each year.
    """
    if n_sims < 1:
        raise ValueError("n_sims must be at least 1")
    T = assumptions.horizon
    if reference_rates is None:
        reference_rates = table_average_rates(assumptions)
    reference_rates = np.asarray(reference_rates, dtype=float)
    if reference_rates.shape != (T,):
        raise ValueError(f"reference rates need {T} entries")

    blocks = [(b, min(BLOCK_SIZE, n_sims - b * BLOCK_SIZE)) for b in range((n_sims + BLOCK_SIZE - 1) // BLOCK_SIZE)]
    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda bs: _simulate_block(models, T, seed, *bs), blocks))
    else:
        parts = [_simulate_block(models, T, seed, *bs) for bs in blocks]
    trend, basis, calamity, af_lapse = (np.concatenate(p) for p in zip(*parts))
    return PathSet(trend, basis, calamity, af_lapse, models.calamity.mean_load, reference_rates, seed)


def simulate_path(models: RiskModels, assumptions, seed: int, index: int, reference_rates=None) -> AdjustmentFactorPath:
    """Regenerate the single path ``index`` of a run seeded with ``seed``."""
    block, row = divmod(index, BLOCK_SIZE)
    trend, basis, calamity, af_lapse = _simulate_block(models, assumptions.horizon, seed, block, row + 1)
    if reference_rates is None:
        reference_rates = table_average_rates(assumptions)
    ps = PathSet(
        trend[row:], basis[row:], calamity[row:], af_lapse[row:],
        models.calamity.mean_load, np.asarray(reference_rates, dtype=float), seed,
    )
    return ps[0]


def table_average_rates(assumptions) -> np.ndarray:
    table = assumptions.mortality
    years = range(1, assumptions.horizon + 1)
    if table.rates.shape[1] == 1:
        return np.full(assumptions.horizon, table.rates[:, 0].mean())
    cols = [min(y, table.rates.shape[1]) - 1 for y in years]
    return table.rates[:, cols].mean(axis=0)


@dataclass(frozen=True)
class FunnelTable:
    component: str
    years: np.ndarray
    quantiles: tuple[float, ...]
    values: np.ndarray
    mean: np.ndarray

    def width(self, lower: float = 0.05, upper: float = 0.95) -> np.ndarray:
        return self.values[self.quantiles.index(upper)] - self.values[self.quantiles.index(lower)]

    def rows(self):
        for j, year in enumerate(self.years):
            yield int(year), [float(v) for v in self.values[:, j]], float(self.mean[j])


def funnel(paths: PathSet, component: str = "mort", quantiles: Sequence[float] = DEFAULT_FUNNEL_QUANTILES) -> FunnelTable:
    """Per-year quantile envelope ("funnel of doubt") of one driver component.

    Quantiles use the inverse empirical CDF, averaging the two neighbouring
    order statistics when ``n * p`` is integral.
    """
    if len(paths) < 1:
        raise ValueError("funnel needs at least one path")
    quantiles = tuple(float(p) for p in quantiles)
    if any(not 0 < p < 1 for p in quantiles):
        raise ValueError("quantiles must lie in (0, 1)")
    data = paths.component(component)
    values = np.quantile(data, quantiles, axis=0, method="averaged_inverted_cdf")
    return FunnelTable(component, np.arange(1, data.shape[1] + 1), quantiles, np.atleast_2d(values), data.mean(axis=0))
