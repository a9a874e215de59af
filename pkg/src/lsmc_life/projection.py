"""Stochastic net cash flows and the regression inputs built from them.

Each path's adjustment factors change the decrements of every age group;
the stochastic in-force ``lives*[t]`` then carries the volume factor
``V(t) = lives*[t] / lives_be[t]`` implicitly.  For every path the batch
keeps the first-year regressors, the discounted year-one deviation
(experience variance) and the discounted deviation of years ``2..T``
(the regression response).
"""

from __future__ import annotations

import csv
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drivers import BLOCK_SIZE, AdjustmentFactorPath, CalamityModel, PathSet
from .errors import HorizonMismatchError, InvalidRateError
from .portfolio import (
    AssumptionSet,
    BookGrid,
    CashflowVector,
    Portfolio,
    build_grid,
    project_grid_best_estimate,
    roll_forward,
)

CLIP_WARN_RATE = 0.001

OBSERVABLE_REGRESSORS = ("af_mort_1", "af_pandemic_1", "af_lapse_1")
COMBINED_REGRESSORS = ("af_deaths_1", "af_lapse_1")
LATENT_REGRESSORS = ("trend_1", "basis", "calamity_1", "af_lapse_1")

BATCH_COLUMNS = ("path", "af_mort_1", "af_lapse_1", "ev", "y")


def reference_rates(grid: BookGrid, weight: str = "claims") -> np.ndarray:
    """Portfolio-average best-estimate mortality rate per year.

    ``claims`` weights each age group by its expected in-force sum assured,
    so the combined factor at these rates equals the ratio of actual to
    expected death outgo.  ``lives`` weights by expected in-force lives,
    giving the aggregate rate of the whole book.
    """
    survival = np.ones_like(grid.q)
    survival[:, 1:] = np.cumprod(1.0 - grid.q - grid.w[None, :], axis=1)[:, :-1]
    if weight == "claims":
        w = survival * grid.sum_assured
    elif weight == "lives":
        w = survival * grid.lives
    else:
        raise ValueError(f"unknown weighting {weight!r}")
    total = w.sum(axis=0)
    rates = np.empty(grid.horizon)
    last = float(grid.q[:, 0].mean())
    for t in range(grid.horizon):
        if total[t] > 0:
            last = float((w[:, t] * grid.q[:, t]).sum() / total[t])
        rates[t] = last
    return rates


def project_stochastic(portfolio: Portfolio, assumptions: AssumptionSet, path: AdjustmentFactorPath) -> CashflowVector:
    if path.horizon != assumptions.horizon:
        raise HorizonMismatchError(f"path spans {path.horizon} years, assumptions {assumptions.horizon}")
    grid = build_grid(portfolio, assumptions)
    scale = (path.trend * path.basis)[None, :]
    shift = (path.calamity - path.trend * path.basis * path.mean_load)[None, :]
    premium, death, _, _ = roll_forward(grid, scale, shift, path.af_lapse[None, :])
    return CashflowVector(premium[0], death[0])


@dataclass
class SimulationBatch:
    """Per-path regression inputs.  Row ``p`` belongs to path index ``p``.

    ``af_mort_1`` is the first-year base-mortality factor (trend times
    basis), ``af_deaths_1`` the ratio of actual to expected year-one death
    outgo, which additionally contains the pandemic excess.
    """

    x: np.ndarray
    regressor_names: tuple[str, ...]
    y: np.ndarray
    ev: np.ndarray
    af_mort_1: np.ndarray
    af_deaths_1: np.ndarray
    af_lapse_1: np.ndarray
    seed: int
    clip_count: int
    ncf_be: np.ndarray
    ncf_mean: np.ndarray
    discount: np.ndarray
    recentered: bool = False
    paths: PathSet | None = field(default=None, repr=False)
    le_rates: np.ndarray | None = field(default=None, repr=False)

    @property
    def n_sims(self) -> int:
        return self.y.shape[0]

    @property
    def clip_rate(self) -> float:
        return self.clip_count / (self.n_sims * self.ncf_be.shape[0])

    def scatter_rows(self):
        for p in range(self.n_sims):
            yield p, float(self.af_mort_1[p]), float(self.af_lapse_1[p]), float(self.ev[p]), float(self.y[p])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(BATCH_COLUMNS)
            for row in self.scatter_rows():
                writer.writerow((row[0],) + tuple(repr(v) for v in row[1:]))


def _project_block(grid: BookGrid, paths: PathSet, lo: int, hi: int):
    premium, death, clipped, _ = roll_forward(
        grid, paths.mort_scale[lo:hi], paths.mort_shift[lo:hi], paths.af_lapse[lo:hi]
    )
    return premium - death, death[:, 0], clipped


def build_batch(
    portfolio: Portfolio,
    assumptions: AssumptionSet,
    paths: PathSet,
    *,
    regressors: str = "observable",
    recenter: bool = False,
    threads: int = 1,
) -> SimulationBatch:
    """Project every path and assemble the regression inputs.

    Expected cash flows are the best-estimate projection unless ``recenter``
    is set, in which case the batch sample mean per year is used instead.

    The default regressors are the base-mortality factor, the pandemic excess
    relative to expected deaths and the lapse factor, all minus their mean.
    ``regressors="combined"`` uses the single actual-to-expected death ratio
    instead of the first two; with heavy-tailed pandemic shocks that ratio
    is dominated by one-off excess deaths and flattens the fitted trend
    response.  ``regressors="latent"`` swaps the observable first-year factors for the
    individual driver states (a diagnostic view; they are not observable
    from one year of portfolio experience).  An explicit tuple of column
    names selects a subset, e.g. to drop a driver that has no volatility.
    """
    if len(paths) < 2:
        raise ValueError("a batch needs at least two paths")
    if paths.horizon != assumptions.horizon:
        raise HorizonMismatchError(f"paths span {paths.horizon} years, assumptions {assumptions.horizon}")
    grid = build_grid(portfolio, assumptions)
    _check_mean_load(grid, paths.mean_load)
    ref_1 = reference_rates(grid)[0]
    be = project_grid_best_estimate(grid)
    # a book without expected year-one deaths has no observable mortality experience
    death_be_1 = be.death[0] if be.death[0] > 0 else np.inf

    n = len(paths)
    spans = [(lo, min(lo + BLOCK_SIZE, n)) for lo in range(0, n, BLOCK_SIZE)]
    if threads > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: _project_block(grid, paths, *s), spans))
    else:
        parts = [_project_block(grid, paths, *s) for s in spans]

    delta = assumptions.discount
    ev = np.empty(n)
    y = np.empty(n)
    af_deaths_1 = np.empty(n)
    ncf_sum = np.zeros(assumptions.horizon)
    clip_count = 0
    for (lo, hi), (ncf, death_1, clipped) in zip(spans, parts):
        ev[lo:hi] = ncf[:, 0]
        y[lo:hi] = (ncf[:, 1:] * delta[1:]).sum(axis=1)
        af_deaths_1[lo:hi] = death_1 / death_be_1
        ncf_sum += ncf.sum(axis=0)
        clip_count += int(clipped.sum())
    ncf_mean = ncf_sum / n

    centre = ncf_mean if recenter else be.ncf
    ev = delta[0] * (ev - centre[0])
    y = y - (centre[1:] * delta[1:]).sum()

    af_lapse_1 = paths.af_lapse[:, 0].copy()
    base_1 = paths.mort_scale[:, 0].copy()
    load = paths.mean_load
    columns = {
        "af_mort_1": base_1 - 1.0,
        "af_pandemic_1": (paths.calamity[:, 0] - load) / ref_1 if ref_1 > 0 else np.zeros(n),
        "af_deaths_1": af_deaths_1 - 1.0,
        "af_lapse_1": af_lapse_1 - 1.0,
        "trend_1": paths.trend[:, 0] - 1.0,
        "basis": paths.basis - 1.0,
        "calamity_1": paths.calamity[:, 0] / load - 1.0 if load > 0 else paths.calamity[:, 0],
    }
    presets = {"observable": OBSERVABLE_REGRESSORS, "combined": COMBINED_REGRESSORS, "latent": LATENT_REGRESSORS}
    if isinstance(regressors, str):
        if regressors not in presets:
            raise ValueError(f"unknown regressor set {regressors!r}")
        names = presets[regressors]
    else:
        names = tuple(regressors)
        unknown = [r for r in names if r not in columns]
        if unknown:
            raise ValueError(f"unknown regressors {unknown}")
    x = np.column_stack([columns[r] for r in names]) if names else np.empty((n, 0))

    if clip_count > CLIP_WARN_RATE * n * assumptions.horizon:
        warnings.warn(
            f"combined decrements clipped in {clip_count} path-years "
            f"({clip_count / (n * assumptions.horizon):.3%}); check the driver calibration",
            stacklevel=2,
        )
    return SimulationBatch(
        x=x,
        regressor_names=names,
        y=y,
        ev=ev,
        af_mort_1=base_1,
        af_deaths_1=af_deaths_1,
        af_lapse_1=af_lapse_1,
        seed=paths.seed,
        clip_count=clip_count,
        ncf_be=be.ncf,
        ncf_mean=ncf_mean,
        discount=delta.copy(),
        recentered=recenter,
        paths=paths,
        le_rates=reference_rates(grid, "lives"),
    )


def active_regressors(models) -> tuple[str, ...]:
    """Observable regressors whose drivers actually vary under ``models``."""
    names = []
    if models.trend.sigma > 0 or models.basis.sigma > 0:
        names.append("af_mort_1")
    if isinstance(models.calamity, CalamityModel):
        names.append("af_pandemic_1")
    if models.lapse.sigma > 0:
        names.append("af_lapse_1")
    return tuple(names)


def _check_mean_load(grid: BookGrid, mean_load: float):
    if mean_load <= 0:
        return
    low = grid.active & (grid.q < mean_load)
    if low.any():
        g, t = map(int, np.argwhere(low)[0])
        raise InvalidRateError(
            f"best-estimate rate {grid.q[g, t]:.3g} at age {int(grid.ages[g])}, year {t + 1} is below "
            f"the calamity mean load {mean_load:.3g} it is assumed to contain"
        )
