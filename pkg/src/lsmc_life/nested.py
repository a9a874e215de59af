"""Brute-force nested simulation of the one-year own-funds change.

Used only to validate the regression shortcut on small books.  Each outer
path fixes the year-one driver states; ``n_inner`` continuations of years
``2..T`` restart the trend and lapse diffusions from their year-one values,
draw fresh calamities and keep the outer basis factor.  The inner average of
the discounted deviation plus the outer experience variance is one sample
of the conditional own-funds change.

Inner random numbers come from substreams keyed by the outer index, so the
result does not depend on chunking or thread count.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .drivers import CALAMITY, LAPSE, TREND, RiskModels, _geometric, simulate_paths, substream
from .engine import RiskMeasureReport, risk_measures
from .errors import NestedBudgetExceeded
from .portfolio import AssumptionSet, Portfolio, build_grid, project_grid_best_estimate, roll_forward
from .projection import _check_mean_load

INNER_TAG = 7
OUTER_CHUNK = 16


@dataclass(frozen=True)
class NestedConfig:
    n_outer: int = 5000
    n_inner: int = 1000
    seed: int = 1
    time_budget: float | None = None

    def __post_init__(self):
        if self.n_outer < 1 or self.n_inner < 1:
            raise ValueError("n_outer and n_inner must be positive")

    def recommended(self, level: float) -> bool:
        return self.n_outer >= 200 / (1 - level) and self.n_inner >= 100


@dataclass
class NestedResult:
    report: RiskMeasureReport
    samples: np.ndarray
    experience_variance: np.ndarray
    conditional_mean: np.ndarray
    inner_standard_error: np.ndarray
    config: NestedConfig
    elapsed: float = field(default=0.0, compare=False)

    def as_dict(self) -> dict:
        return {
            "n_outer": self.config.n_outer,
            "n_inner": self.config.n_inner,
            "seed": self.config.seed,
            "risk": self.report.as_dict(),
            "mean_inner_standard_error": float(self.inner_standard_error.mean()),
        }


def _inner_chunk(grid, models: RiskModels, cfg: NestedConfig, outer, lo, hi, be_tail):
    """Conditional means of the discounted tail deviation for outer paths ``lo..hi-1``."""
    T = grid.horizon
    n_in = cfg.n_inner
    m = (hi - lo) * n_in
    trend = np.ones((m, T))
    lapse = np.ones((m, T))
    calamity = np.zeros((m, T))
    for j, o in enumerate(range(lo, hi)):
        rows = slice(j * n_in, (j + 1) * n_in)
        z_t = substream(cfg.seed, INNER_TAG, TREND, o).standard_normal((n_in, T - 1))
        z_l = substream(cfg.seed, INNER_TAG, LAPSE, o).standard_normal((n_in, T - 1))
        u = 1.0 - substream(cfg.seed, INNER_TAG, CALAMITY, o).random((n_in, T - 1))
        trend[rows, 1:] = outer["trend_1"][o] * _geometric(models.trend.sigma, z_t)
        lapse[rows, 1:] = outer["lapse_1"][o] * _geometric(models.lapse.sigma, z_l)
        calamity[rows, 1:] = models.calamity.from_uniform(u)
    basis = np.repeat(outer["basis"][lo:hi], n_in)
    scale = trend * basis[:, None]
    shift = calamity - scale * models.calamity.mean_load
    alive = np.repeat(outer["alive"][:, lo:hi], n_in, axis=1)
    premium, death, _, _ = roll_forward(grid, scale, shift, lapse, start=1, alive=alive)
    tail = ((premium - death) * grid.discount[1:]).sum(axis=1) - be_tail
    tail = tail.reshape(hi - lo, n_in)
    se = tail.std(axis=1, ddof=1) / math.sqrt(n_in) if n_in > 1 else np.zeros(hi - lo)
    return tail.mean(axis=1), se


def nested_scr(
    portfolio: Portfolio,
    assumptions: AssumptionSet,
    models: RiskModels,
    cfg: NestedConfig,
    level: float = 0.995,
    *,
    threads: int = 1,
) -> NestedResult:
    start = time.perf_counter()
    grid = build_grid(portfolio, assumptions)
    _check_mean_load(grid, models.calamity.mean_load)
    T = grid.horizon
    be = project_grid_best_estimate(grid)
    delta = assumptions.discount
    be_tail = float((be.ncf[1:] * delta[1:]).sum())

    paths = simulate_paths(models, assumptions, cfg.n_outer, cfg.seed)
    premium1, death1, _, alive = roll_forward(grid, paths.mort_scale, paths.mort_shift, paths.af_lapse, stop=1)
    ev = delta[0] * ((premium1 - death1)[:, 0] - be.ncf[0])
    outer = {
        "trend_1": paths.trend[:, 0],
        "lapse_1": paths.af_lapse[:, 0],
        "basis": paths.basis,
        "alive": alive,
    }

    cond = np.zeros(cfg.n_outer)
    inner_se = np.zeros(cfg.n_outer)
    if T > 1:
        spans = [(lo, min(lo + OUTER_CHUNK, cfg.n_outer)) for lo in range(0, cfg.n_outer, OUTER_CHUNK)]
        completed = 0

        def run(span):
            return span, _inner_chunk(grid, models, cfg, outer, span[0], span[1], be_tail)

        def collect(results):
            nonlocal completed
            for (lo, hi), (mean, se) in results:
                cond[lo:hi] = mean
                inner_se[lo:hi] = se
                completed += hi - lo
                if cfg.time_budget is not None and time.perf_counter() - start > cfg.time_budget:
                    raise NestedBudgetExceeded(completed, cfg.n_outer)

        if threads > 1:
            pool = ThreadPoolExecutor(max_workers=threads)
            try:
                collect(pool.map(run, spans))
            finally:
                # drop queued chunks when the budget check raises
                pool.shutdown(wait=True, cancel_futures=True)
        else:
            collect(map(run, spans))

    samples = ev + cond
    return NestedResult(
        report=risk_measures(samples, level),
        samples=samples,
        experience_variance=ev,
        conditional_mean=cond,
        inner_standard_error=inner_se,
        config=cfg,
        elapsed=time.perf_counter() - start,
    )


def compare(lsmc: RiskMeasureReport, nested: RiskMeasureReport) -> dict:
    """Relative SCR gap and the combined Monte Carlo standard error of the two quantiles."""
    gap = abs(lsmc.scr - nested.scr)
    combined = math.hypot(lsmc.quantile_se, nested.quantile_se)
    return {
        "scr_lsmc": lsmc.scr,
        "scr_nested": nested.scr,
        "absolute_gap": gap,
        "relative_gap": gap / nested.scr if nested.scr > 0 else (0.0 if gap == 0 else math.inf),
        "combined_standard_error": combined,
        "gap_in_standard_errors": gap / combined if combined > 0 else (0.0 if gap == 0 else math.inf),
    }

