"""
Checking the shortcut against nested simulation
===============================================

On a ten-point book the brute-force conditional expectation is affordable.
We compare both capital figures.
"""

import time

from lsmc_life import (
    LapseDriverModel,
    NestedConfig,
    RiskModels,
    build_batch,
    calibrate_basis,
    calibrate_calamity,
    calibrate_trend,
    fit,
    nested_scr,
    own_funds_distribution,
    risk_measures,
    simulate_paths,
)
from lsmc_life.nested import compare
from lsmc_life.portfolio import build_grid
from lsmc_life.projection import reference_rates
from lsmc_life.synthetic import toy_book

portfolio, assumptions = toy_book()
models = RiskModels(calibrate_trend(), calibrate_calamity(), calibrate_basis(0.35, 0.39), LapseDriverModel(0.05))
paths = simulate_paths(models, assumptions, 100_000, seed=3, reference_rates=reference_rates(build_grid(portfolio, assumptions)))

for regressors in ("observable", "combined"):
    batch = build_batch(portfolio, assumptions, paths, regressors=regressors)
    risk = risk_measures(own_funds_distribution(batch, fit(batch)))
    print(f"LSMC ({regressors:>10}) SCR {risk.scr:14,.0f}")
    if regressors == "observable":
        lsmc = risk

###############################################################################
# Lumping pandemic deaths into one mortality ratio hides the trend signal, so
# the combined regressor understates capital badly.  The nested run follows.

start = time.perf_counter()
nested = nested_scr(portfolio, assumptions, models, NestedConfig(2000, 500, seed=4))
print(f"nested SCR {nested.report.scr:,.0f} in {time.perf_counter() - start:.1f}s")
gap = compare(lsmc, nested.report)
print(f"relative gap {gap['relative_gap']:.2%}, {gap['gap_in_standard_errors']:.2f} standard errors")
