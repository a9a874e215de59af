"""
Calibrating the risk drivers
============================

Each driver is pinned by one or two quantile anchors.  We calibrate them,
check the anchors and print the funnel of the portfolio mortality factor.
"""

import numpy as np

from lsmc_life import LapseDriverModel, RiskModels, calibrate_basis, calibrate_calamity, calibrate_trend, funnel, simulate_paths
from lsmc_life.synthetic import reference_basis

# trend: the 95% quantile sits at 1.45 after 40 years
trend = calibrate_trend(0.95, 1.45, 40)
print(f"trend sigma {trend.sigma:.5f}, 95% quantile at year 40: {trend.quantile(0.95, 40):.4f}")

# calamity: Pareto through (98%, 0.4 per mille) and (99.9%, 5 per mille)
calamity = calibrate_calamity()
print(f"pareto alpha {calamity.alpha:.5f}, xm {calamity.xm:.4e}, mean load {calamity.mean_load:.3e}")

# basis risk from a smoker share of 39% instead of 35%, smokers dying twice as fast
basis = calibrate_basis(0.35, 0.39, 2.0)
print(f"basis sigma {basis.sigma:.6f}")

models = RiskModels(trend, calamity, basis, LapseDriverModel(0.05))
assumptions = reference_basis(60)
paths = simulate_paths(models, assumptions, 20_000, seed=1)

###############################################################################
# The funnel of doubt: 5/25/75/95% quantiles of the mortality factor by year.

table = funnel(paths, "mort")
print("year   q5     q25    q75    q95")
for year, values, _ in table.rows():
    if year in (1, 5, 10, 20, 40, 60):
        print(f"{year:>4} " + " ".join(f"{v:6.3f}" for v in values))

###############################################################################
# Every factor has mean one, which is why the regression needs no intercept.

print("mean trend at year 40:", np.round(paths.trend[:, 39].mean(), 4))
print("mean lapse factor at year 40:", np.round(paths.af_lapse[:, 39].mean(), 4))
