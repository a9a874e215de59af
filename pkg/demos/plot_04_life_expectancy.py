"""
Life expectancy under mortality uncertainty
===========================================

Each simulated path implies a re-estimated remaining life expectancy of the
book.  Regressing it on first-year mortality experience gives a one-year
view of longevity uncertainty.
"""

from lsmc_life import LapseDriverModel, RiskModels, build_batch, calibrate_basis, calibrate_calamity, calibrate_trend, simulate_paths
from lsmc_life.engine import life_expectancy_regression, survival_funnel
from lsmc_life.portfolio import build_grid
from lsmc_life.projection import reference_rates
from lsmc_life.synthetic import reference_book

portfolio, assumptions = reference_book()
models = RiskModels(calibrate_trend(), calibrate_calamity(), calibrate_basis(0.35, 0.39), LapseDriverModel(0.05))
paths = simulate_paths(models, assumptions, 20_000, seed=5, reference_rates=reference_rates(build_grid(portfolio, assumptions)))
batch = build_batch(portfolio, assumptions, paths)

le = life_expectancy_regression(batch)
print(f"E = {le.alpha:.2f} + ({le.beta:.2f}) AF_mort(1)   R2 {le.r_squared:.3f}")
print(f"best estimate {le.e_be:.2f} years; 0.5% quantile of the fit {le.quantile:.2f}")
print(f"15% mortality stress gives {le.stress_le:.2f} years, reached with probability {le.stress_probability:.2%}")

###############################################################################
# Quantiles of the probability of surviving t years.

table = survival_funnel(batch)
for year, values, mean in table.rows():
    if year % 10 == 0:
        print(f"{year:>3} " + " ".join(f"{v:.4f}" for v in values))
