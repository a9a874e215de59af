"""
One-year capital by regression
==============================

Simulate the synthetic whole-life book, regress the discounted change in
future cash flows on first-year experience and read the capital off the
lower tail.  The standard-formula figure for the same book is printed
alongside.
"""

from lsmc_life import (
    LapseDriverModel,
    RiskModels,
    build_batch,
    calibrate_basis,
    calibrate_calamity,
    calibrate_trend,
    fit,
    own_funds_distribution,
    risk_measures,
    simulate_paths,
    standard_formula_scr,
)
from lsmc_life.portfolio import build_grid
from lsmc_life.projection import reference_rates
from lsmc_life.synthetic import reference_book

portfolio, assumptions = reference_book()
models = RiskModels(calibrate_trend(), calibrate_calamity(), calibrate_basis(0.35, 0.39), LapseDriverModel(0.05))

paths = simulate_paths(models, assumptions, 50_000, seed=7, reference_rates=reference_rates(build_grid(portfolio, assumptions)))
batch = build_batch(portfolio, assumptions, paths)

###############################################################################
# The fitted sensitivities: money lost per unit rise of each first-year factor.

reg = fit(batch)
for name, coef, se in zip(reg.names, reg.coefficients, reg.standard_errors):
    print(f"{name:>14}: {coef:16,.0f}  (se {se:,.0f})")
print(f"R2 {reg.r_squared:.3f}")

###############################################################################
# Capital and its Monte Carlo uncertainty.

risk = risk_measures(own_funds_distribution(batch, reg))
print(f"SCR  {risk.scr:16,.0f} +/- {risk.quantile_se:,.0f}")
print(f"TVaR {risk.tvar:16,.0f}")

quad = fit(batch, "linear_plus_quadratic")
print(f"SCR with quadratic terms {risk_measures(own_funds_distribution(batch, quad)).scr:,.0f}")

###############################################################################
# The standard formula, dominated here by the mass-lapse shock.

sf = standard_formula_scr(portfolio, assumptions)
for name, value in sf.sub_scrs.items():
    print(f"{name:>12}: {value:16,.0f}")
print(f"SCR (standard formula) {sf.scr:,.0f}")
