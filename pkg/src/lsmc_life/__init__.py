"""One-year life-insurance capital via least-squares Monte Carlo."""

from .drivers import (
    AdjustmentFactorPath,
    BasisRiskModel,
    CalamityModel,
    FixedCalamity,
    LapseDriverModel,
    PathSet,
    RiskModels,
    TrendModel,
    calibrate_basis,
    calibrate_calamity,
    calibrate_trend,
    funnel,
    simulate_path,
    simulate_paths,
)
from .engine import (
    LifeExpectancyResult,
    OwnFundsDistribution,
    RegressionResult,
    RiskMeasureReport,
    fit,
    life_expectancy,
    life_expectancy_regression,
    own_funds_distribution,
    risk_measures,
)
from .nested import NestedConfig, nested_scr
from .portfolio import (
    AssumptionSet,
    CashflowVector,
    ModelPoint,
    MortalityTable,
    Portfolio,
    present_value,
    project_best_estimate,
)
from .projection import SimulationBatch, build_batch, project_stochastic
from .standard_formula import StressKind, StressScenario, aggregate, apply_stress, standard_formula_scr

__version__ = "0.1.0"
