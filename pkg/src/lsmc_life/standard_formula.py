"""Standard-formula SCR from deterministic stresses.

Five stresses are projected through the same kernel as the best estimate:
a one-off mass lapse of 40% of the in-force, lapse rates +/-50%, mortality
rates +15% and a one-year catastrophe load of 1.5 per mille.  Each sub-SCR
is the loss in present value, floored at zero; the lapse sub-SCR is the worst
of the three lapse stresses.  Aggregation::

    SCR = sqrt(L^2 + M^2 + C^2 + 2 rho M C + 2 rho L C),   rho = 1/4

There is deliberately no lapse/mortality cross term.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .portfolio import (
    AssumptionSet,
    BookGrid,
    CashflowVector,
    Portfolio,
    build_grid,
    project_grid_best_estimate,
    roll_forward,
)


class StressKind(str, Enum):
    LAPSE_MASS = "lapse_mass"
    LAPSE_UP = "lapse_up"
    LAPSE_DOWN = "lapse_down"
    MORTALITY_UP = "mortality_up"
    CATASTROPHE = "catastrophe"


DEFAULT_MAGNITUDES = {
    StressKind.LAPSE_MASS: 0.40,
    StressKind.LAPSE_UP: 0.50,
    StressKind.LAPSE_DOWN: 0.50,
    StressKind.MORTALITY_UP: 0.15,
    StressKind.CATASTROPHE: 0.0015,
}

DEFAULT_CORRELATION = 0.25


@dataclass(frozen=True)
class StressScenario:
    kind: StressKind
    magnitude: float

    def __post_init__(self):
        object.__setattr__(self, "kind", StressKind(self.kind))
        if self.magnitude < 0:
            raise ValueError("stress magnitudes must be non-negative")
        if self.kind in (StressKind.LAPSE_DOWN, StressKind.LAPSE_MASS) and self.magnitude > 1:
            raise ValueError(f"{self.kind.value} magnitude above 1 would create negative rates or lives")

    @classmethod
    def default(cls, kind) -> "StressScenario":
        kind = StressKind(kind)
        return cls(kind, DEFAULT_MAGNITUDES[kind])


def _stressed_grid_inputs(grid: BookGrid, scenario: StressScenario):
    T = grid.horizon
    m = scenario.magnitude
    scale = np.ones((1, T))
    shift = np.zeros((1, T))
    lapse = np.ones((1, T))
    alive = None
    if scenario.kind is StressKind.MORTALITY_UP:
        scale[:] = 1.0 + m
    elif scenario.kind is StressKind.LAPSE_UP:
        lapse[:] = 1.0 + m
    elif scenario.kind is StressKind.LAPSE_DOWN:
        lapse[:] = 1.0 - m
    elif scenario.kind is StressKind.CATASTROPHE:
        shift[0, 0] = m
    elif scenario.kind is StressKind.LAPSE_MASS:
        alive = np.full((grid.ages.size, 1), 1.0 - m)
    return scale, shift, lapse, alive


def apply_stress_grid(grid: BookGrid, scenario: StressScenario) -> CashflowVector:
    scale, shift, lapse, alive = _stressed_grid_inputs(grid, scenario)
    premium, death, clipped, _ = roll_forward(grid, scale, shift, lapse, alive=alive)
    if clipped.any():
        warnings.warn(f"{scenario.kind.value}: combined decrements clipped to 1 in {int(clipped[0])} years", stacklevel=2)
    return CashflowVector(premium[0], death[0])


def apply_stress(portfolio: Portfolio, assumptions: AssumptionSet, scenario: StressScenario) -> CashflowVector:
    return apply_stress_grid(build_grid(portfolio, assumptions), scenario)


def aggregate(lapse: float, mortality: float, catastrophe: float, correlation: float = DEFAULT_CORRELATION) -> float:
    for v in (lapse, mortality, catastrophe):
        if v < 0:
            raise ValueError("sub-SCRs must be non-negative")
    scale = max(lapse, mortality, catastrophe)
    if scale == 0:
        return 0.0
    # work relative to the largest term so tiny or huge inputs neither underflow nor overflow
    L, M, C = lapse / scale, mortality / scale, catastrophe / scale
    return scale * math.sqrt(L * L + M * M + C * C + 2 * correlation * M * C + 2 * correlation * L * C)


@dataclass
class StandardFormulaReport:
    pvofp_det: float
    scenario_pvofp: dict
    sub_scrs: dict
    scr: float
    magnitudes: dict = field(default_factory=dict)
    correlation: float = DEFAULT_CORRELATION

    def as_dict(self) -> dict:
        return {
            "pvofp_det": self.pvofp_det,
            "scenario_pvofp": dict(self.scenario_pvofp),
            "scenario_magnitudes": dict(self.magnitudes),
            "sub_scrs": dict(self.sub_scrs),
            "correlation": self.correlation,
            "scr": self.scr,
        }


def standard_formula_scr(
    portfolio: Portfolio,
    assumptions: AssumptionSet,
    magnitudes: dict | None = None,
    correlation: float = DEFAULT_CORRELATION,
) -> StandardFormulaReport:
    mags = {k: DEFAULT_MAGNITUDES[k] for k in StressKind}
    for k, v in (magnitudes or {}).items():
        mags[StressKind(k)] = float(v)
    grid = build_grid(portfolio, assumptions)
    delta = assumptions.discount
    pv_det = float(project_grid_best_estimate(grid).ncf @ delta)
    pv = {}
    for kind in StressKind:
        cf = apply_stress_grid(grid, StressScenario(kind, mags[kind]))
        pv[kind.value] = float(cf.ncf @ delta)

    def loss(*kinds):
        return max([pv_det - pv[k.value] for k in kinds] + [0.0])

    subs = {
        "lapse": loss(StressKind.LAPSE_MASS, StressKind.LAPSE_UP, StressKind.LAPSE_DOWN),
        "mortality": loss(StressKind.MORTALITY_UP),
        "catastrophe": loss(StressKind.CATASTROPHE),
    }
    return StandardFormulaReport(
        pvofp_det=pv_det,
        scenario_pvofp=pv,
        sub_scrs=subs,
        scr=aggregate(subs["lapse"], subs["mortality"], subs["catastrophe"], correlation),
        magnitudes={k.value: v for k, v in mags.items()},
        correlation=correlation,
    )
