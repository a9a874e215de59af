"""Deterministic synthetic books used as test data and in the demos.

Reference book (stands in for a proprietary whole-life portfolio)
------------------------------------------------------------------
* 1,000 model points; point ``i`` has issue age ``30 + i mod 31``.
* lives: integers uniform on [50, 500]; sum assured: lognormal with median
  100,000 and log-sd 0.5, rounded to the nearest 1,000.  Both drawn from a
  Philox generator seeded with ``seed`` (default 20240601).
* whole life to age 100: ``remaining_term = min(horizon, 100 - age)``.
* best-estimate mortality: Makeham law ``mu_x = A + B c^x`` with
  A = 0.00022, B = 2.7e-6, c = 1.124, ``q_x = 1 - exp(-int_x^{x+1} mu)``,
  improved by 1% a year over the projection and capped at 0.9.
* lapse ``w(t) = max(0.02, 0.06 - 0.002 (t - 1))``; discount ``1.02^-t``.
* level annual net premium: 120% of the mortality-only equivalence premium
  over the remaining term at the best-estimate basis.

Toy book: 10 model points aged 35..80 in steps of 5, ten-year horizon, same
basis, for the nested-simulation comparison.

Linear book: one model point over two years with no deaths in year two, so
the discounted year-two deviation is exactly linear in the year-one
mortality factor.
"""

from __future__ import annotations

import numpy as np

from .portfolio import AssumptionSet, ModelPoint, MortalityTable, Portfolio

MAKEHAM = (0.00022, 2.7e-6, 1.124)
IMPROVEMENT = 0.01
MAX_AGE = 120
Q_CAP = 0.9


def makeham_q(ages, A=MAKEHAM[0], B=MAKEHAM[1], c=MAKEHAM[2]) -> np.ndarray:
    ages = np.asarray(ages, dtype=float)
    integral = A + B * c**ages * (c - 1.0) / np.log(c)
    return 1.0 - np.exp(-integral)


def reference_basis(horizon: int = 60) -> AssumptionSet:
    ages = np.arange(0, MAX_AGE + 1)
    years = np.arange(1, horizon + 1)
    q = makeham_q(ages)[:, None] * (1.0 - IMPROVEMENT) ** (years[None, :] - 1)
    table = MortalityTable(ages, np.minimum(q, Q_CAP))
    lapse = np.maximum(0.02, 0.06 - 0.002 * (years - 1))
    discount = 1.02 ** -years.astype(float)
    return AssumptionSet(horizon, table, lapse, discount)


def level_premium(assumptions: AssumptionSet, age: int, term: int, sum_assured: float, loading: float = 1.2) -> float:
    q = np.array([assumptions.mortality.rate(age + t - 1, t) for t in range(1, term + 1)])
    delta = assumptions.discount[:term]
    survival = np.concatenate([[1.0], np.cumprod(1.0 - q)[:-1]])
    return float(loading * sum_assured * (delta * survival * q).sum() / (delta * survival).sum())


def reference_book(n_points: int = 1000, horizon: int = 60, seed: int = 20240601) -> tuple[Portfolio, AssumptionSet]:
    assumptions = reference_basis(horizon)
    rng = np.random.Generator(np.random.Philox(seed))
    lives = rng.integers(50, 501, size=n_points)
    sums = np.round(np.exp(np.log(100_000.0) + 0.5 * rng.standard_normal(n_points)) / 1000.0) * 1000.0
    points = []
    for i in range(n_points):
        age = 30 + i % 31
        term = min(horizon, 100 - age)
        sa = float(sums[i])
        points.append(
            ModelPoint(f"MP{i + 1:04d}", age, float(lives[i]), sa, level_premium(assumptions, age, term, sa), term)
        )
    return Portfolio(points), assumptions


def toy_book(horizon: int = 10) -> tuple[Portfolio, AssumptionSet]:
    assumptions = reference_basis(horizon)
    points = []
    for i, age in enumerate(range(35, 85, 5)):
        sa = 50_000.0 + 10_000.0 * i
        points.append(ModelPoint(f"TOY{i + 1:02d}", age, 1000.0, sa, level_premium(assumptions, age, horizon, sa), horizon))
    return Portfolio(points), assumptions


def linear_book(q1: float = 0.01, lapse: float = 0.05) -> tuple[Portfolio, AssumptionSet]:
    assumptions = AssumptionSet(2, MortalityTable.flat([q1, 0.0]), [lapse, lapse], [1 / 1.02, 1 / 1.02**2])
    return Portfolio([ModelPoint("LIN", 50, 1000.0, 100_000.0, 1_500.0, 2)]), assumptions
