"""Deterministic best-estimate portfolio projection.

Model points are projected as cohorts: in-force lives at the start of year t
collect premiums, deaths are paid on ``lives * q`` and lapses leave without a
surrender value.  Internally the book is collapsed onto a grid of distinct
issue ages, because every model point of the same age experiences the same
decrements; the stochastic projection and the stress scenarios run through
the same roll-forward kernel, which is what makes them agree with the best
estimate bit for bit when all adjustments are neutral.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AssumptionCoverageError,
    DataFileError,
    HorizonMismatchError,
    InvalidRateError,
)

PORTFOLIO_COLUMNS = ("id", "age", "lives", "sum_assured", "annual_net_premium", "remaining_term")


@dataclass(frozen=True)
class ModelPoint:
    id: str
    age: int
    lives: float
    sum_assured: float
    annual_net_premium: float
    remaining_term: int

    def __post_init__(self):
        if self.lives < 0:
            raise ValueError(f"model point {self.id!r}: lives must be non-negative")
        if self.sum_assured < 0:
            raise ValueError(f"model point {self.id!r}: sum_assured must be non-negative")
        if self.remaining_term < 1:
            raise ValueError(f"model point {self.id!r}: remaining_term must be at least 1")


class Portfolio:
    """An ordered, immutable collection of model points."""

    def __init__(self, model_points: Iterable[ModelPoint]):
        self.model_points: tuple[ModelPoint, ...] = tuple(model_points)
        if not self.model_points:
            raise ValueError("portfolio has no model points")
        self.ages = np.array([mp.age for mp in self.model_points], dtype=np.int64)
        self.lives = np.array([mp.lives for mp in self.model_points], dtype=float)
        self.sum_assured = np.array([mp.sum_assured for mp in self.model_points], dtype=float)
        self.premium = np.array([mp.annual_net_premium for mp in self.model_points], dtype=float)
        self.terms = np.array([mp.remaining_term for mp in self.model_points], dtype=np.int64)

    def __len__(self):
        return len(self.model_points)

    def __iter__(self):
        return iter(self.model_points)

    def scaled(self, factor: float) -> "Portfolio":
        """Return a copy with every model point's exposure multiplied by ``factor``."""
        return Portfolio(
            ModelPoint(mp.id, mp.age, mp.lives * factor, mp.sum_assured, mp.annual_net_premium, mp.remaining_term)
            for mp in self.model_points
        )

    @classmethod
    def from_csv(cls, path) -> "Portfolio":
        rows = _read_csv(path, PORTFOLIO_COLUMNS)
        try:
            return cls(
                ModelPoint(
                    id=r["id"],
                    age=int(r["age"]),
                    lives=float(r["lives"]),
                    sum_assured=float(r["sum_assured"]),
                    annual_net_premium=float(r["annual_net_premium"]),
                    remaining_term=int(r["remaining_term"]),
                )
                for r in rows
            )
        except ValueError as exc:
            raise DataFileError(f"{path}: {exc}") from exc

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(PORTFOLIO_COLUMNS)
            for mp in self.model_points:
                writer.writerow(
                    [mp.id, mp.age, repr(mp.lives), repr(mp.sum_assured), repr(mp.annual_net_premium), mp.remaining_term]
                )


class MortalityTable:
    """Mortality rates indexed by attained age and projection year.

    ``rates`` has shape ``(n_ages, n_years)``.  A single year column means the
    rates are constant across projection years.  With ``ages=None`` the table
    is age independent (one aggregate rate per year for the whole book).
    """

    def __init__(self, ages: Sequence[int] | None, rates):
        rates = np.atleast_2d(np.asarray(rates, dtype=float))
        if np.any(~np.isfinite(rates)) or np.any(rates < 0) or np.any(rates > 1):
            raise InvalidRateError("mortality rates must lie in [0, 1]")
        if ages is None:
            if rates.shape[0] != 1:
                raise ValueError("an age-independent table has a single row")
            self.ages = None
        else:
            self.ages = np.asarray(ages, dtype=np.int64)
            if self.ages.shape[0] != rates.shape[0]:
                raise ValueError("one rate row per age is required")
            if np.any(np.diff(self.ages) != 1):
                raise ValueError("table ages must be consecutive and increasing")
        self.rates = rates

    @classmethod
    def flat(cls, rates_by_year) -> "MortalityTable":
        """Aggregate table: one rate per projection year, the same for every age."""
        return cls(None, np.asarray(rates_by_year, dtype=float)[None, :])

    @classmethod
    def from_csv(cls, path) -> "MortalityTable":
        rows = _read_csv(path, ("age", "q"), optional=("year",))
        has_year = "year" in rows[0] and rows[0]["year"] not in (None, "")
        try:
            if not has_year:
                entries = {int(r["age"]): float(r["q"]) for r in rows}
                ages = sorted(entries)
                return cls(range(ages[0], ages[-1] + 1), [[entries[a]] for a in range(ages[0], ages[-1] + 1)])
            entries = {(int(r["age"]), int(r["year"])): float(r["q"]) for r in rows}
        except (KeyError, ValueError) as exc:
            raise DataFileError(f"{path}: {exc}") from exc
        ages = sorted({a for a, _ in entries})
        years = sorted({y for _, y in entries})
        if years[0] != 1:
            raise DataFileError(f"{path}: projection years must start at 1")
        grid = np.full((ages[-1] - ages[0] + 1, years[-1]), np.nan)
        for (a, y), q in entries.items():
            grid[a - ages[0], y - 1] = q
        if np.isnan(grid).any():
            raise DataFileError(f"{path}: table has gaps in its age/year grid")
        return cls(range(ages[0], ages[-1] + 1), grid)

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            constant = self.rates.shape[1] == 1
            writer.writerow(("age", "q") if constant else ("age", "year", "q"))
            ages = [0] if self.ages is None else self.ages
            for i, age in enumerate(ages):
                for j in range(self.rates.shape[1]):
                    q = repr(float(self.rates[i, j]))
                    writer.writerow((int(age), q) if constant else (int(age), j + 1, q))

    def rate(self, age: int, year: int) -> float | None:
        """Rate at attained ``age`` in projection ``year`` (1-based), or None if not covered."""
        row = 0
        if self.ages is not None:
            row = age - int(self.ages[0])
            if row < 0 or row >= self.ages.shape[0]:
                return None
        n_years = self.rates.shape[1]
        if n_years == 1:
            return float(self.rates[row, 0])
        if year > n_years:
            return None
        return float(self.rates[row, year - 1])


@dataclass
class AssumptionSet:
    horizon: int
    mortality: MortalityTable
    lapse: np.ndarray
    discount: np.ndarray

    def __post_init__(self):
        self.lapse = np.asarray(self.lapse, dtype=float)
        self.discount = np.asarray(self.discount, dtype=float)
        if self.lapse.shape != (self.horizon,) or self.discount.shape != (self.horizon,):
            raise HorizonMismatchError(
                f"lapse and discount vectors need {self.horizon} entries, "
                f"got {self.lapse.shape[0]} and {self.discount.shape[0]}"
            )
        if np.any(self.lapse < 0) or np.any(self.lapse > 1):
            raise InvalidRateError("lapse rates must lie in [0, 1]")
        if np.any(self.discount <= 0):
            raise InvalidRateError("discount factors must be positive")
        if np.any(np.diff(self.discount) > 0):
            warnings.warn("discount factors increase with t (negative forward rates)", stacklevel=2)

    @classmethod
    def from_csv(cls, mortality_path, lapse_path, discount_path, horizon: int | None = None) -> "AssumptionSet":
        mortality = MortalityTable.from_csv(mortality_path)
        lapse = _read_vector(lapse_path, "year", "w")
        discount = _read_vector(discount_path, "t", "delta")
        if horizon is None:
            horizon = len(discount)
        if len(lapse) < horizon or len(discount) < horizon:
            raise HorizonMismatchError(f"lapse/discount files cover fewer than {horizon} years")
        return cls(horizon, mortality, lapse[:horizon], discount[:horizon])

    def to_csv(self, directory) -> dict:
        directory = Path(directory)
        paths = {
            "mortality": directory / "mortality.csv",
            "lapse": directory / "lapse.csv",
            "discount": directory / "discount.csv",
        }
        self.mortality.to_csv(paths["mortality"])
        _write_vector(paths["lapse"], ("year", "w"), self.lapse)
        _write_vector(paths["discount"], ("t", "delta"), self.discount)
        return paths


@dataclass(frozen=True)
class CashflowVector:
    premium: np.ndarray
    death: np.ndarray

    @property
    def ncf(self) -> np.ndarray:
        return self.premium - self.death

    @property
    def horizon(self) -> int:
        return self.premium.shape[-1]


@dataclass
class BookGrid:
    """The portfolio collapsed onto distinct issue ages.

    All arrays are indexed ``[age_group, year]``.  ``premium`` and
    ``sum_assured`` are totals over the in-term model points of each age
    group per unit of surviving fraction; ``active`` marks the cells where
    some model point of the group is still in term.
    """

    ages: np.ndarray
    q: np.ndarray
    w: np.ndarray
    lives: np.ndarray
    premium: np.ndarray
    sum_assured: np.ndarray
    active: np.ndarray
    discount: np.ndarray = field(repr=False)

    @property
    def horizon(self) -> int:
        return self.q.shape[1]


def build_grid(portfolio: Portfolio, assumptions: AssumptionSet) -> BookGrid:
    T = assumptions.horizon
    if np.any(portfolio.terms > T):
        bad = portfolio.model_points[int(np.argmax(portfolio.terms > T))]
        raise HorizonMismatchError(f"model point {bad.id!r} has remaining_term {bad.remaining_term} beyond horizon {T}")
    ages = np.unique(portfolio.ages)
    group = np.searchsorted(ages, portfolio.ages)
    years = np.arange(1, T + 1)
    in_term = portfolio.terms[:, None] >= years[None, :]

    lives = np.zeros((ages.size, T))
    premium = np.zeros((ages.size, T))
    sum_assured = np.zeros((ages.size, T))
    np.add.at(lives, group, in_term * portfolio.lives[:, None])
    np.add.at(premium, group, in_term * (portfolio.lives * portfolio.premium)[:, None])
    np.add.at(sum_assured, group, in_term * (portfolio.lives * portfolio.sum_assured)[:, None])
    active = np.zeros((ages.size, T), dtype=bool)
    np.logical_or.at(active, group, in_term)

    q = np.zeros((ages.size, T))
    max_term = np.zeros(ages.size, dtype=np.int64)
    np.maximum.at(max_term, group, portfolio.terms)
    for g, age in enumerate(ages):
        for t in range(1, int(max_term[g]) + 1):
            rate = assumptions.mortality.rate(int(age) + t - 1, t)
            if rate is None:
                idx = np.flatnonzero((group == g) & (portfolio.terms >= t))[0]
                raise AssumptionCoverageError(portfolio.model_points[idx].id, t, int(age) + t - 1)
            q[g, t - 1] = rate
    over = active & (q + assumptions.lapse[None, :] > 1)
    if over.any():
        g, t = map(int, np.argwhere(over)[0])
        raise InvalidRateError(f"best-estimate q + w exceeds 1 at age {int(ages[g])}, year {t + 1}")
    return BookGrid(ages, q, assumptions.lapse.copy(), lives, premium, sum_assured, active, assumptions.discount.copy())


def roll_forward(grid: BookGrid, mort_scale, mort_shift, lapse_scale, start: int = 0, alive=None, stop: int | None = None):
    """Project ``n`` scenarios through the decrement recursion.

    The stochastic mortality rate is ``q * mort_scale + mort_shift`` and the
    lapse rate ``w * lapse_scale``; scale/shift arrays are ``(n, T)`` or
    broadcastable to it.  Projection runs over years ``start .. stop-1``
    (0-based, ``stop`` defaults to T) from surviving fractions ``alive`` of
    shape ``(n_ages, n)``
    (default all ones).  Whenever ``q* + w* > 1`` both are scaled down to sum
    to one.

    Returns ``(premium, death, clipped, alive)``: cash flows of shape
    ``(n, stop - start)``, per-scenario counts of clipped years and the
    surviving fractions at the end of year ``stop``.
    """
    T = grid.horizon if stop is None else stop
    mort_scale = np.asarray(mort_scale, dtype=float)
    mort_shift = np.asarray(mort_shift, dtype=float)
    lapse_scale = np.asarray(lapse_scale, dtype=float)
    n = max(np.atleast_2d(a).shape[0] for a in (mort_scale, mort_shift, lapse_scale))
    if alive is None:
        alive = np.ones((grid.ages.size, n))
    else:
        alive = np.array(alive, dtype=float, copy=True)
    premium = np.empty((n, T - start))
    death = np.empty((n, T - start))
    clipped = np.zeros(n, dtype=np.int64)

    def column(a, t):
        a = np.atleast_2d(a)
        col = a[:, t] if a.shape[1] > 1 else a[:, 0]
        return np.broadcast_to(col, (n,))

    for t in range(start, T):
        q = grid.q[:, t, None] * column(mort_scale, t)[None, :] + column(mort_shift, t)[None, :]
        w = grid.w[t] * column(lapse_scale, t)
        w = np.broadcast_to(w[None, :], q.shape)
        total = q + w
        over = (total > 1.0) & grid.active[:, t, None]
        if over.any():
            clipped += over.any(axis=0)
            q = np.where(over, q / total, q)
            w = np.where(over, w / total, w)
        # explicit reductions over the age axis keep each scenario's result
        # independent of how many scenarios share the call
        premium[:, t - start] = (grid.premium[:, t, None] * alive).sum(axis=0)
        death[:, t - start] = (grid.sum_assured[:, t, None] * (alive * q)).sum(axis=0)
        alive = alive * (1.0 - q - w)
    return premium, death, clipped, alive


def project_best_estimate(portfolio: Portfolio, assumptions: AssumptionSet) -> CashflowVector:
    grid = build_grid(portfolio, assumptions)
    return project_grid_best_estimate(grid)


def project_grid_best_estimate(grid: BookGrid) -> CashflowVector:
    premium, death, _, _ = roll_forward(grid, np.ones((1, 1)), np.zeros((1, 1)), np.ones((1, 1)))
    return CashflowVector(premium[0], death[0])


def best_estimate_inforce(grid: BookGrid) -> np.ndarray:
    """Expected in-force lives per age group at the start of each year, ``(n_ages, T)``."""
    survival = np.ones_like(grid.q)
    survival[:, 1:] = np.cumprod(1.0 - grid.q - grid.w[None, :], axis=1)[:, :-1]
    return survival * grid.lives


def present_value(cf: CashflowVector, assumptions: AssumptionSet) -> float:
    if cf.horizon != assumptions.horizon:
        raise HorizonMismatchError(f"cash flows span {cf.horizon} years, assumptions {assumptions.horizon}")
    return float(np.dot(assumptions.discount, cf.ncf))


def _read_csv(path, required, optional=()):
    path = Path(path)
    if not path.is_file():
        raise DataFileError(f"{path}: file not found")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in required if c not in header]
        if missing:
            raise DataFileError(f"{path}: missing columns {missing}")
        reader.fieldnames = header
        rows = [{k: (v.strip() if isinstance(v, str) else v) for k, v in row.items()} for row in reader]
    if not rows:
        raise DataFileError(f"{path}: no data rows")
    return rows


def _read_vector(path, index_col, value_col) -> np.ndarray:
    rows = _read_csv(path, (index_col, value_col))
    try:
        entries = {int(r[index_col]): float(r[value_col]) for r in rows}
    except ValueError as exc:
        raise DataFileError(f"{path}: {exc}") from exc
    keys = sorted(entries)
    if keys != list(range(1, len(keys) + 1)):
        raise DataFileError(f"{path}: {index_col} must run 1..n without gaps")
    return np.array([entries[k] for k in keys])


def _write_vector(path, header, values):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, v in enumerate(values, start=1):
            writer.writerow((i, repr(float(v))))
