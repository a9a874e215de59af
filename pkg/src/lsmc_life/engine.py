"""Least-squares Monte Carlo: regression, own-funds distribution, risk measures.

The discounted deviation of years ``2..T`` is regressed, without intercept,
on the first-year factor deviations ``AF_i(1) - 1``.  Adding the fitted
assumption change to the experience variance of year one gives a sample of
the one-year change in own funds; its lower tail is the capital requirement.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
import scipy.linalg

from .drivers import FunnelTable, DEFAULT_FUNNEL_QUANTILES
from .errors import CollinearityError, LayoutMismatchError, LsmcError
from .projection import SimulationBatch

RANK_TOL = 1e-10

QUANTILE_TABLE_LEVELS = (0.9, 0.95, 0.99, 0.995, 0.999)


@dataclass
class RegressionResult:
    coefficients: np.ndarray
    names: tuple[str, ...]
    standard_errors: np.ndarray
    r_squared: float
    r_squared_centered: float
    n: int
    condition_number: float
    basis: str = "linear"
    intercept: bool = False
    robust: bool = False
    base_names: tuple[str, ...] = ()
    residuals: np.ndarray | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "basis": self.basis,
            "intercept": self.intercept,
            "coefficients": dict(zip(self.names, map(float, self.coefficients))),
            "standard_errors": dict(zip(self.names, map(float, self.standard_errors))),
            "standard_error_kind": "HC0 robust" if self.robust else "homoskedastic",
            "r_squared_uncentered": self.r_squared,
            "r_squared_centered": self.r_squared_centered,
            "n": self.n,
            "condition_number_xtx": self.condition_number,
        }


def design_matrix(x: np.ndarray, names, basis: str = "linear"):
    """Expand base regressors into the chosen basis; returns ``(X, names)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    names = tuple(names)
    if basis == "linear":
        return x, names
    if basis != "linear_plus_quadratic":
        raise ValueError(f"unknown basis {basis!r}")
    cols = [x[:, i] for i in range(x.shape[1])]
    out_names = list(names)
    for i in range(x.shape[1]):
        cols.append(x[:, i] * x[:, i])
        out_names.append(f"{names[i]}^2")
    for i, j in combinations(range(x.shape[1]), 2):
        cols.append(x[:, i] * x[:, j])
        out_names.append(f"{names[i]}*{names[j]}")
    return np.column_stack(cols), tuple(out_names)


def least_squares(X, y, names, *, robust=False, method="qr"):
    """OLS of ``y`` on the columns of ``X`` (no implicit intercept).

    Returns ``(coef, se, residuals, condition_number)``.  ``method="qr"``
    solves through a column-pivoted QR factorization; ``"normal"`` forms the
    normal equations and is kept only as a fallback.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, k = X.shape
    if k == 0:
        return np.zeros(0), np.zeros(0), y.copy(), 1.0
    if n <= k:
        raise CollinearityError(names, f"need more observations ({n}) than regressors ({k})")
    Q, R, perm = scipy.linalg.qr(X, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    tol = RANK_TOL * max(diag[0], np.finfo(float).tiny)
    rank = int(np.sum(diag > tol))
    if rank < k:
        raise CollinearityError([names[i] for i in perm[rank:]])
    R_inv = scipy.linalg.solve_triangular(R, np.eye(k))
    xtx_inv_p = R_inv @ R_inv.T
    inv_perm = np.argsort(perm)
    xtx_inv = xtx_inv_p[np.ix_(inv_perm, inv_perm)]
    if method == "qr":
        coef = np.empty(k)
        coef[perm] = scipy.linalg.solve_triangular(R, Q.T @ y)
    elif method == "normal":
        coef = scipy.linalg.solve(X.T @ X, X.T @ y, assume_a="pos")
    else:
        raise ValueError(f"unknown method {method!r}")
    residuals = y - X @ coef
    if robust:
        meat = (X * (residuals**2)[:, None]).T @ X
        cov = xtx_inv @ meat @ xtx_inv
    else:
        cov = xtx_inv * (residuals @ residuals) / (n - k)
    se = np.sqrt(np.maximum(np.diag(cov), 0.0))
    cond = float(np.linalg.cond(R) ** 2)
    return coef, se, residuals, cond


def fit(batch: SimulationBatch, basis: str = "linear", *, robust: bool = False, method: str = "qr") -> RegressionResult:
    """Regress the assumption change on first-year factor deviations, no intercept."""
    X, names = design_matrix(batch.x, batch.regressor_names, basis)
    y = batch.y
    coef, se, resid, cond = least_squares(X, y, names, robust=robust, method=method)
    rss = float(resid @ resid)
    tss_raw = float(y @ y)
    yc = y - y.mean()
    tss_c = float(yc @ yc)
    return RegressionResult(
        coefficients=coef,
        names=names,
        standard_errors=se,
        r_squared=1.0 - rss / tss_raw if tss_raw > 0 else 1.0,
        r_squared_centered=1.0 - rss / tss_c if tss_c > 0 else 1.0,
        n=y.shape[0],
        condition_number=cond,
        basis=basis,
        robust=robust,
        base_names=tuple(batch.regressor_names),
        residuals=resid,
    )


@dataclass
class OwnFundsDistribution:
    """One-year own-funds change per path; positive values are gains."""

    samples: np.ndarray

    def __len__(self):
        return self.samples.shape[0]

    def standard_error(self) -> float:
        return float(self.samples.std(ddof=1) / math.sqrt(len(self)))


def own_funds_distribution(batch: SimulationBatch, reg: RegressionResult) -> OwnFundsDistribution:
    if reg.intercept or tuple(batch.regressor_names) != tuple(reg.base_names):
        raise LayoutMismatchError(
            f"regression on {reg.base_names} cannot be applied to a batch with regressors {batch.regressor_names}"
        )
    X, names = design_matrix(batch.x, batch.regressor_names, reg.basis)
    if names != reg.names:
        raise LayoutMismatchError("design columns differ from the fitted coefficients")
    return OwnFundsDistribution(batch.ev + (X * reg.coefficients[None, :]).sum(axis=1))


def order_statistic_index(n: int, p: float) -> int:
    """1-based index of the lower-tail order statistic used as the p-quantile.

    ``max(1, floor(n * p))``: never above the inverse-CDF index, so the loss
    quantile errs on the conservative side.
    """
    return max(1, int(math.floor(n * p + 1e-9)))


def lower_quantile(samples, p: float) -> float:
    samples = np.asarray(samples, dtype=float)
    k = order_statistic_index(samples.shape[0], p)
    return float(np.partition(samples, k - 1)[k - 1])


def quantile_standard_error(samples, p: float) -> float:
    """Order-statistic standard error of the p-quantile.

    Half the distance between the order statistics one binomial standard
    deviation either side of the quantile index; distribution free.
    """
    samples = np.sort(np.asarray(samples, dtype=float))
    n = samples.shape[0]
    k = order_statistic_index(n, p)
    m = max(1, int(math.ceil(math.sqrt(n * p * (1 - p)))))
    lo = samples[max(k - 1 - m, 0)]
    hi = samples[min(k - 1 + m, n - 1)]
    return float(hi - lo) / 2.0


@dataclass
class RiskMeasureReport:
    level: float
    scr: float
    quantile: float
    tvar: float
    n: int
    quantile_se: float
    quantile_table: dict
    warnings: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "var_level": self.level,
            "scr": self.scr,
            "scr_raw": -self.quantile,
            "own_funds_quantile": self.quantile,
            "tvar": self.tvar,
            "n": self.n,
            "quantile_standard_error": self.quantile_se,
            "loss_quantiles": self.quantile_table,
            "quantile_estimator": "lower order statistic x_(k), k = max(1, floor(n * (1 - level)))",
            "warnings": list(self.warnings),
        }


def risk_measures(dist: OwnFundsDistribution | np.ndarray, level: float = 0.995) -> RiskMeasureReport:
    """Capital requirement and tail value-at-risk of own-funds changes.

    ``scr`` is minus the ``1 - level`` quantile of the own-funds changes,
    floored at zero; ``tvar`` is minus the mean of the samples at or below
    that quantile.
    """
    samples = dist.samples if isinstance(dist, OwnFundsDistribution) else np.asarray(dist, dtype=float)
    n = samples.shape[0]
    if n == 0:
        raise LsmcError("empty own-funds distribution")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    notes = []
    if n < 1.0 / (1.0 - level):
        msg = f"{n} samples are too few for a {level:g} quantile"
        warnings.warn(msg, stacklevel=2)
        notes.append(msg)
    p = 1.0 - level
    q = lower_quantile(samples, p)
    tail = samples[samples <= q]
    table = {f"{lv:g}": -lower_quantile(samples, 1.0 - lv) for lv in QUANTILE_TABLE_LEVELS}
    return RiskMeasureReport(
        level=level,
        scr=max(-q, 0.0),
        quantile=q,
        tvar=float(-tail.mean()),
        n=n,
        quantile_se=quantile_standard_error(samples, p),
        quantile_table=table,
        warnings=notes,
    )


def regression_slices(reg: RegressionResult, batch: SimulationBatch, points: int = 21) -> dict:
    """Fitted assumption change along each base regressor with the others held at zero."""
    out = {}
    for i, name in enumerate(reg.base_names):
        lo, hi = np.quantile(batch.x[:, i], [0.001, 0.999])
        grid = np.linspace(lo, hi, points)
        x = np.zeros((points, len(reg.base_names)))
        x[:, i] = grid
        X, _ = design_matrix(x, reg.base_names, reg.basis)
        out[name] = {"x": grid.tolist(), "fitted": (X @ reg.coefficients).tolist()}
    return out


def life_expectancy(q, T: int | None = None):
    """Curtate remaining life expectancy ``sum_k prod_{j<=k} (1 - q_j)``.

    ``q`` may carry leading batch dimensions; the last axis is time.
    """
    q = np.asarray(q, dtype=float)
    if T is not None:
        if q.ndim == 0:
            q = np.full(T, float(q))
        q = q[..., :T]
    if np.any(q < 0) or np.any(q > 1):
        raise ValueError("mortality rates must lie in [0, 1]")
    return np.cumprod(1.0 - q, axis=-1).sum(axis=-1)


@dataclass
class LifeExpectancyResult:
    e_be: float
    alpha: float
    beta: float
    level: float
    quantile: float
    stress_le: float
    stress_probability: float
    r_squared: float
    n: int
    standard_errors: tuple[float, float]

    def as_dict(self) -> dict:
        return {
            "life_expectancy_best_estimate": self.e_be,
            "alpha_le": self.alpha,
            "beta_le": self.beta,
            "standard_errors": {"alpha_le": self.standard_errors[0], "beta_le": self.standard_errors[1]},
            "quantile_level": self.level,
            "quantile_fitted_le": self.quantile,
            "stress_le": self.stress_le,
            "stress_exceedance_probability": self.stress_probability,
            "r_squared": self.r_squared,
            "n": self.n,
        }


def path_mortality_rates(batch: SimulationBatch) -> np.ndarray:
    """Per-path aggregate mortality rates of the book, ``(n, T)``."""
    if batch.paths is None or batch.le_rates is None:
        raise LsmcError("batch carries no driver paths for a life-expectancy re-estimation")
    paths = batch.paths
    q = batch.le_rates[None, :] * paths.mort_scale + paths.mort_shift
    return np.clip(q, 0.0, 1.0)


def life_expectancy_regression(
    batch: SimulationBatch,
    level: float = 0.005,
    stress_factor: float = 1.15,
    stress_le: float | None = None,
) -> LifeExpectancyResult:
    """Regress each path's re-estimated life expectancy on ``AF_mort(1)`` with intercept.

    The stress life expectancy defaults to the one implied by multiplying
    the aggregate best-estimate rates by ``stress_factor``; its probability
    is the share of fitted values at or below it.
    """
    e = life_expectancy(path_mortality_rates(batch))
    af = batch.af_mort_1
    if np.ptp(af) == 0:
        raise CollinearityError(["AF_mort(1)"], "mortality factor has no variation; beta is undefined")
    X = np.column_stack([np.ones_like(af), af])
    names = ("intercept", "AF_mort(1)")
    coef, se, resid, _ = least_squares(X, e, names)
    fitted = X @ coef
    ec = e - e.mean()
    e_be = float(life_expectancy(batch.le_rates))
    if stress_le is None:
        stress_le = float(life_expectancy(np.clip(batch.le_rates * stress_factor, 0.0, 1.0)))
    return LifeExpectancyResult(
        e_be=e_be,
        alpha=float(coef[0]),
        beta=float(coef[1]),
        level=level,
        quantile=lower_quantile(fitted, level),
        stress_le=stress_le,
        stress_probability=float(np.mean(fitted <= stress_le)),
        r_squared=float(1.0 - (resid @ resid) / (ec @ ec)) if ec @ ec > 0 else 1.0,
        n=e.shape[0],
        standard_errors=(float(se[0]), float(se[1])),
    )


def survival_funnel(batch: SimulationBatch, quantiles=DEFAULT_FUNNEL_QUANTILES) -> FunnelTable:
    """Quantile envelope of the projected probability of surviving ``t`` years."""
    surv = np.cumprod(1.0 - path_mortality_rates(batch), axis=1)
    quantiles = tuple(float(p) for p in quantiles)
    values = np.quantile(surv, quantiles, axis=0, method="averaged_inverted_cdf")
    return FunnelTable("survival", np.arange(1, surv.shape[1] + 1), quantiles, values, surv.mean(axis=0))
