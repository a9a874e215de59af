import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import norm

from lsmc_life import (
    BasisRiskModel,
    CalamityModel,
    FixedCalamity,
    LapseDriverModel,
    RiskModels,
    TrendModel,
    calibrate_basis,
    calibrate_calamity,
    calibrate_trend,
    funnel,
    simulate_path,
    simulate_paths,
)
from lsmc_life.drivers import BLOCK_SIZE, DEFAULT_FUNNEL_QUANTILES, PathSet
from lsmc_life.errors import CalibrationError
from lsmc_life.synthetic import toy_book


@pytest.fixture(scope="module")
def basis10():
    return toy_book()[1]


def test_calamity_anchors_round_trip():
    cal = calibrate_calamity()
    assert cal.quantile(0.98) == pytest.approx(4.0e-4, rel=1e-9)
    assert cal.quantile(0.999) == pytest.approx(5.0e-3, rel=1e-9)
    assert cal.alpha == pytest.approx(math.log(20) / math.log(12.5), rel=1e-12)
    # the rounded values quoted for these anchors
    assert cal.alpha == pytest.approx(1.18614, abs=1e-4)
    assert cal.xm == pytest.approx(1.479e-5, rel=1e-3)


@settings(max_examples=50, deadline=None)
@given(alpha=st.floats(1.05, 5.0), xm=st.floats(1e-6, 1e-2))
def test_calamity_median_anchor_recovers_parameters(alpha, xm):
    x_a = xm * 2 ** (1 / alpha)
    x_b = xm * 100 ** (1 / alpha)
    cal = calibrate_calamity(0.5, x_a, 0.99, x_b)
    assert cal.alpha == pytest.approx(alpha, rel=1e-9)
    assert cal.xm == pytest.approx(xm, rel=1e-9)


def test_calamity_unit_shape_rejected():
    with pytest.raises(CalibrationError):
        calibrate_calamity(0.9, 1.0, 0.99, 10.0)
    with pytest.raises(CalibrationError):
        calibrate_calamity(0.99, 1.0, 0.9, 10.0)


def test_calamity_distribution_functions():
    cal = calibrate_calamity()
    x = cal.quantile([0.1, 0.5, 0.98])
    np.testing.assert_allclose(cal.cdf(x), [0.1, 0.5, 0.98], rtol=1e-12)
    assert cal.cdf(cal.xm / 2) == 0.0
    assert cal.mean_load == pytest.approx(cal.alpha * cal.xm / (cal.alpha - 1))


def test_trend_calibration_root():
    s = calibrate_trend(0.95, 1.45, 40).sigma
    z = norm.ppf(0.95)
    assert 20 * s * s - z * math.sqrt(40) * s + math.log(1.45) == pytest.approx(0.0, abs=1e-14)
    assert s == pytest.approx(0.03858, abs=1e-4)
    assert TrendModel(s).quantile(0.95, 40) == pytest.approx(1.45, rel=1e-12)
    other = (z * math.sqrt(40) + math.sqrt(z * z * 40 - 80 * math.log(1.45))) / 40
    assert s < other


def test_trend_calibration_rejects_unreachable_and_degenerate():
    with pytest.raises(CalibrationError):
        calibrate_trend(0.95, math.exp(1.645), 1)
    with pytest.raises(CalibrationError):
        calibrate_trend(0.95, 1.0, 40)
    with pytest.raises(CalibrationError):
        calibrate_trend(0.4, 1.2, 40)


@pytest.mark.parametrize("be, adverse, expected", [(0.35, 0.39, 1.39 / 1.35 - 1), (0.35, 0.43, 1.43 / 1.35 - 1), (0.3, 0.3, 0.0)])
def test_basis_calibration(be, adverse, expected):
    assert calibrate_basis(be, adverse, 2.0).sigma == pytest.approx(expected, rel=1e-12, abs=1e-15)


def test_basis_calibration_rejects_bad_shares():
    with pytest.raises(CalibrationError):
        calibrate_basis(0.4, 0.3)
    with pytest.raises(CalibrationError):
        calibrate_basis(0.4, 1.3)


def test_degenerate_models_give_unit_factors(basis10):
    load = 2e-4
    paths = simulate_paths(RiskModels.degenerate(load), basis10, 50, 3)
    np.testing.assert_array_equal(paths.af_lapse, 1.0)
    np.testing.assert_allclose(paths.af_mort, 1.0, rtol=1e-14)
    np.testing.assert_array_equal(paths.trend, 1.0)


def test_paths_depend_only_on_seed_and_index(models, basis10):
    n = 2 * BLOCK_SIZE + 17
    full = simulate_paths(models, basis10, n, 5)
    head = simulate_paths(models, basis10, BLOCK_SIZE + 3, 5)
    np.testing.assert_array_equal(full.trend[: BLOCK_SIZE + 3], head.trend)
    np.testing.assert_array_equal(full.calamity[: BLOCK_SIZE + 3], head.calamity)
    threaded = simulate_paths(models, basis10, n, 5, threads=4)
    for name in ("trend", "basis", "calamity", "af_lapse"):
        np.testing.assert_array_equal(getattr(full, name), getattr(threaded, name))
    one = simulate_path(models, basis10, 5, BLOCK_SIZE + 1)
    np.testing.assert_array_equal(one.trend, full.trend[BLOCK_SIZE + 1])
    np.testing.assert_array_equal(one.af_mort, full.af_mort[BLOCK_SIZE + 1])
    other = simulate_paths(models, basis10, 10, 6)
    assert not np.array_equal(other.trend, full.trend[:10])


def test_basis_constant_along_each_path(models, basis10):
    paths = simulate_paths(models, basis10, 100, 1)
    assert paths.basis.shape == (100,)
    np.testing.assert_allclose(paths.mort_scale / paths.trend, np.repeat(paths.basis[:, None], 10, axis=1))


def test_drivers_have_unit_mean(models, basis10):
    paths = simulate_paths(models, basis10, 50_000, 17)
    for data in (paths.trend, paths.af_lapse, paths.basis[:, None]):
        se = data.std(axis=0, ddof=1) / math.sqrt(data.shape[0])
        assert np.all(np.abs(data.mean(axis=0) - 1) < 3.5 * se)


def test_calamity_sample_quantile(models, basis10):
    paths = simulate_paths(models, basis10, 100_000, 23)
    c1 = np.sort(paths.calamity[:, 0])
    n = c1.size
    m = math.sqrt(n * 0.98 * 0.02)
    lo, hi = c1[int(n * 0.98 - 3 * m)], c1[int(n * 0.98 + 3 * m)]
    assert lo <= 4.0e-4 <= hi


def test_basis_lognormal_standard_deviation(basis10):
    m = RiskModels(TrendModel(0.0), FixedCalamity(0.0), BasisRiskModel(0.0593), LapseDriverModel(0.0))
    b = simulate_paths(m, basis10, 100_000, 2).basis
    assert b.std() == pytest.approx(0.0593, rel=0.02)


def test_funnel_examples():
    ones = PathSet(np.ones((4, 3)), np.ones(4), np.zeros((4, 3)), np.ones((4, 3)), 0.0, np.full(3, 0.01), 0)
    table = funnel(ones, "mort")
    np.testing.assert_array_equal(table.values, 1.0)
    assert table.quantiles == DEFAULT_FUNNEL_QUANTILES == (0.05, 0.25, 0.75, 0.95)
    two = PathSet(np.array([[1.0, 1.0], [3.0, 3.0]]), np.ones(2), np.zeros((2, 2)), np.ones((2, 2)), 0.0, np.ones(2), 0)
    np.testing.assert_array_equal(funnel(two, "trend", [0.5]).values[0], [2.0, 2.0])
    rows = list(table.rows())
    assert rows[0][0] == 1 and len(rows[0][1]) == 4
    with pytest.raises(ValueError):
        funnel(ones, "mort", [0.0])
    with pytest.raises(ValueError):
        funnel(ones, "basis")


def test_funnel_quantiles_ordered(models, basis10):
    paths = simulate_paths(models, basis10, 3000, 9)
    for component in ("mort", "lapse", "trend"):
        values = funnel(paths, component, (0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99)).values
        assert np.all(np.diff(values, axis=0) >= 0)


def test_funnel_widens_with_basis_risk(basis10):
    def width(sigma):
        m = RiskModels(calibrate_trend(), calibrate_calamity(), BasisRiskModel(sigma), LapseDriverModel(0.05))
        return funnel(simulate_paths(m, basis10, 20_000, 4), "mort").width()

    assert np.all(width(0.0296) >= width(0.0))
