import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lsmc_life import (
    AssumptionSet,
    ModelPoint,
    MortalityTable,
    Portfolio,
    StressKind,
    StressScenario,
    aggregate,
    apply_stress,
    project_best_estimate,
    standard_formula_scr,
)


def test_aggregate_examples():
    assert aggregate(0, 0, 0) == 0.0
    assert aggregate(0, 3, 4) == pytest.approx(math.sqrt(31), abs=1e-12)
    assert aggregate(3, 4, 0) == pytest.approx(5.0, abs=1e-12)
    assert aggregate(0, 3, 4, correlation=0.0) == pytest.approx(5.0, abs=1e-12)
    with pytest.raises(ValueError):
        aggregate(-1, 0, 0)


@given(st.floats(0, 1e300), st.floats(0, 1e300), st.floats(0, 1e300))
def test_aggregate_bounds(L, M, C):
    s = aggregate(L, M, C)
    assert max(L, M, C) * (1 - 1e-12) <= s <= L * (1 + 1e-12) + M * (1 + 1e-12) + C * (1 + 1e-12)


@pytest.mark.parametrize("kind", list(StressKind))
def test_zero_stress_is_best_estimate(toy, kind):
    pf, a = toy
    be = project_best_estimate(pf, a)
    cf = apply_stress(pf, a, StressScenario(kind, 0.0))
    np.testing.assert_array_equal(cf.premium, be.premium)
    np.testing.assert_array_equal(cf.death, be.death)


def test_catastrophe_hand_case():
    pf = Portfolio([ModelPoint("A", 40, 1.0, 1000.0, 0.0, 2)])
    a = AssumptionSet(2, MortalityTable.flat([0.01, 0.01]), [0.0, 0.0], [1.0, 1.0])
    be = project_best_estimate(pf, a)
    cat = apply_stress(pf, a, StressScenario.default(StressKind.CATASTROPHE))
    assert cat.death[0] - be.death[0] == pytest.approx(1.5, rel=1e-12)
    assert cat.death[1] == pytest.approx((1 - 0.0115) * 0.01 * 1000, rel=1e-12)


def test_mass_lapse_cuts_inforce():
    pf = Portfolio([ModelPoint("A", 40, 10.0, 0.0, 1.0, 2)])
    a = AssumptionSet(2, MortalityTable.flat([0.0, 0.0]), [0.1, 0.1], [1.0, 1.0])
    cf = apply_stress(pf, a, StressScenario.default("lapse_mass"))
    np.testing.assert_allclose(cf.premium, [6.0, 6.0 * 0.9])


def test_premium_only_book():
    pf = Portfolio([ModelPoint("A", 40, 10.0, 500.0, 3.0, 5)])
    a = AssumptionSet(5, MortalityTable.flat(np.zeros(5)), np.zeros(5), 0.98 ** np.arange(1, 6))
    report = standard_formula_scr(pf, a)
    assert report.sub_scrs["mortality"] == 0.0
    assert report.scenario_pvofp["lapse_down"] == report.pvofp_det
    assert report.sub_scrs["catastrophe"] == pytest.approx(0.98 * 10 * 0.0015 * 500 + sum(0.98 ** t * 10 * 0.0015 * 3 for t in range(2, 6)), rel=1e-9)
    assert report.sub_scrs["lapse"] == pytest.approx(0.4 * report.pvofp_det, rel=1e-12)


def test_sub_scrs_floored():
    # lapses hurt a loss-making book less: lapse_up raises PVoFP and contributes nothing
    pf = Portfolio([ModelPoint("A", 70, 10.0, 1000.0, 1.0, 5)])
    a = AssumptionSet(5, MortalityTable.flat(np.full(5, 0.05)), np.full(5, 0.05), np.ones(5))
    report = standard_formula_scr(pf, a)
    assert report.scenario_pvofp["lapse_up"] > report.pvofp_det
    assert all(v >= 0 for v in report.sub_scrs.values())
    assert report.sub_scrs["lapse"] == max(0.0, report.pvofp_det - report.scenario_pvofp["lapse_down"])


def test_homogeneity(toy):
    pf, a = toy
    one = standard_formula_scr(pf, a).scr
    assert standard_formula_scr(pf.scaled(2.0), a).scr == pytest.approx(2 * one, rel=1e-9)


def test_stress_clipping_warns():
    pf = Portfolio([ModelPoint("A", 40, 1.0, 1.0, 1.0, 1)])
    a = AssumptionSet(1, MortalityTable.flat([0.9]), [0.1], [1.0])
    with pytest.warns(UserWarning, match="clipped"):
        cf = apply_stress(pf, a, StressScenario.default("mortality_up"))
    assert cf.death[0] <= 1.0


def test_scenario_validation():
    with pytest.raises(ValueError):
        StressScenario("lapse_down", 1.5)
    with pytest.raises(ValueError):
        StressScenario("mortality_up", -0.1)
    with pytest.raises(ValueError):
        StressScenario("unknown", 0.1)


def test_golden_reference_book(ref_book, data_dir):
    golden = json.loads((data_dir / "golden_scr_standard.json").read_text())
    report = standard_formula_scr(*ref_book).as_dict()
    assert report["pvofp_det"] == pytest.approx(golden["pvofp_det"], rel=1e-10)
    for k, v in golden["scenario_pvofp"].items():
        assert report["scenario_pvofp"][k] == pytest.approx(v, rel=1e-10)
    for k, v in golden["sub_scrs"].items():
        assert report["sub_scrs"][k] == pytest.approx(v, rel=1e-8)
    assert report["scr"] == pytest.approx(golden["scr"], rel=1e-10)
