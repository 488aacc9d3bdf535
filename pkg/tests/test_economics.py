import math

import numpy as np
import pytest

from elysched import (CostBreakdown, FinancialParameters, OperatingState,
                      PeriodContext, annualized_capex, capex_per_interval,
                      make_pea, mlcoh, mlcoh_gradient, om_per_kg,
                      opex_for_interval)


# ---- annualized capital cost --------------------------------------------

def test_annuity_case_study_inputs(aem_fin):
    """8000 * 0.0973 * 1.0973^20 / (1.0973^20 - 1) = 922.41934.

    Cross-check: dividing by LF*8760*mh2_nom gives the 2.39 EUR/kg of the
    nominal-load table (asserted in test_mlcoh_nominal_load_table).
    """
    assert annualized_capex(aem_fin) == pytest.approx(922.4193398927948)


def test_annuity_zero_rate_is_straight_line():
    fp = FinancialParameters(capex0=8000.0, r=0.0, ut=20)
    assert annualized_capex(fp) == pytest.approx(400.0)


def test_annuity_full_rate_one_year():
    fp = FinancialParameters(capex0=1.0, r=1.0, ut=1)
    assert annualized_capex(fp) == pytest.approx(2.0)


def test_annuity_tiny_rate_matches_straight_line_limit():
    fp = FinancialParameters(capex0=8000.0, r=1e-9, ut=20)
    straight = fp.capex0 / fp.ut
    assert abs(annualized_capex(fp) - straight) / straight < 1e-6


# ---- interval allocation -------------------------------------------------

def test_capex_per_interval_hourly(aem_fin, hourly_ctx):
    """922.41934 / (0.98 * 8760) = 0.1074480 EUR for a one-hour slot."""
    assert capex_per_interval(aem_fin, hourly_ctx) == pytest.approx(
        0.1074479708196807)


def test_capex_per_interval_quarter_hour(aem_fin):
    ctx = PeriodContext(c_e=0.05, delta_int=0.25)
    assert capex_per_interval(aem_fin, ctx) == pytest.approx(
        0.1074479708196807 / 4)


def test_capex_whole_lifetime_in_one_interval():
    fp = FinancialParameters(capex0=8000.0, r=0.0, ut=1, lf=1.0)
    ctx = PeriodContext(c_e=0.0, delta_int=8760.0)
    assert capex_per_interval(fp, ctx) == pytest.approx(8000.0)


# ---- O&M ------------------------------------------------------------------

def test_om_per_kg_case_study(aem_fin):
    """8000 * 0.015 / (0.98 * 8760 * 0.04494) = 0.3110 EUR/kg (table: 0.31)."""
    assert om_per_kg(aem_fin, 0.04494) == pytest.approx(0.3110412553923667)
    assert om_per_kg(aem_fin, 0.04494) == pytest.approx(0.31, abs=0.01)


def test_om_zero_factor():
    fp = FinancialParameters(capex0=8000.0, omf=0.0)
    assert om_per_kg(fp, 0.04494) == 0.0


def test_om_factors_cancel():
    fp = FinancialParameters(capex0=8760.0, omf=1.0, lf=1.0)
    assert om_per_kg(fp, 1.0) == pytest.approx(1.0)


def test_om_rejects_nonpositive_nominal_rate(aem_fin):
    with pytest.raises(ValueError):
        om_per_kg(aem_fin, 0.0)


# ---- OpEx ------------------------------------------------------------------

def test_opex_full_load(hourly_ctx):
    assert opex_for_interval(100.0, 2.4, hourly_ctx, True) == pytest.approx(0.12)


def test_opex_half_load(hourly_ctx):
    assert opex_for_interval(50.0, 2.4, hourly_ctx, True) == pytest.approx(0.06)


def test_opex_idle_consumes_nothing(hourly_ctx):
    assert opex_for_interval(100.0, 2.4, hourly_ctx, False) == 0.0


def test_opex_linear_nondecreasing_in_op(hourly_ctx):
    ops = np.linspace(0, 100, 41)
    vals = [opex_for_interval(op, 2.4, hourly_ctx, True) for op in ops]
    diffs = np.diff(vals)
    assert np.all(diffs >= 0)
    assert np.allclose(diffs, diffs[0])


# ---- mLCOH ------------------------------------------------------------------

def test_mlcoh_nominal_load_table(aem_pea, aem_fin, hourly_ctx):
    """Nominal load at 0.05 EUR/kWh: 2.39 + 2.67 + 0.31 = 5.37 EUR/kg."""
    costs = mlcoh(100.0, OperatingState.PRODUCTION, False,
                  aem_fin, aem_pea, hourly_ctx)
    assert costs.capex_per_kg == pytest.approx(2.39, abs=0.01)
    assert costs.opex_per_kg == pytest.approx(2.67, abs=0.01)
    assert costs.om_per_kg == pytest.approx(0.31, abs=0.01)
    assert costs.mlcoh == pytest.approx(5.37, abs=0.01)


def test_mlcoh_idle_is_large_but_finite(aem_pea, aem_fin, hourly_ctx):
    costs = mlcoh(0.0, OperatingState.IDLE, False,
                  aem_fin, aem_pea, hourly_ctx)
    assert math.isfinite(costs.mlcoh)
    expected = (capex_per_interval(aem_fin, hourly_ctx)
                / (aem_fin.delta * hourly_ctx.delta_int)
                + om_per_kg(aem_fin, aem_pea.mh2_nom))
    assert costs.mlcoh == pytest.approx(expected)
    assert costs.mlcoh > 1000


def test_mlcoh_startup_adds_exactly_its_share(aem_pea, aem_fin,
                                              hourly_ctx):
    cold = mlcoh(100.0, OperatingState.PRODUCTION, True,
                 aem_fin, aem_pea, hourly_ctx)
    warm = mlcoh(100.0, OperatingState.PRODUCTION, False,
                 aem_fin, aem_pea, hourly_ctx)
    produced = aem_pea.mh2_nom * hourly_ctx.delta_int
    share = aem_fin.c_su / (produced + aem_fin.delta * hourly_ctx.delta_int)
    assert cold.mlcoh - warm.mlcoh == pytest.approx(share, rel=1e-12)


def test_mlcoh_rejects_infeasible_op(aem_pea, aem_fin, hourly_ctx):
    with pytest.raises(ValueError):
        mlcoh(4.0, OperatingState.PRODUCTION, False,
              aem_fin, aem_pea, hourly_ctx)


def test_breakdown_components_sum(aem_pea, aem_fin):
    rng = np.random.default_rng(7)
    for _ in range(50):
        op = rng.uniform(8, 100)
        ctx = PeriodContext(c_e=rng.uniform(0, 0.2),
                            delta_int=rng.choice([0.25, 0.5, 1.0]))
        c = mlcoh(op, OperatingState.PRODUCTION, bool(rng.integers(2)),
                  aem_fin, aem_pea, ctx)
        assert c.mlcoh == pytest.approx(
            c.capex_per_kg + c.opex_per_kg + c.om_per_kg, rel=1e-9)
        assert min(c.capex_per_kg, c.opex_per_kg, c.om_per_kg) >= 0


def test_mlcoh_finite_for_any_positive_delta(aem_pea, hourly_ctx):
    for delta in (1e-12, 1e-6, 1e-3, 1.0):
        fin = FinancialParameters(capex0=8000.0, delta=delta)
        for op, state in ((0.0, OperatingState.IDLE),
                          (8.0, OperatingState.PRODUCTION),
                          (100.0, OperatingState.PRODUCTION)):
            assert math.isfinite(
                mlcoh(op, state, False, fin, aem_pea, hourly_ctx).mlcoh)


# ---- gradient ---------------------------------------------------------------

def _central_diff(op, fin, pea, ctx, h=1e-4):
    lo = mlcoh(op - h, OperatingState.PRODUCTION, False, fin, pea, ctx).mlcoh
    hi = mlcoh(op + h, OperatingState.PRODUCTION, False, fin, pea, ctx).mlcoh
    return (hi - lo) / (2 * h)


def test_gradient_matches_central_difference(aem_pea, aem_fin):
    rng = np.random.default_rng(11)
    ctx = PeriodContext(c_e=0.05, delta_int=1.0)
    for _ in range(20):
        op = rng.uniform(aem_pea.op_min + 1, aem_pea.op_max - 1)
        grad = mlcoh_gradient(op, aem_fin, aem_pea, ctx)
        fd = _central_diff(op, aem_fin, aem_pea, ctx)
        assert grad.value == pytest.approx(fd, rel=1e-6)
        assert not grad.one_sided


def test_gradient_negative_everywhere_for_case_study_module(
        aem_pea, aem_fin):
    """The high-capex module is cheapest at full load, so cost still falls
    at every interior operating point."""
    ctx = PeriodContext(c_e=0.05, delta_int=1.0)
    for op in np.linspace(8.5, 99.5, 30):
        assert mlcoh_gradient(op, aem_fin, aem_pea, ctx).value < 0


def test_gradient_boundary_is_flagged(aem_pea, aem_fin, hourly_ctx):
    assert mlcoh_gradient(8.0, aem_fin, aem_pea, hourly_ctx).one_sided
    assert mlcoh_gradient(100.0, aem_fin, aem_pea, hourly_ctx).one_sided
    with pytest.raises(ValueError):
        mlcoh_gradient(101.0, aem_fin, aem_pea, hourly_ctx)


def test_gradient_crosses_zero_for_low_capex_module():
    """A module with cheap capital has an interior cost minimum; bisection
    on the analytic gradient must find a sign change where the brute-force
    scan of the cost curve bottoms out."""
    pea = make_pea("pem", p_el=2.4, mh2_nom=0.04494)
    fin = FinancialParameters(capex0=800.0)  # low capital share
    ctx = PeriodContext(c_e=0.08, delta_int=1.0)

    ops = np.arange(8.0, 100.0, 0.01)
    costs = [mlcoh(op, OperatingState.PRODUCTION, False, fin, pea, ctx).mlcoh
             for op in ops]
    op_star = ops[int(np.argmin(costs))]
    assert 8.0 < op_star < 100.0

    lo, hi = 8.0, 100.0
    assert mlcoh_gradient(lo, fin, pea, ctx).value < 0
    assert mlcoh_gradient(hi, fin, pea, ctx).value > 0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if mlcoh_gradient(mid, fin, pea, ctx).value < 0:
            lo = mid
        else:
            hi = mid
    assert 0.5 * (lo + hi) == pytest.approx(op_star, abs=0.01)


# ---- parameter validation ---------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    dict(capex0=0.0),
    dict(capex0=8000.0, lf=0.0),
    dict(capex0=8000.0, lf=1.2),
    dict(capex0=8000.0, ut=0.5),
    dict(capex0=8000.0, r=-0.1),
    dict(capex0=8000.0, delta=0.0),
])
def test_financial_parameter_invariants(kwargs):
    with pytest.raises(ValueError):
        FinancialParameters(**kwargs)
