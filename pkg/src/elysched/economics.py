"""Cost model for one electrolysis module: annuitized CapEx, O&M, OpEx and
the per-kg production cost (mLCOH) with its analytic gradient."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

from .electrolyzer import OperatingState, PeaParameters, production_rate

HOURS_PER_YEAR = 8760.0


@dataclass(frozen=True)
class FinancialParameters:
    """Financial description of one module.

    capex0   initial capital expenditure in EUR
    omf      O&M factor, fraction of capex0 per year
    ut       utilization time in years
    lf       load factor, fraction of the 8760 h/yr at full load
    r        discount rate (0.0973 = 9.73 %)
    c_su     cost per start-up event in EUR
    delta    division guard in kg/h so idle periods stay finite
    """

    capex0: float
    omf: float = 0.015
    ut: float = 20.0
    lf: float = 0.98
    r: float = 0.0973
    c_su: float = 0.12
    delta: float = 2e-5

    def __post_init__(self):
        if self.capex0 <= 0:
            raise ValueError(f"capex0 must be > 0, got {self.capex0}")
        if not 0 < self.lf <= 1:
            raise ValueError(f"lf must be in (0, 1], got {self.lf}")
        if self.ut < 1:
            raise ValueError(f"ut must be >= 1 year, got {self.ut}")
        if self.r < 0:
            raise ValueError(f"r must be >= 0, got {self.r}")
        if self.omf < 0:
            raise ValueError(f"omf must be >= 0, got {self.omf}")
        if self.c_su < 0:
            raise ValueError(f"c_su must be >= 0, got {self.c_su}")
        if self.delta <= 0:
            raise ValueError(f"delta must be > 0, got {self.delta}")


@dataclass(frozen=True)
class PeriodContext:
    """Per-period inputs: electricity price (EUR/kWh), scheduling interval
    length (hours) and the plant-wide hydrogen demand (kg/h)."""

    c_e: float
    delta_int: float = 0.25
    demand: float = 0.0

    def __post_init__(self):
        if self.c_e < 0:
            raise ValueError(f"c_e must be >= 0, got {self.c_e}")
        if self.delta_int <= 0:
            raise ValueError(f"delta_int must be > 0, got {self.delta_int}")
        if self.demand < 0:
            raise ValueError(f"demand must be >= 0, got {self.demand}")


@dataclass(frozen=True)
class CostBreakdown:
    """Per-kg cost components; mlcoh is their sum."""

    capex_per_kg: float
    opex_per_kg: float
    om_per_kg: float
    mlcoh: float


class GradientResult(NamedTuple):
    value: float        # d(mlcoh)/d(op) in (EUR/kg) per percent
    one_sided: bool     # True when op sits on an operating limit


def annualized_capex(fp: FinancialParameters) -> float:
    """Constant annual payment equivalent of capex0 over ut years at rate r.

    capex0 * r * (1+r)^ut / ((1+r)^ut - 1); the r -> 0 limit is straight-line
    depreciation capex0 / ut.  expm1/log1p keep the tiny-rate case accurate.
    """
    if fp.r == 0:
        return fp.capex0 / fp.ut
    growth = fp.ut * math.log1p(fp.r)
    return fp.capex0 * fp.r * math.exp(growth) / math.expm1(growth)


def capex_per_interval(fp: FinancialParameters, ctx: PeriodContext) -> float:
    """Capital cost allocated to one scheduling interval (EUR).

    The annual annuity is spread over the lf-scaled hours of the year,
    mirroring the LF * 8760 denominator used for O&M.
    """
    return annualized_capex(fp) * ctx.delta_int / (fp.lf * HOURS_PER_YEAR)


def om_per_kg(fp: FinancialParameters, mh2_nom: float) -> float:
    """Fixed O&M cost per kg: capex0 * omf / (lf * 8760 * mh2_nom)."""
    if mh2_nom <= 0:
        raise ValueError(f"mh2_nom must be > 0, got {mh2_nom}")
    return fp.capex0 * fp.omf / (fp.lf * HOURS_PER_YEAR * mh2_nom)


def opex_for_interval(op: float, p_el: float, ctx: PeriodContext,
                      in_operation: bool) -> float:
    """Electricity cost of one interval (EUR); zero when not operating."""
    if not 0 <= op <= 100:
        raise ValueError(f"op must be in [0, 100], got {op}")
    if not in_operation:
        return 0.0
    return (op / 100.0) * p_el * ctx.c_e * ctx.delta_int


def mlcoh(op: float, state: OperatingState, started: bool,
          fp: FinancialParameters, pea: PeaParameters,
          ctx: PeriodContext) -> CostBreakdown:
    """Marginal levelized cost of hydrogen at an operating point (EUR/kg).

    Interval costs (allocated CapEx, electricity, start-up) are divided by
    the interval's production plus the guard delta * delta_int; the per-kg
    O&M term is added outside that division.
    """
    in_op = state is OperatingState.PRODUCTION
    produced = production_rate(op, state, pea) * ctx.delta_int
    denom = produced + fp.delta * ctx.delta_int
    capex_i = capex_per_interval(fp, ctx)
    opex_i = opex_for_interval(op, pea.p_el, ctx, in_op)
    su = fp.c_su if (started and in_op) else 0.0
    om = om_per_kg(fp, pea.mh2_nom)
    capex_pk = capex_i / denom
    opex_pk = (opex_i + su) / denom
    return CostBreakdown(capex_pk, opex_pk, om, capex_pk + opex_pk + om)


def interval_cost(op: float, state: OperatingState, started: bool,
                  fp: FinancialParameters, pea: PeaParameters,
                  ctx: PeriodContext) -> float:
    """Absolute cost of one interval in EUR (CapEx share + electricity +
    start-up + O&M on the produced kg).  Idle modules still carry CapEx."""
    in_op = state is OperatingState.PRODUCTION
    produced = production_rate(op, state, pea) * ctx.delta_int
    su = fp.c_su if (started and in_op) else 0.0
    return (capex_per_interval(fp, ctx)
            + opex_for_interval(op, pea.p_el, ctx, in_op)
            + su
            + om_per_kg(fp, pea.mh2_nom) * produced)


def mlcoh_gradient(op: float, fp: FinancialParameters, pea: PeaParameters,
                   ctx: PeriodContext, started: bool = False) -> GradientResult:
    """Analytic derivative of mlcoh with respect to op while producing.

    With N(op) = capex_interval + E*op + su (E the electricity cost per
    percent) and M(op) = (mh2(op) + delta) * delta_int, the quotient rule
    gives d(N/M) = (N'M - NM')/M^2; the O&M term is constant.
    """
    lo, hi = pea.op_min, pea.op_max
    if not lo <= op <= hi:
        raise ValueError(f"op={op} outside operating range [{lo}, {hi}]")
    e_coef = pea.p_el * ctx.c_e * ctx.delta_int / 100.0
    su = fp.c_su if started else 0.0
    numer = capex_per_interval(fp, ctx) + e_coef * op + su
    numer_d = e_coef
    m_val = (pea.alpha * op + pea.beta) * op + pea.gamma
    denom = (m_val + fp.delta) * ctx.delta_int
    denom_d = (2.0 * pea.alpha * op + pea.beta) * ctx.delta_int
    grad = (numer_d * denom - numer * denom_d) / (denom * denom)
    return GradientResult(grad, one_sided=(op == lo or op == hi))
