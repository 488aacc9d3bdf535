"""Single-agent ADMM steps for one scheduling period: local cost-optimal
setpoint (x), demand-fitting setpoint (z), gradient-weighted dual update
and the convergence test."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .economics import (FinancialParameters, PeriodContext, capex_per_interval,
                        mlcoh, om_per_kg)
from .electrolyzer import (OperatingState, PeaParameters, feasible_op_range,
                           invert_production)

DEMAND_GUARD = 1e-9  # kg/h floor for relative-deviation denominators


@dataclass
class SolverSettings:
    """Solver defaults shared by the whole fleet.

    penalty is the quadratic coupling weight of the augmented Lagrangian;
    dual_step scales the multiplier update separately, since a step as
    large as the penalty makes the multiplier wind up during demand jumps
    and park the fleet a few tenths of a percent off demand.
    """

    penalty: float = 200.0
    dual_step: float = 0.5
    eps: float = 1e-3
    eps_demand: float = 1e-3
    max_iterations: int = 100
    seed: int = 42
    op_tolerance: float = 1e-7
    timeout_ms: float = 50.0


@dataclass
class AdmmState:
    """One agent's solver variables for the current period."""

    x: float = 0.0
    z: float = 0.0
    lam: float = 0.0
    k: int = 0
    p: float = 200.0
    p_dual: float = 0.5
    eps: float = 1e-3
    eps_dem: float = 1e-3
    g_ref: float = 1.0
    history: Optional[tuple[float, float, float]] = None


@dataclass(frozen=True)
class AgentContext:
    """Everything one agent needs to price a period."""

    pea: PeaParameters
    fin: FinancialParameters
    period: PeriodContext
    started: bool = False       # production this period would be a start-up
    can_produce: bool = True    # False while holding time or after a fault


@dataclass(frozen=True)
class XUpdateResult:
    op: float
    state: OperatingState
    value: float


def init_state(settings: SolverSettings, pea: PeaParameters,
               rng: np.random.Generator) -> AdmmState:
    """Fresh period-1 state: x, z uniform inside the operating limits."""
    x = float(rng.uniform(pea.op_min, pea.op_max))
    z = float(rng.uniform(pea.op_min, pea.op_max))
    return AdmmState(x=x, z=z, lam=0.0, k=0, p=settings.penalty,
                     p_dual=settings.dual_step, eps=settings.eps,
                     eps_dem=settings.eps_demand)


def idle_cost(actx: AgentContext) -> float:
    """Idle-period cost per kg: the delta guard keeps it large but finite."""
    fin, ctx = actx.fin, actx.period
    return (om_per_kg(fin, actx.pea.mh2_nom)
            + capex_per_interval(fin, ctx) / (fin.delta * ctx.delta_int))


def lagrangian(x: float, z: float, lam: float, p: float,
               actx: AgentContext) -> float:
    """f(x) + lam*(x - z) + (p/2)*(x - z)^2, for diagnostics."""
    state = OperatingState.PRODUCTION if x > 0 else OperatingState.IDLE
    f = mlcoh(x, state, actx.started, actx.fin, actx.pea, actx.period).mlcoh
    d = x - z
    return f + lam * d + 0.5 * p * d * d


def x_update(state: AdmmState, actx: AgentContext) -> XUpdateResult:
    """Minimize the local augmented Lagrangian over both state branches.

    The production branch is minimized over [op_min, op_max] by coarse scan
    plus golden-section refinement; the idle branch evaluates x = 0 with the
    guarded idle cost.  The cheaper branch wins.
    """
    pea, fin, ctx = actx.pea, actx.fin, actx.period
    z, lam, p = state.z, state.lam, state.p

    d = 0.0 - z
    idle_val = idle_cost(actx) + lam * d + 0.5 * p * d * d
    if not actx.can_produce:
        return XUpdateResult(0.0, OperatingState.IDLE, idle_val)

    su = fin.c_su if actx.started else 0.0
    op, val = kernels.production_argmin(
        z, lam, p, pea.alpha, pea.beta, pea.gamma, fin.delta, ctx.delta_int,
        capex_per_interval(fin, ctx), pea.p_el * ctx.c_e * ctx.delta_int / 100.0,
        su, om_per_kg(fin, pea.mh2_nom), pea.op_min, pea.op_max, 1e-7)
    if idle_val < val:
        return XUpdateResult(0.0, OperatingState.IDLE, idle_val)
    return XUpdateResult(float(op), OperatingState.PRODUCTION, float(val))


def z_update(x_new: float, others_qty: float, demand: float,
             actx: AgentContext, idle_admissible: bool = True) -> float:
    """Operating point minimizing |others_qty + mh2(op) - demand|.

    The residual demand is inverted through the production curve and
    clamped; a residual at or below zero maps to the idle candidate, and a
    residual below the op_min output rounds to the closer of idle / op_min.
    """
    if others_qty < 0:
        raise ValueError(f"others_qty must be >= 0, got {others_qty}")
    pea = actx.pea
    residual = demand - others_qty
    if residual <= 0:
        return 0.0 if idle_admissible else pea.op_min
    min_out = pea.curve(pea.op_min)
    if residual < min_out:
        if idle_admissible and residual < 0.5 * min_out:
            return 0.0
        return pea.op_min
    return invert_production(pea, residual)


def damped_z_step(z_current: float, own_qty: float, total_qty: float,
                  demand: float, share: float, fleet_min_qty: float,
                  actx: AgentContext) -> float:
    """Stabilized z assignment used inside the iteration loop.

    Simultaneous agents each solving the full residual overshoot by a
    factor of the fleet size, so the stored z instead moves the agent's
    quantity by its capacity share of the fleet-wide gap.  The fleet then
    lands on the demand in one step regardless of how many agents move.
    Demand below the everyone-at-minimum output is the only case that
    sends z to the idle candidate here.
    """
    pea = actx.pea
    gap = demand - total_qty
    target = z_update(x_new=0.0, others_qty=max(total_qty - own_qty, 0.0),
                      demand=demand, actx=actx)
    if target == 0.0 and (demand < fleet_min_qty
                          or (gap <= 0 and own_qty == 0.0)):
        return 0.0
    zq = pea.curve(z_current) if z_current > 0 else 0.0
    q_new = zq + share * gap
    min_out = pea.curve(pea.op_min)
    if q_new >= min_out:
        return invert_production(pea, q_new)
    if q_new <= 0:
        return 0.0
    return 0.0 if demand < fleet_min_qty else pea.op_min


def gradient_weight(gradient: float, g_ref: float) -> float:
    """Inverse-gradient weight in (0, 1]: flat cost curves react the most."""
    return g_ref / (abs(gradient) + g_ref)


def dual_update(state: AdmmState, deviation_rel: float,
                gradient: float) -> float:
    """New multiplier lam + dual_step * deviation * w(gradient)."""
    if not np.isfinite(gradient):
        raise ValueError("gradient must be finite")
    return state.lam + state.p_dual * deviation_rel * gradient_weight(
        gradient, state.g_ref)


def converged(state: AdmmState, deviation_rel: float) -> bool:
    """Successive-iterate distance below eps and demand met within eps_dem."""
    if state.k < 1 or state.history is None:
        return False
    hx, hz, hl = state.history
    step = abs(state.x - hx) + abs(state.z - hz) + abs(state.lam - hl)
    return step < state.eps and abs(deviation_rel) < state.eps_dem


def deviation(total_qty: float, demand: float) -> float:
    """Signed relative demand deviation with a guarded denominator."""
    return (total_qty - demand) / max(demand, DEMAND_GUARD)


def feasible(state: AdmmState, op_state: OperatingState,
             pea: PeaParameters) -> bool:
    lo, hi = feasible_op_range(op_state, pea)
    return lo <= state.x <= hi and np.isfinite(state.x) and np.isfinite(state.z)
