"""Centralized brute-force dispatcher used as ground truth on small fleets.

Enumerates joint state/operating-point combinations on a grid; one agent
per sweep additionally evaluates the operating points that hit the demand
band edges exactly, which makes the scan a valid lower bound for
continuous in-band dispatches as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .economics import (FinancialParameters, PeriodContext,
                        capex_per_interval, om_per_kg)
from .electrolyzer import PeaParameters


@dataclass(frozen=True)
class OracleResult:
    ops: tuple[float, ...]          # percent per module, 0 = idle
    total_cost_eur: float
    deviation_kg_h: float           # signed production minus demand
    met_demand: bool


def _candidates(pea: PeaParameters, fin: FinancialParameters,
                ctx: PeriodContext, step: float):
    ops = np.arange(pea.op_min, pea.op_max, step, dtype=float)
    ops = np.concatenate([[0.0], ops, [pea.op_max]])
    qty = np.where(ops > 0, (pea.alpha * ops + pea.beta) * ops + pea.gamma, 0.0)
    capex_i = capex_per_interval(fin, ctx)
    e_coef = pea.p_el * ctx.c_e * ctx.delta_int / 100.0
    om = om_per_kg(fin, pea.mh2_nom)
    cost = capex_i + np.where(ops > 0, e_coef * ops + om * qty * ctx.delta_int, 0.0)
    return ops, qty, cost


def brute_force_dispatch(fleet: list[tuple[PeaParameters, FinancialParameters]],
                         demand: float, ctx: PeriodContext,
                         grid_step: float = 1.0,
                         eps_dem: float = 1e-3) -> OracleResult:
    """Cheapest joint dispatch meeting demand within eps_dem; when no
    combination lands in the band, the minimal-deviation one wins."""
    n = len(fleet)
    if n < 1 or n > 3:
        raise ValueError(f"oracle supports 1..3 modules, got {n}")
    if grid_step < 0.5:
        raise ValueError(f"grid_step must be >= 0.5 %, got {grid_step}")

    cands = [_candidates(pea, fin, ctx, grid_step) for pea, fin in fleet]
    capex_is = [capex_per_interval(fin, ctx) for _, fin in fleet]
    d_guard = max(demand, 1e-9)

    best = None  # (not met, dev_key, cost, ops_tuple)
    for j in range(n):
        others = [i for i in range(n) if i != j]
        if others:
            grids_m = np.meshgrid(*[cands[i][1] for i in others], indexing="ij")
            grids_c = np.meshgrid(*[cands[i][2] for i in others], indexing="ij")
            others_m = sum(grids_m).ravel()
            others_cost = sum(grids_c).ravel()
            shape = grids_m[0].shape
        else:
            others_m = np.zeros(1)
            others_cost = np.zeros(1)
            shape = (1,)
        pea, fin = fleet[j]
        own_ops, own_m, own_cost = cands[j]
        met, cost, dev, combo, own_op = kernels.fill_scan(
            others_m, others_cost, own_ops, own_m, own_cost,
            pea.alpha, pea.beta, pea.gamma, pea.op_min, pea.op_max,
            capex_is[j], pea.p_el * ctx.c_e * ctx.delta_int / 100.0,
            om_per_kg(fin, pea.mh2_nom), ctx.delta_int, demand, eps_dem)
        key = (not met, 0.0 if met else dev, cost)
        if best is None or key < best[0]:
            idx = np.unravel_index(int(combo), shape) if others else ()
            ops = [0.0] * n
            for pos, i in enumerate(others):
                ops[i] = float(cands[i][0][idx[pos]])
            ops[j] = float(own_op)
            best = (key, cost, dev, tuple(ops), met)

    _, cost, dev, ops, met = best
    produced = sum((fleet[i][0].curve(o) if o > 0 else 0.0)
                   for i, o in enumerate(ops))
    return OracleResult(ops=ops, total_cost_eur=float(cost),
                        deviation_kg_h=float(produced - demand),
                        met_demand=bool(met))
