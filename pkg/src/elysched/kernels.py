"""Numeric inner loops: setpoint minimization and the brute-force dispatch
grid scan.

Each kernel has a numba-compiled version and a pure numpy/Python fallback
with identical semantics.  The compiled path is used when numba imports
and the environment variable ELYSCHED_NO_NUMBA is unset; benchmarks call
both variants directly.
"""

from __future__ import annotations

import math
import os

import numpy as np

_GOLDEN = 2.0 / (1.0 + math.sqrt(5.0))
_DISABLED = os.environ.get("ELYSCHED_NO_NUMBA", "") not in ("", "0")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # decorator stub so both paths share source
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


def _objective(op, z, lam, p, alpha, beta, gamma, delta, dint,
               capex_i, e_coef, su, om):
    """x-update objective on the production branch at one operating point."""
    numer = capex_i + e_coef * op + su
    denom = ((alpha * op + beta) * op + gamma + delta) * dint
    d = op - z
    return om + numer / denom + lam * d + 0.5 * p * d * d


def _production_argmin(z, lam, p, alpha, beta, gamma, delta, dint,
                       capex_i, e_coef, su, om, op_min, op_max, tol):
    """Coarse 1 % scan over [op_min, op_max] then golden-section refinement
    on the bracket around the best grid point.  Returns (op, value)."""
    best_op = op_min
    best_val = _objective(op_min, z, lam, p, alpha, beta, gamma, delta,
                          dint, capex_i, e_coef, su, om)
    n = int((op_max - op_min) // 1.0)
    for i in range(1, n + 1):
        op = op_min + i
        v = _objective(op, z, lam, p, alpha, beta, gamma, delta, dint,
                       capex_i, e_coef, su, om)
        if v < best_val:
            best_val = v
            best_op = op
    v = _objective(op_max, z, lam, p, alpha, beta, gamma, delta, dint,
                   capex_i, e_coef, su, om)
    if v < best_val:
        best_val = v
        best_op = op_max

    a = best_op - 1.0
    if a < op_min:
        a = op_min
    b = best_op + 1.0
    if b > op_max:
        b = op_max
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1 = _objective(x1, z, lam, p, alpha, beta, gamma, delta, dint,
                    capex_i, e_coef, su, om)
    f2 = _objective(x2, z, lam, p, alpha, beta, gamma, delta, dint,
                    capex_i, e_coef, su, om)
    while b - a > tol:
        if f2 > f1:
            b = x2
            x2 = x1
            f2 = f1
            x1 = b - _GOLDEN * (b - a)
            f1 = _objective(x1, z, lam, p, alpha, beta, gamma, delta, dint,
                            capex_i, e_coef, su, om)
        else:
            a = x1
            x1 = x2
            f1 = f2
            x2 = a + _GOLDEN * (b - a)
            f2 = _objective(x2, z, lam, p, alpha, beta, gamma, delta, dint,
                            capex_i, e_coef, su, om)
    mid = 0.5 * (a + b)
    v_mid = _objective(mid, z, lam, p, alpha, beta, gamma, delta, dint,
                       capex_i, e_coef, su, om)
    # the scan grid point may still win when the bracket is one-sided
    if best_val < v_mid:
        return best_op, best_val
    return mid, v_mid


def production_argmin_numpy(z, lam, p, alpha, beta, gamma, delta, dint,
                            capex_i, e_coef, su, om, op_min, op_max,
                            tol=1e-7):
    """Fallback path: vectorized scan, scalar golden refinement."""
    ops = np.arange(op_min, op_max, 1.0)
    ops = np.append(ops, op_max)
    numer = capex_i + e_coef * ops + su
    denom = ((alpha * ops + beta) * ops + gamma + delta) * dint
    d = ops - z
    vals = om + numer / denom + lam * d + 0.5 * p * d * d
    j = int(np.argmin(vals))
    best_op, best_val = float(ops[j]), float(vals[j])

    a = max(best_op - 1.0, op_min)
    b = min(best_op + 1.0, op_max)
    obj = lambda op: _objective(op, z, lam, p, alpha, beta, gamma, delta,
                                dint, capex_i, e_coef, su, om)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = obj(x1), obj(x2)
    while b - a > tol:
        if f2 > f1:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = obj(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = obj(x2)
    mid = 0.5 * (a + b)
    v_mid = obj(mid)
    if best_val < v_mid:
        return best_op, best_val
    return mid, v_mid


def objective_grid_numpy(ops, z, lam, p, alpha, beta, gamma, delta, dint,
                         capex_i, e_coef, su, om):
    """Objective over an array of operating points (test / benchmark aid)."""
    ops = np.asarray(ops, dtype=float)
    numer = capex_i + e_coef * ops + su
    denom = ((alpha * ops + beta) * ops + gamma + delta) * dint
    d = ops - z
    return om + numer / denom + lam * d + 0.5 * p * d * d


if HAVE_NUMBA:
    _objective = njit(cache=True)(_objective)
    production_argmin_numba = njit(cache=True)(_production_argmin)

    @njit(cache=True)
    def objective_grid_numba(ops, z, lam, p, alpha, beta, gamma, delta, dint,
                             capex_i, e_coef, su, om):
        out = np.empty(ops.shape[0])
        for i in range(ops.shape[0]):
            out[i] = _objective(ops[i], z, lam, p, alpha, beta, gamma, delta,
                                dint, capex_i, e_coef, su, om)
        return out

    production_argmin = production_argmin_numba
    objective_grid = objective_grid_numba
else:
    production_argmin_numba = None
    objective_grid_numba = None
    production_argmin = production_argmin_numpy
    objective_grid = objective_grid_numpy


# --- joint dispatch enumeration -----------------------------------------
#
# One agent ("the filler") additionally evaluates operating points that hit
# the demand band edges exactly, so the scan is a true lower bound for
# continuous in-band dispatches and not just for its own grid.

def _invert_rising(alpha, beta, gamma, op_min, op_max, qty):
    if qty <= gamma:
        return 0.0
    hi = (alpha * op_max + beta) * op_max + gamma
    if qty >= hi:
        return op_max
    if alpha == 0.0:
        op = (qty - gamma) / beta
    else:
        disc = beta * beta - 4.0 * alpha * (gamma - qty)
        if disc < 0.0:
            disc = 0.0
        op = 2.0 * (qty - gamma) / (beta + math.sqrt(disc))
    if op < op_min:
        lo = (alpha * op_min + beta) * op_min + gamma
        return op_min if qty >= 0.5 * lo else 0.0
    return op


def _fill_scan(others_m, others_cost, own_ops, own_m, own_cost,
               alpha, beta, gamma, op_min, op_max,
               capex_i, e_coef, om_pk, dint, demand, eps_dem):
    """Scan one filler agent against pre-aggregated partner combinations.

    Returns (in_band_found, best_cost, best_dev, combo_idx, own_op) where
    the champion is the cheapest in-band combination if one exists, else
    the (deviation, cost)-lexicographic minimum.
    """
    d_guard = demand if demand > 1e-9 else 1e-9
    band_found = False
    band_cost = np.inf
    band_combo = -1
    band_op = 0.0
    band_dev = np.inf
    any_dev = np.inf
    any_cost = np.inf
    any_combo = -1
    any_op = 0.0
    n_c = others_m.shape[0]
    n_o = own_ops.shape[0]
    for c in range(n_c):
        base_m = others_m[c]
        base_cost = others_cost[c]
        for t in range(n_o + 3):
            if t < n_o:
                op = own_ops[t]
                q = own_m[t]
                cost = base_cost + own_cost[t]
            else:
                # fills for the residual demand: exact, and just inside
                # both band edges (the band test below is strict)
                if t == n_o:
                    target = demand * (1.0 - 0.999 * eps_dem)
                elif t == n_o + 1:
                    target = demand
                else:
                    target = demand * (1.0 + 0.999 * eps_dem)
                op = _invert_rising(alpha, beta, gamma, op_min, op_max,
                                    target - base_m)
                if op > 0.0:
                    q = (alpha * op + beta) * op + gamma
                    cost = base_cost + capex_i + e_coef * op + om_pk * q * dint
                else:
                    q = 0.0
                    cost = base_cost + capex_i
            dev = abs(base_m + q - demand) / d_guard
            if dev < eps_dem:
                if cost < band_cost:
                    band_found = True
                    band_cost = cost
                    band_combo = c
                    band_op = op
                    band_dev = dev
            if dev < any_dev or (dev == any_dev and cost < any_cost):
                any_dev = dev
                any_cost = cost
                any_combo = c
                any_op = op
    if band_found:
        return True, band_cost, band_dev, band_combo, band_op
    return False, any_cost, any_dev, any_combo, any_op


def fill_scan_numpy(others_m, others_cost, own_ops, own_m, own_cost,
                    alpha, beta, gamma, op_min, op_max,
                    capex_i, e_coef, om_pk, dint, demand, eps_dem):
    """Vectorized twin of the scan loop; same visit order for tie-breaks
    (partner combination major, own candidate minor, fills last)."""
    d_guard = demand if demand > 1e-9 else 1e-9
    n_c = others_m.shape[0]
    n_o = own_ops.shape[0]

    ops = np.empty((n_c, n_o + 3))
    ops[:, :n_o] = own_ops[None, :]
    targets = np.array([demand * (1.0 - 0.999 * eps_dem), demand,
                        demand * (1.0 + 0.999 * eps_dem)])
    res = targets[None, :] - others_m[:, None]
    hi = (alpha * op_max + beta) * op_max + gamma
    lo = (alpha * op_min + beta) * op_min + gamma
    if alpha == 0.0:
        raw = (res - gamma) / beta
    else:
        disc = np.maximum(beta * beta - 4.0 * alpha * (gamma - res), 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            raw = 2.0 * (res - gamma) / (beta + np.sqrt(disc))
    fill_ops = np.select(
        [res <= gamma, res >= hi, raw < op_min],
        [0.0, op_max, np.where(res >= 0.5 * lo, op_min, 0.0)],
        default=raw)
    ops[:, n_o:] = fill_ops

    qty = np.where(ops > 0.0, (alpha * ops + beta) * ops + gamma, 0.0)
    cost = others_cost[:, None] + capex_i + np.where(
        ops > 0.0, e_coef * ops + om_pk * qty * dint, 0.0)
    dev = np.abs(others_m[:, None] + qty - demand) / d_guard

    flat_dev = dev.ravel()
    flat_cost = cost.ravel()
    in_band = flat_dev < eps_dem
    if in_band.any():
        masked = np.where(in_band, flat_cost, np.inf)
        idx = int(np.argmin(masked))
        found = True
    else:
        idx = int(np.lexsort((flat_cost, flat_dev))[0])
        found = False
    c, t = divmod(idx, n_o + 3)
    return (found, float(flat_cost[idx]), float(flat_dev[idx]), c,
            float(ops[c, t]))


if HAVE_NUMBA:
    _invert_rising = njit(cache=True)(_invert_rising)
    fill_scan_numba = njit(cache=True)(_fill_scan)
    fill_scan = fill_scan_numba
else:
    fill_scan_numba = None
    fill_scan = fill_scan_numpy
