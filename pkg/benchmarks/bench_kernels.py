"""Timing comparison of the compiled and numpy kernel paths.

Run:  python benchmarks/bench_kernels.py

Covers the two inner loops that dominate a scheduling run: the setpoint
minimization called once per agent per iteration, and the joint grid scan
behind the brute-force reference dispatcher.
"""

import time

import numpy as np

from elysched import kernels
from elysched.economics import FinancialParameters, PeriodContext, \
    capex_per_interval, om_per_kg
from elysched.electrolyzer import make_pea

PEA = make_pea("bench", p_el=2.4, mh2_nom=0.04494)
FIN = FinancialParameters(capex0=8000.0)
CTX = PeriodContext(c_e=0.05, delta_int=0.25)

CAPEX_I = capex_per_interval(FIN, CTX)
E_COEF = PEA.p_el * CTX.c_e * CTX.delta_int / 100.0
OM = om_per_kg(FIN, PEA.mh2_nom)


def time_fn(fn, reps):
    fn()  # warm-up / JIT
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) / reps


def bench_argmin(impl):
    rng = np.random.default_rng(0)
    zs = rng.uniform(0, 100, 200)
    lams = rng.uniform(-2, 2, 200)

    def run():
        for z, lam in zip(zs, lams):
            impl(z, lam, 200.0, PEA.alpha, PEA.beta, PEA.gamma, FIN.delta,
                 CTX.delta_int, CAPEX_I, E_COEF, 0.0, OM,
                 PEA.op_min, PEA.op_max, 1e-7)
    return run


def bench_fill_scan(impl):
    ops = np.concatenate([[0.0], np.arange(8.0, 100.0, 1.0), [100.0]])
    qty = np.where(ops > 0, (PEA.alpha * ops + PEA.beta) * ops, 0.0)
    cost = CAPEX_I + np.where(ops > 0, E_COEF * ops + OM * qty * CTX.delta_int,
                              0.0)
    others_m = np.add.outer(qty, qty).ravel()        # 2 partner modules
    others_c = np.add.outer(cost, cost).ravel()

    def run():
        impl(others_m, others_c, ops, qty, cost, PEA.alpha, PEA.beta,
             PEA.gamma, PEA.op_min, PEA.op_max, CAPEX_I, E_COEF, OM,
             CTX.delta_int, 0.09, 1e-3)
    return run


def main():
    print(f"numba available: {kernels.HAVE_NUMBA}")
    rows = []
    if kernels.HAVE_NUMBA:
        rows.append(("setpoint argmin x200 (numba)",
                     time_fn(bench_argmin(kernels.production_argmin_numba), 20)))
    rows.append(("setpoint argmin x200 (numpy)",
                 time_fn(bench_argmin(kernels.production_argmin_numpy), 5)))
    if kernels.HAVE_NUMBA:
        rows.append(("3-module grid scan   (numba)",
                     time_fn(bench_fill_scan(kernels.fill_scan_numba), 20)))
    rows.append(("3-module grid scan   (numpy)",
                 time_fn(bench_fill_scan(kernels.fill_scan_numpy), 2)))
    for name, dt in rows:
        print(f"{name:34s} {dt * 1e3:10.3f} ms")
    if kernels.HAVE_NUMBA:
        speed_a = rows[1][1] / rows[0][1]
        speed_s = rows[3][1] / rows[2][1]
        print(f"speedup: argmin {speed_a:.1f}x, grid scan {speed_s:.1f}x")


if __name__ == "__main__":
    main()
