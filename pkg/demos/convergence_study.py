"""h- and p-convergence of the interior penalty discretization on manufactured problems.

Run:  python demos/convergence_study.py
"""
import numpy as np

from ehldg.assembly import FormParams
from ehldg.study import ROUGH_1D, SMOOTH_1D, SMOOTH_2D, ManufacturedCase, run_h_sweep, run_p_sweep


def show(table, title):
    print(f"\n{title}")
    print(f"{'h':>10} {'p':>2} {'L2 error':>11} {'energy':>11} {'rate L2':>8} {'rate E':>7}")
    for r in table.rows:
        print(f"{r.h:10.5f} {r.p:2d} {r.err_l2:11.3e} {r.err_energy:11.3e} {r.rate_l2:8.3f} {r.rate_energy:7.3f}")


# symmetric form, a_k = 10: L2 rates approach p+1 and energy rates approach p
show(run_h_sweep(SMOOTH_1D, (1, 2), levels=5), "1D, u = sin(pi x) exp(x), SIPG")
show(run_h_sweep(SMOOTH_2D, (1,), levels=4, base_cells=4), "2D, u = sin(pi x) sin(pi y) exp(x), SIPG")

# the non-symmetric variants lose the extra L2 order for even p
for theta, name in ((0.0, "IIPG"), (-1.0, "NIPG")):
    show(run_h_sweep(SMOOTH_1D, (1, 2), levels=4, params=FormParams(theta=theta)), f"1D smooth case, {name}")

# a solution-dependent coefficient 1 + u^2 exercises the Newton path
nonlinear = ManufacturedCase("nonlinear", "sin(pi*x)*exp(x)", coefficient="nonlinear")
show(run_h_sweep(nonlinear, (1,), levels=4), "1D, eps(u) = 1 + u^2")

# p-refinement: exponential decay for the analytic solution, algebraic for x^(5/2)
for case in (SMOOTH_1D, ROUGH_1D):
    t = run_p_sweep(case, cells=4, degrees=(1, 2, 3, 4, 5))
    errs = np.array([r.err_l2 for r in t.rows])
    print(f"\np-sweep {case.name}: L2 errors", " ".join(f"{e:.2e}" for e in errs))
