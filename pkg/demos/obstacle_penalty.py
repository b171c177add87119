"""Exterior penalty for the obstacle problem -u'' = f, u >= 0 on (0, 1).

The exact solution is x (a - x)^2 / a^2 up to the free boundary a = 0.5 and
zero beyond.  Shrinking eps_p drives the constraint violation down as
O(eps_p) until the mesh error takes over.

Run:  python demos/obstacle_penalty.py
"""
from ehldg.study import obstacle_case, run_penalty_sweep

case = obstacle_case("contact")
rows = run_penalty_sweep(case, [None, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7], cells=256)
print(f"{'eps_p':>8} {'L2 error':>11} {'min u':>11} {'bound -10 eps max|f|':>21}")
for r in rows:
    bound = -10 * r.eps_p * case.max_abs_f
    print(f"{r.eps_p:8.0e} {r.err_l2:11.3e} {r.min_u:11.3e} {bound:21.3e}")
print("(eps_p = inf is the unconstrained solve: it dips below zero)")
