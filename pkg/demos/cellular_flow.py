"""Cellular flow: D_e and c* grow sublinearly, so both ratios decay with A.

Run: python demos/cellular_flow.py [resolution]
A 128-point grid keeps this under a minute; the acceptance run uses 256.
"""
import sys

import numpy as np

from kppflow import cellular_flow, diffusivity_sweep, fisher_kpp, make_grid, speed_sweep
from kppflow.limits import general_flow_limit_crosscheck

n = int(sys.argv[1]) if len(sys.argv) > 1 else 128
u = cellular_flow(make_grid(2, n))
e = (1.0, 0.0)
As = [4.0, 8.0, 16.0, 32.0, 64.0]

cells = diffusivity_sweep(u, e, As)
speeds = speed_sweep(u, e, As, fisher_kpp(1.0), eigen_tol=1e-9)
print(f"{'A':>6} {'D_e':>12} {'D_e/A^2':>12} {'c*':>10} {'c*/A':>10}")
for A, D, c in zip(As, cells.column("D_e"), speeds.column("c_star")):
    print(f"{A:6g} {D:12.6f} {D / A**2:12.6g} {c:10.5f} {c / A:10.5f}")

p = np.polyfit(np.log(As[1:]), np.log(cells.column("D_e")[1:]), 1)[0]
q = np.polyfit(np.log(As[1:]), np.log(speeds.column("c_star")[1:]), 1)[0]
print(f"\nfitted growth: D_e ~ A^{p:.3f}, c* ~ A^{q:.3f}")

cc = general_flow_limit_crosscheck(u, e, cells, speeds)
print(f"extrapolated D_e/A^2 -> {cc.diffusivity.limit:.3g} (order {cc.diffusivity.order})")
print(f"extrapolated c*/A   -> {cc.speed.limit:.3g} (order {cc.speed.order})")
print("flags:", cc.flags)
