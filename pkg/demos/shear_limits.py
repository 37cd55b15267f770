"""Shear flow u = (sin 2 pi y, 0): finite-amplitude speeds against the A -> infinity limits.

Run: python demos/shear_limits.py
"""
import math

import numpy as np

from kppflow import (
    ScalarField,
    diffusivity_limit_shear,
    fisher_kpp,
    kappa_e_shear,
    large_f_limit,
    make_grid,
    minimal_speed,
    shear_flow,
    small_f_limit,
    solve_cell_problem,
)
from kppflow.limits import find_lambda_for_f, gamma_supremum, speed_limit_detail
from kppflow.torus import Grid

alpha = ScalarField.from_function(Grid((256,)), lambda y: np.sin(2 * np.pi * y))
u = shear_flow(make_grid(2, 64), [((1,), 1.0)])
e = (1.0, 0.0)

# Transverse principal eigenvalue: quadratic for small lam, close to lam * max(alpha) for large lam.
print("kappa_e(lam):")
for lam in (0.01, 1.0, 10.0, 1e3, 1e4):
    k = kappa_e_shear(alpha, lam).kappa
    print(f"  lam={lam:<8g} kappa={k:.8g}  kappa/lam={k / lam:.6f}")
print(f"  lam^2/(8 pi^2) at lam=0.01: {1e-4 / (8 * math.pi**2):.8g}")

# Diffusivity: D_e/A^2 -> 1/(8 pi^2) and the square relation with the small-f' coefficient.
d, _ = diffusivity_limit_shear(alpha, e)
s = small_f_limit(alpha, e)
print(f"\ndiffusivity limit {d:.10f}, small-f' coefficient {s:.10f}, squared {s * s:.10f}")
for A in (1.0, 10.0, 100.0):
    sol = solve_cell_problem(u, e, A)
    print(f"  A={A:<5g} D_e/A^2={sol.D_e / A**2:.10f}")

# Speed: c*(A)/A decreases to the oracle; the gap is about lam*/A^2.
limit, lam_star, branch = speed_limit_detail(alpha, e, 1.0)
print(f"\nspeed limit (f'(0)=1): {limit:.8f} at lam*={lam_star:.4f} ({branch})")
for A in (10.0, 100.0, 1000.0):
    r = minimal_speed(u, e, A, fisher_kpp(1.0))
    print(f"  A={A:<6g} c*/A={r.c_star / A:.8f}  gap={r.c_star / A - limit:.3e}  lam*/A^2={lam_star / A**2:.3e}")

print(f"\nlarge-f' limit {large_f_limit(alpha, e):.6f}")
for fp in (0.01, 1.0, 10.0, 100.0):
    v, lam, br = speed_limit_detail(alpha, e, fp)
    print(f"  f'(0)={fp:<6g} limit={v:.6f} ({br})")

Gamma, finite = gamma_supremum(alpha, e)
print(f"\nGamma estimate {Gamma:.4f}, finite flag {finite}")
print(f"gamma(lam)=0.05 at lam={find_lambda_for_f(alpha, e, 0.05):.6f}")
