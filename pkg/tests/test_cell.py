import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kppflow.cell import (
    CellSolveError,
    corrector_limit_estimate,
    diffusivity_identity_check,
    diffusivity_sweep,
    solve_cell_problem,
)
from kppflow.flows import cellular_flow, shear_flow
from kppflow.operators import TiltedOperator
from kppflow.torus import POINCARE_CONSTANT, ScalarField, gradient, h1_norm, l2_norm, make_grid

DELTA = 1 / (8 * math.pi**2)


def dense_cell_solve(u, A, e=(1, 0)):
    """Bordered dense solve of the discrete cell problem; returns D_e."""
    M = TiltedOperator(u, A, sign=-1.0).dense()
    n = M.shape[0]
    B = np.zeros((n + 1, n + 1))
    B[:n, :n] = M
    B[:n, n] = 1.0
    B[n, :n] = 1.0
    psi = np.linalg.solve(B, np.append(u.along(e).values.ravel(), 0.0))[:n]
    psi = ScalarField(u.grid, psi.reshape(u.grid.shape))
    return psi, 1.0 + A * A * l2_norm(gradient(psi)) ** 2


@pytest.mark.parametrize("A", [0.0, 1.0, 50.0])
def test_zero_flow_gives_unit_diffusivity(zero32, A):
    sol = solve_cell_problem(zero32, (1, 0), A)
    assert not np.any(sol.psi.values)
    assert sol.D_e == 1.0


@pytest.mark.parametrize("A", [1.0, 10.0, 100.0])
def test_shear_analytic_solution(sin_shear, A):
    sol = solve_cell_problem(sin_shear, (1, 0), A)
    exact = ScalarField.from_function(sin_shear.grid, lambda x, y: np.sin(2 * np.pi * y) / (4 * np.pi**2))
    assert np.max(np.abs(sol.psi.values - exact.values)) < 1e-12
    assert math.isclose(sol.D_e, 1 + A * A * DELTA, rel_tol=1e-10)
    assert abs(np.mean(sol.psi.values)) <= 1e-12
    assert sol.residual <= 1e-10


def test_cellular_matches_dense_oracle():
    sol = solve_cell_problem(cellular_flow(make_grid(2, 128)), (1, 0), 64.0)
    _, D_dense = dense_cell_solve(cellular_flow(make_grid(2, 32)), 64.0)
    assert abs(sol.D_e - D_dense) / D_dense <= 1e-6


def test_small_grid_dense_equivalence():
    u = cellular_flow(make_grid(2, 16))
    sol = solve_cell_problem(u, (1, 0), 8.0, tol=1e-13)
    psi, _ = dense_cell_solve(u, 8.0)
    assert np.max(np.abs(psi.values - sol.psi.values)) <= 1e-8


def test_orthogonal_direction_for_shear(sin_shear):
    assert abs(solve_cell_problem(sin_shear, (0, 1), 30.0).D_e - 1.0) <= 1e-10


def test_preconditions(sin_shear):
    with pytest.raises(ValueError):
        solve_cell_problem(sin_shear, (1, 1), 1.0)
    with pytest.raises(ValueError):
        solve_cell_problem(sin_shear, (1, 0), 1.0, tol=1e-3)


def test_non_convergence_carries_best_iterate(cellular32):
    with pytest.raises(CellSolveError) as info:
        solve_cell_problem(cellular32, (1, 0), 200.0, max_iter=3, refine=False, restart=3)
    assert info.value.psi is not None and info.value.residual > 1e-10


@pytest.mark.parametrize("A", [4.0, 32.0])
def test_identities_for_shear_and_cellular(sin_shear, A):
    for u in (sin_shear, cellular_flow(make_grid(2, 64))):
        sol = solve_cell_problem(u, (1, 0), A)
        ids = diffusivity_identity_check(sol, u)
        assert ids["id22_residual"] <= 1e-9
        assert ids["id24_residual"] <= 1e-9


def test_identity_check_zero_flow(zero32):
    ids = diffusivity_identity_check(solve_cell_problem(zero32, (1, 0), 3.0), zero32)
    assert ids == {"id22_residual": 0.0, "id24_residual": 0.0}


def test_identity_check_detects_perturbation(sin_shear):
    sol = solve_cell_problem(sin_shear, (1, 0), 5.0)
    bump = ScalarField.from_function(sin_shear.grid, lambda x, y: 0.1 * np.sin(2 * np.pi * x))
    bad = type(sol)(**{**sol.__dict__, "psi": sol.psi + bump})
    assert diffusivity_identity_check(bad, sin_shear)["id22_residual"] > 1e-3


def test_h1_bound_and_shear_lower_bound(sin_shear):
    for u in (sin_shear, cellular_flow(make_grid(2, 64))):
        for A in (2.0, 20.0):
            sol = solve_cell_problem(u, (1, 0), A)
            # ||grad psi||^2 = int (u.e) psi <= ||u.e|| C ||grad psi||
            bound = math.sqrt(1 + POINCARE_CONSTANT**2) * POINCARE_CONSTANT * l2_norm(u.along((1, 0)))
            assert h1_norm(sol.psi) <= 1.05 * bound
    sol = solve_cell_problem(sin_shear, (1, 0), 20.0)
    assert sol.D_e >= 1 + DELTA * 400 - 1e-8


def test_shear_sweep():
    u = shear_flow(make_grid(2, 32), [((1,), 1.0)])
    curve = diffusivity_sweep(u, (1, 0), [1.0, 10.0, 100.0])
    ratio = curve.column("D_e_over_A2")
    expected = 1 / np.array([1.0, 10.0, 100.0]) ** 2 + DELTA
    assert np.allclose(ratio, expected, rtol=1e-10)
    assert curve.flags["D_e_over_A2_decreasing"]
    lim = corrector_limit_estimate(curve)
    assert np.max(lim.h1_distance) <= 1e-10


def test_zero_sweep(zero32):
    curve = diffusivity_sweep(zero32, (1, 0), [2.0, 4.0, 8.0])
    assert np.array_equal(curve.column("D_e_over_A2"), 1 / np.array([4.0, 16.0, 64.0]))
    assert not np.any(corrector_limit_estimate(curve).w0_estimate.values)


def test_cellular_sweep_trends():
    u = cellular_flow(make_grid(2, 64))
    curve = diffusivity_sweep(u, (1, 0), [4.0, 8.0, 16.0])
    assert curve.flags["D_e_over_A2_decreasing"]
    assert corrector_limit_estimate(curve).first_integral_decreasing


def test_sweep_validation(sin_shear):
    with pytest.raises(ValueError):
        diffusivity_sweep(sin_shear, (1, 0), [10.0, 1.0])
    with pytest.raises(ValueError):
        corrector_limit_estimate(diffusivity_sweep(sin_shear, (1, 0), [1.0, 2.0]))


def test_sweep_csv_columns(sin_shear):
    text = diffusivity_sweep(sin_shear, (1, 0), [1.0, 2.0]).to_csv()
    header = text.splitlines()[0]
    assert header == "A,D_e,D_e_over_A2,residual,first_integral_residual,h1_dist_to_w0"


@settings(max_examples=10, deadline=None)
@given(st.floats(min_value=0.5, max_value=40.0))
def test_diffusivity_at_least_one(A):
    u = cellular_flow(make_grid(2, 32))
    assert solve_cell_problem(u, (1, 0), A).D_e >= 1.0
