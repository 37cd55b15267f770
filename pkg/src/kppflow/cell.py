"""Cell problem for the corrector and the effective diffusivity.

The rescaled corrector ``psi_A = chi_{e,A} / A`` solves

    -lap(psi) + A u.grad(psi) = u.e,   mean(psi) = 0,

and the effective diffusivity in direction ``e`` is ``D_e = 1 + A^2 ||grad psi||^2``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .flows import FlowField, advect, resample_flow
from .operators import TiltedOperator, gmres_solve, shifted_laplacian_inverse
from .sweep import SweepCurve, pool_map, strictly_decreasing
from .torus import ScalarField, gradient, h1_norm, l2_inner, l2_norm, resample

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("A", "D_e", "D_e_over_A2", "residual", "first_integral_residual", "h1_dist_to_w0")


class CellSolveError(RuntimeError):
    """Raised when GMRES misses the tolerance; carries the best iterate."""

    def __init__(self, message, psi=None, residual=None, A=None):
        super().__init__(message)
        self.psi = psi
        self.residual = residual
        self.A = A


@dataclass(frozen=True)
class CellSolution:
    psi: ScalarField
    A: float
    e: tuple[float, ...]
    residual: float
    D_e: float
    first_integral_residual: float
    iterations: int = 0
    refined: bool = False

    @property
    def grid(self):
        return self.psi.grid


def unit_direction(e, dim: int) -> tuple[float, ...]:
    e = tuple(float(x) for x in e)
    if len(e) != dim:
        raise ValueError(f"direction has {len(e)} entries, flow is {dim}-D")
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValueError(f"direction must be a unit vector, |e| = {np.linalg.norm(e)!r}")
    return e


def cell_operator(u: FlowField, A: float) -> TiltedOperator:
    """``-lap + A u.grad`` as a discrete operator."""
    return TiltedOperator(u, A, sign=-1.0)


def _solution(u, psi_values, A, e, residual, iterations, refined):
    psi = ScalarField(u.grid, psi_values - psi_values.mean())
    grad2 = l2_norm(gradient(psi)) ** 2
    return CellSolution(
        psi=psi,
        A=float(A),
        e=e,
        residual=float(residual),
        D_e=1.0 + A * A * grad2,
        first_integral_residual=l2_norm(advect(u, psi)),
        iterations=iterations,
        refined=refined,
    )


def solve_cell_problem(u: FlowField, e, A: float, tol: float = 1e-10, max_iter: int = 2000,
                       refine: bool = True, x0: ScalarField | None = None,
                       restart: int = 200) -> CellSolution:
    """Solve the cell problem by GMRES preconditioned with the inverse Laplacian.

    If the residual stalls (less than 1% reduction over a 50-iteration cycle)
    the flow is resampled on a grid twice as fine and the solve is retried
    once.  Failure to reach ``tol`` raises :class:`CellSolveError`.
    """
    e = unit_direction(e, u.dim)
    if not 0.0 < tol <= 1e-4:
        raise ValueError(f"tol must lie in (0, 1e-4], got {tol}")
    if A < 0:
        raise ValueError("amplitude must be non-negative")
    rhs = u.along(e).values
    if not np.any(rhs):
        return _solution(u, np.zeros(u.grid.shape), A, e, 0.0, 0, False)

    op = cell_operator(u, A)
    precond = shifted_laplacian_inverse(u.grid, 0.0)
    guess = None
    if x0 is not None:
        guess = resample(x0, u.grid).values.ravel()
    x, res, its, stalled = gmres_solve(op, rhs, tol=tol, max_iter=max_iter, precond=precond,
                                       x0=guess, restart=restart, project_mean=True)
    if stalled and refine and max(u.grid.shape) * 2 <= 4096:
        fine = u.grid.refined(2)
        logger.warning("cell solve stalled at A=%g (residual %.2e); retrying on %s", A, res, fine.shape)
        uf = resample_flow(u, fine)
        start = resample(ScalarField(u.grid, x.reshape(u.grid.shape) - x.mean()), fine)
        sol = solve_cell_problem(uf, e, A, tol=tol, max_iter=max_iter, refine=False,
                                 x0=start, restart=restart)
        return CellSolution(**{**sol.__dict__, "iterations": sol.iterations + its, "refined": True})
    if res > tol:
        best = ScalarField(u.grid, x.reshape(u.grid.shape) - x.mean())
        raise CellSolveError(
            f"cell problem at A={A} did not converge: residual {res:.3e} > {tol:.1e}",
            psi=best, residual=res, A=A,
        )
    return _solution(u, x.reshape(u.grid.shape), A, e, res, its, False)


def diffusivity_identity_check(sol: CellSolution, u: FlowField) -> dict:
    """Residuals of ``||grad psi||^2 = int (u.e) psi`` and of the D_e/A^2 identity."""
    if sol.grid != u.grid:
        u = resample_flow(u, sol.grid)
    grad2 = l2_norm(gradient(sol.psi)) ** 2
    flux = l2_inner(u.along(sol.e), sol.psi)
    id22 = abs(grad2 - flux) / grad2 if grad2 > 0 else abs(flux)
    if sol.A > 0:
        id24 = abs(sol.D_e / sol.A**2 - 1.0 / sol.A**2 - flux)
    else:
        id24 = 0.0
    return {"id22_residual": float(id22), "id24_residual": float(id24)}


def diffusivity_sweep(u: FlowField, e, A_list, tol: float = 1e-10, max_iter: int = 2000,
                      workers: int | None = None) -> SweepCurve:
    """Cell solves over an increasing list of positive amplitudes."""
    A_list = [float(a) for a in A_list]
    if not A_list or any(a <= 0 for a in A_list) or any(np.diff(A_list) <= 0):
        raise ValueError("A_list must be positive and strictly increasing")
    e = unit_direction(e, u.dim)

    def one(A):
        try:
            return solve_cell_problem(u, e, A, tol=tol, max_iter=max_iter)
        except CellSolveError as err:
            raise CellSolveError(f"sweep failed at A={A}: {err}", err.psi, err.residual, A) from err

    sols = pool_map(one, A_list, workers)
    w0 = sols[-1].psi
    rows = []
    for s in sols:
        dist = h1_norm(resample(s.psi, w0.grid) - w0) if s.psi.grid.dim == w0.grid.dim else np.nan
        rows.append((s.A, s.D_e, s.D_e / s.A**2, s.residual, s.first_integral_residual, dist))
    curve = SweepCurve(SWEEP_COLUMNS, rows, sols)
    ratio = curve.column("D_e_over_A2")
    curve.flags = {
        "D_e_over_A2_decreasing": strictly_decreasing(ratio),
        "D_e_over_A2_nonincreasing": bool(np.all(np.diff(ratio) <= 1e-12 * ratio[:-1])),
    }
    return curve


@dataclass(frozen=True)
class CorrectorLimit:
    w0_estimate: ScalarField
    amplitudes: np.ndarray
    h1_distance: np.ndarray
    first_integral_residuals: np.ndarray

    @property
    def first_integral_decreasing(self) -> bool:
        return strictly_decreasing(self.first_integral_residuals)


def corrector_limit_estimate(sweep) -> CorrectorLimit:
    """Take ``psi`` at the largest amplitude as the estimate of the limit ``w0``.

    ``sweep`` is a :class:`SweepCurve` from :func:`diffusivity_sweep` or a list
    of :class:`CellSolution`.
    """
    sols = sweep.results if isinstance(sweep, SweepCurve) else list(sweep)
    if len(sols) < 3:
        raise ValueError("need at least 3 amplitudes to estimate the corrector limit")
    sols = sorted(sols, key=lambda s: s.A)
    w0 = sols[-1].psi
    return CorrectorLimit(
        w0_estimate=w0,
        amplitudes=np.array([s.A for s in sols]),
        h1_distance=np.array([h1_norm(resample(s.psi, w0.grid) - w0) for s in sols]),
        first_integral_residuals=np.array([s.first_integral_residual for s in sols]),
    )
