"""Principal eigenpair of the exponentially tilted advection-diffusion operator.

For a flow ``u``, direction ``e``, amplitude ``A`` and tilt ``lam`` the operator is

    L phi = lap(phi) - A u.grad(phi) - (2 lam / A) e.grad(phi) + lam (u.e) phi

and its principal eigenvalue is ``kappa(lam / A; A)``.  The eigenfunction is
positive and normalised to ``||phi||_2 = 1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .cell import unit_direction
from .flows import FlowField
from .operators import TiltedOperator, gmres_solve, shifted_laplacian_inverse
from .sweep import SweepCurve
from .torus import ScalarField, fourier, dealiased_product, gradient, l2_inner, l2_norm

logger = logging.getLogger(__name__)


class EigenSolveError(RuntimeError):
    pass


@dataclass(frozen=True)
class EigenResult:
    kappa: float
    phi: ScalarField
    lam: float
    A: float
    residual: float
    iterations: int = 0

    @property
    def mu(self) -> float:
        """``(lam/A)^2 + kappa``, i.e. mu(lam/A; A)."""
        return (self.lam / self.A) ** 2 + self.kappa if self.A > 0 else self.kappa


def tilted_operator(u: FlowField, e, A: float, lam: float, shift: float = 0.0,
                    sign: float = 1.0) -> TiltedOperator:
    drift = [2.0 * lam / A * ei for ei in e]
    potential = [lam * ei for ei in e]
    return TiltedOperator(u, A, drift=drift, potential=potential, shift=shift, sign=sign)


def _normalise(v: np.ndarray) -> np.ndarray:
    v = v / math.sqrt(np.mean(v * v))
    return -v if v.sum() < 0 else v


def principal_eigenpair(u: FlowField, e, A: float, lam: float, tol: float = 1e-9,
                        max_iter: int = 60, phi0: ScalarField | None = None,
                        inner_tol: float = 1e-6, inner_max_iter: int = 600,
                        shift_gap: float = 1e-3) -> EigenResult:
    """Shift-and-invert inverse iteration with Rayleigh-quotient shifts.

    The shift starts above ``lam * max(u.e)``, which bounds the principal
    eigenvalue from above, and is then moved to just above the current
    Rayleigh quotient.  While the shift exceeds the principal eigenvalue the
    resolvent is positivity preserving, so the iteration is drawn to the
    positive eigenfunction.  Converged when the residual ``||L phi - kappa phi||``
    and the last eigenvalue change are both below ``tol``.
    """
    e = unit_direction(e, u.dim)
    if A <= 0:
        raise ValueError("amplitude must be positive")
    if lam < 0:
        raise ValueError("lam must be non-negative")
    grid = u.grid
    if lam == 0.0:
        return EigenResult(0.0, ScalarField.constant(grid, 1.0), 0.0, float(A), 0.0, 0)

    if phi0 is not None:
        try:
            return _inverse_iteration(u, e, A, lam, tol, max_iter, phi0.values, inner_tol,
                                      inner_max_iter, shift_gap, warm=True)
        except EigenSolveError as err:
            logger.info("warm start failed at lam=%g (%s); restarting cold", lam, err)
    return _inverse_iteration(u, e, A, lam, tol, max_iter, np.ones(grid.shape), inner_tol,
                              inner_max_iter, shift_gap, warm=False)


def _inverse_iteration(u, e, A, lam, tol, max_iter, start, inner_tol, inner_max_iter, shift_gap,
                       warm):
    grid = u.grid
    L = tilted_operator(u, e, A, lam)
    ue = u.along(e).values
    upper = lam * float(ue.max())

    # Roundoff in the spectral Laplacian puts a floor of about eps * max|k|^2 under
    # any pointwise residual; asking for less than that cannot succeed.
    floor = roundoff_floor(grid)
    tol = max(tol, floor)
    phi = _normalise(np.array(start, dtype=float).ravel())
    Lphi = L.matvec(phi)
    kappa = float(np.mean(Lphi * phi))
    res = float(np.sqrt(np.mean((Lphi - kappa * phi) ** 2)))
    sigma = upper + 1.0 if not warm else kappa + max(2.0 * res, 1e-3)
    sigma = min(sigma, upper + 1.0)
    prev = math.inf
    total_inner = 0
    for it in range(1, max_iter + 1):
        if res <= tol and abs(kappa - prev) <= tol:
            break
        op = tilted_operator(u, e, A, lam, shift=-sigma, sign=-1.0)  # sigma - L
        precond = shifted_laplacian_inverse(grid, sigma + 1.0)
        # x0 already has relative residual res / (sigma - kappa); ask for better than that.
        rtol = min(inner_tol, max(0.1 * res, floor) / (sigma - kappa))
        y, _, its, _ = gmres_solve(op, phi, tol=rtol, max_iter=inner_max_iter,
                                   precond=precond, x0=phi / max(sigma - kappa, 1e-12))
        total_inner += its
        phi = _normalise(y)
        Lphi = L.matvec(phi)
        prev = kappa
        kappa = float(np.mean(Lphi * phi))
        res = float(np.sqrt(np.mean((Lphi - kappa * phi) ** 2)))
        if kappa > sigma + 1e-8 * (1 + abs(sigma)):
            raise EigenSolveError(f"Rayleigh quotient {kappa:.6g} passed the shift {sigma:.6g}")
        sigma = kappa + max(2.0 * res, shift_gap * (1.0 + abs(kappa)))
    else:
        raise EigenSolveError(
            f"no convergence at lam={lam}, A={A}: residual {res:.3e}, "
            f"eigenvalue change {abs(kappa - prev):.3e}"
        )
    if phi.min() <= 0.0:
        raise EigenSolveError(f"eigenfunction changes sign (min {phi.min():.3e}); not principal")
    logger.debug("eigenpair lam=%g A=%g: kappa=%.12g after %d outer / %d inner", lam, A, kappa, it,
                 total_inner)
    return EigenResult(kappa, ScalarField(grid, phi.reshape(grid.shape)), float(lam), float(A),
                       res, it)


def roundoff_floor(grid) -> float:
    """Smallest residual the discrete operator can resolve on ``grid``."""
    return 20.0 * np.finfo(float).eps * float(np.max(fourier(grid.shape).k2))


def eigen_identities(res: EigenResult, u: FlowField, e) -> dict:
    """Residuals of ``||grad ln phi||^2 = kappa`` and of
    ``kappa + ||grad phi||^2 = lam int (u.e) phi^2``."""
    e = unit_direction(e, u.dim)
    phi = res.phi
    if np.min(phi.values) <= 0:
        raise ValueError("eigenfunction must be strictly positive")
    log_phi = ScalarField(phi.grid, np.log(phi.values))
    id35 = abs(l2_norm(gradient(log_phi)) ** 2 - res.kappa)
    flux = l2_inner(dealiased_product(u.along(e), phi), phi)
    id36 = abs(res.kappa + l2_norm(gradient(phi)) ** 2 - res.lam * flux)
    return {"id35_residual": float(id35), "id36_residual": float(id36)}


def mu_curve(u: FlowField, e, A: float, lambdas, tol: float = 1e-9) -> SweepCurve:
    """``mu(lam; A) = lam^2 + kappa(lam; A)`` on an increasing grid of unscaled ``lam``.

    Each ``lam`` here is the tilt of the unscaled problem; the rescaled
    eigenproblem is solved at ``lam * A``.
    """
    lambdas = [float(x) for x in lambdas]
    if not lambdas or lambdas[0] != 0.0 or any(np.diff(lambdas) <= 0):
        raise ValueError("lambdas must be increasing and start at 0")
    rows, results = [], []
    phi = None
    for lam in lambdas:
        r = principal_eigenpair(u, e, A, lam * A, tol=tol, phi0=phi)
        phi = r.phi
        rows.append((lam, lam**2 + r.kappa, r.kappa, r.residual))
        results.append(r)
    curve = SweepCurve(("lambda", "mu", "kappa", "residual"), rows, results)
    mu = curve.column("mu")
    lam = curve.column("lambda")
    curve.flags = {
        "increasing": bool(np.all(np.diff(mu) >= -1e-8)),
        "convex": bool(np.all(second_differences(lam, mu) >= -1e-8)),
    }
    return curve


def second_differences(x, y) -> np.ndarray:
    """Divided second differences ``2 [x0, x1, x2] y``; non-negative for convex data."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        return np.zeros(0)
    s = np.diff(y) / np.diff(x)
    return 2.0 * np.diff(s) / (x[2:] - x[:-2])
