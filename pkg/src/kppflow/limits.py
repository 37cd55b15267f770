"""Large-amplitude limits for shear flows, plus extrapolated trends for general flows.

For a shear flow ``u = alpha(x') e_1`` the tilted eigenproblem reduces to the
self-adjoint transverse problem ``lap' w + lam e_1 alpha w = kappa_e(lam) w``,
which is solved densely.  Everything else in this module (speed limit,
diffusivity limit, small/large ``f'(0)`` limits, the ``gamma`` curve) is built
on that oracle.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq, minimize_scalar
from scipy.sparse.linalg import LinearOperator, eigsh

from .flows import FlowField, SHEAR
from .sweep import SweepCurve
from .torus import ScalarField, fourier, h1_seminorm, solve_poisson

logger = logging.getLogger(__name__)

DENSE_LIMIT = 1024
GAMMA_LAMBDA_MAX = 1e4


class UnresolvedEigenfunction(RuntimeError):
    """The transverse grid is too coarse for the eigenfunction at this ``lam``."""


@dataclass(frozen=True)
class TransverseEigen:
    kappa: float
    w: ScalarField
    gap: float


@dataclass(frozen=True)
class NotAttained:
    """``gamma`` never reaches the requested ``f'(0)`` on the sampled range."""

    fprime0: float
    gamma_estimate: float
    finite: bool | str


def shear_profile(u: FlowField) -> tuple[ScalarField, int]:
    if u.kind != SHEAR or u.shear_profile is None:
        raise ValueError("flow is not a shear flow")
    return u.shear_profile, u.shear_axis


def _component(e, axis: int) -> float:
    e = np.asarray(e, dtype=float)
    if abs(np.linalg.norm(e) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    return float(e[axis])


def _check_mean_zero(alpha: ScalarField):
    scale = max(1.0, float(np.max(np.abs(alpha.values))))
    if abs(float(np.mean(alpha.values))) > 1e-12 * scale:
        raise ValueError("shear profile must be mean-zero")


def _laplacian_matrix(shape: tuple[int, ...]) -> np.ndarray:
    four = fourier(shape)
    n = math.prod(shape)
    mat = np.empty((n, n))
    col = np.zeros(n)
    for j in range(n):
        col[j] = 1.0
        mat[:, j] = four.inverse(-four.k2 * four.forward(col.reshape(shape))).ravel()
        col[j] = 0.0
    return 0.5 * (mat + mat.T)


_LAP_CACHE: dict[tuple[int, ...], np.ndarray] = {}


def _lap(shape):
    if shape not in _LAP_CACHE:
        _LAP_CACHE[shape] = _laplacian_matrix(shape)
    return _LAP_CACHE[shape]


def kappa_e_shear(alpha: ScalarField, lam: float) -> TransverseEigen:
    """Principal eigenpair of ``lap' + lam alpha`` on the transverse torus.

    The eigenfunction is positive with ``||w||_2 = 1``; ``gap`` is the distance
    to the second eigenvalue.
    """
    _check_mean_zero(alpha)
    if lam < 0:
        raise ValueError("lam must be non-negative")
    grid = alpha.grid
    if lam == 0.0 or not np.any(alpha.values):
        lap = _lap(grid.shape) if grid.size <= DENSE_LIMIT else None
        gap = float(-np.sort(np.linalg.eigvalsh(lap))[-2]) if lap is not None else math.nan
        return TransverseEigen(0.0, ScalarField.constant(grid, 1.0), gap)
    pot = lam * alpha.values.ravel()
    if grid.size <= DENSE_LIMIT:
        vals, vecs = eigh(_lap(grid.shape) + np.diag(pot), subset_by_index=[grid.size - 2, grid.size - 1])
    else:
        four = fourier(grid.shape)

        def mv(x):
            x = x.reshape(grid.shape)
            return (four.inverse(-four.k2 * four.forward(x)) + pot.reshape(grid.shape) * x).ravel()

        op = LinearOperator((grid.size, grid.size), matvec=mv, dtype=float)
        vals, vecs = eigsh(op, k=2, which="LA", tol=1e-13)
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    w = vecs[:, -1]
    w = w / math.sqrt(np.mean(w * w))
    if w.sum() < 0:
        w = -w
    # Far from the maximum of alpha the eigenvector can sit at roundoff level.
    if w.min() < -1e-7 * w.max():
        raise UnresolvedEigenfunction(
            f"principal transverse eigenvector is not positive at lam={lam}; refine the profile grid")
    wf = ScalarField(grid, w.reshape(grid.shape))
    # Rayleigh quotient from the spectral gradient: relative accuracy even when kappa is tiny.
    kappa = lam * float(np.mean(pot.reshape(grid.shape) / lam * wf.values**2)) - h1_seminorm(wf) ** 2
    return TransverseEigen(kappa, wf, float(vals[-1] - vals[-2]))


def _kappa(alpha, e1, lam):
    return kappa_e_shear(alpha * e1, lam).kappa if e1 != 0.0 else 0.0


def large_f_limit(alpha: ScalarField, e, axis: int = 0) -> float:
    """``max e_1 alpha`` over the transverse grid."""
    e1 = _component(e, axis)
    return max(float(np.max(e1 * alpha.values)), 0.0)


def diffusivity_limit_shear(alpha: ScalarField, e, axis: int = 0) -> tuple[float, ScalarField]:
    """``e_1^2 ||grad' (-lap')^{-1} alpha||^2`` and its maximizer ``w0 = e_1 (-lap')^{-1} alpha``."""
    _check_mean_zero(alpha)
    e1 = _component(e, axis)
    w0 = solve_poisson(alpha) * e1
    return h1_seminorm(w0) ** 2, w0


def small_f_limit(alpha: ScalarField, e, axis: int = 0) -> float:
    """``|e_1| ||alpha||_{H^-1}`` summed mode by mode from the Fourier coefficients.

    Kept independent of :func:`diffusivity_limit_shear` so that the square
    relation between the two is a genuine check.
    """
    _check_mean_zero(alpha)
    e1 = _component(e, axis)
    c = np.fft.fftn(alpha.values) / alpha.grid.size
    k = np.meshgrid(*[np.fft.fftfreq(n, 1.0 / n) for n in alpha.grid.shape], indexing="ij")
    k2 = sum(ki**2 for ki in k) * (2.0 * math.pi) ** 2
    k2.flat[0] = np.inf
    return abs(e1) * math.sqrt(float(np.sum(np.abs(c) ** 2 / k2)))


def speed_limit_shear(alpha: ScalarField, e, fprime0: float, axis: int = 0,
                      lam_rtol: float = 1e-10) -> float:
    """``inf_{lam > 0} (f'(0) + kappa_e(lam)) / lam``."""
    return speed_limit_detail(alpha, e, fprime0, axis, lam_rtol)[0]


def speed_limit_detail(alpha, e, fprime0, axis=0, lam_rtol=1e-10):
    """Returns ``(value, lam_star, branch)``; ``branch`` is ``"interior"`` when the
    infimum is attained and ``"lam_to_infinity"`` when it is only approached."""
    if not fprime0 > 0:
        raise ValueError("fprime0 must be positive")
    _check_mean_zero(alpha)
    e1 = _component(e, axis)
    top = large_f_limit(alpha, e, axis)
    if top == 0.0:
        return 0.0, None, "lam_to_infinity"

    cache = {}

    def g(lam):
        if lam not in cache:
            cache[lam] = (fprime0 + _kappa(alpha, e1, lam)) / lam
        return cache[lam]

    # The no-flow minimizer sqrt(f'(0)) sits above the optimum; step up until g rises.
    b = math.sqrt(fprime0)
    a = b / 4.0
    while g(a) < g(b):
        a, b = a / 4.0, a
    c = b * 4.0
    while g(c) < g(b):
        b, c = c, c * 4.0
        if c > GAMMA_LAMBDA_MAX * 1e2:
            return top, None, "lam_to_infinity"
    res = minimize_scalar(g, bracket=(a, b, c), method="brent", tol=lam_rtol)
    best = min(cache, key=cache.get)
    value = min(cache[best], float(res.fun))
    if top < value:
        return top, None, "lam_to_infinity"
    return value, float(res.x), "interior"


def gamma_value(alpha: ScalarField, e, lam: float, axis: int = 0) -> float:
    """``gamma(lam) = ||grad w0(lam)||^2`` for the normalized principal eigenfunction."""
    e1 = _component(e, axis)
    if lam == 0.0 or e1 == 0.0:
        return 0.0
    return h1_seminorm(kappa_e_shear(alpha * e1, lam).w) ** 2


def gamma_curve(alpha: ScalarField, e, lambda_grid, axis: int = 0) -> list[tuple[float, float]]:
    lams = [float(x) for x in lambda_grid]
    if not lams or lams[0] != 0.0 or np.any(np.diff(lams) <= 0):
        raise ValueError("lambda grid must be increasing and start at 0")
    return [(lam, gamma_value(alpha, e, lam, axis)) for lam in lams]


def max_jump(curve) -> float:
    g = np.array([y for _, y in curve])
    return float(np.max(np.abs(np.diff(g)))) if g.size > 1 else 0.0


def gamma_supremum(alpha: ScalarField, e, axis: int = 0) -> tuple[float, bool | str]:
    """Lower-bound estimate of ``Gamma = sup gamma`` with a heuristic finiteness flag.

    ``lam`` doubles from 1 until the increment of ``gamma`` falls below 1e-6
    (flag ``True``) or ``lam`` passes 1e4.  In the second case the ratio of
    the last two increments decides: below 0.9 (geometric decay) gives
    ``True``, at least 1 (no decay) gives ``False``, anything else ``"unknown"``.
    If the profile grid stops resolving the eigenfunction first, the flag is
    ``"unknown"``.
    """
    lam = 1.0
    values = [gamma_value(alpha, e, lam, axis)]
    if values[0] == 0.0:
        return 0.0, True
    while True:
        lam *= 2.0
        try:
            values.append(gamma_value(alpha, e, lam, axis))
        except UnresolvedEigenfunction:
            logger.warning("gamma sweep stopped at lam=%g: profile grid too coarse", lam)
            return max(values), "unknown"
        step = abs(values[-1] - values[-2])
        if step < 1e-6:
            return max(values), True
        if lam > GAMMA_LAMBDA_MAX:
            ratio = step / abs(values[-2] - values[-3])
            if ratio < 0.9:
                return max(values), True
            if ratio >= 1.0:
                return max(values), False
            return max(values), "unknown"


def find_lambda_for_f(alpha: ScalarField, e, fprime0: float, axis: int = 0,
                      ftol: float = 1e-8) -> float | NotAttained:
    """``lam > 0`` with ``gamma(lam) = f'(0)``, found by a bracketed root search.

    ``gamma`` is continuous with ``gamma(0) = 0``; the bracket is doubled from
    ``lam = 1`` up to 1e4.  If ``gamma`` stays below ``f'(0)`` the result is
    :class:`NotAttained` carrying the supremum estimate.
    """
    if not fprime0 > 0:
        raise ValueError("fprime0 must be positive")

    def h(lam):
        return gamma_value(alpha, e, lam, axis) - fprime0

    lo, hi = 0.0, 1.0
    while True:
        try:
            if h(hi) >= 0:
                break
        except UnresolvedEigenfunction:
            hi = math.inf
        lo, hi = hi, 2.0 * hi
        if hi > GAMMA_LAMBDA_MAX:
            est, finite = gamma_supremum(alpha, e, axis)
            return NotAttained(fprime0, est, finite)
    lam = brentq(h, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    if abs(h(lam)) > ftol:
        raise RuntimeError(f"root search ended with |gamma - f'(0)| = {abs(h(lam)):.2e}")
    return float(lam)


@dataclass
class LimitReport:
    speed_limit: float
    diffusivity_limit: float
    small_f_coefficient: float
    large_f_limit: float
    max_ue: float
    w0: ScalarField
    gamma_curve: list
    Gamma: float
    Gamma_finite: bool | str
    speed_branch: str = "interior"
    fprime0: float = 1.0

    @property
    def invariants(self) -> dict:
        d = self.diffusivity_limit
        return {
            "square_relation": bool(abs(self.small_f_coefficient**2 - d) <= 1e-9 * d or d == 0.0),
            "large_f_below_max": bool(self.large_f_limit <= self.max_ue + 1e-9),
            "speed_below_large_f": bool(self.speed_limit <= self.large_f_limit + 1e-9),
        }

    def to_json(self) -> dict:
        return {
            "speed_limit": float(self.speed_limit),
            "diffusivity_limit": self.diffusivity_limit,
            "small_f_coefficient": self.small_f_coefficient,
            "large_f_limit": self.large_f_limit,
            "max_ue": self.max_ue,
            "Gamma": {"value": self.Gamma, "finite": self.Gamma_finite},
            "gamma_curve": [[float(a), float(b)] for a, b in self.gamma_curve],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


def limit_report(alpha: ScalarField, e, fprime0: float = 1.0, axis: int = 0,
                 lambda_grid=None) -> LimitReport:
    if lambda_grid is None:
        lambda_grid = np.linspace(0.0, 20.0, 41)
    speed, _, branch = speed_limit_detail(alpha, e, fprime0, axis)
    diff, w0 = diffusivity_limit_shear(alpha, e, axis)
    e1 = _component(e, axis)
    Gamma, finite = gamma_supremum(alpha, e, axis)
    return LimitReport(
        speed_limit=speed,
        diffusivity_limit=diff,
        small_f_coefficient=small_f_limit(alpha, e, axis),
        large_f_limit=large_f_limit(alpha, e, axis),
        max_ue=float(np.max(np.abs(e1 * alpha.values))),
        w0=w0,
        gamma_curve=gamma_curve(alpha, e, lambda_grid, axis),
        Gamma=Gamma,
        Gamma_finite=finite,
        speed_branch=branch,
        fprime0=float(fprime0),
    )


# General flows: no closed form, only extrapolated trends.

RICHARDSON_ORDERS = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class Extrapolation:
    limit: float
    order: float
    residual: float


def richardson(A, values, orders=RICHARDSON_ORDERS) -> Extrapolation:
    """Fit ``y = L + a A^{-p}`` for each candidate ``p`` and keep the best.

    Residuals are relative (weights ``1/|y|``), since sweep values typically
    span orders of magnitude and an absolute fit only sees the smallest ``A``.
    ``residual`` is the largest relative misfit.  With only two points every
    order fits exactly, so the first one wins.
    """
    A = np.asarray(A, dtype=float)
    y = np.asarray(values, dtype=float)
    if A.size < 2:
        raise ValueError("need at least two amplitudes to extrapolate")
    scale = np.abs(y)
    floor = max(float(scale.max()), 1e-300) * 1e-12
    w = 1.0 / np.maximum(scale, floor)
    best = None
    for p in orders:
        M = np.column_stack([np.ones_like(A), A ** (-p)])
        coef, *_ = np.linalg.lstsq(M * w[:, None], y * w, rcond=None)
        r = float(np.max(np.abs(M @ coef - y) * w))
        if best is None or r < best.residual - 1e-12:
            best = Extrapolation(float(coef[0]), float(p), r)
    return best


@dataclass
class CrossCheck:
    diffusivity: Extrapolation | None
    speed: Extrapolation | None
    first_integral_residuals: list
    flags: dict = field(default_factory=dict)
    label: str = "non-oracle diagnostic"

    def to_json(self) -> dict:
        def ex(x):
            return None if x is None else {"limit": x.limit, "order": x.order, "residual": x.residual}

        return {"label": self.label, "diffusivity_over_A2": ex(self.diffusivity),
                "speed_over_A": ex(self.speed),
                "first_integral_residuals": [float(v) for v in self.first_integral_residuals],
                "flags": self.flags}


def general_flow_limit_crosscheck(u: FlowField, e, cell_sweep: SweepCurve | None,
                                  speed_sweep: SweepCurve | None = None) -> CrossCheck:
    """Extrapolate ``D_e/A^2`` and ``c*/A`` to ``A = infinity`` from finite-A sweeps.

    These are trend diagnostics, not oracles.  Flags record whether each
    ratio decreases with ``A`` and whether the first-integral residual of the
    corrector decays.
    """
    if cell_sweep is None and speed_sweep is None:
        raise ValueError("need a cell sweep or a speed sweep")
    flags = {}
    dif = spd = None
    fir = []
    if cell_sweep is not None:
        if len(cell_sweep.rows) < 2:
            raise ValueError("cell sweep needs at least two amplitudes")
        A = cell_sweep.column("A")
        r = cell_sweep.column("D_e_over_A2")
        dif = richardson(A, r)
        fir = list(cell_sweep.column("first_integral_residual"))
        flags["D_e_over_A2_decreasing"] = bool(np.all(np.diff(r) < 0))
        flags["first_integral_decaying"] = bool(np.all(np.diff(fir) <= 0))
        flags["D_e_limit_consistent_with_zero"] = bool(abs(dif.limit) <= r[-1])
    if speed_sweep is not None:
        if len(speed_sweep.rows) < 2:
            raise ValueError("speed sweep needs at least two amplitudes")
        A = speed_sweep.column("A")
        r = speed_sweep.column("c_star_over_A")
        spd = richardson(A, r)
        flags["c_over_A_decreasing"] = bool(np.all(np.diff(r) < 0))
        flags["speed_limit_consistent_with_zero"] = bool(abs(spd.limit) <= r[-1])
    if u.kind == SHEAR:
        alpha, axis = shear_profile(u)
        if dif is not None:
            exact, _ = diffusivity_limit_shear(alpha, e, axis)
            flags["diffusivity_matches_shear_oracle"] = bool(abs(dif.limit - exact) <= 1e-6)
    return CrossCheck(dif, spd, fir, flags)
