"""Minimal front speed from the eigenvalue variational formula.

With the rescaled tilt ``lam``,

    c*(A) / A = inf_{lam > 0} (f'(0) + (lam/A)^2 + kappa(lam/A; A)) / lam.

The objective is quasi-convex in ``lam``, so a three-point bracket followed by
a one-dimensional minimizer is enough.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .cell import unit_direction
from .eigen import EigenResult, principal_eigenpair
from .flows import FlowField, SHEAR
from .sweep import SweepCurve, non_increasing, pool_map

logger = logging.getLogger(__name__)

SPEED_COLUMNS = ("A", "c_star", "c_star_over_A", "lambda_star", "kappa_at_lambda_star",
                 "eigen_residual")


class BracketError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReactionSpec:
    fprime0: float
    f: Callable[[np.ndarray], np.ndarray]
    name: str = "custom"
    epsilon: float = 0.05

    def __post_init__(self):
        if not self.fprime0 > 0:
            raise ValueError("fprime0 must be positive")
        if not 0 < self.epsilon < 1:
            raise ValueError("epsilon must lie in (0, 1)")


def fisher_kpp(rate: float = 1.0) -> ReactionSpec:
    """``f(s) = rate * s (1 - s)``."""
    return ReactionSpec(float(rate), lambda s: rate * s * (1.0 - s), name=f"fisher_kpp({rate:g})")


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    worst_s: float | None = None
    worst_value: float | None = None


@dataclass(frozen=True)
class ReactionReport:
    conditions: dict

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.conditions.values())

    def failures(self) -> list[str]:
        return [k for k, c in self.conditions.items() if not c.passed]


def validate_reaction(spec: ReactionSpec, samples: int = 2001) -> ReactionReport:
    """Sampled checks of the KPP conditions.

    ``endpoints``: f(0) = f(1) = 0.  ``positivity``: f > 0 inside (0, 1).
    ``kpp_bound``: f(s) <= f'(0) s.  ``tail_monotone``: f non-increasing on
    (1 - epsilon, 1).  ``slope_at_zero``: f(h)/h agrees with the declared f'(0).
    Each failing condition reports the worst sample.
    """
    if samples < 100:
        raise ValueError("samples must be at least 100")
    f = spec.f
    s = np.linspace(0.0, 1.0, samples + 2)[1:-1]
    fs = np.asarray(f(s), dtype=float)
    out = {}

    ends = np.array([float(f(np.array(0.0))), float(f(np.array(1.0)))])
    i = int(np.argmax(np.abs(ends)))
    out["endpoints"] = ConditionReport(bool(np.all(np.abs(ends) <= 1e-12)), float(i), float(ends[i]))

    i = int(np.argmin(fs))
    out["positivity"] = ConditionReport(bool(fs[i] > 0), float(s[i]), float(fs[i]))

    excess = fs - spec.fprime0 * s
    i = int(np.argmax(excess))
    out["kpp_bound"] = ConditionReport(bool(excess[i] <= 1e-12), float(s[i]), float(excess[i]))

    tail = np.linspace(1.0 - spec.epsilon, 1.0, 201)
    ft = np.asarray(f(tail), dtype=float)
    rise = np.diff(ft)
    i = int(np.argmax(rise))
    out["tail_monotone"] = ConditionReport(bool(rise[i] <= 1e-14), float(tail[i]), float(rise[i]))

    h = 1e-7
    slope = float(f(np.array(h))) / h
    err = abs(slope - spec.fprime0)
    out["slope_at_zero"] = ConditionReport(bool(err <= 1e-4 * max(1.0, spec.fprime0)), h, slope)
    return ReactionReport(out)


@dataclass(frozen=True)
class SpeedResult:
    c_star: float
    lambda_star: float
    A: float
    bracket: tuple[float, float]
    evaluations: int
    eigen: tuple[EigenResult, ...] = field(default=(), repr=False)

    @property
    def at_minimum(self) -> EigenResult | None:
        if not self.eigen:
            return None
        target = self.lambda_star * self.A
        return min(self.eigen, key=lambda r: abs(r.lam - target))


class _Objective:
    """Caches eigen solves by tilt and warm-starts from the nearest solved tilt."""

    def __init__(self, u, e, A, fprime0, eigen_tol):
        self.u, self.e, self.A, self.fprime0, self.tol = u, e, A, fprime0, eigen_tol
        self.cache: dict[float, EigenResult] = {}

    def eigen(self, lam: float) -> EigenResult:
        if lam in self.cache:
            return self.cache[lam]
        near = min(self.cache, key=lambda x: abs(math.log(x / lam)), default=None)
        phi0 = self.cache[near].phi if near is not None else None
        r = principal_eigenpair(self.u, self.e, self.A, lam, tol=self.tol, phi0=phi0)
        self.cache[lam] = r
        return r

    def __call__(self, lam: float) -> float:
        r = self.eigen(lam)
        return (self.fprime0 + (lam / self.A) ** 2 + r.kappa) / lam


def minimal_speed(u: FlowField, e, A: float, spec: ReactionSpec, lam_rtol: float = 1e-6,
                  eigen_tol: float = 1e-10, expand_limit: float = 1e3,
                  check_reaction: bool = True) -> SpeedResult:
    """Minimal pulsating front speed ``c*(A)`` in direction ``e``.

    The tilt is bracketed by stepping down geometrically from
    ``sqrt(f'(0)) * max(A, 10)`` (the minimizer never exceeds ``sqrt(f'(0)) A``),
    expanding upward if the objective is still decreasing there, and then
    refined by Brent's method.  ``lambda_star`` is reported in the unscaled
    variable, so ``u = 0`` gives ``lambda_star = sqrt(f'(0))``.
    """
    if A <= 0:
        raise ValueError("amplitude must be positive")
    if check_reaction:
        report = validate_reaction(spec)
        if not report.ok:
            raise ValueError(f"reaction {spec.name} fails KPP checks: {report.failures()}")
    e = unit_direction(e, u.dim)
    root = math.sqrt(spec.fprime0)
    g = _Objective(u, e, float(A), spec.fprime0, eigen_tol)

    lam_lo = 1e-3 * root
    hi0 = root * max(A, 10.0)
    a, b, c = _bracket(g, lam_lo, hi0, hi0 * expand_limit)
    res = minimize_scalar(g, bracket=(a, b, c), method="brent", tol=lam_rtol)
    lam_star = float(res.x)
    # Brent may return a point it evaluated but that is not the smallest cached one.
    best = min(g.cache, key=g)
    if g(best) < g(lam_star):
        lam_star = best
    c_star = float(A) * g(lam_star)
    results = tuple(g.cache[k] for k in sorted(g.cache))
    return SpeedResult(c_star, lam_star / A, float(A), (a, c), len(g.cache), results)


def _bracket(g, lam_lo, lam_hi, cap, factor: float = 4.0):
    """Return ``a < b < c`` with ``g(b) <= min(g(a), g(c))``."""
    hi = lam_hi
    below = hi / factor
    # Objective still decreasing at the cap: push upward.
    while g(below) > g(hi):
        if hi * factor > cap:
            raise BracketError(
                f"objective still decreasing at lambda={hi:.4g}; raise the bracket cap (expand_limit)")
        below, hi = hi, hi * factor
    c, b = hi, below
    while True:
        a = max(b / factor, lam_lo)
        if g(a) >= g(b):
            return a, b, c
        if a <= lam_lo:
            # g(lam_lo) is dominated by f'(0)/lam, so this only happens for absurd inputs.
            raise BracketError(f"objective still decreasing toward lambda={lam_lo:.3g}")
        c, b = b, a


def speed_sweep(u: FlowField, e, A_list, spec: ReactionSpec, workers: int | None = None,
                **opts) -> SweepCurve:
    """``c*(A)`` over increasing amplitudes; shear flows also get the monotonicity flag."""
    A_list = [float(a) for a in A_list]
    if not A_list or any(a <= 0 for a in A_list) or any(np.diff(A_list) <= 0):
        raise ValueError("A_list must be positive and strictly increasing")
    results = pool_map(lambda A: minimal_speed(u, e, A, spec, **opts), A_list, workers)
    rows = []
    for r in results:
        at = r.at_minimum
        rows.append((r.A, r.c_star, r.c_star / r.A, r.lambda_star,
                     at.kappa if at else math.nan, at.residual if at else math.nan))
    curve = SweepCurve(SPEED_COLUMNS, rows, results)
    ratio = curve.column("c_star_over_A")
    curve.flags = {"c_over_A_decreasing": bool(np.all(np.diff(ratio) < 0))}
    if u.kind == SHEAR:
        curve.flags["c_over_A_nonincreasing"] = non_increasing(ratio, slack=1e-7)
    return curve
