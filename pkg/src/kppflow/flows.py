"""Periodic incompressible mean-zero flows and the advection operator.

Flows are built so that incompressibility holds by construction: shear
profiles, stream functions (2-D), or Fourier modes projected onto the plane
orthogonal to their wavevector.  The amplitude ``A`` is never stored here;
solvers take it as an argument.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .torus import (
    Grid,
    ScalarField,
    VectorField,
    divergence,
    fourier,
    l2_norm,
    resample,
)

SHEAR = "shear"
CELLULAR = "cellular"
FOURIER_GENERAL = "fourier_general"


@dataclass(frozen=True)
class FlowField:
    velocity: VectorField
    kind: str
    shear_profile: ScalarField | None = None
    shear_axis: int | None = None

    def __post_init__(self):
        report = validate_flow(self)
        scale = max(l2_norm(self.velocity), 1.0)
        if report.div_residual > 1e-10 * scale:
            raise ValueError(f"flow is not divergence-free: {report.div_residual:.3e}")
        if max(report.mean_residuals) > 1e-12 * scale:
            raise ValueError(f"flow is not mean-zero: {max(report.mean_residuals):.3e}")

    @property
    def grid(self) -> Grid:
        return self.velocity.grid

    @property
    def dim(self) -> int:
        return self.grid.dim

    def along(self, e) -> ScalarField:
        """The scalar field ``u . e``."""
        return self.velocity.dot(e)

    def is_zero(self) -> bool:
        return all(not np.any(c.values) for c in self.velocity)


@dataclass(frozen=True)
class FlowReport:
    div_residual: float
    mean_residuals: tuple[float, ...]
    max_speed: tuple[float, ...] = field(default=())
    max_abs_speed: tuple[float, ...] = field(default=())

    @property
    def ok(self) -> bool:
        return self.div_residual <= 1e-10 and max(self.mean_residuals) <= 1e-12


def validate_flow(u: FlowField) -> FlowReport:
    """Divergence and mean residuals, plus ``max u.e_i`` and ``max |u.e_i|`` per axis."""
    v = u.velocity
    return FlowReport(
        div_residual=l2_norm(divergence(v)),
        mean_residuals=tuple(abs(float(np.mean(c.values))) for c in v),
        max_speed=tuple(float(np.max(c.values)) for c in v),
        max_abs_speed=tuple(float(np.max(np.abs(c.values))) for c in v),
    )


def _modes_to_values(coords, spec):
    """Sum of ``amp * sin(2 pi k.x + phase)`` over (wavevector, amp[, phase]) entries."""
    values = np.zeros(np.broadcast(*coords).shape)
    for entry in spec:
        k, amp = entry[0], entry[1]
        phase = entry[2] if len(entry) > 2 else 0.0
        k = np.atleast_1d(np.asarray(k, dtype=float))
        if k.size != len(coords):
            raise ValueError(f"wavevector {tuple(k)} has wrong length, expected {len(coords)}")
        arg = sum(ki * xi for ki, xi in zip(k, coords))
        values = values + float(amp) * np.sin(2.0 * math.pi * arg + float(phase))
    return values


def _parse_mode(entry):
    if isinstance(entry, dict):
        return (tuple(entry["wavevector"]), float(entry["amplitude"]), float(entry.get("phase", 0.0)))
    return tuple(entry)


def transverse_coordinates(grid: Grid, axis: int):
    tgrid = grid.transverse(axis)
    return tgrid, tgrid.coordinates()


def shear_flow(grid: Grid, alpha_spec, axis: int = 0) -> FlowField:
    """Shear flow ``u = alpha(x') e_axis`` from a list of transverse Fourier modes.

    Each entry is ``(wavevector, amplitude)`` or ``(wavevector, amplitude, phase)``
    (or the equivalent dict) and contributes ``amplitude * sin(2 pi k.x' + phase)``.
    """
    if not 0 <= axis < grid.dim:
        raise ValueError(f"axis {axis} out of range for a {grid.dim}-D grid")
    spec = [_parse_mode(m) for m in alpha_spec]
    for k, amp, *_ in spec:
        if not np.any(np.asarray(k)) and amp != 0:
            raise ValueError("shear profile must be mean-zero: zero wavevector has nonzero amplitude")
    tgrid, tcoords = transverse_coordinates(grid, axis)
    alpha = ScalarField(tgrid, _modes_to_values(tcoords, spec))
    return shear_flow_from_profile(grid, alpha, axis)


def shear_flow_from_profile(grid: Grid, alpha: ScalarField, axis: int = 0) -> FlowField:
    """Shear flow from samples of ``alpha`` on the transverse grid."""
    tgrid = grid.transverse(axis)
    if alpha.grid != tgrid:
        raise ValueError(f"profile grid {alpha.grid.shape} does not match transverse grid {tgrid.shape}")
    if abs(float(np.mean(alpha.values))) > 1e-12 * max(1.0, float(np.max(np.abs(alpha.values)))):
        raise ValueError("shear profile must be mean-zero")
    full = np.broadcast_to(np.expand_dims(alpha.values, axis), grid.shape)
    comps = [ScalarField.constant(grid) for _ in range(grid.dim)]
    comps[axis] = ScalarField(grid, full)
    return FlowField(VectorField(comps), SHEAR, shear_profile=alpha, shear_axis=axis)


def flow_from_streamfunction(grid: Grid, psi: ScalarField, kind: str = FOURIER_GENERAL) -> FlowField:
    """2-D flow ``u = (-d psi/dy, d psi/dx)``."""
    if grid.dim != 2:
        raise ValueError("stream functions are only defined for 2-D flows")
    if psi.grid != grid:
        raise ValueError("stream function lives on a different grid")
    four = fourier(grid.shape)
    c = psi.spectral
    ux = four.inverse(-four.ik[1] * c)
    uy = four.inverse(four.ik[0] * c)
    return FlowField(VectorField([ScalarField(grid, ux), ScalarField(grid, uy)]), kind)


def cellular_flow(grid: Grid) -> FlowField:
    """The standard cellular flow ``(-sin 2pi x cos 2pi y, cos 2pi x sin 2pi y)``."""
    psi = ScalarField.from_function(
        grid, lambda x, y: np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y) / (2 * np.pi)
    )
    return flow_from_streamfunction(grid, psi, kind=CELLULAR)


def streamfunction_from_modes(grid: Grid, modes) -> ScalarField:
    return ScalarField(grid, _modes_to_values(grid.coordinates(), [_parse_mode(m) for m in modes]))


def fourier_flow(grid: Grid, modes) -> FlowField:
    """Sum of divergence-free Fourier modes.

    ``modes`` holds ``(wavevector, amplitude_vector, phase)``; each amplitude is
    projected onto the plane orthogonal to its wavevector before use.
    """
    coords = grid.coordinates()
    comps = [np.zeros(grid.shape) for _ in range(grid.dim)]
    for entry in modes:
        if isinstance(entry, dict):
            k, a, phase = entry["wavevector"], entry["amplitude"], entry.get("phase", 0.0)
        else:
            k, a, phase = (tuple(entry) + (0.0,))[:3]
        k = np.asarray(k, dtype=float)
        a = np.asarray(a, dtype=float)
        if k.shape != (grid.dim,) or a.shape != (grid.dim,):
            raise ValueError("wavevector and amplitude must have one entry per dimension")
        if not np.any(k):
            raise ValueError("zero wavevector would give a non-mean-zero flow")
        a = a - k * (k @ a) / (k @ k)
        wave = np.sin(2.0 * math.pi * sum(ki * xi for ki, xi in zip(k, coords)) + float(phase))
        for i in range(grid.dim):
            comps[i] += a[i] * wave
    return FlowField(VectorField(ScalarField(grid, c) for c in comps), FOURIER_GENERAL)


def zero_flow(grid: Grid) -> FlowField:
    return FlowField(VectorField(ScalarField.constant(grid) for _ in range(grid.dim)), FOURIER_GENERAL)


def resample_flow(u: FlowField, grid: Grid) -> FlowField:
    """The same flow sampled on another grid (exact for band-limited flows)."""
    if grid == u.grid:
        return u
    velocity = VectorField(resample(c, grid) for c in u.velocity)
    if u.kind == SHEAR:
        alpha = resample(u.shear_profile, grid.transverse(u.shear_axis))
        return FlowField(velocity, SHEAR, shear_profile=alpha, shear_axis=u.shear_axis)
    return FlowField(velocity, u.kind)


def advect(u: FlowField, w: ScalarField) -> ScalarField:
    """Dealiased ``u . grad w``."""
    if w.grid != u.grid:
        raise ValueError(f"grid mismatch: {u.grid.shape} vs {w.grid.shape}")
    four = fourier(w.grid.shape)
    c = w.spectral
    padded = sum(
        four.to_padded(comp.spectral) * four.to_padded(ik * c)
        for comp, ik in zip(u.velocity, four.ik)
    )
    return ScalarField(w.grid, four.inverse(four.from_padded(padded)))


def padded_velocity(u: FlowField) -> list[np.ndarray]:
    """Velocity components sampled on the 3/2-padded grid (for operator kernels)."""
    four = fourier(u.grid.shape)
    return [four.to_padded(c.spectral) for c in u.velocity]
