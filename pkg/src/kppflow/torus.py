"""Periodic fields on the unit torus and their Fourier operators.

Fields are sampled on a uniform grid ``x_j = j / N`` per axis.  Physical
samples are the source of truth; Fourier coefficients are computed on
demand with the ``norm="forward"`` convention, so the zero coefficient is
the mean of the field and the wavevector ``k`` carries frequency ``2*pi*k``.

Products that feed differential operators are formed on a grid padded by
the 3/2 rule, which makes quadratic products of resolved fields exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import fft

#: Poincare constant of the unit torus, ||w||_2 <= C ||grad w||_2 for mean-zero w.
POINCARE_CONSTANT = 1.0 / (2.0 * math.pi)

_MIN_N, _MAX_N = 8, 4096


@dataclass(frozen=True)
class Grid:
    """Uniform grid on the unit torus; ``shape`` holds the per-axis point counts."""

    shape: tuple[int, ...]
    poincare: float = POINCARE_CONSTANT

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(int(n) for n in self.shape))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(1.0 / n for n in self.shape)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def coordinates(self) -> tuple[np.ndarray, ...]:
        """Grid point coordinates as broadcast arrays (``indexing='ij'``)."""
        axes = [np.arange(n) / n for n in self.shape]
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def transverse(self, axis: int) -> "Grid":
        """Grid of the torus obtained by dropping ``axis``."""
        return Grid(tuple(n for i, n in enumerate(self.shape) if i != axis))

    def refined(self, factor: int = 2) -> "Grid":
        return Grid(tuple(n * factor for n in self.shape))


def _is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def make_grid(dim: int, resolution) -> Grid:
    """Build a 2-D or 3-D grid.  ``resolution`` is an int or one count per axis."""
    if dim not in (2, 3):
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    if np.isscalar(resolution):
        resolution = [int(resolution)] * dim
    resolution = [int(n) for n in resolution]
    if len(resolution) != dim:
        raise ValueError(f"expected {dim} resolutions, got {len(resolution)}")
    for n in resolution:
        if not _is_power_of_two(n):
            raise ValueError(f"resolution {n} is not a power of two")
        if not _MIN_N <= n <= _MAX_N:
            raise ValueError(f"resolution {n} outside [{_MIN_N}, {_MAX_N}]")
    return Grid(tuple(resolution))


class Fourier:
    """Cached wavenumber tables and transforms for one grid shape.

    Works on raw arrays; the solvers use it directly to avoid wrapping every
    intermediate in a field object.
    """

    def __init__(self, shape: tuple[int, ...]):
        self.shape = tuple(shape)
        self.dim = len(shape)
        self.padded_shape = tuple(3 * n // 2 for n in shape)
        spectral_shape = self.shape[:-1] + (self.shape[-1] // 2 + 1,)
        self.spectral_shape = spectral_shape

        waves = []
        for axis, n in enumerate(self.shape):
            if axis == self.dim - 1:
                k = np.fft.rfftfreq(n, 1.0 / n)
            else:
                k = np.fft.fftfreq(n, 1.0 / n)
            shape_b = [1] * self.dim
            shape_b[axis] = k.size
            waves.append(k.reshape(shape_b))
        self.k = waves

        # Derivative symbols with the Nyquist mode removed so that derivatives
        # of real fields stay real.
        self.ik = []
        for axis, n in enumerate(self.shape):
            k = waves[axis].copy()
            k[np.abs(k) == n // 2] = 0.0
            self.ik.append(2j * np.pi * k)
        k2 = sum((2.0 * np.pi * k) ** 2 for k in waves)
        self.k2 = np.broadcast_to(k2, spectral_shape).copy()
        self.inv_k2 = np.zeros_like(self.k2)
        nonzero = self.k2 > 0
        self.inv_k2[nonzero] = 1.0 / self.k2[nonzero]

        nyquist = np.zeros(spectral_shape, dtype=bool)
        for axis, n in enumerate(self.shape):
            nyquist |= np.broadcast_to(np.abs(waves[axis]) == n // 2, spectral_shape)
        self.nyquist = nyquist

        src, dst = [], []
        for axis, (n, m) in enumerate(zip(self.shape, self.padded_shape)):
            h = n // 2
            if axis == self.dim - 1:
                s = np.arange(h)
                d = s
            else:
                s = np.concatenate([np.arange(h), np.arange(h + 1, n)])
                d = np.concatenate([np.arange(h), np.arange(m - h + 1, m)])
            src.append(s)
            dst.append(d)
        self._src = np.ix_(*src)
        self._dst = np.ix_(*dst)
        self._padded_spectral_shape = self.padded_shape[:-1] + (self.padded_shape[-1] // 2 + 1,)

    def forward(self, values: np.ndarray) -> np.ndarray:
        return fft.rfftn(values, norm="forward")

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        return fft.irfftn(coeffs, s=self.shape, norm="forward")

    def pad(self, coeffs: np.ndarray) -> np.ndarray:
        out = np.zeros(self._padded_spectral_shape, dtype=complex)
        out[self._dst] = coeffs[self._src]
        return out

    def truncate(self, padded: np.ndarray) -> np.ndarray:
        out = np.zeros(self.spectral_shape, dtype=complex)
        out[self._src] = padded[self._dst]
        return out

    def to_padded(self, coeffs: np.ndarray) -> np.ndarray:
        """Physical values on the 3/2-padded grid of a spectral array."""
        return fft.irfftn(self.pad(coeffs), s=self.padded_shape, norm="forward")

    def from_padded(self, values: np.ndarray) -> np.ndarray:
        """Spectral coefficients (truncated to this grid) of padded samples."""
        return self.truncate(fft.rfftn(values, norm="forward"))

    def product(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Dealiased product of two physical arrays, returned in physical space."""
        pa = self.to_padded(self.forward(a))
        pb = self.to_padded(self.forward(b))
        return self.inverse(self.from_padded(pa * pb))


@lru_cache(maxsize=32)
def fourier(shape: tuple[int, ...]) -> Fourier:
    return Fourier(tuple(shape))


class ScalarField:
    """Real samples of a 1-periodic function; immutable."""

    __slots__ = ("grid", "_values", "_coeffs")

    def __init__(self, grid: Grid, values):
        arr = np.array(values, dtype=float)
        if arr.shape != grid.shape:
            raise ValueError(f"values shape {arr.shape} does not match grid {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("field values must be finite")
        arr.flags.writeable = False
        self.grid = grid
        self._values = arr
        self._coeffs = None

    @classmethod
    def from_function(cls, grid: Grid, func) -> "ScalarField":
        return cls(grid, np.broadcast_to(func(*grid.coordinates()), grid.shape))

    @classmethod
    def constant(cls, grid: Grid, value: float = 0.0) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(value)))

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def spectral(self) -> np.ndarray:
        """Half-spectrum (rfft layout) coefficients; index 0 is the mean."""
        if self._coeffs is None:
            c = fourier(self.grid.shape).forward(self._values)
            c.flags.writeable = False
            self._coeffs = c
        return self._coeffs

    def full_spectrum(self) -> np.ndarray:
        """Coefficients for every integer wavevector in ``[-N/2, N/2)^n``."""
        return fft.fftn(self._values, norm="forward")

    def _binary(self, other, op):
        if isinstance(other, ScalarField):
            _check_same_grid(self, other)
            other = other.values
        return ScalarField(self.grid, op(self._values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return ScalarField(self.grid, other - self._values)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return ScalarField(self.grid, -self._values)

    def __repr__(self):
        return f"ScalarField(grid={self.grid.shape})"


class VectorField:
    """``dim`` scalar components on one grid."""

    __slots__ = ("grid", "components")

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("vector field needs at least one component")
        grid = components[0].grid
        for c in components[1:]:
            if c.grid != grid:
                raise ValueError("vector components live on different grids")
        self.grid = grid
        self.components = components

    def __getitem__(self, i) -> ScalarField:
        return self.components[i]

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def dot(self, e) -> ScalarField:
        """Pointwise projection onto a constant vector ``e``."""
        values = sum(float(ei) * c.values for ei, c in zip(e, self.components))
        return ScalarField(self.grid, values)

    def as_array(self) -> np.ndarray:
        return np.stack([c.values for c in self.components])


def _check_same_grid(f, g):
    if f.grid != g.grid:
        raise ValueError(f"grid mismatch: {f.grid.shape} vs {g.grid.shape}")


def gradient(f: ScalarField) -> VectorField:
    four = fourier(f.grid.shape)
    c = f.spectral
    return VectorField(ScalarField(f.grid, four.inverse(ik * c)) for ik in four.ik)


def divergence(v: VectorField) -> ScalarField:
    four = fourier(v.grid.shape)
    c = sum(ik * comp.spectral for ik, comp in zip(four.ik, v.components))
    return ScalarField(v.grid, four.inverse(c))


def laplacian(f: ScalarField) -> ScalarField:
    four = fourier(f.grid.shape)
    return ScalarField(f.grid, four.inverse(-four.k2 * f.spectral))


def solve_poisson(f: ScalarField) -> ScalarField:
    """Mean-zero ``g`` with ``-laplacian(g) = f``; ``f`` must be mean-zero."""
    norm = l2_norm(f)
    if abs(mean(f)) > 1e-10 * max(norm, np.finfo(float).tiny):
        raise ValueError(f"right-hand side has nonzero mean {mean(f):.3e}")
    four = fourier(f.grid.shape)
    return ScalarField(f.grid, four.inverse(four.inv_k2 * f.spectral))


def mean(f: ScalarField) -> float:
    return float(np.mean(f.values))


def l2_inner(f, g) -> float:
    """L2 inner product over the unit torus; accepts scalar or vector fields."""
    if isinstance(f, VectorField):
        if len(f) != len(g):
            raise ValueError("vector fields of different length")
        return sum(l2_inner(a, b) for a, b in zip(f, g))
    _check_same_grid(f, g)
    return float(np.mean(f.values * g.values))


def l2_norm(f) -> float:
    if isinstance(f, VectorField):
        return math.sqrt(sum(l2_norm(c) ** 2 for c in f))
    return float(np.sqrt(np.mean(f.values**2)))


def h1_seminorm(f: ScalarField) -> float:
    return l2_norm(gradient(f))


def h1_norm(f: ScalarField) -> float:
    return math.hypot(l2_norm(f), h1_seminorm(f))


def dealiased_product(f: ScalarField, g: ScalarField) -> ScalarField:
    _check_same_grid(f, g)
    return ScalarField(f.grid, fourier(f.grid.shape).product(f.values, g.values))


def resample(f: ScalarField, grid: Grid) -> ScalarField:
    """Trigonometric interpolation of ``f`` onto another grid of the same dimension."""
    if grid.dim != f.grid.dim:
        raise ValueError("cannot resample across dimensions")
    if grid == f.grid:
        return f
    full = f.full_spectrum()
    out = np.zeros(grid.shape, dtype=complex)
    src, dst = [], []
    for n, m in zip(f.grid.shape, grid.shape):
        h = min(n, m) // 2
        # Drop the ambiguous Nyquist mode of the coarser grid.
        s = np.concatenate([np.arange(h), np.arange(n - h + 1, n)])
        d = np.concatenate([np.arange(h), np.arange(m - h + 1, m)])
        src.append(s)
        dst.append(d)
    out[np.ix_(*dst)] = full[np.ix_(*src)]
    return ScalarField(grid, fft.ifftn(out, norm="forward").real)
