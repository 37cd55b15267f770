"""Discrete advection-diffusion operators acting on flattened grid samples."""
from __future__ import annotations

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from .flows import FlowField, padded_velocity
from .torus import fourier


class TiltedOperator:
    """``L phi = lap(phi) - A u.grad(phi) - d.grad(phi) + q phi + shift * phi``.

    ``d`` is a constant drift vector and ``q = sum_i p_i u_i`` a potential
    built from the velocity components, so every product is a dealiased
    quadratic product with the band-limited velocity.  With ``sign=-1`` the
    whole operator is negated (the cell problem uses ``-lap + A u.grad``).
    """

    def __init__(self, flow: FlowField, A: float, drift=None, potential=None,
                 shift: float = 0.0, sign: float = 1.0):
        self.flow = flow
        self.grid = flow.grid
        self.four = fourier(self.grid.shape)
        self.A = float(A)
        self.shift = float(shift)
        self.sign = float(sign)
        self.n = self.grid.size
        four = self.four
        self._up = padded_velocity(flow) if not flow.is_zero() else None

        symbol = -four.k2.astype(complex)
        if drift is not None:
            for d, ik in zip(drift, four.ik):
                symbol = symbol - float(d) * ik
        self._symbol = symbol

        self._q = None
        if potential is not None and self._up is not None and np.any(potential):
            self._q = sum(float(p) * up for p, up in zip(potential, self._up))
        self._advect = self._up is not None and self.A != 0.0

    def apply_spectral(self, c: np.ndarray) -> np.ndarray:
        four = self.four
        out = self._symbol * c
        if self._advect or self._q is not None:
            padded = 0.0
            if self._advect:
                padded = -self.A * sum(
                    up * four.to_padded(ik * c) for up, ik in zip(self._up, four.ik)
                )
            if self._q is not None:
                padded = padded + self._q * four.to_padded(c)
            out = out + four.from_padded(padded)
        if self.shift:
            out = out + self.shift * c
        return self.sign * out

    def apply(self, values: np.ndarray) -> np.ndarray:
        v = np.asarray(values, dtype=float).reshape(self.grid.shape)
        return self.four.inverse(self.apply_spectral(self.four.forward(v)))

    def matvec(self, x: np.ndarray) -> np.ndarray:
        return self.apply(x).ravel()

    def linear_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)

    def dense(self) -> np.ndarray:
        """Assemble the matrix column by column (small grids only)."""
        if self.n > 4096:
            raise ValueError(f"refusing to assemble a dense {self.n}x{self.n} matrix")
        cols = np.empty((self.n, self.n))
        e = np.zeros(self.n)
        for j in range(self.n):
            e[j] = 1.0
            cols[:, j] = self.matvec(e)
            e[j] = 0.0
        return cols


def shifted_laplacian_inverse(grid, shift: float) -> LinearOperator:
    """``(shift - lap)^{-1}``; for ``shift == 0`` the mean-zero inverse Laplacian."""
    four = fourier(grid.shape)
    if shift == 0.0:
        symbol = four.inv_k2
    else:
        symbol = 1.0 / (four.k2 + shift)

    def mv(x):
        return four.inverse(symbol * four.forward(x.reshape(grid.shape))).ravel()

    return LinearOperator((grid.size, grid.size), matvec=mv, dtype=float)


def gmres_solve(op: TiltedOperator, rhs: np.ndarray, *, tol: float, max_iter: int,
                precond: LinearOperator, x0=None, restart: int = 200,
                project_mean: bool = False, stall_factor: float = 0.99):
    """Right-preconditioned restarted GMRES on the true residual.

    Each cycle solves ``(op M) y = b - op x`` and updates ``x += M y``, so the
    GMRES residual is the unpreconditioned one.  A cycle of at least 50
    iterations that fails to cut the residual below ``stall_factor`` times its
    previous value counts as a stall and ends the solve early.

    Returns ``(x, relative_residual, iterations, stalled)``.
    """
    b = rhs.ravel()
    bnorm = np.linalg.norm(b)
    x = np.zeros_like(b) if x0 is None else np.array(x0, dtype=float).ravel()
    if bnorm == 0.0:
        return np.zeros_like(b), 0.0, 0, False
    right = LinearOperator((op.n, op.n), matvec=lambda v: op.matvec(precond.matvec(v)), dtype=float)

    r = b - op.matvec(x)
    res = np.linalg.norm(r) / bnorm
    best = (x.copy(), res)
    iterations = 0
    stalled = False
    while res > tol and iterations < max_iter:
        m = min(restart, max_iter - iterations)
        counter = [0]

        def count(_):
            counter[0] += 1

        # Tolerance relative to the current residual, which is the new right-hand side.
        y, _ = gmres(right, r, rtol=min(0.5, tol * bnorm / np.linalg.norm(r)), atol=0.0,
                     restart=m, maxiter=1, callback=count, callback_type="pr_norm")
        x = x + precond.matvec(y)
        if project_mean:
            x = x - x.mean()
        iterations += max(counter[0], 1)
        r = b - op.matvec(x)
        new = np.linalg.norm(r) / bnorm
        if new < best[1]:
            best = (x.copy(), new)
        if counter[0] >= 50 and new > stall_factor * res:
            stalled = True
            res = new
            break
        res = new
    x, res = best
    return x, res, iterations, stalled
