"""Direct simulation of T_t + A u.grad T = lap T + f(T) in a periodic channel.

The channel is ``[0, L) x T^{n-1}``, with the flow tiled ``L`` times along the
channel axis.  Time stepping is Strang splitting: half a step of exact
spectral diffusion, an RK4 step of advection plus reaction, and another half
step of diffusion.  The initial datum is a smoothed indicator of ``[0, 2)``,
so two fronts leave it; the right-moving one is tracked.
"""
from __future__ import annotations

import csv
import io
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import fft as sfft

from .flows import FlowField, resample_flow
from .speed import ReactionSpec
from .sweep import format_number
from .torus import Grid

logger = logging.getLogger(__name__)

TRAJECTORY_COLUMNS = ("t", "front_position", "cross_section_max", "clip_count")


class InstabilityError(RuntimeError):
    pass


class TruncationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class ChannelDomain:
    length_periods: int
    resolution: int = 16
    axis: int = 0

    def __post_init__(self):
        if self.length_periods < 16:
            raise ValueError("channel must be at least 16 periods long")
        if self.resolution < 8:
            raise ValueError("need at least 8 points per period")


@dataclass(frozen=True)
class FrontTrajectory:
    times: np.ndarray
    positions: np.ndarray
    level: float
    cross_section_max: np.ndarray
    clip_counts: np.ndarray
    truncated: bool = False
    settle_fraction: float = 0.25

    def __len__(self):
        return len(self.times)

    def monotone_after_settling(self, slack: float = 0.0) -> bool:
        start = int(len(self.positions) * self.settle_fraction)
        return bool(np.all(np.diff(self.positions[start:]) >= -slack))

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRAJECTORY_COLUMNS)
        for row in zip(self.times, self.positions, self.cross_section_max, self.clip_counts):
            w.writerow([format_number(v) for v in row])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="ascii", newline="") as fh:
                fh.write(text)
        return text


@dataclass(frozen=True)
class SpeedFit:
    speed: float
    fit_residual: float
    intercept: float = 0.0
    samples: int = 0


def measure_speed(traj, window_fraction: float = 0.75) -> SpeedFit:
    """Least-squares slope over the last ``window_fraction`` of the samples.

    ``traj`` is a :class:`FrontTrajectory` or a ``(times, positions)`` pair.
    ``fit_residual`` is the largest absolute deviation from the fitted line.
    """
    if isinstance(traj, FrontTrajectory):
        t, x = traj.times, traj.positions
    else:
        t, x = (np.asarray(v, dtype=float) for v in traj)
    if len(t) < 20:
        raise ValueError(f"need at least 20 samples, got {len(t)}")
    if not 0 < window_fraction <= 1:
        raise ValueError("window_fraction must lie in (0, 1]")
    n = max(2, int(round(len(t) * window_fraction)))
    t, x = np.asarray(t[-n:], dtype=float), np.asarray(x[-n:], dtype=float)
    slope, intercept = np.polyfit(t, x, 1)
    resid = float(np.max(np.abs(x - (slope * t + intercept))))
    return SpeedFit(float(slope), resid, float(intercept), n)


def stable_dt(A: float, max_speed: float, kmax: float, fprime0: float, cap: float = 0.05) -> float:
    """``1 / (A max|u| kmax / 2.8 + f'(0) + 1)``, capped at ``cap``.

    RK4 is stable on the imaginary axis up to about 2.8, and diffusion is
    integrated exactly, so only advection and reaction limit the step.
    """
    return min(cap, 1.0 / (A * max_speed * kmax / 2.8 + fprime0 + 1.0))


class _Channel:
    def __init__(self, u: FlowField, A: float, dom: ChannelDomain):
        axis = dom.axis
        shape = list(u.grid.shape)
        shape[axis] = dom.resolution
        flow = resample_flow(u, Grid(tuple(shape)))
        reps = [1] * u.dim
        reps[axis] = dom.length_periods
        # Channel axis first, so cross-section maxima are taken over the trailing axes.
        order = [axis] + [i for i in range(u.dim) if i != axis]
        vel = [np.moveaxis(np.tile(c.values, reps), axis, 0) for c in flow.velocity]
        self.vel = [vel[i] for i in order]
        self.shape = self.vel[0].shape
        self.dx = 1.0 / dom.resolution
        self.L = dom.length_periods
        self.A = float(A)

        lengths = [float(self.L)] + [1.0] * (u.dim - 1)
        last = len(self.shape) - 1
        full, cut = [], []
        for i, (n, ln) in enumerate(zip(self.shape, lengths)):
            freq = (sfft.rfftfreq if i == last else sfft.fftfreq)(n, ln / n)
            k = 2.0 * math.pi * freq
            full.append(k)
            # Drop the Nyquist mode from first derivatives.
            cut.append(np.where(np.abs(freq) == n / (2.0 * ln), 0.0, k))
        self.ik = [1j * g for g in np.meshgrid(*cut, indexing="ij")]
        self.k2 = sum(g**2 for g in np.meshgrid(*full, indexing="ij"))
        self.kmax = max(float(np.max(np.abs(k))) for k in cut)
        self.max_speed = max(float(np.max(np.abs(v))) for v in self.vel)
        self.advect = self.A != 0.0 and self.max_speed > 0.0
        self.x = np.arange(self.shape[0]) * self.dx

    def fwd(self, v):
        return sfft.rfftn(v)

    def inv(self, c):
        return sfft.irfftn(c, s=self.shape)

    def rhs(self, T, f):
        out = f(T)
        if self.advect:
            c = self.fwd(T)
            out = out - self.A * sum(v * self.inv(ik * c) for v, ik in zip(self.vel, self.ik))
        return out

    def step(self, T, dt, half, f):
        T = self.inv(half * self.fwd(T))
        k1 = self.rhs(T, f)
        k2 = self.rhs(T + 0.5 * dt * k1, f)
        k3 = self.rhs(T + 0.5 * dt * k2, f)
        k4 = self.rhs(T + dt * k3, f)
        T = T + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        return self.inv(half * self.fwd(T))


def _initial(ch: _Channel) -> np.ndarray:
    x = ch.x
    # Periodic coordinate centred on the bump so the smoothing is symmetric.
    xc = np.where(x < ch.L / 2, x, x - ch.L)
    w = 0.5
    prof = 0.5 * (np.tanh(xc / w) - np.tanh((xc - 2.0) / w))
    return np.broadcast_to(prof.reshape((-1,) + (1,) * (len(ch.shape) - 1)), ch.shape).copy()


def _front(ch: _Channel, smax: np.ndarray, level: float):
    """Right-moving front: first downcrossing of ``level`` to the right of x = 1,
    and the gap to the next upcrossing (the left-moving front, wrapped)."""
    start = int(round(1.0 / ch.dx))
    s = np.roll(smax, -start)
    below = np.nonzero(s < level)[0]
    if below.size == 0:
        return math.nan, 0.0
    i = int(below[0])
    if i == 0:
        return math.nan, 0.0
    a, b = s[i - 1], s[i]
    pos = (start + i - 1 + (a - level) / (a - b)) * ch.dx
    above = np.nonzero(s[i:] >= level)[0]
    gap = (above[0] if above.size else s.size - i) * ch.dx
    return pos, gap


def simulate_front(u: FlowField, A: float, spec: ReactionSpec, dom: ChannelDomain,
                   t_final: float, dt: float | None = None, level: float = 0.5,
                   sample_every: float = 1.0, margin_periods: float = 8.0,
                   cutoff: float = 1e-14) -> FrontTrajectory:
    """Run the channel simulation and record the front every ``sample_every``.

    ``dt`` defaults to :func:`stable_dt`; a larger value is rejected.  Values
    leaving ``[0, 1]`` are clipped and those beyond 1e-9 are counted; any value
    above 1.1 raises :class:`InstabilityError`.  The run stops early, with a
    :class:`TruncationWarning`, once the two fronts are within
    ``margin_periods`` of each other.

    Values below ``cutoff`` are set to zero after each step.  Without this,
    FFT roundoff in the unstable state ``T = 0`` grows like ``exp(f'(0) t)``
    and eventually ignites the whole channel.
    """
    if A < 0:
        raise ValueError("amplitude must be non-negative")
    if t_final <= 0:
        raise ValueError("t_final must be positive")
    ch = _Channel(u, A, dom)
    bound = stable_dt(A, ch.max_speed, ch.kmax, spec.fprime0)
    if dt is None:
        dt = bound
    elif dt > bound * (1 + 1e-12):
        raise ValueError(f"dt={dt} exceeds the stability bound {bound:.4g}")
    per_sample = max(1, int(round(sample_every / dt)))
    dt = sample_every / per_sample
    half = np.exp(-0.5 * dt * ch.k2)
    f = spec.f

    T = _initial(ch)
    times, pos, smaxes, clips = [], [], [], []
    clip_count = 0
    truncated = False
    steps = int(round(t_final / sample_every)) * per_sample

    def record(t):
        smax = T.max(axis=tuple(range(1, T.ndim)))
        p, gap = _front(ch, smax, level)
        times.append(t)
        pos.append(p)
        smaxes.append(float(T.max()))
        clips.append(clip_count)
        return gap

    record(0.0)
    for n in range(1, steps + 1):
        T = ch.step(T, dt, half, f)
        top = float(T.max())
        if not math.isfinite(top) or top > 1.1:
            raise InstabilityError(f"max T = {top:.4g} at step {n} (t = {n * dt:.4g})")
        over = (T > 1.0 + 1e-9) | (T < -1e-9)
        clip_count += int(np.count_nonzero(over))
        np.clip(T, 0.0, 1.0, out=T)
        T[T < cutoff] = 0.0
        if n % per_sample == 0:
            gap = record(n * dt)
            if gap < margin_periods:
                truncated = True
                warnings.warn(f"fronts within {margin_periods} periods at t = {n * dt:.3g}; "
                              "trajectory truncated", TruncationWarning, stacklevel=2)
                break
    return FrontTrajectory(np.array(times), np.array(pos), level, np.array(smaxes),
                           np.array(clips), truncated)


def simulate_state(u: FlowField, A: float, spec: ReactionSpec, dom: ChannelDomain, steps: int,
                   dt: float | None = None, cutoff: float = 1e-14):
    """Yield the field after each of ``steps`` steps (for invariant checks)."""
    ch = _Channel(u, A, dom)
    if dt is None:
        dt = stable_dt(A, ch.max_speed, ch.kmax, spec.fprime0)
    half = np.exp(-0.5 * dt * ch.k2)
    T = _initial(ch)
    yield T.copy()
    for _ in range(steps):
        T = ch.step(T, dt, half, spec.f)
        np.clip(T, 0.0, 1.0, out=T)
        T[T < cutoff] = 0.0
        yield T.copy()
