import math
import warnings

import numpy as np
import pytest

from kppflow.flows import cellular_flow, shear_flow, zero_flow
from kppflow.simulate import (
    ChannelDomain,
    FrontTrajectory,
    InstabilityError,
    TruncationWarning,
    measure_speed,
    simulate_front,
    simulate_state,
)
from kppflow.speed import ReactionSpec, fisher_kpp
from kppflow.torus import make_grid

DOM = ChannelDomain(32, resolution=8)


def test_channel_needs_room():
    with pytest.raises(ValueError):
        ChannelDomain(8)


def test_measure_speed_exact_line():
    t = np.arange(40.0)
    fit = measure_speed((t, 3 * t))
    assert math.isclose(fit.speed, 3.0, rel_tol=1e-12) and fit.fit_residual < 1e-12


def test_measure_speed_oscillating_line():
    t = np.arange(60.0)
    fit = measure_speed((t, 3 * t + np.sin(t)))
    assert abs(fit.speed - 3.0) <= 0.2
    # |sin| reaches 1 and the fitted line is offset a little from 3t.
    assert 1.0 <= fit.fit_residual <= 1.1


def test_measure_speed_constant_and_short():
    t = np.arange(30.0)
    assert measure_speed((t, np.full_like(t, 5.0))).speed == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        measure_speed((t[:10], t[:10]))


def test_zero_flow_speed():
    u = zero_flow(make_grid(2, 8))
    traj = simulate_front(u, 0.0, fisher_kpp(1.0), ChannelDomain(256, resolution=8), 60.0)
    assert not traj.truncated
    assert abs(measure_speed(traj).speed - 2.0) <= 0.05
    assert traj.monotone_after_settling()
    assert np.all(traj.cross_section_max <= 1.0)


def test_zero_amplitude_matches_zero_flow():
    spec = fisher_kpp(1.0)
    a = list(simulate_state(cellular_flow(make_grid(2, 8)), 0.0, spec, DOM, 30))
    b = list(simulate_state(zero_flow(make_grid(2, 8)), 0.0, spec, DOM, 30))
    assert max(float(np.max(np.abs(x - y))) for x, y in zip(a, b)) <= 1e-10


def test_max_principle_without_reaction():
    spec = ReactionSpec(1.0, lambda s: 0.0 * s, name="zero")
    u = cellular_flow(make_grid(2, 8))
    tops = [float(T.max()) for T in simulate_state(u, 3.0, spec, DOM, 60)]
    assert all(b <= a + 1e-10 for a, b in zip(tops, tops[1:]))


def test_mass_grows_with_kpp_reaction():
    u = shear_flow(make_grid(2, 8), [((1,), 1.0)])
    mass = [float(T.mean()) for T in simulate_state(u, 2.0, fisher_kpp(1.0), DOM, 60)]
    assert all(b >= a - 1e-10 for a, b in zip(mass, mass[1:]))


def test_speed_bounds_for_cellular_flow():
    u = cellular_flow(make_grid(2, 8))
    A = 2.0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        traj = simulate_front(u, A, fisher_kpp(1.0), ChannelDomain(96, resolution=8), 30.0)
    c = measure_speed(traj).speed
    assert 0.9 * 2.0 <= c <= 1.1 * (2.0 + A * 1.0)


def test_truncation_warning():
    u = zero_flow(make_grid(2, 8))
    with pytest.warns(TruncationWarning):
        traj = simulate_front(u, 0.0, fisher_kpp(1.0), ChannelDomain(16, resolution=8), 30.0)
    assert traj.truncated and traj.times[-1] < 30.0


def test_dt_above_bound_rejected():
    u = cellular_flow(make_grid(2, 8))
    with pytest.raises(ValueError):
        simulate_front(u, 50.0, fisher_kpp(1.0), DOM, 1.0, dt=0.5)


def test_instability_detected():
    # A reaction that pushes far past 1 trips the blow-up check.
    spec = ReactionSpec(1.0, lambda s: s * (1 - s) + 50.0 * s * s, name="bad")
    with pytest.raises(InstabilityError):
        simulate_front(zero_flow(make_grid(2, 8)), 0.0, spec, DOM, 5.0)


def test_trajectory_csv():
    traj = FrontTrajectory(np.array([0.0, 1.0]), np.array([2.0, 4.0]), 0.5,
                           np.array([1.0, 1.0]), np.array([0, 0]))
    lines = traj.to_csv().splitlines()
    assert lines[0] == "t,front_position,cross_section_max,clip_count"
    assert len(lines) == 3
