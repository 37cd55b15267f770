import math

import numpy as np
import pytest

from kppflow.flows import cellular_flow, shear_flow
from kppflow.limits import speed_limit_detail
from kppflow.speed import (
    BracketError,
    _bracket,
    ReactionSpec,
    fisher_kpp,
    minimal_speed,
    speed_sweep,
    validate_reaction,
)
from kppflow.torus import make_grid


def test_fisher_kpp_passes():
    rep = validate_reaction(fisher_kpp(1.0))
    assert rep.ok, rep.failures()


def test_degenerate_reaction_fails():
    spec = ReactionSpec(1.0, lambda s: s * s * (1 - s), name="s^2(1-s)")
    rep = validate_reaction(spec)
    assert not rep.ok
    assert "slope_at_zero" in rep.failures()


def test_reaction_within_kpp_bound_passes():
    # (1 - s)(1 + s/2) <= 1 on [0, 1], so this one satisfies f(s) <= s.
    spec = ReactionSpec(1.0, lambda s: s * (1 - s) * (1 + 0.5 * s))
    assert validate_reaction(spec).ok


def test_kpp_bound_violation_reports_worst_sample():
    # f(s) - s = s^2 (1 - 2s) is positive on (0, 1/2) and peaks at s = 1/3.
    spec = ReactionSpec(1.0, lambda s: s * (1 - s) * (1 + 2 * s))
    rep = validate_reaction(spec)
    assert rep.failures() == ["kpp_bound"]
    worst = rep.conditions["kpp_bound"]
    assert abs(worst.worst_s - 1 / 3) < 1e-3
    assert math.isclose(worst.worst_value, 1 / 27, rel_tol=1e-5)


def test_reaction_spec_preconditions():
    with pytest.raises(ValueError):
        ReactionSpec(0.0, lambda s: s)
    with pytest.raises(ValueError):
        validate_reaction(fisher_kpp(), samples=10)


@pytest.mark.parametrize("fp, c, lam", [(1.0, 2.0, 1.0), (4.0, 4.0, 2.0)])
@pytest.mark.parametrize("A", [1.0, 100.0])
def test_zero_flow_speed(zero32, fp, c, lam, A):
    r = minimal_speed(zero32, (1, 0), A, fisher_kpp(fp))
    assert abs(r.c_star - c) <= 1e-8
    assert abs(r.lambda_star - lam) <= 1e-5 * lam


def test_shear_speed_matches_oracle(sin_shear, alpha):
    oracle, lam_star, _ = speed_limit_detail(alpha, (1, 0), 1.0)
    for A in (100.0, 1000.0):
        r = minimal_speed(sin_shear, (1, 0), A, fisher_kpp(1.0))
        gap = r.c_star / A - oracle
        # The finite-A objective carries an extra (lam/A)^2, so the gap is lam*/A^2 to leading order.
        assert abs(gap - lam_star / A**2) <= 1e-2 * lam_star / A**2
        assert gap <= 2.0 / A + 1e-6
        assert r.c_star >= 2.0 - 1e-8
        assert r.at_minimum is not None and r.bracket[0] < r.lambda_star * A < r.bracket[1]
    assert abs(gap) <= 1e-4


def test_speed_non_decreasing_in_rate(cellular32):
    speeds = [minimal_speed(cellular32, (1, 0), 8.0, fisher_kpp(fp)).c_star for fp in (0.5, 1.0, 2.0)]
    assert all(b >= a for a, b in zip(speeds, speeds[1:]))
    assert speeds[0] >= 2 * math.sqrt(0.5) - 1e-8


def test_shear_sweep_monotone():
    u = shear_flow(make_grid(2, 32), [((1,), 1.0)])
    curve = speed_sweep(u, (1, 0), [5.0, 20.0, 80.0, 320.0], fisher_kpp(1.0))
    assert np.all(np.diff(curve.column("c_star_over_A")) <= 1e-7)
    assert curve.flags["c_over_A_nonincreasing"]
    header = curve.to_csv().splitlines()[0]
    assert header == "A,c_star,c_star_over_A,lambda_star,kappa_at_lambda_star,eigen_residual"


def test_zero_flow_sweep(zero32):
    As = [1.0, 2.0, 4.0]
    curve = speed_sweep(zero32, (1, 0), As, fisher_kpp(1.0))
    assert np.allclose(curve.column("c_star_over_A"), 2.0 / np.array(As), rtol=1e-9)
    assert curve.flags["c_over_A_decreasing"]


def test_cellular_sweep_decreasing():
    u = cellular_flow(make_grid(2, 64))
    curve = speed_sweep(u, (1, 0), [4.0, 8.0, 16.0], fisher_kpp(1.0))
    assert curve.flags["c_over_A_decreasing"]


def test_bracket_failure_is_reported():
    with pytest.raises(BracketError):
        _bracket(lambda lam: 1.0 / lam, 1e-3, 10.0, 1e3)


def test_invalid_reaction_rejected(zero32):
    bad = ReactionSpec(1.0, lambda s: s * s * (1 - s))
    with pytest.raises(ValueError):
        minimal_speed(zero32, (1, 0), 1.0, bad)
