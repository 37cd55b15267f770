import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kppflow.flows import (
    CELLULAR,
    SHEAR,
    FlowField,
    advect,
    cellular_flow,
    fourier_flow,
    resample_flow,
    shear_flow,
    validate_flow,
    zero_flow,
)
from kppflow.torus import ScalarField, VectorField, l2_inner, make_grid, resample


def test_shear_flow_shape_and_report(grid64):
    u = shear_flow(grid64, [((1,), 1.0)])
    assert u.kind == SHEAR and u.shear_axis == 0
    r = validate_flow(u)
    assert r.ok
    assert r.div_residual == 0.0
    assert np.isclose(r.max_speed[0], 1.0)
    assert r.max_abs_speed[1] == 0.0


def test_shear_rejects_mean():
    g = make_grid(2, 16)
    with pytest.raises(ValueError):
        shear_flow(g, [((0,), 0.5)])


def test_cellular_flow_is_divergence_free():
    u = cellular_flow(make_grid(2, 32))
    assert u.kind == CELLULAR
    r = validate_flow(u)
    assert r.div_residual < 1e-12
    assert max(r.mean_residuals) < 1e-15
    assert np.isclose(r.max_abs_speed[0], 1.0)


def test_fourier_flow_projects_amplitude():
    g = make_grid(3, 16)
    u = fourier_flow(g, [{"wavevector": [1, 1, 0], "amplitude": [1.0, 0.0, 0.5], "phase": 0.3}])
    assert validate_flow(u).div_residual < 1e-12


def test_non_solenoidal_field_rejected():
    g = make_grid(2, 16)
    x = ScalarField.from_function(g, lambda x, y: np.sin(2 * np.pi * x))
    with pytest.raises(ValueError):
        FlowField(VectorField([x, ScalarField.constant(g)]), "bad")


def test_nonzero_mean_rejected():
    g = make_grid(2, 16)
    c = ScalarField.constant(g, 0.1)
    with pytest.raises(ValueError):
        FlowField(VectorField([c, ScalarField.constant(g)]), "bad")


def test_zero_flow():
    u = zero_flow(make_grid(2, 16))
    assert u.is_zero()


def test_resample_flow_keeps_shear_metadata(sin_shear):
    fine = resample_flow(sin_shear, sin_shear.grid.refined(2))
    assert fine.kind == SHEAR and fine.shear_profile.grid.shape == (128,)


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32 - 1))
def test_advection_is_skew_symmetric(seed):
    g = make_grid(2, 16)
    rng = np.random.default_rng(seed)
    u = cellular_flow(g)
    w = resample(ScalarField(make_grid(2, 8), rng.standard_normal((8, 8))), g)
    v = resample(ScalarField(make_grid(2, 8), rng.standard_normal((8, 8))), g)
    assert abs(l2_inner(advect(u, w), v) + l2_inner(w, advect(u, v))) < 1e-12
    assert abs(l2_inner(advect(u, w), w)) < 1e-12
