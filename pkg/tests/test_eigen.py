import math

import numpy as np
import pytest

from kppflow.eigen import eigen_identities, mu_curve, principal_eigenpair, second_differences, tilted_operator
from kppflow.flows import cellular_flow, shear_flow
from kppflow.limits import kappa_e_shear
from kppflow.torus import ScalarField, l2_norm, make_grid


def check_invariants(r, u, e=(1, 0)):
    assert np.min(r.phi.values) > 0
    assert abs(l2_norm(r.phi) - 1.0) <= 1e-10
    assert r.kappa >= -1e-9
    assert r.kappa <= r.lam * float(np.max(u.along(e).values)) + 1e-8


@pytest.mark.parametrize("A", [1.0, 25.0])
def test_lambda_zero_is_exact(cellular32, A):
    r = principal_eigenpair(cellular32, (1, 0), A, 0.0)
    assert r.kappa == 0.0 and r.mu == 0.0
    assert np.all(r.phi.values == 1.0)


def test_zero_flow_has_zero_eigenvalue(zero32):
    r = principal_eigenpair(zero32, (1, 0), 5.0, 3.0)
    assert abs(r.kappa) <= 1e-12
    assert np.allclose(r.phi.values, 1.0, atol=1e-10)


def test_shear_amplitude_independence(sin_shear, alpha):
    ref = kappa_e_shear(alpha, 1.0).kappa
    k10 = principal_eigenpair(sin_shear, (1, 0), 10.0, 1.0, tol=1e-11)
    k100 = principal_eigenpair(sin_shear, (1, 0), 100.0, 1.0, tol=1e-11)
    assert abs(k10.kappa - k100.kappa) <= 1e-8
    assert abs(k10.kappa - ref) <= 1e-8
    check_invariants(k10, sin_shear)


@pytest.mark.parametrize("lam", [0.5, 2.0, 6.0])
def test_cellular_invariants(cellular32, lam):
    r = principal_eigenpair(cellular32, (1, 0), 8.0, lam)
    check_invariants(r, cellular32)
    assert r.residual <= 1e-9


def test_dense_oracle_on_small_grid():
    g = make_grid(2, 16)
    for u in (cellular_flow(g), shear_flow(g, [((1,), 1.0)])):
        for lam in (1.0, 4.0):
            k = principal_eigenpair(u, (1, 0), 8.0, lam, tol=1e-12).kappa
            ev = np.linalg.eigvals(tilted_operator(u, (1, 0), 8.0, lam).dense())
            assert abs(k - float(np.max(ev.real))) <= 1e-8


def test_identities(sin_shear):
    r0 = principal_eigenpair(sin_shear, (1, 0), 10.0, 0.0)
    assert eigen_identities(r0, sin_shear, (1, 0)) == {"id35_residual": 0.0, "id36_residual": 0.0}
    r = principal_eigenpair(sin_shear, (1, 0), 10.0, 1.0)
    ids = eigen_identities(r, sin_shear, (1, 0))
    assert ids["id35_residual"] <= 1e-8
    assert ids["id36_residual"] <= 1e-8


def test_identity_sensitivity(sin_shear):
    r = principal_eigenpair(sin_shear, (1, 0), 10.0, 1.0)
    rng = np.random.default_rng(7)
    noise = 0.05 * rng.standard_normal(r.phi.values.shape)
    phi = r.phi.values * (1 + noise)
    phi = phi / math.sqrt(np.mean(phi**2))
    bad = type(r)(**{**r.__dict__, "phi": ScalarField(r.phi.grid, phi)})
    assert eigen_identities(bad, sin_shear, (1, 0))["id36_residual"] >= 1e-3


def test_warm_start_agrees_with_cold(cellular32):
    cold = principal_eigenpair(cellular32, (1, 0), 8.0, 2.0)
    warm = principal_eigenpair(cellular32, (1, 0), 8.0, 2.2, phi0=cold.phi)
    again = principal_eigenpair(cellular32, (1, 0), 8.0, 2.2)
    assert abs(warm.kappa - again.kappa) <= 1e-9


def test_mu_curve_zero_flow(zero32):
    lam = [0.0, 0.5, 1.0, 2.0]
    curve = mu_curve(zero32, (1, 0), 3.0, lam)
    assert np.allclose(curve.column("mu"), np.square(lam), atol=1e-12)
    assert curve.flags["convex"] and curve.flags["increasing"]


def test_mu_curve_shear_convex(sin_shear):
    curve = mu_curve(sin_shear, (1, 0), 10.0, [0.0, 0.5, 1.0, 2.0, 4.0])
    assert curve.column("mu")[0] == 0.0
    assert np.all(second_differences(curve.column("lambda"), curve.column("mu")) >= -1e-8)
    assert curve.flags["convex"] and curve.flags["increasing"]


def test_mu_curve_requires_zero_start(sin_shear):
    with pytest.raises(ValueError):
        mu_curve(sin_shear, (1, 0), 10.0, [0.5, 1.0])


def test_second_differences_of_parabola():
    x = np.array([0.0, 0.3, 1.0, 2.5])
    assert np.allclose(second_differences(x, x**2), 2.0)
