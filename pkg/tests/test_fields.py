import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plap_lab import catalog
from plap_lab.fields import (
    basic_identity_residual,
    convergence_ratios,
    divergence,
    divergence_structure_residual,
    gradient,
    hessian,
    infinity_laplacian_identity_residual,
    jacobian,
    key_inequality_slack,
    key_inequality_slack_exact,
    max_abs,
    min_value,
    region_mask,
    young_split_check,
    young_split_slack,
)
from plap_lab.grid import Box, GridDomain, ScalarField, VectorField
from plap_lab.profiles import OperatorProfile, slack_constants

CORE = Box((0.125, 0.125), (0.875, 0.875))
STEPS = (1 / 32, 1 / 64, 1 / 128)


def unit_square(h):
    return GridDomain.box((0.0, 0.0), (1.0, 1.0), h)


def sample(h, name):
    return ScalarField.sample(unit_square(h), catalog.scalar(name))


def sample_vec(h, name):
    return VectorField.sample(unit_square(h), catalog.vector(name))


def test_affine_derivatives_exact():
    f = sample(1 / 16, "linear")
    g = gradient(f).values
    np.testing.assert_array_equal(g[0], 0.25)
    np.testing.assert_array_equal(g[1], -0.75)
    np.testing.assert_array_equal(hessian(f), 0.0)


def test_quadratic_hessian_is_identity():
    H = hessian(sample(1 / 16, "quadratic"))
    np.testing.assert_allclose(H, np.broadcast_to(np.eye(2)[:, :, None, None], H.shape), atol=1e-10)


def test_hessian_symmetric():
    H = hessian(sample(1 / 32, "exp_sin"))
    np.testing.assert_array_equal(H[0, 1], H[1, 0])


def test_divergence_and_jacobian_of_identity_field():
    X = sample_vec(1 / 16, "identity")
    np.testing.assert_allclose(divergence(X).values, 2.0, atol=1e-12)
    J = jacobian(X)
    np.testing.assert_allclose(J[0, 0], 1.0, atol=1e-12)
    np.testing.assert_allclose(J[0, 1], 0.0, atol=1e-12)


def test_jacobian_orientation():
    # (DX)_ij = dX_i/dx_j: for X = (x1^2 - x2, x1 x2), DX_01 = -1
    dom = unit_square(1 / 16)
    J = jacobian(VectorField.sample(dom, catalog.vector("quadratic_vec")))
    np.testing.assert_allclose(J[0, 1], -1.0, atol=1e-12)
    np.testing.assert_allclose(J[1, 0], dom.coords()[1], atol=1e-12)


def test_hessian_second_order():
    f = catalog.scalar("sin_cos")
    errs = []
    for h in STEPS:
        dom = unit_square(h)
        H = hessian(ScalarField.sample(dom, f))
        errs.append(np.max(np.abs(H - f.hessian(*dom.coords()))))
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(errs))


def test_too_coarse_rejected():
    dom = GridDomain.box((0, 0), (1, 1), 1 / 5)
    with pytest.raises(ValueError):
        basic_identity_residual(ScalarField.sample(dom, catalog.scalar("xy")))


@pytest.mark.parametrize("name", ["linear", "x1", "quadratic", "xy"])
def test_scalar_identities_exact(name):
    u = sample(1 / 64, name)
    assert max_abs(basic_identity_residual(u)) <= 1e-12
    assert max_abs(infinity_laplacian_identity_residual(u)) <= 1e-12


@pytest.mark.parametrize("name", ["identity", "constant"])
def test_divergence_structure_exact(name):
    assert max_abs(divergence_structure_residual(sample_vec(1 / 64, name))) <= 1e-12


@pytest.mark.parametrize("name", list(catalog.TRANSCENDENTAL_SCALARS) + ["poly4"])
def test_scalar_identities_second_order(name):
    basic = [max_abs(basic_identity_residual(sample(h, name)), CORE) for h in STEPS]
    inf = [max_abs(infinity_laplacian_identity_residual(sample(h, name)), CORE) for h in STEPS]
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(basic))
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(inf))


@pytest.mark.parametrize("name", list(catalog.TRANSCENDENTAL_VECTORS) + ["quadratic_vec"])
def test_divergence_structure_second_order(name):
    errs = [max_abs(divergence_structure_residual(sample_vec(h, name)), CORE) for h in STEPS]
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(errs))


def test_random_trig_identity_order():
    f = catalog.random_trig_scalar(np.random.default_rng(4))
    errs = [max_abs(basic_identity_residual(ScalarField.sample(unit_square(h), f)), CORE) for h in STEPS]
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(errs))


def test_slack_linear_is_zero():
    s = key_inequality_slack(sample(1 / 32, "linear"), OperatorProfile(3, 1e-4))
    assert max_abs(s) <= 1e-12


def test_slack_rejects_window_violation():
    dom = GridDomain.box((0, 0, 0), (1, 1, 1), 1 / 8)
    u = ScalarField.sample(dom, catalog.scalar("quadratic3"))
    with pytest.raises(ValueError):
        key_inequality_slack(u, OperatorProfile(5, 0.1))


def test_slack_quadratic_p3():
    u = sample(1 / 128, "quadratic")
    s = key_inequality_slack(u, OperatorProfile(3, 1e-4))
    assert min_value(s) >= -1e-6


def test_p2_reduction_matches_identity_residual():
    prof = OperatorProfile(2, 0.1)
    c, C = slack_constants(prof, 2)
    name = "exp_sin"
    diffs = []
    for h in STEPS:
        u = sample(h, name)
        H = hessian(u)
        lap = H[0, 0] + H[1, 1]
        hs = np.einsum("ij...,ij...->...", H, H)
        predicted = (1 - c) * hs + (C - 1) * lap**2 - basic_identity_residual(u).values
        diffs.append(max_abs(ScalarField(u.domain, key_inequality_slack(u, prof).values - predicted), CORE))
    assert diffs[-1] < diffs[0]
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(diffs))


def test_slack_invariant_under_constant_shift():
    dom = unit_square(1 / 32)
    f = catalog.scalar("sin_cos")
    prof = OperatorProfile(3, 0.01, 0.5)
    s0 = key_inequality_slack(ScalarField.sample(dom, f), prof).values
    s1 = key_inequality_slack(ScalarField.sample(dom, lambda x, y: f(x, y) + 0.375), prof).values
    sel = dom.inside
    np.testing.assert_allclose(s1[sel], s0[sel], rtol=1e-9, atol=1e-9)


@pytest.mark.parametrize("p, beta", [(1.5, 0.0), (3.0, 0.5), (6.0, 2.0)])
def test_fd_slack_converges_to_exact(p, beta):
    prof = OperatorProfile(p, 1e-2, beta)
    f = catalog.scalar("exp_sin")
    consts = slack_constants(prof, 2)
    errs = []
    for h in STEPS:
        dom = unit_square(h)
        s = key_inequality_slack(ScalarField.sample(dom, f), prof, constants=consts).values
        x = dom.coords()
        exact = key_inequality_slack_exact(f.gradient(*x), f.hessian(*x), prof, consts)
        assert exact[region_mask(dom, CORE)].min() >= 0
        errs.append(np.max(np.abs(s - exact)[region_mask(dom, CORE)]))
    assert all(3.2 <= r <= 4.8 for r in convergence_ratios(errs))


def test_slack_3d():
    prof = OperatorProfile(4, 1e-2)
    dom = GridDomain.box((0, 0, 0), (1, 1, 1), 1 / 16)
    f = catalog.scalar("sin_cos_exp3")
    s = key_inequality_slack(ScalarField.sample(dom, f), prof)
    x = dom.coords()
    exact = key_inequality_slack_exact(f.gradient(*x), f.hessian(*x), prof, slack_constants(prof, 3))
    assert np.all(exact[dom.inside] >= 0)
    assert np.nanmax(np.abs(s.values - exact)[dom.inside]) < 0.1 * np.abs(exact[dom.inside]).max()


def test_young_split_examples():
    dom = unit_square(1 / 16)
    X = sample_vec(1 / 16, "exp_vec")
    zero = VectorField(dom, np.zeros((2,) + dom.shape))
    assert young_split_check(X, zero, 0.3)
    assert young_split_check(zero, X, 0.3)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 1.0))
def test_young_split_random_fields(seed, c):
    rng = np.random.default_rng(seed)
    dom = unit_square(1 / 16)
    f1, f2, f3, f4 = (catalog.random_trig_scalar(rng, degree=1) for _ in range(4))
    X = VectorField.sample(dom, lambda x, y: (f1(x, y), f2(x, y)))
    W = VectorField.sample(dom, lambda x, y: (f3(x, y), f4(x, y)))
    assert young_split_check(X, W, c)
    assert np.nanmin(young_split_slack(X, W, c).values) >= -1e-10
