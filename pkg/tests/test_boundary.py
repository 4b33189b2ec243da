import numpy as np
import pytest
import sympy as sp
from scipy.special import ellipe

from plap_lab import boundary as bd
from plap_lab import catalog

SAMPLES = 512


@pytest.fixture(scope="module")
def curves():
    return {name: bd.curve(name, SAMPLES) for name in ("circle", "ellipse", "bean")}


def test_circle_geometry():
    c = bd.circle(64)
    np.testing.assert_allclose(c.normal, c.points, atol=1e-15)
    assert c.length == pytest.approx(2 * np.pi)
    assert np.sum(c.curvature) * c.ds == pytest.approx(-2 * np.pi)
    assert c.diameter == pytest.approx(2.0)


def test_circle_radius_and_centre():
    c = bd.circle(64, radius=0.5, center=(1.0, 2.0))
    np.testing.assert_allclose(np.linalg.norm(c.points - [1.0, 2.0], axis=1), 0.5)
    np.testing.assert_allclose(c.curvature, -2.0)


def test_ellipse_length_against_elliptic_integral():
    c = bd.ellipse(SAMPLES, a=2.0, b=1.0)
    assert c.length == pytest.approx(4 * 2.0 * ellipe(1 - 1 / 4), rel=1e-12)
    assert np.sum(c.curvature) * c.ds == pytest.approx(-2 * np.pi, rel=1e-10)


def test_ellipse_vertex_curvature():
    c = bd.ellipse(SAMPLES, a=2.0, b=1.0)
    # sample 0 sits at (a, 0) where the curvature is a/b^2
    np.testing.assert_allclose(c.points[0], [2.0, 0.0], atol=1e-12)
    assert c.curvature[0] == pytest.approx(-2.0, rel=1e-10)


def test_parametric_samples_equispaced_and_on_curve():
    c = bd.ellipse(256)
    chords = np.linalg.norm(np.diff(np.vstack([c.points, c.points[:1]]), axis=0), axis=1)
    assert np.max(np.abs(chords - c.ds)) < 1e-3 * c.ds
    x, y = c.points.T
    np.testing.assert_allclose(c.level_set(x, y), 0.0, atol=1e-12)


def test_bean_is_nonconvex(curves):
    assert np.any(curves["bean"].curvature > 0)
    assert np.sum(curves["bean"].curvature) * curves["bean"].ds == pytest.approx(-2 * np.pi, rel=1e-10)


def test_rounded_square_total_curvature():
    coarse = bd.rounded_square(512, rho=0.25)
    fine = bd.rounded_square(4096, rho=0.25)
    assert coarse.length == pytest.approx(4 * 1.5 + 2 * np.pi * 0.25)
    err = [abs(np.sum(c.curvature) * c.ds + 2 * np.pi) for c in (coarse, fine)]
    assert err[0] < 0.05 * 2 * np.pi
    assert err[1] < err[0]


def test_rounded_square_rejects_bad_radius():
    with pytest.raises(ValueError):
        bd.rounded_square(64, rho=0.0)
    with pytest.raises(ValueError):
        bd.rounded_square(64, rho=1.5)


def test_unknown_curve():
    with pytest.raises(KeyError):
        bd.curve("trefoil")


def test_too_few_samples_rejected():
    with pytest.raises(ValueError):
        bd.circle(8)


def test_lipschitz_of_circle():
    c = bd.circle(SAMPLES)
    # neighbours span an angle of pi/8 in total, so the steepest chord sits near pi/16
    assert c.lipschitz_estimate() == pytest.approx(np.tan(np.pi / 16), rel=0.05)


def test_lipschitz_grows_with_window():
    c = bd.ellipse(SAMPLES)
    assert c.lipschitz_estimate(c.length / 32) < c.lipschitz_estimate(c.length / 8)


def test_arclength_derivative_on_circle():
    c = bd.circle(128)
    s = c.arclength
    np.testing.assert_allclose(bd.arclength_derivative(c, np.cos(s)), -np.sin(s), atol=1e-12)
    np.testing.assert_allclose(bd.arclength_derivative(c, np.ones(128)), 0.0, atol=1e-13)


def test_tangential_split_examples():
    c = bd.circle(64)
    XT, x_nu = bd.tangential_split(c.restrict(catalog.vector("identity")))
    np.testing.assert_allclose(XT.values, 0.0, atol=1e-15)
    np.testing.assert_allclose(x_nu.values, 1.0)
    XT, x_nu = bd.tangential_split(c.function(np.tile([1.0, 0.0], (64, 1))))
    t = 2 * np.pi * np.arange(64) / 64
    np.testing.assert_allclose(x_nu.values, np.cos(t), atol=1e-15)
    np.testing.assert_allclose(np.einsum("nd,nd->n", XT.values, c.normal), 0.0, atol=1e-15)


def test_tangential_divergence_examples():
    c = bd.circle(64)
    # div_T of the tangent field is zero, of the position field is one
    np.testing.assert_allclose(bd.tangential_divergence(c.function(c.tangent)).values, 0.0, atol=1e-12)
    np.testing.assert_allclose(bd.tangential_divergence(c.function(c.points)).values, 1.0, atol=1e-12)


def test_tangential_gradient_is_tangent():
    c = bd.ellipse(128)
    g = bd.tangential_gradient(c.function(c.points[:, 0] ** 2)).values
    np.testing.assert_allclose(np.einsum("nd,nd->n", g, c.normal), 0.0, atol=1e-12)


def test_flow_of_position_field_on_circle():
    c = bd.circle(64)
    np.testing.assert_allclose(bd.boundary_flow(c.restrict(catalog.vector("identity"))), -1.0, atol=1e-14)


def test_flow_needs_jacobian():
    c = bd.circle(64)
    with pytest.raises(ValueError):
        bd.boundary_flow(c.function(c.points))


@pytest.mark.parametrize("name", ["identity", "constant"])
@pytest.mark.parametrize("cname", ["circle", "ellipse"])
def test_grisvard_exact_cases(curves, cname, name):
    r = bd.grisvard_identity_residual(curves[cname].restrict(catalog.vector(name))).values
    assert np.max(np.abs(r)) <= 1e-11


@pytest.mark.parametrize("name", sorted(catalog.VECTORS_2D))
@pytest.mark.parametrize("cname", ["circle", "ellipse", "bean"])
def test_grisvard_catalog(curves, cname, name):
    r = bd.grisvard_identity_residual(curves[cname].restrict(catalog.vector(name))).values
    assert np.max(np.abs(r)) <= 1e-6


def test_grisvard_residual_shrinks_with_samples():
    X = catalog.vector("exp_vec")
    coarse, fine = (np.max(np.abs(bd.grisvard_identity_residual(bd.ellipse(n).restrict(X)).values)) for n in (32, 256))
    assert fine < 1e-3 * coarse


@pytest.mark.parametrize("cname", ["circle", "ellipse"])
def test_normal_flow_nonpositive_on_convex_curves(curves, cname):
    rng = np.random.default_rng(5)
    cur = curves[cname]
    for _ in range(20):
        amp = catalog.random_trig_scalar(rng, degree=1)
        extra = (catalog.random_trig_scalar(rng, degree=1), catalog.random_trig_scalar(rng, degree=1))
        flow, bound = bd.normal_flow_bound(cur.restrict(bd.normal_field(cur.level_set, amp, extra)))
        scale = 1 + bound.max()
        assert flow.max() <= 1e-10 * scale
        assert np.all(np.abs(flow) <= bound + 1e-10 * scale)


def test_normal_flow_on_bean_follows_curvature(curves):
    cur = curves["bean"]
    one = catalog.AnalyticScalar("one", sp.Integer(1))
    flow, bound = bd.normal_flow_bound(cur.restrict(bd.normal_field(cur.level_set, one)))
    np.testing.assert_allclose(flow, cur.curvature, atol=1e-10)
    assert flow.max() > 0


def test_normal_flow_rejects_tangential_field(curves):
    with pytest.raises(ValueError):
        bd.normal_flow_bound(curves["circle"].restrict(catalog.vector("constant")))
