from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from plap_lab.matrix_cordes import cordes_ratio
from plap_lab.profiles import (
    OperatorProfile,
    cordes_window_ok,
    split_slack_constants,
    delta_bound,
    delta_max,
    slack_constants,
    pointwise_cordes_check,
    profile_from_text,
    profile_to_text,
    structure_matrices,
    theta,
    theta_bounds,
    young_constant,
)


def test_profile_validation():
    for args in [(1.0, 0.1), (2.0, 0.0), (2.0, 1.0), (2.0, 0.1, -1.0)]:
        with pytest.raises(ValueError):
            OperatorProfile(*args)


def test_theta_examples():
    assert theta(OperatorProfile(2, 0.3), np.linspace(0, 5, 7)) == pytest.approx(np.ones(7))
    prof = OperatorProfile(3, 0.01)
    assert theta(prof, 0.0) == 1.0
    assert theta(prof, 1e8) == pytest.approx(2.0, rel=1e-12)
    assert theta(OperatorProfile(1.5, 1e-4), 1.0) == pytest.approx((0.5 + 1e-4) / (1 + 1e-4), rel=1e-14)
    assert theta(OperatorProfile(1.5, 1e-4), 1.0) == pytest.approx(0.500050, abs=1e-6)
    with pytest.raises(ValueError):
        theta(prof, -1.0)


def test_theta_matches_ratio_of_varthetas():
    prof = OperatorProfile(3.3, 0.02, 0.4)
    t = np.linspace(0, 4, 50)
    ratio = (1 + prof.vartheta_a(t)) / (1 + prof.vartheta_b(t))
    np.testing.assert_allclose(theta(prof, t), ratio, rtol=1e-14)


def test_theta_bounds_examples():
    assert theta_bounds(OperatorProfile(2, 0.1)) == (1.0, 1.0)
    assert theta_bounds(OperatorProfile(4, 0.1)) == (1.0, 3.0)
    assert theta_bounds(OperatorProfile(1.2, 0.1)) == pytest.approx((0.2, 1.0))


def test_window_examples():
    assert cordes_window_ok(OperatorProfile(4, 0.1), 3)
    assert not cordes_window_ok(OperatorProfile(5, 0.1), 3)
    assert all(cordes_window_ok(OperatorProfile(p, 0.1), 2) for p in (1.01, 3, 50))


@pytest.mark.parametrize("n", [3, 4, 5, 6])
def test_window_matches_p_range(n):
    bound = 3 + Fraction(2, n - 2)
    for p in (1.5, 2.0, 2.9, float(bound) - 1e-9, float(bound), float(bound) + 1e-9, 7.0):
        assert cordes_window_ok(OperatorProfile(p, 0.1), n) == (Fraction(p) < bound)


@settings(max_examples=300, deadline=None)
@given(st.floats(1.01, 20), st.floats(-0.99, 10), st.integers(2, 8))
def test_window_forms_agree(p, beta, n):
    # the function raises if the two algebraic forms ever disagree
    cordes_window_ok(OperatorProfile(p, 0.1, beta), n)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.01, 10), st.floats(-0.99, 5), st.floats(1e-6, 0.9), st.floats(0, 1e3))
def test_vartheta_in_bounds(p, beta, eps, t):
    prof = OperatorProfile(p, eps, beta)
    assert prof.i_a - 1e-12 <= prof.vartheta_a(t) <= prof.s_a + 1e-12
    assert prof.i_b - 1e-12 <= prof.vartheta_b(t) <= prof.s_b + 1e-12


def test_delta_max_examples():
    assert delta_max(OperatorProfile(3, 0.1, 1.0), 4) == 1.0
    assert delta_bound(3.0, 3) == pytest.approx(3 / 11)
    assert delta_max(OperatorProfile(4, 0.1), 3) == pytest.approx(3 / 11, rel=1e-12)
    small = delta_max(OperatorProfile(50, 0.1), 2)
    assert 0 < small < 0.05
    with pytest.raises(ValueError):
        delta_max(OperatorProfile(5, 0.1), 3)


def test_delta_max_below_brute_force_minimum():
    # independent dense evaluation along t
    for p, beta, n in [(4, 0, 3), (1.3, 0, 2), (2.5, -0.4, 3), (6, 2, 2)]:
        prof = OperatorProfile(p, 0.05, beta)
        t = np.concatenate([np.linspace(0, 50, 200001), [1e6]])
        assert delta_max(prof, n) <= delta_bound(theta(prof, t), n).min() + 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1.01, 10), st.floats(-0.99, 5), st.integers(2, 5))
def test_delta_max_at_most_one(p, beta, n):
    prof = OperatorProfile(p, 0.1, beta)
    if not cordes_window_ok(prof, n):
        return
    d = delta_max(prof, n)
    assert 0 < d <= 1
    if abs((p - 1) - (beta + 1)) > 1e-6:
        assert d < 1


def test_structure_matrices_examples():
    prof = OperatorProfile(4, 1e-6)
    S = structure_matrices(prof, np.zeros(3))
    np.testing.assert_array_equal(S.A, np.eye(3))
    np.testing.assert_array_equal(S.B, np.eye(3))
    S = structure_matrices(OperatorProfile(2, 0.1, 0.5), [0.3, -2.0])
    np.testing.assert_array_equal(S.A, np.eye(2))
    S = structure_matrices(prof, [1.0, 0.0])
    np.testing.assert_allclose(S.A, np.diag([1 + 2 / (1 + 1e-6), 1.0]), rtol=1e-15)
    assert S.A[0, 0] == pytest.approx(3.0, abs=1e-5)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3), st.floats(1.1, 4.9), st.floats(-0.5, 2))
def test_structure_matrix_eigenpairs(g, p, beta):
    g = np.asarray(g)
    t = np.linalg.norm(g)
    if t < 1e-3:
        return
    prof = OperatorProfile(p, 0.05, beta)
    S = structure_matrices(prof, g)
    e = g / t
    np.testing.assert_allclose(S.A @ e, (1 + prof.vartheta_a(t)) * e, atol=1e-12)
    np.testing.assert_allclose(S.B @ e, (1 + prof.vartheta_b(t)) * e, atol=1e-12)
    perp = np.cross(e, [0.3, 0.5, 0.7])
    if np.linalg.norm(perp) > 1e-3:
        perp /= np.linalg.norm(perp)
        np.testing.assert_allclose(S.A @ perp, perp, atol=1e-12)
    th = theta(prof, t)
    assert cordes_ratio(S.A, S.B) == pytest.approx((2 + th) ** 2 / (2 + th**2) - 2, abs=1e-10)


def test_pointwise_check_examples():
    assert pointwise_cordes_check(OperatorProfile(2, 0.1), 3, 0.7)
    assert pointwise_cordes_check(OperatorProfile(4, 0.1), 3, np.array([0.0, 1.0, 1e3]))
    assert not pointwise_cordes_check(OperatorProfile(5, 0.1), 3, 1.0)


def test_constants_composition():
    prof = OperatorProfile(3, 0.01, 0.5)
    c, C = slack_constants(prof, 2)
    d = delta_max(prof, 2)
    assert C == pytest.approx(2 / d)
    assert c == pytest.approx(1 / (2 - 2 + 2 / d) / 1.5**2)
    c2, C2 = split_slack_constants(prof, 2)
    assert c2 == pytest.approx(c / 2)
    assert C2 == pytest.approx(max(C, young_constant(2, c)))


@pytest.mark.parametrize("n", [2, 3, 4])
def test_young_constant_covers_worst_case(n):
    # worst-case constant for the cross terms, derived via Cauchy-Schwarz
    for c in (1e-3, 0.1, 0.5, 1.0):
        assert young_constant(n, c) >= (n - 1) * (1 + 2 * (n - 1) / c)


def test_profile_text_roundtrip():
    prof = OperatorProfile(2.5, 1e-5, -0.25)
    text = profile_to_text(prof, 3)
    assert profile_from_text(text) == (prof, 3)
    assert profile_from_text("# comment\np = 3\neps=0.01\n") == (OperatorProfile(3, 0.01), 2)
    with pytest.raises(ValueError):
        profile_from_text("p=3\n")
    with pytest.raises(ValueError):
        profile_from_text("p 3\neps=0.1")
