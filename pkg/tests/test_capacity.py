import numpy as np
import pytest

from plap_lab import boundary as bd
from plap_lab.capacity import (
    arc_ladder,
    densify,
    discrete_capacity,
    k_profile,
    k_quantity,
    relative_capacity,
    weighted_trace_check,
)
from plap_lab.grid import Disk, GridDomain, ScalarField


def ring(rho, samples=2048):
    return bd.circle(samples, radius=rho).points


def test_empty_set_has_zero_capacity():
    assert discrete_capacity([], (0.0, 0.0), 1 / 16) == 0.0
    assert relative_capacity(np.empty((0, 2)), (0.0, 0.0), 1 / 16) == 0.0


@pytest.mark.parametrize("rho", [0.25, 0.5])
def test_concentric_condenser(rho):
    # capacity of the circle of radius rho relative to the unit disk is 2 pi / log(1/rho)
    target = 2 * np.pi / np.log(1 / rho)
    assert relative_capacity(ring(rho), (0.0, 0.0), 1 / 64) == pytest.approx(target, rel=0.03)


def test_richardson_improves_on_raw_levels():
    target = 2 * np.pi / np.log(4)
    raw = discrete_capacity(ring(0.25), (0.0, 0.0), 1 / 128)
    assert abs(relative_capacity(ring(0.25), (0.0, 0.0), 1 / 64) - target) < abs(raw - target)


def test_capacity_monotone_in_the_set():
    arc = ring(0.3)
    small, large = arc[:300], arc[:900]
    assert discrete_capacity(small, (0.0, 0.0), 1 / 32) <= discrete_capacity(large, (0.0, 0.0), 1 / 32)
    assert discrete_capacity(large, (0.0, 0.0), 1 / 32) <= discrete_capacity(arc, (0.0, 0.0), 1 / 32)


def test_capacity_is_translation_invariant():
    arc = ring(0.3)[:500]
    shift = np.array([2.0, -1.0])
    a = discrete_capacity(arc, (0.0, 0.0), 1 / 32)
    b = discrete_capacity(arc + shift, shift, 1 / 32)
    assert b == pytest.approx(a, rel=1e-9)


def test_capacity_rejects_bad_input():
    with pytest.raises(ValueError):
        discrete_capacity(ring(1.2), (0.0, 0.0), 1 / 16)
    with pytest.raises(ValueError):
        discrete_capacity(ring(0.5), (0.0, 0.0), 0.3)


def test_densify_spacing():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    out = densify(pts, 0.1)
    steps = np.linalg.norm(np.diff(out, axis=0), axis=1)
    assert steps.max() <= 0.1 + 1e-12
    np.testing.assert_allclose(out[[0, -1]], pts[[0, -1]])
    closed = densify(pts, 0.1, closed=True)
    assert np.linalg.norm(closed[-1] - pts[0]) <= 0.1 + 1e-12


def test_arc_ladder():
    assert arc_ladder(1 / 8) == [2.0, 1.0, 0.5]
    assert arc_ladder(1 / 64)[-1] == pytest.approx(1 / 16)


def test_k_on_straight_pieces_is_zero():
    sq = bd.rounded_square(512, rho=0.25)
    mid = int(np.argmin(np.linalg.norm(sq.points - [1.0, 0.0], axis=1)))
    assert k_quantity(sq, 0.3, centers=[mid]).value == 0.0
    # sample 0 starts the flat side right after a corner
    assert k_quantity(sq, 0.3, centers=[0]).value > 0.0


def test_k_rejects_bad_radius():
    with pytest.raises(ValueError):
        k_quantity(bd.circle(256), 1.0)
    with pytest.raises(ValueError):
        k_profile(bd.circle(256), [0.2, 0.0])


def test_k_on_circle_nonincreasing_as_r_shrinks():
    # the circle is rotation invariant, so one centre suffices
    radii = (0.4, 0.2, 0.1, 0.05)
    prof = k_profile(bd.circle(512), radii, centers=[0])
    values = [prof[r].value for r in radii]
    assert all(b <= a for a, b in zip(values, values[1:]))
    assert values[-1] > 0


def test_k_profile_matches_single_radius():
    c = bd.circle(512)
    assert k_profile(c, [0.3, 0.15], centers=[0])[0.15].value == pytest.approx(k_quantity(c, 0.15, centers=[0]).value)


def test_k_grows_as_corners_sharpen():
    values = []
    for rho in (0.5, 0.125):
        sq = bd.rounded_square(512, rho=rho)
        corner = (1 - rho + rho / np.sqrt(2)) * np.ones(2)
        mid = int(np.argmin(np.linalg.norm(sq.points - corner, axis=1)))
        values.append(k_quantity(sq, 0.2, centers=[mid]).value)
    assert values[1] > values[0]


@pytest.fixture(scope="module")
def disk_grid():
    return GridDomain.from_region(Disk(), 1 / 64)


def bump(dom, centre, r):
    rho = np.linalg.norm(dom.points() - np.asarray(centre), axis=-1)
    return ScalarField(dom, np.where(rho < r, np.cos(0.5 * np.pi * rho / r) ** 2, 0.0))


def test_weighted_trace_ratio_finite(disk_grid):
    lhs, rhs, ratio = weighted_trace_check(bump(disk_grid, (1.0, 0.0), 0.3), bd.circle(512), (1.0, 0.0), 0.3, k_value=0.15)
    assert lhs > 0 and rhs > 0
    assert ratio == pytest.approx(lhs / rhs)


def test_weighted_trace_lhs_by_hand(disk_grid):
    # on the unit circle |B| = 1 and the bump is sampled exactly at curve points on grid nodes
    c = bd.circle(512)
    lhs, _, _ = weighted_trace_check(bump(disk_grid, (1.0, 0.0), 0.3), c, (1.0, 0.0), 0.3, k_value=1.0)
    rho = np.linalg.norm(c.points - [1.0, 0.0], axis=1)
    exact = np.sum(np.where(rho < 0.3, np.cos(0.5 * np.pi * rho / 0.3) ** 4, 0.0)) * c.ds
    assert lhs == pytest.approx(exact, rel=0.02)


def test_weighted_trace_rejects_wide_support(disk_grid):
    v = bump(disk_grid, (1.0, 0.0), 0.5)
    with pytest.raises(ValueError):
        weighted_trace_check(v, bd.circle(512), (1.0, 0.0), 0.3, k_value=0.1)
