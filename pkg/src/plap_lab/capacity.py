"""Relative capacity of boundary arcs, the curvature-capacity quantity K(r) and
the weighted trace inequality it controls.

Capacities are discrete Dirichlet energies on a uniform grid over the unit
ball around the centre: v = 0 outside the ball, v = 1 on nodes within one
spacing of E, five-point Laplacian solved by conjugate gradients, and the two
grid levels h, h/2 combined by Richardson extrapolation for first-order error.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.interpolate import RegularGridInterpolator
from scipy.sparse.linalg import cg
from scipy.spatial import cKDTree

from .boundary import BoundaryCurve
from .grid import GridDomain, ScalarField
from .solver import cell_gradients

CG_RTOL = 1e-10


@lru_cache(maxsize=8)
def _ball_grid(n: int):
    """Nodes of [-1, 1]^2 with spacing 1/n, interior-of-ball mask and edge lists."""
    ax = np.linspace(-1.0, 1.0, 2 * n + 1)
    x, y = np.meshgrid(ax, ax, indexing="ij")
    inside = x * x + y * y < 1.0
    idx = np.arange(x.size).reshape(x.shape)
    edges = np.concatenate(
        [np.stack([idx[:-1, :].ravel(), idx[1:, :].ravel()], 1), np.stack([idx[:, :-1].ravel(), idx[:, 1:].ravel()], 1)]
    )
    return np.stack([x.ravel(), y.ravel()], 1), inside.ravel(), edges


def discrete_capacity(arcs, center, h: float) -> float:
    """Dirichlet energy sum over grid edges of (v_i - v_j)^2 for the capacitary potential."""
    n = int(round(1 / h))
    if abs(n * h - 1) > 1e-12:
        raise ValueError("spacing must be 1/n")
    pts, inside, edges = _ball_grid(n)
    E = _arc_points(arcs, center)
    if len(E) == 0:
        return 0.0
    if np.any(np.linalg.norm(E, axis=1) >= 1.0):
        raise ValueError("the set E must lie inside the unit ball around the centre")
    fixed_one = np.zeros(len(pts), bool)
    near = cKDTree(E).query_ball_point(pts[inside], r=h * (1 + 1e-9), return_length=True) > 0
    fixed_one[np.flatnonzero(inside)[near]] = True
    free = inside & ~fixed_one
    v = fixed_one.astype(float)
    i, j = edges.T
    m = len(pts)
    A = sparse.coo_matrix((np.ones(len(edges)), (i, j)), shape=(m, m))
    A = (A + A.T).tocsr()
    deg = np.asarray(A.sum(axis=1)).ravel()
    L = sparse.diags(deg) - A
    fi = np.flatnonzero(free)
    L_ff = L[fi][:, fi]
    rhs = -(L[fi] @ v)
    if len(fi):
        sol, info = cg(L_ff, rhs, rtol=CG_RTOL, atol=0.0, maxiter=20 * len(fi))
        if info != 0:
            raise RuntimeError("conjugate gradients did not converge")
        v[fi] = sol
    return float(np.sum((v[i] - v[j]) ** 2))


def relative_capacity(arcs, center, h: float = 1 / 64) -> float:
    """Capacity of E relative to B_1(center), Richardson-extrapolated from h and h/2."""
    coarse = discrete_capacity(arcs, center, h)
    fine = discrete_capacity(arcs, center, h / 2)
    return 2 * fine - coarse


def _arc_points(arcs, center):
    if isinstance(arcs, np.ndarray):
        arcs = [arcs]
    parts = [np.asarray(a, float).reshape(-1, 2) for a in arcs if len(a)]
    if not parts:
        return np.empty((0, 2))
    return np.concatenate(parts) - np.asarray(center, float)


def densify(points: np.ndarray, spacing: float, closed: bool = False) -> np.ndarray:
    """Insert points along a polyline so consecutive points are at most ``spacing`` apart."""
    pts = np.asarray(points, float)
    if closed:
        pts = np.vstack([pts, pts[:1]])
    out = [pts[:1]]
    for a, b in zip(pts[:-1], pts[1:]):
        k = max(1, int(np.ceil(np.linalg.norm(b - a) / spacing)))
        t = np.arange(1, k + 1)[:, None] / k
        out.append(a + t * (b - a))
    res = np.concatenate(out)
    return res[:-1] if closed else res


# --- K(r) ---------------------------------------------------------------------


@dataclass(frozen=True)
class KEstimate:
    value: float
    center_index: int
    arc_length: float
    candidates: int


def arc_ladder(arc_resolution: float, longest: float = 2.0):
    """Dyadic lengths longest, longest/2, ... down to 4 arc_resolution."""
    out = []
    ell = longest
    while ell >= 4 * arc_resolution:
        out.append(ell)
        ell /= 2
    return out


def _centered_arc(curve: BoundaryCurve, index: int, length: float):
    k = int(round(length / (2 * curve.ds)))
    idx = (index + np.arange(-k, k + 1)) % curve.size
    return idx


def default_centers(curve: BoundaryCurve, count: int = 8):
    base = list(range(0, curve.size, max(1, curve.size // count)))[:count]
    peak = int(np.argmax(np.abs(curve.curvature)))
    return sorted(set(base + [peak]))


@dataclass(frozen=True)
class ArcCandidate:
    center_index: int
    length: float
    reach: float  # max distance of the arc from its centre point
    ratio: float  # int_E |B| ds / cap(E)


def arc_candidates(curve: BoundaryCurve, max_r: float, arc_resolution: float = 1 / 64, centers=None):
    """All candidate arcs reaching less than ``max_r`` from their centre, with their ratios."""
    centers = default_centers(curve) if centers is None else list(centers)
    out = []
    for c in centers:
        x0 = curve.points[c]
        for ell in arc_ladder(arc_resolution):
            idx = _centered_arc(curve, c, ell)
            if len(idx) < 2 or len(idx) > curve.size:
                continue
            arc = curve.points[idx]
            reach = float(np.max(np.linalg.norm(arc - x0, axis=1)))
            if reach >= max_r:
                continue
            weight = float(np.sum(np.abs(curve.curvature[idx])) * curve.ds)
            ratio = 0.0
            if weight > 0.0:
                ratio = weight / relative_capacity(densify(arc, arc_resolution / 4), x0, arc_resolution)
            out.append(ArcCandidate(c, len(idx) * curve.ds, reach, ratio))
    return out


def k_from_candidates(candidates, r: float) -> KEstimate:
    best = KEstimate(0.0, -1, 0.0, 0)
    count = 0
    for cand in candidates:
        if cand.reach >= r:
            continue
        count += 1
        if cand.ratio > best.value:
            best = KEstimate(cand.ratio, cand.center_index, cand.length, 0)
    return KEstimate(best.value, best.center_index, best.arc_length, count)


def k_quantity(curve: BoundaryCurve, r: float, arc_resolution: float = 1 / 64, centers=None) -> KEstimate:
    """Candidate-family lower bound for sup_E int_E |B| ds / cap(E) over E in B_r.

    Candidates: arcs centred at sampled boundary points with lengths from a
    fixed dyadic ladder, kept when the whole arc lies in B_r(centre). The
    ladder does not depend on r, so the families are nested in r and the
    estimate is monotone in r. Capacities use grid spacing ``arc_resolution``.
    """
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    return k_from_candidates(arc_candidates(curve, r, arc_resolution, centers), r)


def k_profile(curve: BoundaryCurve, radii, arc_resolution: float = 1 / 64, centers=None) -> dict:
    """k_quantity for several radii, sharing the capacity solves."""
    radii = list(radii)
    if not all(0 < r < 1 for r in radii):
        raise ValueError("radii must lie in (0, 1)")
    cands = arc_candidates(curve, max(radii), arc_resolution, centers)
    return {r: k_from_candidates(cands, r) for r in radii}


def _interpolate_on_curve(v: ScalarField, pts):
    dom = v.domain
    axes = dom.axes()
    # zero-weight corners may be inactive (points on grid lines), so interpolate
    # the activity indicator alongside and require full support
    support = RegularGridInterpolator(axes, dom.active.astype(float), bounds_error=True)(pts)
    if np.any(support < 1 - 1e-12):
        raise ValueError("the curve leaves the support of the grid field")
    return RegularGridInterpolator(axes, np.nan_to_num(v.values), bounds_error=True)(pts)


def weighted_trace_check(v: ScalarField, curve: BoundaryCurve, center, r: float, arc_resolution: float = 1 / 64, k_value: float | None = None):
    """(int_{curve in B_r} v^2 |B| ds, K(r) int_{Omega in B_r} |Dv|^2, ratio).

    ``v`` must vanish on active nodes outside B_r(center).
    """
    dom: GridDomain = v.domain
    dist = np.linalg.norm(dom.points() - np.asarray(center, float), axis=-1)
    outside = dom.active & (dist >= r)
    if np.any(np.abs(v.values[outside]) > 1e-12):
        raise ValueError("v is not supported in B_r(center)")
    in_ball = np.linalg.norm(curve.points - np.asarray(center, float), axis=1) < r
    vals = _interpolate_on_curve(v, curve.points[in_ball]) if in_ball.any() else np.empty(0)
    lhs = float(np.sum(vals**2 * np.abs(curve.curvature[in_ball])) * curve.ds)
    g, cells = cell_gradients(v)
    dirichlet = float(dom.h**2 * np.sum((g[0] ** 2 + g[1] ** 2)[cells]))
    if k_value is None:
        k_value = k_quantity(curve, r, arc_resolution).value
    rhs = k_value * dirichlet
    ratio = lhs / rhs if rhs > 0 else 0.0
    return lhs, rhs, ratio
