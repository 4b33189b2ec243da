"""Finite-difference calculus on grid fields and pointwise identity checks.

First derivatives are second-order central differences with second-order
one-sided stencils on the faces of the grid box. Second derivatives use the
compact three-point stencil (four-point one-sided on faces); mixed
derivatives average both nesting orders so Hessians are exactly symmetric.
Nodes without stencil support (next to ``OUTSIDE`` nodes) come out as NaN.

Jacobians follow (DX)_ij = dX_i/dx_j.
"""

from __future__ import annotations

import numpy as np

from .grid import Box, GridDomain, ScalarField, VectorField
from .profiles import OperatorProfile, cordes_window_ok, slack_constants, split_slack_constants, young_constant


def _d1(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    return np.gradient(values, h, axis=axis, edge_order=2)


def _d2(values: np.ndarray, h: float, axis: int) -> np.ndarray:
    v = np.moveaxis(values, axis, 0)
    out = np.empty_like(v)
    out[1:-1] = (v[2:] - 2 * v[1:-1] + v[:-2]) / h**2
    out[0] = (2 * v[0] - 5 * v[1] + 4 * v[2] - v[3]) / h**2
    out[-1] = (2 * v[-1] - 5 * v[-2] + 4 * v[-3] - v[-4]) / h**2
    return np.moveaxis(out, 0, axis)


def grad_array(u: np.ndarray, h: float) -> np.ndarray:
    return np.stack([_d1(u, h, k) for k in range(u.ndim)])


def hessian_array(u: np.ndarray, h: float) -> np.ndarray:
    d = u.ndim
    g = grad_array(u, h)
    H = np.empty((d, d) + u.shape)
    for i in range(d):
        H[i, i] = _d2(u, h, i)
        for j in range(i + 1, d):
            H[i, j] = H[j, i] = 0.5 * (_d1(g[i], h, j) + _d1(g[j], h, i))
    return H


def jacobian_array(V: np.ndarray, h: float) -> np.ndarray:
    d = V.shape[0]
    return np.stack([np.stack([_d1(V[i], h, j) for j in range(d)]) for i in range(d)])


def divergence_array(V: np.ndarray, h: float) -> np.ndarray:
    return sum(_d1(V[k], h, k) for k in range(V.shape[0]))


def _check_stencil(domain: GridDomain, depth: int = 1):
    if min(domain.shape) < 2 * depth + 3:
        raise ValueError("grid too coarse for the requested nested stencils")


def gradient(f: ScalarField) -> VectorField:
    _check_stencil(f.domain)
    return VectorField(f.domain, grad_array(f.values, f.domain.h))


def hessian(f: ScalarField) -> np.ndarray:
    """Matrix field of shape (d, d, *grid)."""
    _check_stencil(f.domain)
    return hessian_array(f.values, f.domain.h)


def divergence(V: VectorField) -> ScalarField:
    _check_stencil(V.domain)
    return ScalarField(V.domain, divergence_array(V.values, V.domain.h))


def jacobian(V: VectorField) -> np.ndarray:
    _check_stencil(V.domain)
    return jacobian_array(V.values, V.domain.h)


# --- pointwise algebra over matrix fields ------------------------------------


def _mv(M, v):
    return np.einsum("ij...,j...->i...", M, v)


def _dot(a, b):
    return np.einsum("i...,i...->...", a, b)


def _tr(M):
    return np.einsum("ii...->...", M)


def _hs(M, N=None):
    return np.einsum("ij...,ij...->...", M, M if N is None else N)


def _pair_t(M, N=None):
    """<M, N^T> = sum_ij M_ij N_ji."""
    return np.einsum("ij...,ji...->...", M, M if N is None else N)


# --- identities --------------------------------------------------------------


def basic_identity_residual(u: ScalarField) -> ScalarField:
    """|D^2u|^2 - div(D^2u Du - Du Lap u) - (Lap u)^2 with nested differences."""
    _check_stencil(u.domain, 2)
    h = u.domain.h
    g = grad_array(u.values, h)
    H = hessian_array(u.values, h)
    lap = _tr(H)
    flux = _mv(H, g) - lap * g
    res = _hs(H) - divergence_array(flux, h) - lap**2
    return ScalarField(u.domain, res)


def divergence_structure_residual(X: VectorField) -> ScalarField:
    """div((DX - tr(DX) I) X) - (<DX, DX^T> - tr(DX)^2)."""
    _check_stencil(X.domain, 2)
    h = X.domain.h
    J = jacobian_array(X.values, h)
    trJ = _tr(J)
    flux = _mv(J, X.values) - trJ * X.values
    res = divergence_array(flux, h) - (_pair_t(J) - trJ**2)
    return ScalarField(X.domain, res)


def infinity_laplacian_identity_residual(u: ScalarField) -> ScalarField:
    """Norm of (Du x Du) D^2u Du - Delta_inf(u) Du per node.

    The left side is assembled from the Hessian; Delta_inf u on the right is
    taken independently as <D(|Du|^2), Du>/2.
    """
    _check_stencil(u.domain, 2)
    h = u.domain.h
    g = grad_array(u.values, h)
    H = hessian_array(u.values, h)
    Hg = _mv(H, g)
    lhs = g * _dot(g, Hg)
    inf_lap = 0.5 * _dot(grad_array(_dot(g, g), h), g)
    res = np.sqrt(_dot(lhs - inf_lap * g, lhs - inf_lap * g))
    return ScalarField(u.domain, res)


def key_inequality_slack(
    u: ScalarField,
    profile: OperatorProfile,
    W: VectorField | None = None,
    constants: tuple[float, float] | None = None,
) -> ScalarField:
    """Right minus left side of the pointwise inequality for |D V_b|^2.

    Without ``W``:
        div((DV_b - tr(DV_b) I) V_b) + C (b/a)^2 (div V_a)^2 - c |DV_b|^2
    With ``W`` and X = V_b - W:
        div((DX - tr(DX) I) X) + C (|DW|^2 + (b/a)^2 (div V_a)^2) - c |DV_b|^2
    Default constants come from :func:`slack_constants` or
    :func:`split_slack_constants`.
    """
    n = u.domain.dim
    if not cordes_window_ok(profile, n):
        raise ValueError(f"profile {profile} is outside the Cordes window for n={n}")
    if constants is None:
        constants = slack_constants(profile, n) if W is None else split_slack_constants(profile, n)
    c, C = constants
    _check_stencil(u.domain, 2)
    h = u.domain.h
    g = grad_array(u.values, h)
    t = np.sqrt(_dot(g, g))
    a, b = profile.a(t), profile.b(t)
    Va, Vb = a * g, b * g
    DVb = jacobian_array(Vb, h)
    div_va = divergence_array(Va, h)
    weight = (b / a) ** 2 * div_va**2
    if W is None:
        X, DX = Vb, DVb
        extra = 0.0
    else:
        X = Vb - W.values
        DX = jacobian_array(X, h)
        extra = _hs(jacobian_array(W.values, h))
    trX = _tr(DX)
    div_term = divergence_array(_mv(DX, X) - trX * X, h)
    slack = div_term + C * (weight + extra) - c * _hs(DVb)
    return ScalarField(u.domain, slack)


def key_inequality_slack_exact(
    grad: np.ndarray,
    hess: np.ndarray,
    profile: OperatorProfile,
    constants: tuple[float, float],
    w_jacobian: np.ndarray | None = None,
) -> np.ndarray:
    """Slack of the same inequality from exact Du, D^2u (and DW) arrays.

    Uses DV_b = b B D^2u, div V_a = a <A, D^2u> and the divergence identity
    div((DX - tr(DX) I) X) = <DX, DX^T> - tr(DX)^2, so no third derivatives
    are needed. ``grad`` has shape (d, ...), ``hess`` and ``w_jacobian``
    (d, d, ...).
    """
    c, C = constants
    t2 = _dot(grad, grad)
    t = np.sqrt(t2)
    a, b = profile.a(t), profile.b(t)
    Hg = _mv(hess, grad)
    DVb = b * (hess + profile.beta / (t2 + profile.eps) * np.einsum("i...,j...->ij...", grad, Hg))
    pair_a = _tr(hess) + (profile.p - 2) / (t2 + profile.eps) * _dot(grad, Hg)
    weight = b**2 * pair_a**2
    if w_jacobian is None:
        DX, extra = DVb, 0.0
    else:
        DX, extra = DVb - w_jacobian, _hs(w_jacobian)
    return _pair_t(DX) - _tr(DX) ** 2 + C * (weight + extra) - c * _hs(DVb)


def young_split_slack(X: VectorField, W: VectorField, c: float) -> ScalarField:
    """(c/2)|D(X+W)|^2 + C|DW|^2 minus the cross terms; C = 2(n+1)(1+2/c)."""
    h = X.domain.h
    n = X.domain.dim
    DX = jacobian_array(X.values, h)
    DW = jacobian_array(W.values, h)
    lhs = 2 * (_pair_t(DX, DW) - _tr(DX) * _tr(DW)) + _pair_t(DW) - _tr(DW) ** 2
    rhs = 0.5 * c * _hs(DX + DW) + young_constant(n, c) * _hs(DW)
    return ScalarField(X.domain, rhs - lhs)


def young_split_check(X: VectorField, W: VectorField, c: float, tol: float = 1e-12) -> bool:
    s = young_split_slack(X, W, c).values
    ok = np.isfinite(s)
    scale = 1.0 + np.nanmax(np.abs(s)) if ok.any() else 1.0
    return bool(np.all(s[ok] >= -tol * scale))


# --- norms over sub-regions --------------------------------------------------


def region_mask(domain: GridDomain, region: Box | None = None) -> np.ndarray:
    """Finite-support inside nodes, optionally restricted to a sub-box."""
    sel = domain.inside.copy()
    if region is not None:
        pts = domain.points()
        lo, hi = np.asarray(region.lower), np.asarray(region.upper)
        eps = 1e-12
        sel &= np.all((pts >= lo - eps) & (pts <= hi + eps), axis=-1)
    return sel


def max_abs(f: ScalarField, region: Box | None = None) -> float:
    sel = region_mask(f.domain, region) & np.isfinite(f.values)
    return float(np.max(np.abs(f.values[sel]))) if sel.any() else 0.0


def min_value(f: ScalarField, region: Box | None = None) -> float:
    sel = region_mask(f.domain, region) & np.isfinite(f.values)
    return float(np.min(f.values[sel]))


def convergence_ratios(errors) -> list[float]:
    """Successive error ratios e(h)/e(h/2)."""
    e = list(errors)
    return [e[k] / e[k + 1] if e[k + 1] > 0 else float("inf") for k in range(len(e) - 1)]
