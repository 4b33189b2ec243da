"""Closed planar boundary curves, tangential calculus and the boundary flow identity.

Curves are sampled at arclength-uniform points and oriented counter-clockwise
with outward normal nu = (tau_y, -tau_x). The scalar second fundamental form
is taken as B = -kappa, kappa the usual counter-clockwise curvature, so that
tau' = B nu, nu' = -B tau, the unit circle has B = -1 and the integral of B
over any simple closed curve is -2 pi. |B| does not depend on the convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp
from scipy.spatial.distance import pdist

from .catalog import X1, X2, AnalyticScalar, AnalyticVector

MIN_SAMPLES = 16
T = sp.Symbol("t", real=True)


@dataclass(frozen=True)
class BoundaryCurve:
    name: str
    points: np.ndarray  # (N, 2)
    tangent: np.ndarray  # (N, 2)
    curvature: np.ndarray  # (N,) scalar second fundamental form B
    length: float
    level_set: AnalyticScalar | None = None  # vanishes on the curve, grows outward

    def __post_init__(self):
        if len(self.points) < MIN_SAMPLES:
            raise ValueError(f"need at least {MIN_SAMPLES} samples")

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def ds(self) -> float:
        return self.length / self.size

    @cached_property
    def normal(self) -> np.ndarray:
        return np.stack([self.tangent[:, 1], -self.tangent[:, 0]], axis=-1)

    @cached_property
    def arclength(self) -> np.ndarray:
        return self.ds * np.arange(self.size)

    @cached_property
    def diameter(self) -> float:
        return float(pdist(self.points).max())

    def lipschitz_estimate(self, window: float | None = None) -> float:
        """Max slope of the curve as a graph over each sample's tangent line.

        Neighbours spanning ``window`` of arclength (default length/16) are written
        in the (tau, nu) frame of the centre sample; ``inf`` if they fail to
        form a graph.
        """
        window = self.length / 16 if window is None else window
        k = max(1, int(round(window / (2 * self.ds))))
        offsets = np.arange(-k, k + 1)
        idx = (np.arange(self.size)[:, None] + offsets[None, :]) % self.size
        rel = self.points[idx] - self.points[:, None, :]
        xi = np.einsum("nkd,nd->nk", rel, self.tangent)
        eta = np.einsum("nkd,nd->nk", rel, self.normal)
        dxi, deta = np.diff(xi, axis=1), np.diff(eta, axis=1)
        if np.any(dxi <= 0):
            return float("inf")
        return float(np.max(np.abs(deta / dxi)))

    def function(self, values) -> "BoundaryFunction":
        return BoundaryFunction(self, np.asarray(values, float))

    def restrict(self, field: AnalyticVector) -> "BoundaryFunction":
        """Values and ambient Jacobians of an analytic vector field at the samples."""
        x, y = self.points.T
        return BoundaryFunction(self, field(x, y).T, field.jacobian(x, y).transpose(2, 0, 1))


@dataclass(frozen=True)
class BoundaryFunction:
    curve: BoundaryCurve
    values: np.ndarray  # (N,) or (N, 2)
    jacobian: np.ndarray | None = None  # (N, 2, 2), (DX)_ij = dX_i/dx_j

    def __post_init__(self):
        if self.values.shape[0] != self.curve.size:
            raise ValueError("one value per curve sample required")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("boundary values must be finite")

    def integral(self) -> float:
        """Trapezoid rule on the closed curve (equal weights ds)."""
        return float(np.sum(self.values, axis=0) * self.curve.ds)


# --- curve catalog -----------------------------------------------------------


def _spectral_antiderivative(speed: np.ndarray):
    """Return s(t) for t in [0, 2 pi) from equispaced samples of a periodic speed."""
    m = len(speed)
    coef = np.fft.rfft(speed) / m
    k = np.arange(len(coef))
    mean = coef[0].real

    def s(t):
        t = np.asarray(t, float)
        phase = np.exp(1j * np.outer(t, k[1:]))
        osc = 2 * np.real((phase - 1) @ (coef[1:] / (1j * k[1:])))
        return mean * t + osc

    return s, 2 * np.pi * mean


def parametric_curve(name, x_expr, y_expr, samples: int, level_set=None, quad_points: int = 4096) -> BoundaryCurve:
    """Curve t -> (x(t), y(t)), t in [0, 2 pi), counter-clockwise, resampled by arclength."""
    fx = sp.lambdify(T, [x_expr, y_expr], "numpy")
    d1 = sp.lambdify(T, [sp.diff(x_expr, T), sp.diff(y_expr, T)], "numpy")
    d2 = sp.lambdify(T, [sp.diff(x_expr, T, 2), sp.diff(y_expr, T, 2)], "numpy")

    def vec(f, t):
        return np.stack([np.broadcast_to(np.asarray(c, float), np.shape(t)) for c in f(t)], axis=-1)

    tq = 2 * np.pi * np.arange(quad_points) / quad_points
    speed = np.linalg.norm(vec(d1, tq), axis=-1)
    arc, length = _spectral_antiderivative(speed)
    target = length * np.arange(samples) / samples
    t = 2 * np.pi * np.arange(samples) / samples
    for _ in range(50):
        step = (arc(t) - target) / np.linalg.norm(vec(d1, t), axis=-1)
        t = t - step
        if np.max(np.abs(step)) < 1e-15:
            break
    p1, p2 = vec(d1, t), vec(d2, t)
    sp_ = np.linalg.norm(p1, axis=-1)
    kappa = (p1[:, 0] * p2[:, 1] - p1[:, 1] * p2[:, 0]) / sp_**3
    return BoundaryCurve(name, vec(fx, t), p1 / sp_[:, None], -kappa, float(length), level_set)


def circle(samples: int = 512, radius: float = 1.0, center=(0.0, 0.0)) -> BoundaryCurve:
    t = 2 * np.pi * np.arange(samples) / samples
    c = np.asarray(center, float)
    pts = c + radius * np.stack([np.cos(t), np.sin(t)], axis=-1)
    tangent = np.stack([-np.sin(t), np.cos(t)], axis=-1)
    level = AnalyticScalar("circle_level", ((X1 - c[0]) ** 2 + (X2 - c[1]) ** 2 - radius**2) / (2 * radius))
    return BoundaryCurve("circle", pts, tangent, np.full(samples, -1.0 / radius), 2 * np.pi * radius, level)


def ellipse(samples: int = 512, a: float = 2.0, b: float = 1.0) -> BoundaryCurve:
    level = AnalyticScalar("ellipse_level", (X1**2 / a**2 + X2**2 / b**2 - 1) / 2)
    return parametric_curve("ellipse", a * sp.cos(T), b * sp.sin(T), samples, level)


def bean(samples: int = 512) -> BoundaryCurve:
    """Nonconvex star-shaped curve with radius 1 + 0.3 cos 2t + 0.1 cos 3t."""
    radius = 1 + sp.Rational(3, 10) * sp.cos(2 * T) + sp.Rational(1, 10) * sp.cos(3 * T)
    theta = sp.atan2(X2, X1)
    level_expr = sp.sqrt(X1**2 + X2**2) - radius.subs(T, theta)
    level = AnalyticScalar("bean_level", sp.simplify(level_expr))
    return parametric_curve("bean", radius * sp.cos(T), radius * sp.sin(T), samples, level)


def rounded_square(samples: int = 512, rho: float = 0.25, half_side: float = 1.0) -> BoundaryCurve:
    """Square [-half_side, half_side]^2 with corners rounded to radius rho (C^{1,1})."""
    if not 0 < rho <= half_side:
        raise ValueError("corner radius must lie in (0, half_side]")
    flat = 2 * (half_side - rho)
    quarter = np.pi * rho / 2
    length = 4 * (flat + quarter)
    s = length * np.arange(samples) / samples
    pts = np.empty((samples, 2))
    tan = np.empty((samples, 2))
    curv = np.empty(samples)
    c = half_side - rho
    # start at (half_side, -c) going up the right side
    for side in range(4):
        rot = np.array([[np.cos(side * np.pi / 2), -np.sin(side * np.pi / 2)], [np.sin(side * np.pi / 2), np.cos(side * np.pi / 2)]])
        start = side * (flat + quarter)
        on_flat = (s >= start) & (s < start + flat)
        on_arc = (s >= start + flat) & (s < start + flat + quarter)
        u = s[on_flat] - start
        local = np.stack([np.full_like(u, half_side), -c + u], axis=-1)
        pts[on_flat] = local @ rot.T
        tan[on_flat] = np.array([0.0, 1.0]) @ rot.T
        curv[on_flat] = 0.0
        ang = (s[on_arc] - start - flat) / rho
        local = np.stack([c + rho * np.cos(ang), c + rho * np.sin(ang)], axis=-1)
        pts[on_arc] = local @ rot.T
        tan[on_arc] = np.stack([-np.sin(ang), np.cos(ang)], axis=-1) @ rot.T
        curv[on_arc] = -1.0 / rho
    return BoundaryCurve(f"rounded_square(rho={rho:g})", pts, tan, curv, float(length))


CURVES = {"circle": circle, "ellipse": ellipse, "bean": bean, "rounded_square": rounded_square}


def curve(name: str, samples: int = 512, **params) -> BoundaryCurve:
    if name not in CURVES:
        raise KeyError(f"unknown curve {name!r}; known: {sorted(CURVES)}")
    return CURVES[name](samples, **params)


# --- tangential calculus -----------------------------------------------------


def arclength_derivative(curve: BoundaryCurve, values: np.ndarray) -> np.ndarray:
    """Spectral d/ds of periodic samples (along axis 0)."""
    n = curve.size
    if n < MIN_SAMPLES:
        raise ValueError(f"need at least {MIN_SAMPLES} samples")
    k = np.fft.fftfreq(n, d=curve.ds) * 2 * np.pi
    if n % 2 == 0:
        k[n // 2] = 0.0
    spec = np.fft.fft(values, axis=0)
    shape = (n,) + (1,) * (np.ndim(values) - 1)
    return np.real(np.fft.ifft(1j * k.reshape(shape) * spec, axis=0))


def tangential_split(X: BoundaryFunction):
    """(X_T, <X, nu>) with X_T = X - <X, nu> nu."""
    nu = X.curve.normal
    x_nu = np.einsum("nd,nd->n", X.values, nu)
    return BoundaryFunction(X.curve, X.values - x_nu[:, None] * nu), BoundaryFunction(X.curve, x_nu)


def tangential_gradient(f: BoundaryFunction) -> BoundaryFunction:
    df = arclength_derivative(f.curve, f.values)
    return BoundaryFunction(f.curve, df[:, None] * f.curve.tangent)


def tangential_divergence(X: BoundaryFunction) -> BoundaryFunction:
    """div_T X = d/ds <X, tau> - B <X, nu>; differentiates only the scalar <X, tau>."""
    c = X.curve
    along = np.einsum("nd,nd->n", X.values, c.tangent)
    normal = np.einsum("nd,nd->n", X.values, c.normal)
    return BoundaryFunction(c, arclength_derivative(c, along) - c.curvature * normal)


def boundary_flow(X: BoundaryFunction) -> np.ndarray:
    """<DX X - div(X) X, nu> from the ambient Jacobian."""
    if X.jacobian is None:
        raise ValueError("the ambient Jacobian of X is required")
    J = X.jacobian
    div = np.trace(J, axis1=1, axis2=2)
    flux = np.einsum("nij,nj->ni", J, X.values) - div[:, None] * X.values
    return np.einsum("nd,nd->n", flux, X.curve.normal)


def grisvard_identity_residual(X: BoundaryFunction) -> BoundaryFunction:
    """Ambient flow minus its tangential expression

    <X_T, D_T <X,nu>> - <X,nu> div_T X_T + B(X_T, X_T) + <X,nu>^2 tr B.
    """
    flow = boundary_flow(X)
    c = X.curve
    XT, x_nu = tangential_split(X)
    grad_nu = tangential_gradient(x_nu).values
    div_t = tangential_divergence(XT).values
    B = c.curvature
    tangential = np.einsum("nd,nd->n", XT.values, c.tangent)
    rhs = (
        np.einsum("nd,nd->n", XT.values, grad_nu)
        - x_nu.values * div_t
        + B * tangential**2
        + x_nu.values**2 * B
    )
    return BoundaryFunction(c, flow - rhs)


def normal_flow_bound(X: BoundaryFunction, tol: float = 1e-10):
    """(flow, |B||X|^2) for a field normal to the curve; rejects tangential parts."""
    XT, _ = tangential_split(X)
    scale = np.max(np.linalg.norm(X.values, axis=-1))
    if np.max(np.linalg.norm(XT.values, axis=-1)) > tol * max(scale, 1e-300):
        raise ValueError("field has a tangential component on the curve")
    flow = boundary_flow(X)
    bound = np.abs(X.curve.curvature) * np.einsum("nd,nd->n", X.values, X.values)
    return flow, bound


def normal_field(level: AnalyticScalar, amplitude: AnalyticScalar, extra: tuple[AnalyticScalar, AnalyticScalar] | None = None, name="normal_field") -> AnalyticVector:
    """X = G grad F/|grad F| + F H: normal to the zero set of F wherever grad F != 0."""
    F = level.expr
    gx, gy = sp.diff(F, X1), sp.diff(F, X2)
    norm = sp.sqrt(gx**2 + gy**2)
    G = amplitude.expr
    comps = [G * gx / norm, G * gy / norm]
    if extra is not None:
        comps = [comps[0] + F * extra[0].expr, comps[1] + F * extra[1].expr]
    return AnalyticVector(name, tuple(comps))
