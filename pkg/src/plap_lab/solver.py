"""Regularized p-energy minimization on masked 2D grids, and the norms it feeds.

Discrete energy over the active cells (all four corners active):

    E(v) = h^2 * sum_cells (s + eps)^(p/2),
    s    = (dx_bottom^2 + dx_top^2 + dy_left^2 + dy_right^2) / 2,

with forward differences along the four cell edges. ``s`` is exact for affine
v, the energy is strictly convex in the inside values, and for p = 2 the
Euler-Lagrange equation is the five-point Laplacian (no checkerboard null
modes, unlike squaring the cell-averaged gradient).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .fields import _dot, grad_array, hessian_array, jacobian_array
from .grid import GridDomain, ScalarField
from .profiles import OperatorProfile

log = logging.getLogger(__name__)

ARMIJO = 1e-4
MAX_HALVINGS = 40
# predicted decrease below this fraction of |E| is treated as rounding noise
ROUNDING = 1e-12


class SolverError(RuntimeError):
    """Raised when the minimizer fails; carries the partial report."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


@dataclass
class DirichletProblem:
    domain: GridDomain
    profile: OperatorProfile
    phi: ScalarField

    def __post_init__(self):
        if self.domain.dim != 2:
            raise ValueError("the solver handles 2D domains only")
        if self.phi.domain is not self.domain:
            raise ValueError("phi must live on the problem grid")
        if not np.all(np.isfinite(self.phi.values[self.domain.active])):
            raise ValueError("phi must be finite on inside and boundary nodes")

    @classmethod
    def from_function(cls, domain, profile, func, boundary="extend"):
        """Sample ``func`` on the grid.

        ``boundary="extend"`` evaluates func at each boundary node itself
        (exact data for functions defined near the domain); ``"project"``
        evaluates it at the nearest point of the region boundary.
        """
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.broadcast_to(np.asarray(func(*domain.coords()), float), domain.shape).copy()
        if boundary == "project":
            if domain.region is None:
                raise ValueError("projection needs the continuous region")
            pts = domain.points()[domain.boundary]
            q = domain.region.project(pts)
            values[domain.boundary] = func(q[:, 0], q[:, 1])
        elif boundary != "extend":
            raise ValueError(f"unknown boundary mode {boundary!r}")
        return cls(domain, profile, ScalarField(domain, values))


@dataclass
class SolveReport:
    u: ScalarField
    energy_history: list = field(default_factory=list)
    gradient_norm: float = np.inf
    iterations: int = 0
    converged: bool = False
    fallback_steps: int = 0
    lagged_steps: int = 0

    @property
    def energy(self):
        return self.energy_history[-1]


# --- discrete energy ---------------------------------------------------------


@dataclass
class _Stencil:
    """Edge-difference operators over the active cells, acting on all nodes."""

    ops: list
    h: float
    ncells: int

    @classmethod
    def build(cls, domain: GridDomain):
        if domain.dim != 2:
            raise ValueError("energy is implemented for 2D grids")
        nx, ny = domain.shape
        cells = np.flatnonzero(domain.active_cells().ravel())
        ci, cj = np.unravel_index(cells, (nx - 1, ny - 1))
        n00 = ci * ny + cj
        n10 = n00 + ny
        n01 = n00 + 1
        n11 = n10 + 1
        m = len(cells)
        rows = np.concatenate([np.arange(m)] * 2)
        ops = []
        for plus, minus in ((n10, n00), (n11, n01), (n01, n00), (n11, n10)):
            data = np.concatenate([np.ones(m), -np.ones(m)]) / domain.h
            ops.append(sparse.csr_matrix((data, (rows, np.concatenate([plus, minus]))), shape=(m, nx * ny)))
        return cls(ops, domain.h, m)

    def diffs(self, flat):
        return [D @ flat for D in self.ops]


def _density(s, p, eps):
    base = s + eps
    f = base ** (p / 2)
    f1 = (p / 2) * base ** (p / 2 - 1)
    f2 = (p / 2) * (p / 2 - 1) * base ** (p / 2 - 2)
    return f, f1, f2


def _filled(v: ScalarField) -> np.ndarray:
    return np.where(v.domain.active, v.values, 0.0).ravel()


def energy(v: ScalarField, profile: OperatorProfile, eps: float | None = None) -> float:
    """Discrete regularized p-energy; ``eps`` overrides the profile's value (0 allowed)."""
    eps = profile.eps if eps is None else eps
    st = _Stencil.build(v.domain)
    return _energy_flat(st, _filled(v), profile.p, eps)


def _energy_flat(st, flat, p, eps):
    d = st.diffs(flat)
    s = 0.5 * sum(x * x for x in d)
    # exactly rounded sum: keeps energy comparisons meaningful down to one ulp
    return st.h**2 * math.fsum((s + eps) ** (p / 2))


def _grad_hess(st, flat, p, eps, free, want_hessian=True):
    d = st.diffs(flat)
    s = 0.5 * sum(x * x for x in d)
    _, f1, f2 = _density(s, p, eps)
    h2 = st.h**2
    grad = h2 * sum(D.T @ (f1 * x) for D, x in zip(st.ops, d))
    if not want_hessian:
        return grad[free], None
    ops = [D[:, free] for D in st.ops]
    J = sum(sparse.diags(x) @ D for D, x in zip(ops, d))
    W = sparse.diags(f1)
    H = sum(D.T @ W @ D for D in ops) + J.T @ sparse.diags(f2) @ J
    return grad[free], (h2 * H).tocsc()


def _harmonic_lift(st, phi_flat, free):
    ops = [D[:, free] for D in st.ops]
    L = sum(D.T @ D for D in ops).tocsc()
    rhs = -sum(D[:, free].T @ (D @ phi_flat) for D in st.ops)
    u = phi_flat.copy()
    u[free] += splu(L, permc_spec="MMD_AT_PLUS_A").solve(rhs)
    return u


def solve(
    problem: DirichletProblem,
    tol: float = 1e-8,
    max_iter: int = 200,
    initial: ScalarField | None = None,
    raise_on_failure: bool = True,
) -> SolveReport:
    """Damped Newton with Armijo backtracking on the discrete energy.

    Inside nodes are unknowns, boundary nodes stay at phi. Stops once
    max|dE/du_i| / h^2 <= tol (a pointwise residual of the Euler-Lagrange
    equation). Falls back to a diagonally scaled gradient step whenever the
    Newton direction fails to produce descent.
    """
    dom = problem.domain
    p, eps = problem.profile.p, problem.profile.eps
    st = _Stencil.build(dom)
    free = np.flatnonzero(dom.inside.ravel())
    phi_flat = _filled(problem.phi)
    if initial is None:
        u = _harmonic_lift(st, phi_flat, free)
    else:
        u = phi_flat.copy()
        u[free] = _filled(initial)[free]
    scale = dom.h**dom.dim
    E = _energy_flat(st, u, p, eps)
    report = SolveReport(u=None, energy_history=[E])
    for it in range(max_iter + 1):
        g, H = _grad_hess(st, u, p, eps, free)
        gnorm = float(np.max(np.abs(g))) / scale if g.size else 0.0
        report.gradient_norm = gnorm
        report.iterations = it
        if gnorm <= tol:
            report.converged = True
            break
        if it == max_iter:
            break
        step = None
        try:
            direction = -splu(H, permc_spec="MMD_AT_PLUS_A").solve(g)
            if np.all(np.isfinite(direction)) and g @ direction < 0:
                step = _line_search(st, u, free, direction, g, E, p, eps)
        except RuntimeError:
            step = None
        if p < 2:
            # damped Newton is slow for p < 2; the lagged-diffusion step minimises a
            # quadratic majorant of the (concave in |Du|^2) density, so it always descends
            lagged = _lagged_diffusion_step(st, u, free, g, E, p, eps)
            if lagged is not None and (step is None or lagged[1] < step[1]):
                report.lagged_steps += 1
                step = lagged
        if step is None:
            report.fallback_steps += 1
            direction = -g / H.diagonal()
            step = _line_search(st, u, free, direction, g, E, p, eps)
        if step is None:
            log.warning("line search stalled at gradient norm %.3e", gnorm)
            break
        u, E = step[:2]
        report.energy_history.append(E)
    report.u = ScalarField(dom, u.reshape(dom.shape))
    if not report.converged and raise_on_failure:
        raise SolverError(
            f"no convergence after {report.iterations} iterations (gradient norm {report.gradient_norm:.3e})",
            report,
        )
    return report


def _line_search(st, u, free, direction, g, E, p, eps):
    slope = float(g @ direction)
    if -slope <= ROUNDING * max(1.0, abs(E)):
        return _residual_search(st, u, free, direction, g, E, p, eps)
    alpha = 1.0
    for _ in range(MAX_HALVINGS):
        trial = u.copy()
        trial[free] += alpha * direction
        E_new = _energy_flat(st, trial, p, eps)
        if E_new <= E + ARMIJO * alpha * slope:
            return trial, E_new, alpha
        alpha *= 0.5
    return _residual_search(st, u, free, direction, g, E, p, eps)


def _residual_search(st, u, free, direction, g, E, p, eps):
    """Backtracking on the gradient norm once energy decreases drop below rounding.

    Steps are still required not to raise the energy.
    """
    g_max = np.max(np.abs(g))
    alpha = 1.0
    for _ in range(MAX_HALVINGS // 4):
        trial = u.copy()
        trial[free] += alpha * direction
        E_new = _energy_flat(st, trial, p, eps)
        if E_new <= E:
            g_new, _ = _grad_hess(st, trial, p, eps, free, want_hessian=False)
            if np.max(np.abs(g_new)) < g_max:
                return trial, E_new, alpha
        alpha *= 0.5
    return None


def _lagged_diffusion_step(st, u, free, g, E, p, eps):
    """Weighted-Laplacian solve with the current density slope as diffusion."""
    d = st.diffs(u)
    s = 0.5 * sum(x * x for x in d)
    _, f1, _ = _density(s, p, eps)
    W = sparse.diags(f1)
    ops = [D[:, free] for D in st.ops]
    L = (st.h**2 * sum(D.T @ W @ D for D in ops)).tocsc()
    try:
        direction = -splu(L, permc_spec="MMD_AT_PLUS_A").solve(g)
    except RuntimeError:
        return None
    if not np.all(np.isfinite(direction)) or g @ direction >= 0:
        return None
    return _line_search(st, u, free, direction, g, E, p, eps)


# --- norms -------------------------------------------------------------------


def cell_gradients(v: ScalarField):
    """Cell-centre gradients (averages of the two parallel edge differences) and cell mask."""
    dom = v.domain
    if dom.dim != 2:
        raise ValueError("cell gradients are implemented for 2D grids")
    x, h = v.values, dom.h
    gx = 0.5 * ((x[1:, :-1] - x[:-1, :-1]) + (x[1:, 1:] - x[:-1, 1:])) / h
    gy = 0.5 * ((x[:-1, 1:] - x[:-1, :-1]) + (x[1:, 1:] - x[1:, :-1])) / h
    return np.stack([gx, gy]), dom.active_cells()


@dataclass(frozen=True)
class Norms:
    grad_l2: float
    hess_l2: float
    grad_w12: float
    grad_lp: float
    excluded_area: float


def norms(u: ScalarField, profile: OperatorProfile | None = None, p: float | None = None) -> Norms:
    """L2 of Du and D^2u, W^{1,2} of Du and L^p of Du.

    Du is integrated by the midpoint rule over active cells; D^2u by the
    trapezoid rule over nodes whose Hessian stencil is fully supported, the
    area of the excluded nodes being reported. The exponent comes from
    ``profile`` (or ``p``; default 2).
    """
    if p is None:
        p = profile.p if profile is not None else 2.0
    dom = u.domain
    g, cells = cell_gradients(u)
    area = dom.h**2
    t = np.sqrt(_dot(g, g))[cells]
    grad_l2 = float(np.sqrt(area * np.sum(t * t)))
    grad_lp = float((area * np.sum(t**p)) ** (1 / p))
    H = hessian_array(u.values, dom.h)
    hs = np.einsum("ij...,ij...->...", H, H)
    w = dom.node_weights()
    ok = np.isfinite(hs) & (w > 0)
    hess_l2 = float(np.sqrt(np.sum(w[ok] * hs[ok])))
    excluded = float(np.sum(w[~ok & (w > 0)]))
    return Norms(grad_l2, hess_l2, float(np.hypot(grad_l2, hess_l2)), grad_lp, excluded)


def minimality_bound_check(report: SolveReport, phi: ScalarField, profile: OperatorProfile, tol: float = 1e-12) -> bool:
    """Minimizer energy does not exceed the energy of its boundary data."""
    e_u = energy(report.u, profile)
    e_phi = energy(phi, profile)
    return bool(e_u <= e_phi + tol * max(1.0, abs(e_phi)))


# --- local estimates ---------------------------------------------------------


def _ball_weights(dom: GridDomain, center, radius):
    dist = np.linalg.norm(dom.points() - np.asarray(center, float), axis=-1)
    return np.where(dist < radius, dom.node_weights(), 0.0), dist


def local_oscillation_check(u: ScalarField, profile: OperatorProfile, center, r: float):
    """(int_{B_r} |DV_b|^2, int_{B_2r} |V_b - mean_{B_2r} V_b|^2) by nodal quadrature."""
    dom = u.domain
    if r <= 0:
        raise ValueError("radius must be positive")
    dist = np.linalg.norm(dom.points() - np.asarray(center, float), axis=-1)
    big = dist < 2 * r + 2 * dom.h
    if not np.all(dom.inside[big]):
        raise ValueError("ball B_2r is not compactly contained in the domain")
    g = grad_array(u.values, dom.h)
    Vb = profile.b(np.sqrt(_dot(g, g))) * g
    DVb = jacobian_array(Vb, dom.h)
    w_small, _ = _ball_weights(dom, center, r)
    w_big, _ = _ball_weights(dom, center, 2 * r)
    lhs = float(np.sum(w_small * np.nan_to_num(np.einsum("ij...,ij...->...", DVb, DVb))))
    Vb0 = np.nan_to_num(Vb)
    mean = np.array([np.sum(w_big * c) for c in Vb0]) / np.sum(w_big)
    dev = Vb0 - mean[:, None, None]
    rhs = float(np.sum(w_big * _dot(dev, dev)))
    return lhs, rhs


def cutoff_profile(rho, r: float):
    """1 on [0, r], 0 on [2r, inf), C^1 cubic in between; |slope| <= 1.5/r."""
    s = np.clip((np.asarray(rho, float) - r) / r, 0.0, 1.0)
    return 1.0 - s * s * (3.0 - 2.0 * s)


def cutoff(domain: GridDomain, center, r: float) -> ScalarField:
    if r <= 0:
        raise ValueError("radius must be positive")
    rho = np.linalg.norm(domain.points() - np.asarray(center, float), axis=-1)
    return ScalarField(domain, cutoff_profile(rho, r))


def _sobolev_terms(v: ScalarField):
    dom = v.domain
    w = dom.node_weights()
    vals = np.nan_to_num(v.values)
    g, cells = cell_gradients(v)
    dv2 = float(dom.h**2 * np.sum(_dot(g, g)[cells]))
    return float(np.sum(w * vals * vals)), dv2, float(np.sum(w * np.abs(vals)))


def sobolev_probe_family(domain: GridDomain):
    """Constants, low cosine modes over the bounding box and cutoff bumps."""
    lo = domain.origin
    hi = lo + domain.h * (np.asarray(domain.shape) - 1)
    x, y = domain.coords()
    probes = [np.ones(domain.shape)]
    for k in range(4):
        for m in range(4):
            if k == m == 0:
                continue
            mode = np.cos(k * np.pi * (x - lo[0]) / (hi[0] - lo[0])) * np.cos(m * np.pi * (y - lo[1]) / (hi[1] - lo[1]))
            probes += [mode, 1.0 + mode]
    pts = domain.points()[domain.inside]
    span = float(np.min(hi - lo))
    for frac in (0.05, 0.1, 0.2):
        for c in pts[:: max(1, len(pts) // 7)]:
            probes.append(cutoff_profile(np.hypot(x - c[0], y - c[1]), frac * span))
    return [ScalarField(domain, p) for p in probes]


def calibrate_sobolev_constant(domain: GridDomain, sigma: float) -> float:
    """Largest (int v^2 - sigma int |Dv|^2)/(int |v|)^2 over the probe family."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    best = 0.0
    for v in sobolev_probe_family(domain):
        l2, dv2, l1 = _sobolev_terms(v)
        if l1 > 0:
            best = max(best, (l2 - sigma * dv2) / l1**2)
    return best


def sobolev_variant_check(v: ScalarField, sigma: float, constant: float | None = None):
    """(int v^2, sigma int |Dv|^2 + C (int |v|)^2) with C calibrated on the grid if not given."""
    if constant is None:
        constant = calibrate_sobolev_constant(v.domain, sigma)
    l2, dv2, l1 = _sobolev_terms(v)
    return l2, sigma * dv2 + constant * l1**2
