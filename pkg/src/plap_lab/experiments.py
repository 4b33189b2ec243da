"""Experiment runners behind the command-line subcommands.

Each runner returns an :class:`ExperimentResult`: CSV tables (deterministic
given config and seed), optional SVG charts and a list of budgets. Wall-clock
times are reported as budgets only and never written to CSV.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from . import boundary as bd
from . import catalog
from .capacity import k_profile, k_quantity, relative_capacity, weighted_trace_check
from .config import ExperimentConfig, ProblemSpec, region_from_spec
from .fields import (
    basic_identity_residual,
    convergence_ratios,
    divergence_structure_residual,
    hessian,
    infinity_laplacian_identity_residual,
    key_inequality_slack,
    key_inequality_slack_exact,
    max_abs,
    young_split_check,
)
from .grid import Box, Disk, GridDomain, ScalarField, VectorField
from .matrix_cordes import (
    CordesCertificate,
    admissible_shift,
    basic_cordes_gap,
    frob,
    general_cordes_gap,
    random_spd,
    random_symmetric,
    transpose_product_bound,
)
from .output import line_chart, write_csv
from .profiles import OperatorProfile, split_slack_constants, cordes_window_ok, slack_constants
from .radial import radial_shooting
from .rearrangement import decreasing_rearrangement
from .solver import DirichletProblem, SolverError, minimality_bound_check, norms, solve

ORDER_WINDOW = (3.2, 4.8)
EXACT_TOL = 1e-12
GAP_TOL = 1e-9
CORE = Box((0.125, 0.125), (0.875, 0.875))
W_SCALE = 0.3


@dataclass(frozen=True)
class Budget:
    name: str
    measured: float
    limit: float
    upper: bool = True  # measured <= limit when True, measured >= limit otherwise

    @property
    def passed(self) -> bool:
        if not np.isfinite(self.measured):
            return False
        return self.measured <= self.limit if self.upper else self.measured >= self.limit

    def line(self) -> str:
        rel = "<=" if self.upper else ">="
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.measured:.6g} {rel} {self.limit:.6g}"


@dataclass
class ExperimentResult:
    name: str
    budgets: list = field(default_factory=list)
    tables: dict = field(default_factory=dict)  # kind -> (columns, rows)
    charts: dict = field(default_factory=dict)  # stem -> kwargs for line_chart

    @property
    def passed(self) -> bool:
        return all(b.passed for b in self.budgets)

    def budget(self, name: str) -> Budget:
        for b in self.budgets:
            if b.name == name:
                return b
        raise KeyError(name)

    def write(self, out_dir) -> list[Path]:
        out = Path(out_dir)
        paths = [write_csv(out / f"{kind}.csv", kind, cols, rows) for kind, (cols, rows) in self.tables.items()]
        paths += [line_chart(out / f"{stem}.svg", **kw) for stem, kw in self.charts.items()]
        return paths


def _streams(seed: int, count: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# --- Cordes sweeps -------------------------------------------------------------


def _admissible_pairs(rng, n, trials, delta, B=None):
    if delta >= 1.0:
        # only multiples of the basis reach delta = 1
        s = rng.standard_normal(trials)
        s = np.where(np.abs(s) < 1e-3, 1.0, s)
        basis = np.eye(n) if B is None else B
        return s[:, None, None] * basis
    return admissible_shift(random_symmetric(rng, n, trials), delta, B=B, rng=rng)


def run_verify_cordes(cfg: ExperimentConfig) -> ExperimentResult:
    t0 = time.perf_counter()
    trials = cfg.option("trials", 100000, int)
    deltas = cfg.option("deltas", (0.25, 0.5, 1.0), lambda s: tuple(float(x) for x in s.split(",")))
    dims = range(2, 7)
    general_dims = range(2, 5)
    rngs = iter(_streams(cfg.seed, len(dims) * len(deltas) + len(general_dims) * (len(deltas) + 1)))
    res = ExperimentResult("verify-cordes")
    rows = []
    worst_basic = np.inf
    worst_closed = 0.0
    for n in dims:
        for delta in deltas:
            rng = next(rngs)
            A = _admissible_pairs(rng, n, trials, delta)
            M = random_symmetric(rng, n, trials)
            cert = CordesCertificate.for_delta(n, delta)
            scaled = basic_cordes_gap(A, M, cert) / (1 + frob(M))
            if delta >= 1.0:
                # A = sI: gap = (1 - c)|M|^2 + (C/n - 1) tr(M)^2
                tr = np.trace(M, axis1=-2, axis2=-1)
                closed = ((1 - cert.c) * frob(M) + (cert.C / n - 1) * tr**2) / (1 + frob(M))
                worst_closed = max(worst_closed, float(np.max(np.abs(closed - scaled))))
            worst = float(scaled.min())
            worst_basic = min(worst_basic, worst)
            rows.append(["basic", n, delta, trials, worst, int(np.sum(scaled < -GAP_TOL))])
    t_basic = time.perf_counter() - t0

    t1 = time.perf_counter()
    worst_general = np.inf
    worst_transpose = -np.inf
    for n in general_dims:
        for delta in deltas:
            rng = next(rngs)
            B = random_spd(rng, n, trials)
            A = _admissible_pairs(rng, n, trials, delta, B)
            M = random_symmetric(rng, n, trials)
            cert = CordesCertificate.for_delta(n, delta)
            scaled = general_cordes_gap(A, B, M, cert) / (1 + frob(B @ M))
            worst = float(scaled.min())
            worst_general = min(worst_general, worst)
            rows.append(["general", n, delta, trials, worst, int(np.sum(scaled < -GAP_TOL))])
        rng = next(rngs)
        B = random_spd(rng, n, trials)
        M = random_symmetric(rng, n, trials)
        lhs, rhs = transpose_product_bound(B, M)
        excess = (lhs - rhs) / (1 + lhs)
        worst_transpose = max(worst_transpose, float(excess.max()))
        rows.append(["transpose", n, float("nan"), trials, float(-excess.max()), int(np.sum(excess > GAP_TOL))])
    t_general = time.perf_counter() - t1

    res.tables["cordes_sweeps"] = (["sweep", "n", "delta", "trials", "min_scaled_gap", "violations"], rows)
    res.budgets += [
        Budget("basic_gap_min_scaled", worst_basic, -GAP_TOL, upper=False),
        Budget("identity_family_closed_form_mismatch", worst_closed, 1e-12),
        Budget("general_gap_min_scaled", worst_general, -GAP_TOL, upper=False),
        Budget("transpose_bound_max_excess", worst_transpose, GAP_TOL),
        Budget("basic_sweep_seconds", t_basic, 30.0),
        Budget("general_sweep_seconds", t_general, 60.0),
    ]
    return res


# --- identity and slack suites ---------------------------------------------------


def _unit_square(h, dim=2):
    return GridDomain.box((0.0,) * dim, (1.0,) * dim, h)


def _order_budgets(res, label, errors):
    ratios = convergence_ratios(errors)
    lo, hi = ORDER_WINDOW
    res.budgets.append(Budget(f"{label}_order_min", min(ratios), lo, upper=False))
    res.budgets.append(Budget(f"{label}_order_max", max(ratios), hi))
    return ratios


def run_identity_suite(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult("verify-identities")
    t0 = time.perf_counter()
    steps = [1.0 / n for n in cfg.grid]
    if len(steps) < 2:
        raise ValueError("the refinement study needs at least two grid sizes")
    rows = []

    scalar_checks = {"basic": basic_identity_residual, "infinity": infinity_laplacian_identity_residual}
    exact_worst = 0.0
    for name in ("linear", "x1", "quadratic", "xy"):
        f = catalog.scalar(name)
        for h in steps:
            u = ScalarField.sample(_unit_square(h), f)
            for ident, fn in scalar_checks.items():
                r = max_abs(fn(u))
                exact_worst = max(exact_worst, r)
                rows.append([ident, name, h, "all", r])
    for name in ("identity", "constant"):
        X = catalog.vector(name)
        for h in steps:
            r = max_abs(divergence_structure_residual(VectorField.sample(_unit_square(h), X)))
            exact_worst = max(exact_worst, r)
            rows.append(["divergence", name, h, "all", r])
    res.budgets.append(Budget("exact_fields_max_residual", exact_worst, EXACT_TOL))

    smooth = {name: catalog.scalar(name) for name in catalog.TRANSCENDENTAL_SCALARS + ("poly4",)}
    smooth["random_trig"] = catalog.random_trig_scalar(np.random.default_rng(cfg.seed), name="random_trig")
    all_ratios = []
    for name, f in smooth.items():
        fields_h = [ScalarField.sample(_unit_square(h), f) for h in steps]
        for ident, fn in scalar_checks.items():
            errs = [max_abs(fn(u), CORE) for u in fields_h]
            rows += [[ident, name, h, "core", e] for h, e in zip(steps, errs)]
            all_ratios += convergence_ratios(errs)
    for name in catalog.TRANSCENDENTAL_VECTORS + ("quadratic_vec",):
        X = catalog.vector(name)
        errs = [max_abs(divergence_structure_residual(VectorField.sample(_unit_square(h), X)), CORE) for h in steps]
        rows += [["divergence", name, h, "core", e] for h, e in zip(steps, errs)]
        all_ratios += convergence_ratios(errs)
    res.budgets.append(Budget("identity_order_min", min(all_ratios), ORDER_WINDOW[0], upper=False))
    res.budgets.append(Budget("identity_order_max", max(all_ratios), ORDER_WINDOW[1]))

    # p = 2, beta = 0: the slack reduces to (1 - c)|H|^2 + (C - 1)(lap u)^2 - residual
    prof2 = OperatorProfile(2.0, 0.1)
    c2, C2 = slack_constants(prof2, 2)
    diffs = []
    for h in steps:
        u = ScalarField.sample(_unit_square(h), catalog.scalar("exp_sin"))
        H = hessian(u)
        lap = H[0, 0] + H[1, 1]
        predicted = (1 - c2) * np.einsum("ij...,ij...->...", H, H) + (C2 - 1) * lap**2 - basic_identity_residual(u).values
        diffs.append(max_abs(ScalarField(u.domain, key_inequality_slack(u, prof2).values - predicted), CORE))
    rows += [["p2_reduction", "exp_sin", h, "core", d] for h, d in zip(steps, diffs)]
    _order_budgets(res, "p2_reduction", diffs)

    # Young split on random trigonometric fields
    rng = np.random.default_rng([cfg.seed, 1])
    young_ok = 0
    for _ in range(10):
        f = [catalog.random_trig_scalar(rng, degree=1) for _ in range(4)]
        dom = _unit_square(1 / 16)
        X = VectorField.sample(dom, lambda x, y: (f[0](x, y), f[1](x, y)))
        W = VectorField.sample(dom, lambda x, y: (f[2](x, y), f[3](x, y)))
        young_ok += young_split_check(X, W, float(rng.uniform(1e-3, 1.0)))
    res.budgets.append(Budget("young_split_passing_fraction", young_ok / 10, 1.0, upper=False))
    res.tables["identities"] = (["identity", "field", "h", "region", "max_residual"], rows)
    res.budgets.append(Budget("identity_seconds", time.perf_counter() - t0, 60.0))
    res.charts["identity_convergence"] = {
        "series": {
            f"{ident}:{name}": ([r[2] for r in rows if r[0] == ident and r[1] == name], [r[4] for r in rows if r[0] == ident and r[1] == name])
            for ident, name in (("basic", "sinsin"), ("infinity", "exp_sin"), ("divergence", "exp_vec"))
        },
        "xlabel": "h",
        "ylabel": "max residual",
        "logx": True,
        "logy": True,
    }

    t1 = time.perf_counter()
    _slack_study(cfg, res)
    res.budgets.append(Budget("slack_seconds", time.perf_counter() - t1, 120.0))
    return res


def _slack_cases(p_values, n):
    seen = set()
    for p in p_values:
        for beta in (0.0, (p - 2) / 2):
            prof = OperatorProfile(p, 1e-2, beta)
            if (p, beta) in seen or not cordes_window_ok(prof, n):
                continue
            seen.add((p, beta))
            yield prof


def stencil_interior(dom):
    """Inside nodes whose nested (depth-two) stencil is central: no one-sided rows are reused."""
    return ndimage.binary_erosion(dom.inside, structure=np.ones((3,) * dom.dim, bool))


def _slack_errors(f, prof, h, dim, w_field=None):
    dom = _unit_square(h, dim)
    x = dom.coords()
    consts = slack_constants(prof, dim) if w_field is None else split_slack_constants(prof, dim)
    W = None if w_field is None else VectorField(dom, W_SCALE * w_field(*x))
    wj = None if w_field is None else W_SCALE * w_field.jacobian(*x)
    fd = key_inequality_slack(ScalarField.sample(dom, f), prof, W=W, constants=consts).values
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = key_inequality_slack_exact(f.gradient(*x), f.hessian(*x), prof, consts, wj)
    sel = stencil_interior(dom)
    return fd[sel], exact[sel]


def _slack_study(cfg, res):
    """fd slack >= -K h^2 on every interior node, K calibrated one level coarser."""
    rows = []
    h_cal, h_chk = 1.0 / cfg.grid[-2], 1.0 / cfg.grid[-1]
    grid3 = cfg.option("grid3d", (32, 64), lambda s: tuple(int(v) for v in s.split(",")))
    cases = []
    for prof in _slack_cases(cfg.p_values, 2):
        for name in catalog.SCALARS_2D:
            for w in (None, "exp_vec"):
                cases.append((2, prof, name, w, h_cal, h_chk))
    for name in catalog.SCALARS_3D:
        cases.append((3, OperatorProfile(4.0, 1e-2), name, None, 1.0 / grid3[0], 1.0 / grid3[1]))
    worst_margin = np.inf
    worst_exact = np.inf
    worst_calibration = 0.0
    for dim, prof, name, w, hc, hk in cases:
        f = catalog.scalar(name)
        wf = None if w is None else catalog.vector(w)
        fd_c, ex_c = _slack_errors(f, prof, hc, dim, wf)
        fd_k, ex_k = _slack_errors(f, prof, hk, dim, wf)
        K = 2.0 * float(np.max(np.abs(fd_c - ex_c))) / hc**2
        floor = GAP_TOL * (1.0 + float(np.max(np.abs(ex_k))))
        bound = -K * hk**2 - floor
        min_fd = float(np.min(fd_k))
        err_k = float(np.max(np.abs(fd_k - ex_k)))
        worst_margin = min(worst_margin, min_fd - bound)
        worst_exact = min(worst_exact, float(np.min(ex_k)))
        worst_calibration = max(worst_calibration, err_k - (K * hk**2 + floor))
        rows.append([dim, prof.p, prof.beta, name, w or "none", hk, K, min_fd, bound, float(np.min(ex_k)), err_k])
    res.tables["key_slack"] = (["n", "p", "beta", "field", "w", "h", "K", "min_slack", "bound", "min_exact_slack", "max_error"], rows)
    res.budgets += [
        Budget("slack_margin_min", worst_margin, 0.0, upper=False),
        Budget("exact_slack_min", worst_exact, 0.0, upper=False),
        Budget("calibration_excess_max", worst_calibration, 0.0),
    ]


# --- solver ------------------------------------------------------------------------


def _run_checks(report, problem):
    hist = np.asarray(report.energy_history)
    monotone = bool(np.all(np.diff(hist) <= 0))
    minimal = minimality_bound_check(report, problem.phi, problem.profile)
    dom = problem.domain
    phi_b = problem.phi.values[dom.boundary]
    u_in = report.u.values[dom.active]
    overshoot = float(max(np.max(u_in) - np.max(phi_b), np.min(phi_b) - np.min(u_in), 0.0))
    return monotone, minimal, overshoot


def run_solver_suite(cfg: ExperimentConfig) -> ExperimentResult:
    """Linear reproduction, annulus against the radial ODE, monotone energy and minimality."""
    res = ExperimentResult("solve")
    t0 = time.perf_counter()
    eps = cfg.eps_list[-1]
    rows = []
    all_monotone = all_minimal = True
    worst_overshoot = 0.0
    linear = catalog.scalar("linear")
    lin_err = 0.0
    rng = np.random.default_rng(cfg.seed)
    for region_name, region in (("disk", Disk()), ("square", Box((-1.0, -1.0), (1.0, 1.0)))):
        dom = GridDomain.from_region(region, 1.0 / cfg.grid[0])
        for p in cfg.p_values:
            prof = OperatorProfile(p, eps)
            pb = DirichletProblem.from_function(dom, prof, linear)
            start = pb.phi.values.copy()
            start[dom.inside] += 0.1 * rng.standard_normal(int(dom.inside.sum()))
            rep = solve(pb, initial=ScalarField(dom, start))
            err = float(np.max(np.abs(rep.u.values - pb.phi.values)[dom.active]))
            lin_err = max(lin_err, err)
            mono, mini, over = _run_checks(rep, pb)
            all_monotone &= mono
            all_minimal &= mini
            worst_overshoot = max(worst_overshoot, over)
            rows.append([f"linear_{region_name}", p, cfg.grid[0], rep.iterations, rep.fallback_steps, rep.lagged_steps, rep.gradient_norm, rep.energy, err, mono, mini])

    region = region_from_spec(cfg.domain)
    inner, outer = float(cfg.domain.get("inner", 0.25)), float(cfg.domain.get("outer", 1.0))
    finest_err = 0.0
    series = {}
    for p in cfg.p_values:
        prof = OperatorProfile(p, eps)
        f = catalog.scalar(cfg.phi, p)
        ref = radial_shooting(prof, inner, outer, float(f(inner, 0.0)), float(f(outer, 0.0)))
        scale = float(np.max(np.abs(ref.values)))
        errs = []
        for n in cfg.grid:
            dom = GridDomain.from_region(region, 1.0 / n)
            pb = DirichletProblem.from_function(dom, prof, f)
            rep = solve(pb)
            x, y = dom.coords()
            err = float(np.max(np.abs(rep.u.values - ref(np.hypot(x, y)))[dom.inside])) / scale
            errs.append(err)
            mono, mini, over = _run_checks(rep, pb)
            all_monotone &= mono
            all_minimal &= mini
            worst_overshoot = max(worst_overshoot, over)
            rows.append([f"annulus_{cfg.phi}", p, n, rep.iterations, rep.fallback_steps, rep.lagged_steps, rep.gradient_norm, rep.energy, err, mono, mini])
        finest_err = max(finest_err, errs[-1])
        series[f"p={p:g}"] = ([1.0 / n for n in cfg.grid], errs)

    res.tables["solver_runs"] = (
        ["case", "p", "grid", "iterations", "fallback_steps", "lagged_steps", "gradient_norm", "energy", "error", "energy_monotone", "minimal"],
        rows,
    )
    res.charts["annulus_error"] = {"series": series, "xlabel": "h", "ylabel": "relative max error", "logx": True, "logy": True}
    res.budgets += [
        Budget("linear_max_error", lin_err, 1e-10),
        Budget("annulus_relative_error_finest", finest_err, 0.01),
        Budget("energy_monotone_all_runs", float(all_monotone), 1.0, upper=False),
        Budget("minimality_all_runs", float(all_minimal), 1.0, upper=False),
        Budget("max_principle_overshoot", worst_overshoot, 1e-8),
        Budget("solver_seconds", time.perf_counter() - t0, 300.0),
    ]
    return res


def run_solve_problem(spec: ProblemSpec) -> ExperimentResult:
    """Solve one problem file; table of nodal values plus a summary row."""
    res = ExperimentResult("solve")
    t0 = time.perf_counter()
    prof = OperatorProfile(spec.p, spec.eps, spec.beta)
    dom = GridDomain.from_region(spec.region, 1.0 / spec.n)
    pb = DirichletProblem.from_function(dom, prof, catalog.scalar(spec.phi, spec.p), boundary=spec.boundary)
    rep = solve(pb, tol=spec.tol, max_iter=spec.max_iter)
    mono, mini, over = _run_checks(rep, pb)
    nu = norms(rep.u, prof)
    x, y = dom.coords()
    act = dom.active
    res.tables["solution"] = (["x", "y", "u"], [[float(a), float(b), float(c)] for a, b, c in zip(x[act], y[act], rep.u.values[act])])
    res.tables["solve_summary"] = (
        ["p", "eps", "beta", "grid", "iterations", "gradient_norm", "energy", "grad_l2", "hess_l2", "grad_lp", "excluded_area"],
        [[spec.p, spec.eps, spec.beta, spec.n, rep.iterations, rep.gradient_norm, rep.energy, nu.grad_l2, nu.hess_l2, nu.grad_lp, nu.excluded_area]],
    )
    res.budgets += [
        Budget("converged", float(rep.converged), 1.0, upper=False),
        Budget("energy_monotone", float(mono), 1.0, upper=False),
        Budget("minimality", float(mini), 1.0, upper=False),
        Budget("max_principle_overshoot", over, 1e-8),
        Budget("solve_seconds", time.perf_counter() - t0, 300.0),
    ]
    return res


# --- boundary suite ---------------------------------------------------------------------


def _random_step_function(rng, size):
    k = int(rng.integers(2, 11))
    cuts = np.sort(rng.choice(np.arange(1, size), k - 1, replace=False))
    return np.repeat(rng.standard_normal(k), np.diff(np.r_[0, cuts, size]))


def run_boundary_suite(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult("boundary-suite")
    t0 = time.perf_counter()
    samples = cfg.option("samples", 512, int)
    rng_fields, rng_steps = _streams(cfg.seed, 2)
    rows = []

    grisvard_worst = 0.0
    constant_worst = 0.0
    for cname in ("circle", "ellipse", "bean"):
        cur = bd.curve(cname, samples)
        for vname in catalog.VECTORS_2D:
            r = float(np.max(np.abs(bd.grisvard_identity_residual(cur.restrict(catalog.vector(vname))).values)))
            rows.append(["grisvard", cname, vname, samples, r])
            if cname != "bean":
                grisvard_worst = max(grisvard_worst, r)
            if vname == "constant":
                constant_worst = max(constant_worst, r)
    res.budgets.append(Budget("grisvard_residual_max", grisvard_worst, 1e-6))
    res.budgets.append(Budget("grisvard_constant_field_max", constant_worst, 1e-11))

    n_fields = cfg.option("normal_fields", 20, int)
    worst_sign = -np.inf
    worst_bound = -np.inf
    for cname in ("circle", "ellipse"):
        cur = bd.curve(cname, samples)
        for k in range(n_fields):
            amp = catalog.random_trig_scalar(rng_fields, degree=1, name=f"amplitude{k}")
            extra = (catalog.random_trig_scalar(rng_fields, degree=1), catalog.random_trig_scalar(rng_fields, degree=1))
            X = cur.restrict(bd.normal_field(cur.level_set, amp, extra))
            flow, bound = bd.normal_flow_bound(X)
            scale = 1.0 + float(np.max(bound))
            worst_sign = max(worst_sign, float(np.max(flow)) / scale)
            worst_bound = max(worst_bound, float(np.max(np.abs(flow) - bound)) / scale)
        rows.append(["normal_flow_max", cname, f"{n_fields} fields", samples, worst_sign])
    res.budgets.append(Budget("convex_normal_flow_max", worst_sign, 1e-10))
    res.budgets.append(Budget("normal_flow_bound_excess", worst_bound, 1e-10))

    bean = bd.curve("bean", samples)
    amp = catalog.random_trig_scalar(rng_fields, degree=1, name="bean_amplitude")
    X = bean.restrict(bd.normal_field(bean.level_set, amp))
    flow, _ = bd.normal_flow_bound(X)
    g2 = np.einsum("nd,nd->n", X.values, X.values)
    mismatch = float(np.max(np.abs(flow - bean.curvature * g2)) / (1 + np.max(g2)))
    rows.append(["bean_normal_flow_vs_curvature", "bean", "random", samples, mismatch])
    res.budgets.append(Budget("bean_flow_curvature_mismatch", mismatch, 1e-10))

    rho = 0.25
    ring = bd.circle(4096, radius=rho).points
    cap = relative_capacity(ring, (0.0, 0.0), 1 / 64)
    target = 2 * np.pi / np.log(1 / rho)
    cap_err = abs(cap - target) / target
    rows.append(["condenser_capacity", "circle", f"rho={rho}", 4096, cap])
    res.budgets.append(Budget("condenser_relative_error", cap_err, 0.03))

    n_steps = cfg.option("step_functions", 100, int)
    circ = bd.circle(samples)
    worst_rearr = 0.0
    for _ in range(n_steps):
        psi = circ.function(_random_step_function(rng_steps, samples))
        lhs = float(np.sum(np.abs(psi.values)) * circ.ds)
        worst_rearr = max(worst_rearr, abs(decreasing_rearrangement(psi).integral() - lhs))
    rows.append(["rearrangement_identity", "circle", f"{n_steps} step functions", samples, worst_rearr])
    res.budgets.append(Budget("rearrangement_identity_error", worst_rearr, 1e-10))

    radii = (0.4, 0.2, 0.1, 0.05)
    prof = k_profile(circ, radii)
    kvals = [prof[r].value for r in radii]
    rows += [["k_quantity", "circle", f"r={r}", samples, v] for r, v in zip(radii, kvals)]
    increase = max(b - a for a, b in zip(kvals, kvals[1:]))
    res.budgets.append(Budget("circle_k_max_increase_as_r_shrinks", increase, 0.0))

    rhos = (0.5, 0.25, 0.125)
    ksq = [k_quantity(bd.rounded_square(samples, rho=rq), 0.2).value for rq in rhos]
    rows += [["k_quantity", "rounded_square", f"rho={rq},r=0.2", samples, v] for rq, v in zip(rhos, ksq)]
    res.budgets.append(Budget("rounded_square_k_max_decrease_as_rho_shrinks", max(a - b for a, b in zip(ksq, ksq[1:])), 0.0))

    dom = GridDomain.from_region(Disk(), 1.0 / cfg.grid[0])
    ratios = []
    for r in (0.2, 0.4):
        centre = (1.0, 0.0)
        rho_n = np.linalg.norm(dom.points() - np.asarray(centre), axis=-1)
        v = ScalarField(dom, np.where(rho_n < r, np.cos(0.5 * np.pi * rho_n / r) ** 2, 0.0))
        _, _, ratio = weighted_trace_check(v, circ, centre, r, k_value=prof[r].value)
        ratios.append(ratio)
        rows.append(["weighted_trace_ratio", "circle", f"r={r}", samples, ratio])
    spread = max(ratios) / min(ratios) if min(ratios) > 0 else np.inf
    res.budgets.append(Budget("weighted_trace_ratio_spread", spread, 4.0))

    res.tables["boundary_suite"] = (["check", "curve", "case", "samples", "value"], rows)
    res.charts["k_profile"] = {"series": {"circle": (list(radii), kvals)}, "xlabel": "r", "ylabel": "K(r)", "logx": True}
    res.charts["rounded_square_k"] = {"series": {"r=0.2": (list(rhos), ksq)}, "xlabel": "corner radius", "ylabel": "K(0.2)", "logx": True}
    res.budgets.append(Budget("boundary_seconds", time.perf_counter() - t0, 300.0))
    return res


# --- global estimate -----------------------------------------------------------------------


@dataclass(frozen=True)
class EstimateRecord:
    domain: str
    p: float
    h: float
    eps: float
    du_w12: float
    dphi_w12: float
    dphi_lp: float
    ratio: float
    hessian_ratio: float
    runtime: float

    COLUMNS = ("domain", "p", "h", "eps", "du_w12", "dphi_w12", "dphi_lp", "ratio", "hessian_ratio")

    def row(self):
        return [getattr(self, c) for c in self.COLUMNS]


def estimate_series(region, region_name, phi, p, eps_list, n, beta=0.0):
    """Solve along the eps sequence (each solve warm-started from the previous one)."""
    dom = GridDomain.from_region(region, 1.0 / n)
    out = []
    init = None
    for eps in eps_list:
        prof = OperatorProfile(p, eps, beta)
        if not cordes_window_ok(prof, 2):
            raise ValueError(f"p={p} outside the admissible window")
        t = time.perf_counter()
        pb = DirichletProblem.from_function(dom, prof, phi)
        rep = solve(pb, initial=init)
        init = rep.u
        nu, nphi = norms(rep.u, prof), norms(pb.phi, prof)
        ratio = nu.grad_w12 / (nphi.grad_w12 + nphi.grad_lp + eps)
        # undefined for affine data, whose discrete Hessian vanishes
        hess_ratio = (nu.hess_l2 / nphi.hess_l2) ** 2 if nphi.hess_l2 > 0 else float("nan")
        out.append(EstimateRecord(region_name, p, 1.0 / n, eps, nu.grad_w12, nphi.grad_w12, nphi.grad_lp, ratio, hess_ratio, time.perf_counter() - t))
    return out


def _spread(values):
    values = np.asarray(values)
    return float((values.max() - values.min()) / values.min())


def run_global_estimate(cfg: ExperimentConfig) -> ExperimentResult:
    res = ExperimentResult("global-estimate")
    t0 = time.perf_counter()
    phi = catalog.scalar(cfg.phi)
    main = region_from_spec(cfg.domain)
    square = Box((-0.5, -0.5), (0.5, 0.5))
    records = []
    worst = 0.0
    worst_square = 0.0
    series = {}
    for n in cfg.grid:
        for p in cfg.p_values:
            try:
                recs = estimate_series(main, cfg.domain.get("type", "disk"), phi, p, cfg.eps_list, n, cfg.beta)
                sq = estimate_series(square, "square", phi, p, cfg.eps_list, n, cfg.beta)
            except SolverError as exc:
                print(f"solver failure at p={p}, n={n}: {exc}; gradient norm {exc.report.gradient_norm:.3g}")
                raise
            records += recs + sq
            worst = max(worst, _spread([r.ratio for r in recs]))
            worst_square = max(worst_square, _spread([r.hessian_ratio for r in sq]), _spread([r.ratio for r in sq]))
            if n == cfg.grid[-1]:
                series[f"p={p:g}"] = ([r.eps for r in recs], [r.ratio for r in recs])
    trivial = estimate_series(Disk(), "disk", catalog.scalar("x1"), cfg.p_values[0], cfg.eps_list[:1], cfg.grid[0])
    records += trivial
    res.tables["estimates"] = (list(EstimateRecord.COLUMNS), [r.row() for r in records])
    res.charts["ratio_vs_eps"] = {"series": series, "xlabel": "eps", "ylabel": "ratio", "logx": True}
    res.budgets += [
        Budget("ratio_spread_across_eps", worst, 0.10),
        Budget("convex_square_spread_across_eps", worst_square, 0.10),
        Budget("trivial_linear_ratio", trivial[0].ratio, 1.0),
        Budget("global_seconds", time.perf_counter() - t0, 600.0),
    ]
    for r in records:
        print(f"  {r.domain:7s} p={r.p:<4g} h={r.h:.5g} eps={r.eps:.0e} ratio={r.ratio:.6f} hessian_ratio={r.hessian_ratio:.4f} ({r.runtime:.1f}s)")
    return res


RUNNERS = {
    "verify-cordes": run_verify_cordes,
    "verify-identities": run_identity_suite,
    "solve": run_solver_suite,
    "boundary-suite": run_boundary_suite,
    "global-estimate": run_global_estimate,
}
