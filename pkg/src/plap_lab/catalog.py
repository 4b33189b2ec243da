"""Named analytic scalar and vector fields with exact derivatives.

Expressions are written once in sympy; gradients, Hessians and Jacobians are
differentiated symbolically and compiled to numpy with ``lambdify``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import sympy as sp

X1, X2, X3 = sp.symbols("x1 x2 x3", real=True)
SYMS = (X1, X2, X3)


def _bcast(out, shape):
    if isinstance(out, (list, tuple)):
        return np.stack([_bcast(o, shape) for o in out])
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


@dataclass(frozen=True)
class AnalyticScalar:
    name: str
    expr: sp.Expr
    dim: int = 2

    @cached_property
    def _syms(self):
        return SYMS[: self.dim]

    @cached_property
    def _value(self):
        return sp.lambdify(self._syms, self.expr, modules="numpy")

    @cached_property
    def _grad(self):
        return sp.lambdify(self._syms, [sp.diff(self.expr, s) for s in self._syms], modules="numpy")

    @cached_property
    def _hess(self):
        rows = [[sp.diff(self.expr, a, b) for b in self._syms] for a in self._syms]
        return sp.lambdify(self._syms, rows, modules="numpy")

    def __call__(self, *xs):
        return _bcast(self._value(*xs), np.broadcast(*xs).shape)

    def gradient(self, *xs):
        """Array of shape (d, *x.shape)."""
        return _bcast(self._grad(*xs), np.broadcast(*xs).shape)

    def hessian(self, *xs):
        """Array of shape (d, d, *x.shape)."""
        return _bcast(self._hess(*xs), np.broadcast(*xs).shape)

    def derivative_field(self) -> "AnalyticVector":
        return AnalyticVector(f"D{self.name}", tuple(sp.diff(self.expr, s) for s in self._syms), self.dim)


@dataclass(frozen=True)
class AnalyticVector:
    name: str
    exprs: tuple
    dim: int = 2

    @cached_property
    def _syms(self):
        return SYMS[: self.dim]

    @cached_property
    def _value(self):
        return sp.lambdify(self._syms, list(self.exprs), modules="numpy")

    @cached_property
    def _jac(self):
        rows = [[sp.diff(e, s) for s in self._syms] for e in self.exprs]
        return sp.lambdify(self._syms, rows, modules="numpy")

    def __call__(self, *xs):
        return _bcast(self._value(*xs), np.broadcast(*xs).shape)

    def jacobian(self, *xs):
        """(DX)_ij = dX_i/dx_j, shape (d, d, *x.shape)."""
        return _bcast(self._jac(*xs), np.broadcast(*xs).shape)


def _r2():
    return X1**2 + X2**2


SCALARS_2D = {
    # dyadic coefficients keep grid samples exact in floating point
    "linear": AnalyticScalar("linear", sp.Rational(1, 2) + sp.Rational(1, 4) * X1 - sp.Rational(3, 4) * X2),
    "x1": AnalyticScalar("x1", X1),
    "quadratic": AnalyticScalar("quadratic", _r2() / 2),
    "xy": AnalyticScalar("xy", X1 * X2),
    "sin_cos": AnalyticScalar("sin_cos", sp.sin(X1) * sp.cos(X2)),
    "exp_sin": AnalyticScalar("exp_sin", sp.exp(X1) * sp.sin(X2)),
    "poly4": AnalyticScalar(
        "poly4",
        sp.Rational(3, 10) * X1**4 - sp.Rational(1, 2) * X1**3 * X2 + sp.Rational(7, 10) * X1**2 * X2**2
        + sp.Rational(1, 5) * X1 * X2**3 - sp.Rational(2, 5) * X2**4 + X1**2 - X2,
    ),
    "sinsin": AnalyticScalar("sinsin", sp.sin(sp.pi * X1) * sp.sin(sp.pi * X2)),
}

SCALARS_3D = {
    "linear3": AnalyticScalar("linear3", 1 + X1 - 2 * X2 + sp.Rational(1, 2) * X3, 3),
    "quadratic3": AnalyticScalar("quadratic3", (X1**2 + X2**2 + X3**2) / 2, 3),
    "sin_cos_exp3": AnalyticScalar("sin_cos_exp3", sp.sin(X1) * sp.cos(X2) * sp.exp(X3 / 2), 3),
    "poly3": AnalyticScalar("poly3", X1 * X2 * X3 + X1**2 - X2 * X3**2 + X3, 3),
}

VECTORS_2D = {
    "identity": AnalyticVector("identity", (X1, X2)),
    "constant": AnalyticVector("constant", (sp.Rational(13, 10), -sp.Rational(2, 5))),
    "sin_cos": AnalyticVector("sin_cos", (sp.sin(X2), sp.cos(X1))),
    "quadratic_vec": AnalyticVector("quadratic_vec", (X1**2 - X2, X1 * X2)),
    "exp_vec": AnalyticVector("exp_vec", (sp.exp(X1) * sp.cos(X2), sp.sin(X1 + 2 * X2))),
    "mixed_vec": AnalyticVector("mixed_vec", (sp.sin(X1 * X2), sp.exp(X2) * sp.cos(X1))),
}

TRANSCENDENTAL_SCALARS = ("sin_cos", "exp_sin", "sinsin")
TRANSCENDENTAL_VECTORS = ("exp_vec", "mixed_vec")


def radial_power(p: float) -> AnalyticScalar:
    """The radial p-harmonic profile r^((p-2)/(p-1)) in the plane (p != 2)."""
    if p == 2:
        raise ValueError("use log r for p = 2")
    k = sp.nsimplify(p - 2) / sp.nsimplify(p - 1)
    return AnalyticScalar(f"radial_p{p:g}", _r2() ** (k / 2))


def scalar(name: str, p: float | None = None) -> AnalyticScalar:
    """Look up a named scalar field; ``radial`` needs the exponent p."""
    if name == "radial":
        if p is None:
            raise ValueError("radial profile needs p")
        return radial_power(p)
    for table in (SCALARS_2D, SCALARS_3D):
        if name in table:
            return table[name]
    raise KeyError(f"unknown scalar field {name!r}; known: {sorted(SCALARS_2D) + sorted(SCALARS_3D) + ['radial']}")


def vector(name: str) -> AnalyticVector:
    if name not in VECTORS_2D:
        raise KeyError(f"unknown vector field {name!r}; known: {sorted(VECTORS_2D)}")
    return VECTORS_2D[name]


def random_trig_scalar(rng: np.random.Generator, degree: int = 2, name: str = "random") -> AnalyticScalar:
    """Random trigonometric polynomial with coefficients rounded to 1e-6."""
    expr = sp.Float(round(float(rng.normal()), 6))
    for j in range(degree + 1):
        for k in range(degree + 1):
            if j == k == 0:
                continue
            a, b = (round(float(v), 6) for v in rng.normal(size=2) / (1 + j + k))
            arg = j * X1 + k * X2
            expr += sp.Float(a) * sp.cos(arg) + sp.Float(b) * sp.sin(arg)
    return AnalyticScalar(name, expr)
