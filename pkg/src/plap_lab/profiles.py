"""Power-type operator profiles a(t), b(t) and the Cordes window they induce.

a(t) = (t^2 + eps)^((p-2)/2) drives the regularized p-Laplacian and
b(t) = (t^2 + eps)^(beta/2) weights the field V_b = b(|Du|) Du whose
derivative is estimated.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .matrix_cordes import cordes_constants

THETA_GRID_POINTS = 10_000


@dataclass(frozen=True)
class OperatorProfile:
    p: float
    eps: float
    beta: float = 0.0

    def __post_init__(self):
        if not self.p > 1:
            raise ValueError(f"p must exceed 1, got {self.p}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if not self.beta > -1:
            raise ValueError(f"beta must exceed -1, got {self.beta}")

    def a(self, t):
        return (np.square(t) + self.eps) ** ((self.p - 2) / 2)

    def b(self, t):
        return (np.square(t) + self.eps) ** (self.beta / 2)

    def vartheta_a(self, t):
        """t a'(t)/a(t)."""
        t2 = np.square(t)
        return (self.p - 2) * t2 / (t2 + self.eps)

    def vartheta_b(self, t):
        t2 = np.square(t)
        return self.beta * t2 / (t2 + self.eps)

    @property
    def i_a(self):
        return min(self.p - 2, 0.0)

    @property
    def s_a(self):
        return max(self.p - 2, 0.0)

    @property
    def i_b(self):
        return min(self.beta, 0.0)

    @property
    def s_b(self):
        return max(self.beta, 0.0)


@dataclass(frozen=True)
class StructureMatrices:
    A: np.ndarray
    B: np.ndarray


def theta(profile: OperatorProfile, t):
    """(1 + vartheta_a)/(1 + vartheta_b) = ((p-1)t^2 + eps)/((beta+1)t^2 + eps)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    t2 = t * t
    out = ((profile.p - 1) * t2 + profile.eps) / ((profile.beta + 1) * t2 + profile.eps)
    return float(out) if out.ndim == 0 else out


def theta_bounds(profile: OperatorProfile) -> tuple[float, float]:
    r = (profile.p - 1) / (profile.beta + 1)
    return min(r, 1.0), max(r, 1.0)


def cordes_window_ok(profile: OperatorProfile, n: int) -> bool:
    """Whether s_theta < 2(n-1)/(n-2), i.e. beta > -1 + (n-2)(p-1)/(2(n-1)).

    Both forms are evaluated in exact rational arithmetic and must agree.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if n == 2:
        return True
    p, beta = Fraction(profile.p), Fraction(profile.beta)
    s_theta = max((p - 1) / (beta + 1), Fraction(1))
    by_theta = s_theta < Fraction(2 * (n - 1), n - 2)
    by_beta = beta > -1 + Fraction(n - 2) * (p - 1) / (2 * (n - 1))
    if by_theta != by_beta:
        raise AssertionError("window forms disagree")
    return by_theta


def delta_bound(theta_value, n: int):
    """g(theta) = (2(n-1) - (n-2) theta) theta / (n - 1 + theta^2)."""
    th = np.asarray(theta_value, dtype=float)
    return (2 * (n - 1) - (n - 2) * th) * th / (n - 1 + th * th)


def delta_max(profile: OperatorProfile, n: int) -> float:
    """Uniform Cordes parameter of A w.r.t. B: min of g over [i_theta, s_theta]."""
    if not cordes_window_ok(profile, n):
        raise ValueError(f"profile {profile} violates the Cordes window for n={n}")
    lo, hi = theta_bounds(profile)
    grid = np.linspace(lo, hi, THETA_GRID_POINTS)
    g = delta_bound(np.concatenate([grid, [lo, hi]]), n)
    value = float(np.min(g))
    # g(1) = 1 exactly in exact arithmetic
    return min(value, 1.0)


def structure_matrices(profile: OperatorProfile, grad, n: int | None = None) -> StructureMatrices:
    """A = I + vartheta_a(|g|) g g^T/|g|^2 and B likewise; I, I at g = 0.

    ``grad`` may be a single vector or an array of shape (..., n).
    """
    g = np.asarray(grad, dtype=float)
    if n is None:
        n = g.shape[-1]
    if g.shape[-1] != n:
        raise ValueError("gradient length does not match n")
    t2 = np.einsum("...i,...i->...", g, g)
    t = np.sqrt(t2)
    with np.errstate(invalid="ignore", divide="ignore"):
        proj = np.where((t2 > 0)[..., None, None], g[..., :, None] * g[..., None, :] / t2[..., None, None], 0.0)
    eye = np.eye(n)
    A = eye + profile.vartheta_a(t)[..., None, None] * proj
    B = eye + profile.vartheta_b(t)[..., None, None] * proj
    return StructureMatrices(A=A, B=B)


def pointwise_cordes_check(profile: OperatorProfile, n: int, t, rtol: float = 1e-12) -> bool:
    """Check (n-1+delta)(n-1+theta^2) <= (n-1+theta)^2 at theta(t), delta = delta_max."""
    if not cordes_window_ok(profile, n):
        return False
    delta = delta_max(profile, n)
    th = np.asarray(theta(profile, t))
    lhs = (n - 1 + delta) * (n - 1 + th * th)
    rhs = (n - 1 + th) ** 2
    return bool(np.all(lhs <= rhs * (1 + rtol)))


def slack_constants(profile: OperatorProfile, n: int) -> tuple[float, float]:
    """(c, C) for the pointwise inequality on |D V_b|^2.

    c composes the Cordes constant with the eigenvalue-ratio bound on B,
    c = c_cordes * (min{1, 1+i_b}/max{1, 1+s_b})^2; C is the Cordes C,
    using <B^-1 A, (B^-1 A)^T> >= 1. Not sharp.
    """
    c0, C0 = cordes_constants(n, delta_max(profile, n))
    ratio = min(1.0, 1.0 + profile.i_b) / max(1.0, 1.0 + profile.s_b)
    return c0 * ratio**2, C0


def young_constant(n: int, c: float) -> float:
    """Constant multiplying |DW|^2 in the Young split; 2(n+1)(1 + 2/c).

    Covers the worst case (n-1)(1 + 2(n-1)/c) for n <= 4.
    """
    return 2 * (n + 1) * (1 + 2 / c)


def split_slack_constants(profile: OperatorProfile, n: int) -> tuple[float, float]:
    """(c, C) for the inequality with an auxiliary field W: (c/2, max(C, C_young))."""
    c, C = slack_constants(profile, n)
    return c / 2, max(C, young_constant(n, c))


def profile_to_text(profile: OperatorProfile, n: int) -> str:
    return f"p={profile.p!r}\neps={profile.eps!r}\nbeta={profile.beta!r}\nn={n}\n"


def profile_from_text(text: str) -> tuple[OperatorProfile, int]:
    values = {}
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        if not sep:
            raise ValueError(f"expected key=value, got {raw!r}")
        values[key.strip()] = val.strip()
    missing = {"p", "eps"} - values.keys()
    if missing:
        raise ValueError(f"missing keys: {sorted(missing)}")
    profile = OperatorProfile(float(values["p"]), float(values["eps"]), float(values.get("beta", 0.0)))
    return profile, int(values.get("n", 2))
