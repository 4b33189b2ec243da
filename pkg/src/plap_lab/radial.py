"""Radial reference solutions of the regularized equation on annuli.

For u = u(r) the equation reduces to r a(u') u' = K with a constant flux K.
The map q -> a(q) q is strictly increasing, so u' is recovered pointwise by a
scalar root solve and K is fixed by shooting on the outer boundary value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .profiles import OperatorProfile


def _slope_for_flux(profile: OperatorProfile, flux, r):
    target = np.asarray(flux / np.asarray(r, float))
    p, eps = profile.p, profile.eps

    def f(q):
        return (q * q + eps) ** ((p - 2) / 2) * q - target

    def df(q):
        return (q * q + eps) ** ((p - 4) / 2) * ((p - 1) * q * q + eps)

    guess = np.sign(target) * np.abs(target) ** (1 / (p - 1))
    q = optimize.newton(f, guess, fprime=df, tol=1e-13, maxiter=100)
    return np.asarray(q)


@dataclass(frozen=True)
class RadialSolution:
    radii: np.ndarray
    values: np.ndarray
    flux: float

    def __call__(self, r):
        return np.interp(r, self.radii, self.values)


def radial_shooting(profile: OperatorProfile, inner: float, outer: float, u_inner: float, u_outer: float, samples: int = 40001):
    """Solve (r a(u') u')' = 0 on [inner, outer] with the given end values."""
    radii = np.linspace(inner, outer, samples)

    def mismatch(flux):
        q = _slope_for_flux(profile, flux, radii)
        return integrate.simpson(q, x=radii) - (u_outer - u_inner)

    jump = u_outer - u_inner
    if jump == 0:
        return RadialSolution(radii, np.full(samples, u_inner), 0.0)
    hi = 1.0
    while mismatch(np.sign(jump) * hi) * np.sign(jump) < 0:
        hi *= 2.0
    lo_bracket, hi_bracket = sorted((0.0, np.sign(jump) * hi))
    flux = optimize.brentq(mismatch, lo_bracket, hi_bracket, xtol=1e-15, rtol=1e-14)
    q = _slope_for_flux(profile, flux, radii)
    values = u_inner + integrate.cumulative_simpson(q, x=radii, initial=0.0)
    return RadialSolution(radii, values, flux)
