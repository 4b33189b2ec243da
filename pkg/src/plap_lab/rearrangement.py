"""Distribution functions, decreasing rearrangements and weak-type norms of
sampled boundary functions.

A sample carries the weight of its arclength element, so |psi| is a step
function and its rearrangement is an exact step function on (0, total weight).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import BoundaryFunction

ZYGMUND_POINTS_PER_STEP = 16


@dataclass(frozen=True)
class Rearrangement:
    """Right-continuous non-increasing step function: ``heights[k]`` on [edges[k], edges[k+1])."""

    edges: np.ndarray
    heights: np.ndarray

    @property
    def total(self) -> float:
        return float(self.edges[-1])

    def __call__(self, s):
        s = np.asarray(s, float)
        k = np.searchsorted(self.edges, s, side="right") - 1
        inside = (k >= 0) & (k < len(self.heights))
        return np.where(inside, self.heights[np.clip(k, 0, len(self.heights) - 1)], 0.0)

    def primitive(self, s):
        """int_0^s psi*(t) dt, piecewise linear."""
        s = np.clip(np.asarray(s, float), 0.0, self.total)
        cum = np.concatenate([[0.0], np.cumsum(self.heights * np.diff(self.edges))])
        k = np.clip(np.searchsorted(self.edges, s, side="right") - 1, 0, len(self.heights) - 1)
        return cum[k] + self.heights[k] * (s - self.edges[k])

    def integral(self) -> float:
        return float(np.sum(self.heights * np.diff(self.edges)))


def _weights(psi: BoundaryFunction):
    return np.full(psi.curve.size, psi.curve.ds)


def distribution_function(psi: BoundaryFunction, lam):
    """mu(lambda) = measure of {|psi| > lambda}."""
    a = np.abs(psi.values)
    w = _weights(psi)
    lam = np.asarray(lam, float)
    return np.sum(w * (a[None, :] > lam.reshape(-1, 1)), axis=1).reshape(lam.shape)


def decreasing_rearrangement(psi: BoundaryFunction) -> Rearrangement:
    a = np.abs(np.asarray(psi.values, float))
    if a.ndim != 1:
        raise ValueError("rearrangement needs a scalar boundary function")
    order = np.argsort(-a, kind="stable")
    w = _weights(psi)[order]
    edges = np.concatenate([[0.0], np.cumsum(w)])
    return Rearrangement(edges, a[order])


def weak_norms(psi: BoundaryFunction, q: float, zygmund_constant: float | None = None):
    """(sup_s s^(1/q - 1) int_0^s psi*, sup_s log(1 + C/s) int_0^s psi*).

    The first supremum is attained at a breakpoint of psi* (between breakpoints
    the expression has at most an interior minimum), so breakpoints are exact.
    The second is sampled at breakpoints plus interior points of every step.
    C defaults to the total boundary measure.
    """
    if not q > 1:
        raise ValueError("q must exceed 1")
    star = decreasing_rearrangement(psi)
    C = star.total if zygmund_constant is None else zygmund_constant
    s = star.edges[1:]
    lorentz = float(np.max(s ** (1 / q - 1) * star.primitive(s)))
    frac = np.arange(1, ZYGMUND_POINTS_PER_STEP + 1) / ZYGMUND_POINTS_PER_STEP
    grid = (star.edges[:-1, None] + frac[None, :] * np.diff(star.edges)[:, None]).ravel()
    zygmund = float(np.max(np.log1p(C / grid) * star.primitive(grid)))
    return lorentz, zygmund
