"""Uniform grids over simple planar regions, and grid-sampled fields.

Node labels: ``INSIDE`` nodes are unknowns / full-stencil nodes, ``BOUNDARY``
nodes carry Dirichlet data (the staircase layer touching the region from
outside), ``OUTSIDE`` nodes are ignored. Every inside node has its whole 3^d
neighbourhood in inside-or-boundary by construction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import shapely
from scipy import ndimage

OUTSIDE, BOUNDARY, INSIDE = 0, 1, 2


# --- regions -----------------------------------------------------------------


class Region:
    """Open planar region with strict membership and nearest-boundary projection."""

    dim = 2

    def contains(self, pts: np.ndarray) -> np.ndarray:  # pts (..., d)
        raise NotImplementedError

    def project(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    @property
    def area(self) -> float:
        raise NotImplementedError

    @property
    def convex(self) -> bool:
        return False


@dataclass(frozen=True)
class Box(Region):
    lower: tuple
    upper: tuple

    @property
    def dim(self):
        return len(self.lower)

    def contains(self, pts, tol=1e-12):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        scale = tol * max(1.0, float(np.max(hi - lo)))
        return np.all((pts > lo + scale) & (pts < hi - scale), axis=-1)

    def project(self, pts):
        lo, hi = np.asarray(self.lower), np.asarray(self.upper)
        q = np.clip(pts, lo, hi)
        inside = self.contains(pts, tol=0.0)
        if np.any(inside):
            sub = q[inside]
            d_lo, d_hi = sub - lo, hi - sub
            dist = np.concatenate([d_lo, d_hi], axis=-1)
            k = np.argmin(dist, axis=-1)
            d = self.dim
            rows = np.arange(len(sub))
            axis = k % d
            sub[rows, axis] = np.where(k < d, lo[axis], hi[axis])
            q[inside] = sub
        return q

    @property
    def bounds(self):
        return np.asarray(self.lower, float), np.asarray(self.upper, float)

    @property
    def area(self):
        return float(np.prod(np.subtract(self.upper, self.lower)))

    @property
    def convex(self):
        return True


@dataclass(frozen=True)
class Disk(Region):
    center: tuple = (0.0, 0.0)
    radius: float = 1.0

    def contains(self, pts, tol=1e-12):
        r = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        return r < self.radius * (1 - tol)

    def project(self, pts):
        c = np.asarray(self.center)
        v = pts - c
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(r > 0, r, 1.0)
        unit = np.where(r > 0, v / safe, np.array([1.0, 0.0]))
        return c + self.radius * unit

    @property
    def bounds(self):
        c = np.asarray(self.center, float)
        return c - self.radius, c + self.radius

    @property
    def area(self):
        return float(np.pi * self.radius**2)

    @property
    def convex(self):
        return True


@dataclass(frozen=True)
class Annulus(Region):
    inner: float
    outer: float
    center: tuple = (0.0, 0.0)

    def __post_init__(self):
        if not 0 < self.inner < self.outer:
            raise ValueError("annulus needs 0 < inner < outer")

    def contains(self, pts, tol=1e-12):
        r = np.linalg.norm(pts - np.asarray(self.center), axis=-1)
        return (r > self.inner * (1 + tol)) & (r < self.outer * (1 - tol))

    def project(self, pts):
        c = np.asarray(self.center)
        v = pts - c
        r = np.linalg.norm(v, axis=-1, keepdims=True)
        safe = np.where(r > 0, r, 1.0)
        unit = np.where(r > 0, v / safe, np.array([1.0, 0.0]))
        target = np.where(np.abs(r - self.inner) < np.abs(r - self.outer), self.inner, self.outer)
        return c + target * unit

    @property
    def bounds(self):
        c = np.asarray(self.center, float)
        return c - self.outer, c + self.outer

    @property
    def area(self):
        return float(np.pi * (self.outer**2 - self.inner**2))


@dataclass(frozen=True)
class Polygon(Region):
    vertices: tuple
    _shape: object = field(init=False, repr=False, compare=False, default=None)

    def __post_init__(self):
        poly = shapely.Polygon(self.vertices)
        if not poly.is_valid or poly.area <= 0:
            raise ValueError("polygon vertices must describe a simple polygon")
        object.__setattr__(self, "_shape", poly)

    def contains(self, pts, tol=1e-12):
        inside = shapely.contains_xy(self._shape, pts[..., 0], pts[..., 1])
        ring = self._shape.exterior
        dist = shapely.distance(ring, shapely.points(pts[..., 0], pts[..., 1]))
        scale = tol * max(1.0, np.sqrt(self._shape.area))
        return inside & (dist > scale)

    def project(self, pts):
        ring = self._shape.exterior
        flat = pts.reshape(-1, 2)
        s = shapely.line_locate_point(ring, shapely.points(flat[:, 0], flat[:, 1]))
        q = shapely.get_coordinates(shapely.line_interpolate_point(ring, s))
        return q.reshape(pts.shape)

    @property
    def bounds(self):
        x0, y0, x1, y1 = self._shape.bounds
        return np.array([x0, y0]), np.array([x1, y1])

    @property
    def area(self):
        return float(self._shape.area)

    @property
    def convex(self):
        return bool(self._shape.convex_hull.area <= self._shape.area * (1 + 1e-12))


# --- grids -------------------------------------------------------------------


@dataclass
class GridDomain:
    origin: np.ndarray
    h: float
    shape: tuple
    mask: np.ndarray
    region: Region | None = None

    def __post_init__(self):
        self.origin = np.asarray(self.origin, dtype=float)
        self.shape = tuple(int(s) for s in self.shape)
        if self.h <= 0:
            raise ValueError("spacing must be positive")
        if self.mask.shape != self.shape:
            raise ValueError("mask shape mismatch")
        if len(self.shape) not in (2, 3):
            raise ValueError("only 2D and 3D grids are supported")
        if min(self.shape) < 5:
            raise ValueError("grid too coarse for the finite-difference stencils")

    @property
    def dim(self) -> int:
        return len(self.shape)

    def axes(self) -> list[np.ndarray]:
        return [self.origin[k] + self.h * np.arange(n) for k, n in enumerate(self.shape)]

    def coords(self) -> list[np.ndarray]:
        return np.meshgrid(*self.axes(), indexing="ij")

    def points(self) -> np.ndarray:
        return np.stack(self.coords(), axis=-1)

    @property
    def inside(self) -> np.ndarray:
        return self.mask == INSIDE

    @property
    def boundary(self) -> np.ndarray:
        return self.mask == BOUNDARY

    @property
    def active(self) -> np.ndarray:
        return self.mask != OUTSIDE

    def active_cells(self) -> np.ndarray:
        """Cells (indexed by their lowest corner) whose corners are all active."""
        act = self.active
        out = np.ones(tuple(n - 1 for n in self.shape), dtype=bool)
        for corner in itertools.product((0, 1), repeat=self.dim):
            sl = tuple(slice(c, c + n - 1) for c, n in zip(corner, self.shape))
            out &= act[sl]
        return out

    def node_weights(self) -> np.ndarray:
        """Trapezoid weights over the union of active cells."""
        cells = self.active_cells().astype(float)
        w = np.zeros(self.shape)
        for corner in itertools.product((0, 1), repeat=self.dim):
            sl = tuple(slice(c, c + n - 1) for c, n in zip(corner, self.shape))
            w[sl] += cells
        return w * self.h**self.dim / 2**self.dim

    @property
    def area(self) -> float:
        return float(self.active_cells().sum() * self.h**self.dim)

    @classmethod
    def box(cls, lower, upper, h: float) -> "GridDomain":
        lower = np.asarray(lower, float)
        upper = np.asarray(upper, float)
        counts = (upper - lower) / h
        n = np.rint(counts).astype(int)
        if np.any(np.abs(counts - n) > 1e-9 * np.maximum(n, 1)) or np.any(n < 1):
            raise ValueError("box extent must be a positive multiple of h")
        shape = tuple(n + 1)
        mask = np.full(shape, BOUNDARY, dtype=np.int8)
        mask[tuple(slice(1, -1) for _ in shape)] = INSIDE
        return cls(lower, h, shape, mask, Box(tuple(lower), tuple(upper)))

    @classmethod
    def from_region(cls, region: Region, h: float, pad: int = 2) -> "GridDomain":
        if isinstance(region, Box):
            return cls.box(region.lower, region.upper, h)
        lo, hi = region.bounds
        i0 = np.floor(lo / h - 1e-9).astype(int) - pad
        i1 = np.ceil(hi / h + 1e-9).astype(int) + pad
        origin = i0 * h
        shape = tuple(i1 - i0 + 1)
        axes = [origin[k] + h * np.arange(shape[k]) for k in range(len(shape))]
        pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        inside = region.contains(pts)
        grown = ndimage.binary_dilation(inside, structure=np.ones((3,) * len(shape), bool))
        mask = np.full(shape, OUTSIDE, dtype=np.int8)
        mask[grown] = BOUNDARY
        mask[inside] = INSIDE
        rim = np.ones(shape, bool)
        rim[tuple(slice(1, -1) for _ in shape)] = False
        if np.any(mask[rim] != OUTSIDE):
            raise ValueError("grid padding too small")
        return cls(origin, h, shape, mask, region)


@dataclass
class ScalarField:
    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.domain.shape:
            raise ValueError("field shape does not match its grid")
        self.values = np.where(self.domain.active, self.values, np.nan)
        if np.any(np.isinf(self.values)):
            raise ValueError("field values must be finite")

    @classmethod
    def sample(cls, domain: GridDomain, func) -> "ScalarField":
        """Evaluate ``func(x, y[, z])`` on the active nodes; NaN marks no stencil support."""
        with np.errstate(divide="ignore", invalid="ignore"):
            values = np.asarray(func(*domain.coords()), dtype=float)
        field = cls(domain, np.broadcast_to(values, domain.shape).copy())
        if not np.all(np.isfinite(field.values[domain.active])):
            raise ValueError("sampled values must be finite on the domain")
        return field


@dataclass
class VectorField:
    domain: GridDomain
    values: np.ndarray  # (d, *shape)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.domain.dim,) + self.domain.shape:
            raise ValueError("vector field must have one component per grid axis")
        self.values = np.where(self.domain.active, self.values, np.nan)

    @classmethod
    def sample(cls, domain: GridDomain, func) -> "VectorField":
        with np.errstate(divide="ignore", invalid="ignore"):
            comps = func(*domain.coords())
        values = np.stack([np.broadcast_to(np.asarray(c, float), domain.shape) for c in comps])
        return cls(domain, values)
