"""Tensor-product cell grids on the truncated half-space and its boundary.

The interior box is ``[-R, R]^(n-1) x [0, R]`` and the boundary grid is the
tangential factor ``[-R, R]^(n-1)``.  Every axis is a 1D partition; cells are
products of 1D intervals, so kernels that factor over coordinates can be
applied axis by axis.

Refinement centers are boundary points.  Their coordinates are inserted as
cell edges on every tangential axis (and 0 on the normal axis), so a centroid
can never coincide with a center, and cells shrink geometrically toward them
when ``grading < 1``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, SamplingError

DEFAULT_CELL_BUDGET = 2**24


@dataclass(frozen=True)
class GridSpec:
    n: int = 3
    R: float = 4.0
    cells_per_axis: int = 16
    grading: float | None = None
    refinement_centers: tuple[tuple[float, ...], ...] = ()
    cell_budget: int = DEFAULT_CELL_BUDGET

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ConfigurationError(f"dimension n must be an integer >= 3, got {self.n}")
        if not (self.R > 0 and math.isfinite(self.R)):
            raise ConfigurationError(f"truncation radius R must be positive, got {self.R}")
        if int(self.cells_per_axis) != self.cells_per_axis or self.cells_per_axis < 4:
            raise ConfigurationError(
                f"cells_per_axis must be an integer >= 4, got {self.cells_per_axis}")
        if self.grading is not None and not (0.0 < self.grading <= 1.0):
            raise ConfigurationError(f"grading must lie in (0, 1], got {self.grading}")
        centers = tuple(tuple(float(c) for c in pt) for pt in self.refinement_centers)
        for pt in centers:
            if len(pt) != self.n - 1:
                raise ConfigurationError(
                    f"refinement center {pt} must have n-1 = {self.n - 1} coordinates")
            if any(abs(c) >= self.R for c in pt):
                raise ConfigurationError(f"refinement center {pt} is not inside the box")
        object.__setattr__(self, "refinement_centers", centers)
        count = self.cells_per_axis ** self.n
        if count > self.cell_budget:
            raise ConfigurationError(
                f"{count} interior cells exceed the cell budget {self.cell_budget}")

    @property
    def graded(self):
        return self.grading is not None and self.grading < 1.0

    def effective_centers(self):
        """Refinement centers actually used; the origin when grading without centers."""
        if self.refinement_centers:
            return self.refinement_centers
        if self.graded:
            return ((0.0,) * (self.n - 1),)
        return ()


@dataclass(frozen=True)
class Axis:
    """A 1D partition given by its strictly increasing edges."""

    edges: np.ndarray
    centers: np.ndarray = field(init=False)
    widths: np.ndarray = field(init=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        edges.setflags(write=False)
        widths = np.diff(edges)
        if np.any(widths <= 0):
            raise ConfigurationError("axis edges must be strictly increasing")
        centers = 0.5 * (edges[:-1] + edges[1:])
        widths.setflags(write=False)
        centers.setflags(write=False)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "widths", widths)
        object.__setattr__(self, "centers", centers)

    def __len__(self):
        return len(self.widths)

    def is_symmetric(self):
        return bool(np.array_equal(self.edges, -self.edges[::-1]))


def _geometric_widths(length, count, grading):
    """Widths of ``count`` cells summing to ``length``, smallest first.

    Consecutive widths grow by ``1/grading`` moving away from the center.
    """
    if grading is None or grading >= 1.0:
        return np.full(count, length / count)
    ratio = 1.0 / grading
    w0 = length * (ratio - 1.0) / (ratio**count - 1.0)
    return w0 * ratio ** np.arange(count)


def _allocate(lengths, total):
    """Split ``total`` cells over segments proportionally to length, at least one each."""
    k = len(lengths)
    if total < k:
        raise ConfigurationError(
            f"{total} cells per axis cannot resolve {k} graded segments")
    share = np.asarray(lengths) / np.sum(lengths) * (total - k)
    counts = np.floor(share).astype(int) + 1
    remainder = share - np.floor(share)
    for i in np.argsort(-remainder, kind="stable")[: total - counts.sum()]:
        counts[i] += 1
    return counts


def build_axis(lo, hi, centers, cells, grading):
    """Partition ``[lo, hi]`` with edges at ``centers``, graded toward them."""
    centers = sorted({c for c in centers if lo <= c <= hi})
    anchors = sorted({lo, hi, *centers})
    center_set = set(centers)
    # half-segments: (start, end, refine_toward) with refine_toward in {start, end, None}
    pieces = []
    for a, b in zip(anchors[:-1], anchors[1:]):
        ca, cb = a in center_set, b in center_set
        if ca and cb:
            mid = 0.5 * (a + b)
            pieces += [(a, mid, a), (mid, b, b)]
        elif ca:
            pieces.append((a, b, a))
        elif cb:
            pieces.append((a, b, b))
        else:
            pieces.append((a, b, None))
    counts = _allocate([b - a for a, b, _ in pieces], cells)
    edges = [lo]
    for (a, b, toward), m in zip(pieces, counts):
        w = _geometric_widths(b - a, m, grading if toward is not None else None)
        if toward == b:
            inner = b - np.cumsum(w)[::-1][1:]
        else:
            inner = a + np.cumsum(w)[:-1]
        edges.extend(inner.tolist())
        edges.append(b)
    return Axis(np.array(edges))


class Grid:
    """Interior and boundary cells of the truncated half-space.

    Cell data are stored as n-D arrays of shape ``grid.shape`` (interior) and
    ``grid.boundary_shape`` (boundary); axis ``n-1`` of the interior array is
    the normal coordinate.
    """

    def __init__(self, spec: GridSpec, axes: Sequence[Axis]):
        self.spec = spec
        self.axes = tuple(axes)
        self.n = spec.n
        self.shape = tuple(len(a) for a in self.axes)
        self.boundary_shape = self.shape[:-1]
        self._measures = None
        self._bmeasures = None

    def __repr__(self):
        return f"Grid(n={self.n}, R={self.spec.R}, shape={self.shape})"

    @property
    def tangential_axes(self):
        return self.axes[:-1]

    @property
    def normal_axis(self):
        return self.axes[-1]

    @property
    def size(self):
        return int(np.prod(self.shape))

    @property
    def boundary_size(self):
        return int(np.prod(self.boundary_shape))

    @property
    def cell_measures(self):
        if self._measures is None:
            m = _outer([a.widths for a in self.axes])
            m.setflags(write=False)
            self._measures = m
        return self._measures

    @property
    def boundary_measures(self):
        if self._bmeasures is None:
            m = _outer([a.widths for a in self.tangential_axes])
            m.setflags(write=False)
            self._bmeasures = m
        return self._bmeasures

    def centroids(self):
        """Interior centroids, shape ``(*shape, n)``."""
        return np.stack(np.meshgrid(*[a.centers for a in self.axes], indexing="ij"), axis=-1)

    def boundary_centroids(self):
        """Boundary centroids, shape ``(*boundary_shape, n-1)``."""
        return np.stack(
            np.meshgrid(*[a.centers for a in self.tangential_axes], indexing="ij"), axis=-1)

    def total_measure(self):
        return (2.0 * self.spec.R) ** (self.n - 1) * self.spec.R


def _outer(vectors):
    out = np.asarray(vectors[0], dtype=float)
    for v in vectors[1:]:
        out = np.multiply.outer(out, v)
    return out


def build_grid(spec: GridSpec) -> Grid:
    """Build the tensor-product grid described by ``spec``."""
    centers = spec.effective_centers()
    grading = spec.grading if spec.graded else None
    axes = []
    for k in range(spec.n - 1):
        coords = [c[k] for c in centers]
        if not coords:
            coords = [0.0] if spec.cells_per_axis % 2 == 0 else []
        axes.append(build_axis(-spec.R, spec.R, coords, spec.cells_per_axis, grading))
    normal_centers = [0.0] if centers else []
    axes.append(build_axis(0.0, spec.R, normal_centers, spec.cells_per_axis, grading))
    grid = Grid(spec, axes)
    for c in centers:
        for k, ck in enumerate(c):
            if np.any(grid.axes[k].centers == ck):
                raise ConfigurationError(f"a centroid coincides with refinement center {c}")
    return grid


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Field sampled at interior centroids."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ConfigurationError(
                f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v)):
            raise SamplingError("grid function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def cell_measures(self):
        return self.grid.cell_measures

    def with_values(self, values):
        return type(self)(self.grid, values)

    def __add__(self, other):
        return self.with_values(self.values + _vals(other))

    def __sub__(self, other):
        return self.with_values(self.values - _vals(other))

    def __mul__(self, scalar):
        return self.with_values(self.values * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return self.with_values(-self.values)


@dataclass(frozen=True, eq=False)
class BoundaryFunction(GridFunction):
    """Field sampled at boundary centroids."""

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.grid.boundary_shape:
            raise ConfigurationError(
                f"values shape {v.shape} does not match boundary shape "
                f"{self.grid.boundary_shape}")
        if not np.all(np.isfinite(v)):
            raise SamplingError("boundary function has non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def cell_measures(self):
        return self.grid.boundary_measures


def _vals(f):
    return f.values if isinstance(f, GridFunction) else f


def _sample(f, points, kind):
    values = np.asarray(f(points), dtype=float)
    values = np.broadcast_to(values, points.shape[:-1])
    bad = ~np.isfinite(values)
    if np.any(bad):
        idx = tuple(np.argwhere(bad)[0])
        raise SamplingError(
            f"non-finite {kind} sample {values[idx]} at centroid {tuple(points[idx])}")
    return np.array(values)


def sample_field(f: Callable[[np.ndarray], np.ndarray], grid: Grid) -> GridFunction:
    """Sample ``f`` at interior centroids.

    ``f`` receives an array of points with shape ``(..., n)``.
    """
    return GridFunction(grid, _sample(f, grid.centroids(), "interior"))


def sample_boundary(f: Callable[[np.ndarray], np.ndarray], grid: Grid) -> BoundaryFunction:
    """Sample ``f`` at boundary centroids (points of shape ``(..., n-1)``)."""
    return BoundaryFunction(grid, _sample(f, grid.boundary_centroids(), "boundary"))


def zeros(grid):
    return GridFunction(grid, np.zeros(grid.shape))


def boundary_zeros(grid):
    return BoundaryFunction(grid, np.zeros(grid.boundary_shape))
