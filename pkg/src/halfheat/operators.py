"""Heat semigroup, boundary layer operators and Duhamel terms on a grid.

All operators are quadratures of the half-space kernel against cell data.
Because both the grid and the kernel are tensor products, every operator is
a sequence of small dense 1D matrices applied along array axes; nothing of
size ``cells x cells`` is ever formed.

Notation (``G`` the half-space Green function):

* ``E(t) u0 (x)        = int_{R^n_+} G(x, y, t) u0(y) dy``
* ``G1(psi)(x, t)      = int_{bdry} G(x, y', t) psi(y') dy'``
* ``G2(phi)(y', t)     = int_{R^n_+} G(x, y', t) phi(x) dx = [E(t) phi](y', 0)``
* ``H(f)(x, t)         = int_0^t G1(f(., s))(x, t - s) ds``

The Duhamel integral is computed in ``tau = sqrt(t - s)``, which turns the
``(t - s)^(-1/2)`` boundary singularity into a bounded integrand.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigurationError, DomainError
from .grid import BoundaryFunction, Grid, GridFunction
from .kernel import boundary_factor, cell_weights

MIN_TIME_NODES = 8
DEFAULT_TIME_NODES = 64


# --------------------------------------------------------------------------
# Potential and nonlinearity
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Pole:
    """One term ``v((y'-x)/|y'-x|) / |y'-x|`` of a critical boundary potential.

    ``kind`` is ``"constant"`` (``v = coefficient``), ``"dipole"``
    (``v(w) = w . dipole``) or ``"profile"`` (``v`` tabulated on unit
    ``directions``, looked up by nearest direction).
    """

    position: tuple[float, ...]
    kind: str = "constant"
    coefficient: float = 1.0
    dipole: tuple[float, ...] | None = None
    directions: tuple[tuple[float, ...], ...] | None = None
    profile: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(c) for c in self.position))
        if self.kind not in ("constant", "dipole", "profile"):
            raise ConfigurationError(f"unknown pole kind {self.kind!r}")
        if self.kind == "dipole":
            if self.dipole is None or len(self.dipole) != len(self.position):
                raise ConfigurationError("dipole pole needs a vector with n-1 components")
        if self.kind == "profile":
            if self.directions is None or self.profile is None:
                raise ConfigurationError("profile pole needs directions and profile values")
            d = np.asarray(self.directions, dtype=float)
            if d.ndim != 2 or d.shape[1] != len(self.position) or len(d) != len(self.profile):
                raise ConfigurationError("profile directions/values have inconsistent shapes")
            if not np.all(np.isfinite(self.profile)):
                raise ConfigurationError("angular profile must be bounded")

    def angular(self, w):
        """Angular factor at unit directions ``w`` (shape ``(..., n-1)``)."""
        if self.kind == "constant":
            return np.full(w.shape[:-1], float(self.coefficient))
        if self.kind == "dipole":
            return w @ np.asarray(self.dipole, dtype=float)
        d = np.asarray(self.directions, dtype=float)
        d = d / np.linalg.norm(d, axis=1, keepdims=True)
        nearest = np.argmax(w @ d.T, axis=-1)
        return np.asarray(self.profile, dtype=float)[nearest]

    def sup_angular(self):
        if self.kind == "constant":
            return abs(float(self.coefficient))
        if self.kind == "dipole":
            return float(np.linalg.norm(self.dipole))
        return float(np.max(np.abs(self.profile)))


@dataclass(frozen=True)
class Potential:
    """Multipolar anisotropic boundary potential of order one."""

    poles: tuple[Pole, ...] = ()

    @classmethod
    def inverse_distance(cls, kappa, n=3, center=None):
        """``kappa / |y' - center|``."""
        center = (0.0,) * (n - 1) if center is None else center
        return cls((Pole(center, "constant", kappa),))

    def __call__(self, points):
        points = np.asarray(points, dtype=float)
        out = np.zeros(points.shape[:-1])
        for pole in self.poles:
            diff = points - np.asarray(pole.position)
            r = np.linalg.norm(diff, axis=-1)
            if np.any(r == 0):
                raise ConfigurationError(f"a sample point coincides with pole {pole.position}")
            out += pole.angular(diff / r[..., None]) / r
        return out

    def refinement_centers(self):
        return tuple(p.position for p in self.poles)

    def angular_bound(self):
        """``sum_i sup |v_i|``, the factor multiplying ``|| |y'|^-1 ||`` in the weak-norm bound."""
        return sum(p.sup_angular() for p in self.poles)


def evaluate_potential(V: Potential, grid: Grid) -> BoundaryFunction:
    """Sample ``V`` at boundary centroids."""
    if not V.poles:
        return BoundaryFunction(grid, np.zeros(grid.boundary_shape))
    return BoundaryFunction(grid, V(grid.boundary_centroids()))


@dataclass(frozen=True)
class Nonlinearity:
    """Boundary nonlinearity ``h``.

    Power law ``h(a) = sign |a|^(rho-1) a`` unless ``table`` is given, in
    which case ``h`` interpolates the ``(a, h(a))`` pairs linearly.
    """

    rho: float = 3.0
    sign: int = 1
    eta: float | None = None
    table: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if not self.rho > 1:
            raise ConfigurationError(f"nonlinearity exponent rho must exceed 1, got {self.rho}")
        if self.sign not in (-1, 0, 1):
            raise ConfigurationError(f"sign must be -1, 0 or +1, got {self.sign}")
        if self.eta is None:
            object.__setattr__(self, "eta", float(self.rho))
        if not self.eta > 0:
            raise ConfigurationError("Lipschitz constant eta must be positive")
        if self.table is not None:
            a, h = (np.asarray(v, dtype=float) for v in self.table)
            if a.shape != h.shape or np.any(np.diff(a) <= 0):
                raise ConfigurationError("tabulated nonlinearity needs increasing abscissae")
            if abs(float(np.interp(0.0, a, h))) > 0:
                raise ConfigurationError("tabulated nonlinearity must satisfy h(0) = 0")

    @property
    def is_zero(self):
        return self.table is None and self.sign == 0

    @property
    def is_odd(self):
        if self.table is None:
            return True
        a, h = (np.asarray(v, dtype=float) for v in self.table)
        return bool(np.allclose(np.interp(-a, a, h), -h))

    def __call__(self, a):
        a = np.asarray(a, dtype=float)
        if self.table is not None:
            xs, hs = self.table
            return np.interp(a, xs, hs)
        if self.sign == 0:
            return np.zeros_like(a)
        return self.sign * np.abs(a) ** (self.rho - 1.0) * a

    def lipschitz_ratio(self, a, b):
        """``|h(a)-h(b)| / (eta |a-b| (|a|^(rho-1) + |b|^(rho-1)))``; at most 1 when the bound holds."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        den = self.eta * np.abs(a - b) * (np.abs(a) ** (self.rho - 1) + np.abs(b) ** (self.rho - 1))
        num = np.abs(self(a) - self(b))
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, num / den, 0.0)


# --------------------------------------------------------------------------
# Boundary trajectories
# --------------------------------------------------------------------------

class Trajectory:
    """Boundary field sampled at increasing times, linear in between.

    Below the first stored time the first snapshot is used; a single
    snapshot therefore describes a field constant in time.
    """

    def __init__(self, grid: Grid, times, values):
        self.grid = grid
        self.times = np.asarray(times, dtype=float)
        values = np.asarray(values, dtype=float)
        if values.shape != (len(self.times),) + grid.boundary_shape:
            raise ConfigurationError(
                f"trajectory values of shape {values.shape} do not match "
                f"{len(self.times)} times on boundary shape {grid.boundary_shape}")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigurationError("trajectory times must be strictly increasing")
        values.setflags(write=False)
        self.values = values

    @classmethod
    def constant(cls, f: BoundaryFunction):
        return cls(f.grid, [0.0], np.asarray(f.values)[None])

    def map(self, fn: Callable[[np.ndarray], np.ndarray]):
        return Trajectory(self.grid, self.times, fn(self.values))

    def scaled(self, factor):
        return Trajectory(self.grid, self.times, self.values * factor)

    def covers(self, t):
        return len(self.times) == 1 or self.times[-1] >= t

    def index_weights(self, s):
        """Left index and linear weight for each query time."""
        s = np.asarray(s, dtype=float)
        if len(self.times) == 1:
            return np.zeros(s.shape, dtype=int), np.zeros(s.shape)
        k = np.clip(np.searchsorted(self.times, s, side="right") - 1, 0, len(self.times) - 2)
        lo, hi = self.times[k], self.times[k + 1]
        w = np.clip((s - lo) / (hi - lo), 0.0, 1.0)
        return k, w

    def at(self, s):
        """Values at the query times ``s``, shape ``(len(s), *boundary_shape)``."""
        k, w = self.index_weights(np.atleast_1d(s))
        if len(self.times) == 1:
            return np.broadcast_to(self.values[0], (len(k),) + self.values.shape[1:])
        wb = w.reshape((-1,) + (1,) * (self.values.ndim - 1))
        return self.values[k] * (1.0 - wb) + self.values[k + 1] * wb


# --------------------------------------------------------------------------
# Operators
# --------------------------------------------------------------------------

def _apply_axis(U, W, axis):
    """Contract ``W[a, b]`` against axis ``axis`` of ``U``."""
    return np.moveaxis(np.tensordot(W, U, axes=([1], [axis])), 0, axis)


def _apply_axis_batched(U, W, axis):
    """Batched version: ``U`` has a leading batch axis, ``W`` is ``(J, a, b)``."""
    X = np.moveaxis(U, axis + 1, -1)
    shape = X.shape
    X = X.reshape(shape[0], -1, shape[-1])
    Y = np.matmul(X, np.swapaxes(W, 1, 2))
    return np.moveaxis(Y.reshape(shape[:-1] + (W.shape[1],)), -1, axis + 1)


@dataclass
class _DuhamelPlan:
    s: np.ndarray            # source times t - tau^2
    weights: np.ndarray      # d s = 2 tau d tau midpoint weights
    tau2: np.ndarray         # elapsed times t - s
    tangential: list = field(default_factory=list)  # per axis (J, m, m) stacks


class HeatOperators:
    """Quadrature operators bound to one grid.

    ``rule`` selects how the 1D kernel factors are integrated over cells:
    ``"cell"`` (exact Gaussian cell integrals of piecewise-constant data,
    the default) or ``"midpoint"``.
    """

    def __init__(self, grid: Grid, rule: str = "cell", time_nodes: int = DEFAULT_TIME_NODES):
        if time_nodes < MIN_TIME_NODES:
            raise ConfigurationError(
                f"Duhamel quadrature needs at least {MIN_TIME_NODES} time nodes, got {time_nodes}")
        self.grid = grid
        self.rule = rule
        self.time_nodes = int(time_nodes)
        self._tangential_key = []
        for axis in grid.tangential_axes:
            key = len(self._tangential_key)
            for j, prev in enumerate(grid.tangential_axes[: len(self._tangential_key)]):
                if np.array_equal(prev.edges, axis.edges):
                    key = self._tangential_key[j]
                    break
            self._tangential_key.append(key)
        self._wcache: dict = {}
        self._plans: dict = {}

    # -- 1D weights --------------------------------------------------------
    def _tangential(self, t):
        key = ("tan", float(t))
        mats = self._wcache.get(key)
        if mats is None:
            built = {}
            mats = []
            for axis, k in zip(self.grid.tangential_axes, self._tangential_key):
                if k not in built:
                    built[k] = cell_weights(axis.centers, axis.edges, t, rule=self.rule)
                mats.append(built[k])
            self._wcache[key] = mats
        return mats

    def _normal(self, t, trace=False):
        key = ("nrm", float(t), trace)
        W = self._wcache.get(key)
        if W is None:
            axis = self.grid.normal_axis
            targets = np.zeros(1) if trace else axis.centers
            W = cell_weights(targets, axis.edges, t, reflect=True, rule=self.rule)
            self._wcache[key] = W
        return W

    def clear_cache(self):
        self._wcache.clear()
        self._plans.clear()

    def _tangential_apply(self, B, t):
        for k, W in enumerate(self._tangential(t)):
            B = _apply_axis(B, W, k)
        return B

    # -- semigroup ---------------------------------------------------------
    def semigroup(self, u0: GridFunction, t) -> GridFunction:
        """``E(t) u0`` at interior centroids."""
        _check_t(t)
        U = _apply_axis(np.asarray(u0.values), self._normal(t), self.grid.n - 1)
        return GridFunction(self.grid, self._tangential_apply(U, t))

    def semigroup_trace(self, u0: GridFunction, t) -> BoundaryFunction:
        """``[E(t) u0](x', 0)`` at boundary centroids."""
        _check_t(t)
        U = _apply_axis(np.asarray(u0.values), self._normal(t, trace=True), self.grid.n - 1)
        return BoundaryFunction(self.grid, self._tangential_apply(U[..., 0], t))

    def g2(self, phi: GridFunction, t) -> BoundaryFunction:
        """``G2(phi)(y', t)``; identical to the semigroup trace."""
        return self.semigroup_trace(phi, t)

    # -- single layer ------------------------------------------------------
    def g1_boundary(self, psi: BoundaryFunction, t) -> BoundaryFunction:
        _check_t(t)
        B = self._tangential_apply(np.asarray(psi.values), t)
        return BoundaryFunction(self.grid, B * float(boundary_factor(0.0, t)))

    def g1_interior(self, psi: BoundaryFunction, t) -> GridFunction:
        _check_t(t)
        B = self._tangential_apply(np.asarray(psi.values), t)
        prof = boundary_factor(self.grid.normal_axis.centers, t)
        return GridFunction(self.grid, np.multiply.outer(B, prof))

    # -- Duhamel -----------------------------------------------------------
    def duhamel_plan(self, t):
        plan = self._plans.get(float(t))
        if plan is None:
            J = self.time_nodes
            h = math.sqrt(t) / J
            tau = (np.arange(J) + 0.5) * h
            tau2 = tau * tau
            plan = _DuhamelPlan(s=t - tau2, weights=2.0 * tau * h, tau2=tau2)
            built = {}
            for axis, k in zip(self.grid.tangential_axes, self._tangential_key):
                if k not in built:
                    built[k] = np.stack([cell_weights(axis.centers, axis.edges, d, rule=self.rule)
                                         for d in tau2])
                plan.tangential.append(built[k])
            self._plans[float(t)] = plan
        return plan

    def duhamel_nodes(self, f: Trajectory, t):
        """Tangentially smoothed sources ``S_j = W(t - s_j) f(s_j)`` for every node."""
        _check_t(t)
        if not f.covers(t * (1.0 - 0.25 / self.time_nodes**2)):
            raise ConfigurationError(
                f"trajectory ends at {f.times[-1]} but the Duhamel integral needs times up to {t}")
        plan = self.duhamel_plan(t)
        S = f.at(plan.s)
        for k, Wk in enumerate(plan.tangential):
            S = _apply_axis_batched(S, Wk, k)
        return plan, S

    def duhamel(self, f: Trajectory, t, interior=True, boundary=True):
        """``H(f)(., t)`` as ``(GridFunction | None, BoundaryFunction | None)``."""
        plan, S = self.duhamel_nodes(f, t)
        inner = bdry = None
        if boundary:
            coef = plan.weights * boundary_factor(0.0, plan.tau2)
            bdry = BoundaryFunction(self.grid, np.tensordot(coef, S, axes=(0, 0)))
        if interior:
            xn = self.grid.normal_axis.centers
            prof = plan.weights[:, None] * boundary_factor(xn[None, :], plan.tau2[:, None])
            inner = GridFunction(self.grid, np.tensordot(S, prof, axes=(0, 0)))
        return inner, bdry


def _check_t(t):
    if not t > 0:
        raise DomainError(f"operator time must be positive, got {t}")


@lru_cache(maxsize=8)
def operators_for(grid: Grid, rule: str = "cell", time_nodes: int = DEFAULT_TIME_NODES):
    """Shared :class:`HeatOperators` instance for a grid."""
    return HeatOperators(grid, rule, time_nodes)


def heat_semigroup(u0: GridFunction, t) -> GridFunction:
    return operators_for(u0.grid).semigroup(u0, t)


def heat_semigroup_trace(u0: GridFunction, t) -> BoundaryFunction:
    return operators_for(u0.grid).semigroup_trace(u0, t)


def g1_boundary(psi: BoundaryFunction, t) -> BoundaryFunction:
    return operators_for(psi.grid).g1_boundary(psi, t)


def g1_interior(psi: BoundaryFunction, t) -> GridFunction:
    return operators_for(psi.grid).g1_interior(psi, t)


def g2(phi: GridFunction, t) -> BoundaryFunction:
    return operators_for(phi.grid).g2(phi, t)


def duhamel_H(f: Trajectory, t, time_nodes: int = DEFAULT_TIME_NODES):
    """Interior and boundary values of ``H(f)(., t)``."""
    return operators_for(f.grid, "cell", time_nodes).duhamel(f, t)


def nonlinear_term(u_boundary: Trajectory, h: Nonlinearity, t, time_nodes: int = DEFAULT_TIME_NODES):
    """``N(u)(., t) = H(h(u|bdry))``."""
    return duhamel_H(u_boundary.map(h), t, time_nodes)


def potential_term(u_boundary: Trajectory, V, t, time_nodes: int = DEFAULT_TIME_NODES):
    """``T(u)(., t) = H(V u|bdry)``; ``V`` is a :class:`Potential` or sampled field."""
    Vb = evaluate_potential(V, u_boundary.grid) if isinstance(V, Potential) else V
    v = np.asarray(Vb.values)
    return duhamel_H(u_boundary.map(lambda a: a * v), t, time_nodes)
