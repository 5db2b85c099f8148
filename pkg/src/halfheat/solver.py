"""Picard iteration for mild solutions and its smallness diagnostics.

The mild solution is a fixed point of ``Phi(u) = E(t)u0 + N(u) + T(u)``.
Iterates are stored at

* geometric output levels ``t_j = t_1 2^(j-1)`` (interior and boundary), on
  which ``sup_t`` in the solution norm is evaluated, and
* a finer geometric trajectory grid (boundary only), which feeds the
  Duhamel time quadrature by linear interpolation.

The smallness constants of the existence argument (``delta1``, ``delta2``,
``K``) are existential; :func:`calibrate` replaces them by empirical operator
ratios over a fixed probe family on the working grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ConfigurationError, HypothesisViolation, NumericalFailure
from .grid import BoundaryFunction, Grid, GridFunction, sample_field
from .lorentz import LorentzIndex, norm, xpq_norm
from .operators import (
    DEFAULT_TIME_NODES,
    HeatOperators,
    Nonlinearity,
    Potential,
    Trajectory,
    evaluate_potential,
    operators_for,
)

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 1e12


def check_hypothesis(n, rho):
    """Raise unless ``rho/(rho-1) < n-1``."""
    if not rho > 1:
        raise HypothesisViolation(f"rho must exceed 1, got {rho}")
    if not rho / (rho - 1.0) < n - 1:
        raise HypothesisViolation(
            f"existence theorem requires rho/(rho-1) < n-1; got rho/(rho-1) = "
            f"{rho / (rho - 1.0):.6g} >= {n - 1} for n = {n}")


@dataclass(frozen=True)
class SolverConfig:
    rho: float = 3.0
    n: int = 3
    first_level: float = 0.05
    n_levels: int = 5
    max_iterations: int = 20
    residual_tolerance: float = 1e-6
    time_nodes: int = DEFAULT_TIME_NODES
    steps_per_octave: int = 4
    octaves_below: int = 6

    def __post_init__(self):
        check_hypothesis(self.n, self.rho)
        if not self.first_level > 0:
            raise ConfigurationError("first time level must be positive")
        if self.n_levels < 1 or self.steps_per_octave < 1 or self.octaves_below < 0:
            raise ConfigurationError("levels, steps_per_octave and octaves_below must be positive")
        if self.max_iterations < 1:
            raise ConfigurationError("max_iterations must be at least 1")

    @property
    def p(self):
        return self.n * (self.rho - 1.0)

    @property
    def q(self):
        return (self.n - 1) * (self.rho - 1.0)

    def levels(self):
        return self.first_level * 2.0 ** np.arange(self.n_levels)

    def trajectory_times(self):
        """Geometric grid with ``steps_per_octave`` points per doubling, containing every level."""
        last = self.first_level * 2.0 ** (self.n_levels - 1)
        count = (self.n_levels - 1 + self.octaves_below) * self.steps_per_octave
        i = np.arange(count, -1, -1)
        return last * 2.0 ** (-i / self.steps_per_octave)


# --------------------------------------------------------------------------
# Solution norm helpers
# --------------------------------------------------------------------------

def level_norms(interior, boundary, p, q):
    """Per-level ``(interior weak-p, boundary weak-q)`` norms."""
    return [(norm(i, LorentzIndex(p)), norm(b, LorentzIndex(q))) for i, b in zip(interior, boundary)]


def e_norm(interior, boundary, p, q):
    """``sup`` over stored levels of the product-space norm."""
    return max((xpq_norm(i, b, p, q) for i, b in zip(interior, boundary)), default=0.0)


# --------------------------------------------------------------------------
# Calibration and admissibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    delta1: float
    delta2: float
    K: float
    probes: tuple[str, ...] = ()
    ratios: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def probe_family(grid: Grid, rho):
    """Named probe data used to calibrate operator constants."""
    R = grid.spec.R
    a = 1.0 / (rho - 1.0)

    def bump(width):
        return lambda x: np.exp(-np.sum(x * x, axis=-1) / (2.0 * width**2))

    def ball(radius):
        return lambda x: (np.linalg.norm(x, axis=-1) <= radius).astype(float)

    def homogeneous(x):
        return np.linalg.norm(x, axis=-1) ** (-a)

    return {
        "bump_small": bump(R / 16.0),
        "bump_medium": bump(R / 8.0),
        "ball": ball(R / 8.0),
        "homogeneous": homogeneous,
    }


def _boundary_trajectory(ops: HeatOperators, u0: GridFunction, times):
    return Trajectory(ops.grid, times, np.stack([ops.semigroup_trace(u0, s).values for s in times]))


def _duhamel_at_levels(ops, traj, levels):
    inner, bdry = [], []
    for t in levels:
        i, b = ops.duhamel(traj, t)
        inner.append(i)
        bdry.append(b)
    return inner, bdry


def calibrate(grid: Grid, config: SolverConfig, nonlinearity: Nonlinearity | None = None,
              ops: HeatOperators | None = None) -> Calibration:
    """Empirical ``delta1``, ``delta2`` and ``K`` on ``grid``.

    * ``delta2 = max ||E(.)u0||_E / ||u0||_(p,inf)``
    * ``delta1 = max ||T(u)||_E / (||V||_(n-1,inf) sup_t ||u|bdry||_(q,inf))`` with ``V = |x'|^-1``
    * ``K      = max ||N(u)||_E / ||u||_E^rho``

    the maxima running over :func:`probe_family`, with ``u = E(t)u0``.
    """
    ops = ops or operators_for(grid, "cell", config.time_nodes)
    h = nonlinearity or Nonlinearity(config.rho)
    p, q, rho = config.p, config.q, config.rho
    levels = config.levels()
    times = config.trajectory_times()
    V = evaluate_potential(Potential.inverse_distance(1.0, grid.n), grid)
    Vnorm = norm(V, LorentzIndex(grid.n - 1))
    ratios = {"delta1": {}, "delta2": {}, "K": {}}
    for name, fn in probe_family(grid, rho).items():
        u0 = sample_field(fn, grid)
        inner = [ops.semigroup(u0, t) for t in levels]
        bdry = [ops.semigroup_trace(u0, t) for t in levels]
        enorm = e_norm(inner, bdry, p, q)
        ratios["delta2"][name] = enorm / norm(u0, LorentzIndex(p))
        traj = _boundary_trajectory(ops, u0, times)
        bsup = max(norm(b, LorentzIndex(q)) for b in bdry)
        Ti, Tb = _duhamel_at_levels(ops, traj.map(lambda a: a * V.values), levels)
        ratios["delta1"][name] = e_norm(Ti, Tb, p, q) / (Vnorm * bsup)
        if h.is_zero:
            ratios["K"][name] = 0.0
        else:
            Ni, Nb = _duhamel_at_levels(ops, traj.map(h), levels)
            ratios["K"][name] = e_norm(Ni, Nb, p, q) / enorm**rho
    return Calibration(
        delta1=max(ratios["delta1"].values()),
        delta2=max(ratios["delta2"].values()),
        K=max(ratios["K"].values()),
        probes=tuple(ratios["delta2"]),
        ratios=ratios,
    )


@dataclass(frozen=True)
class AdmissibilityReport:
    V_norm: float
    u0_norm: float
    gamma: float
    epsilon: float
    u0_bound: float
    condition: float
    delta1: float
    delta2: float
    K: float
    p: float
    q: float
    admissible: bool
    reasons: tuple[str, ...] = ()

    @property
    def ball_radius(self):
        return 2.0 * self.epsilon / (1.0 - self.gamma) if self.gamma < 1 else math.inf

    def to_dict(self):
        return asdict(self)


def largest_epsilon(K, gamma, rho, safety=0.999):
    """Largest ``eps`` (times ``safety``) with ``2^rho eps^(rho-1) K/(1-gamma)^(rho-1) + gamma < 1``."""
    if gamma >= 1:
        return 0.0
    if K <= 0:
        return math.inf
    return safety * ((1.0 - gamma) ** rho / (2.0**rho * K)) ** (1.0 / (rho - 1.0))


def check_admissibility(u0: GridFunction, V, config: SolverConfig,
                        calibration: Calibration) -> AdmissibilityReport:
    """Evaluate the smallness hypotheses with calibrated constants."""
    check_hypothesis(u0.grid.n, config.rho)
    Vb = evaluate_potential(V, u0.grid) if isinstance(V, Potential) else V
    p, q, rho = config.p, config.q, config.rho
    Vn = norm(Vb, LorentzIndex(u0.grid.n - 1))
    un = norm(u0, LorentzIndex(p))
    gamma = calibration.delta1 * Vn
    eps = largest_epsilon(calibration.K, gamma, rho)
    bound = eps / calibration.delta2 if calibration.delta2 > 0 else math.inf
    if gamma < 1 and math.isfinite(eps):
        cond = 2.0**rho * eps ** (rho - 1) * calibration.K / (1 - gamma) ** (rho - 1) + gamma
    else:
        cond = gamma if calibration.K <= 0 else math.inf
    reasons = []
    if gamma >= 1:
        reasons.append(f"gamma = delta1 ||V|| = {gamma:.6g} >= 1")
    if un > bound:
        reasons.append(f"||u0||_(p,inf) = {un:.6g} exceeds eps/delta2 = {bound:.6g}")
    return AdmissibilityReport(
        V_norm=Vn, u0_norm=un, gamma=gamma, epsilon=eps, u0_bound=bound, condition=cond,
        delta1=calibration.delta1, delta2=calibration.delta2, K=calibration.K, p=p, q=q,
        admissible=not reasons, reasons=tuple(reasons))


# --------------------------------------------------------------------------
# Picard iteration
# --------------------------------------------------------------------------

@dataclass
class Solution:
    levels: np.ndarray
    interior: list
    boundary: list
    trajectory_times: np.ndarray
    boundary_trajectory: np.ndarray
    converged: bool
    status: str
    corrections: int
    differences: list
    ratios: list
    iterate_norms: list
    config: SolverConfig
    u0: GridFunction
    admissibility: AdmissibilityReport | None = None
    history: list | None = None

    @property
    def grid(self):
        return self.u0.grid

    def e_norm(self):
        return e_norm(self.interior, self.boundary, self.config.p, self.config.q)

    def level_norms(self):
        return level_norms(self.interior, self.boundary, self.config.p, self.config.q)

    def level_index(self, t, rtol=1e-9):
        hits = np.flatnonzero(np.isclose(self.levels, t, rtol=rtol, atol=0.0))
        return int(hits[0]) if len(hits) else None


def _finite(arrays, what):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise NumericalFailure(f"non-finite values in {what}")


def _as_boundary(V, grid):
    if V is None:
        return np.zeros(grid.boundary_shape)
    if isinstance(V, Potential):
        return np.asarray(evaluate_potential(V, grid).values)
    return np.asarray(V.values)


def picard_solve(u0: GridFunction, V, h: Nonlinearity, config: SolverConfig,
                 admissibility: AdmissibilityReport | None = None, override: bool = False,
                 ops: HeatOperators | None = None, keep_history: bool = False) -> Solution:
    """Run ``u_1 = E(t)u0``, ``u_(k+1) = u_1 + N(u_k) + T(u_k)``.

    Stops once the solution-norm difference of consecutive iterates drops
    below ``config.residual_tolerance`` or after ``max_iterations``
    corrections; in the latter case the status is ``"diverged"``.
    """
    grid = u0.grid
    check_hypothesis(grid.n, config.rho)
    if admissibility is not None and not admissibility.admissible and not override:
        raise ConfigurationError(
            "data are not admissible (" + "; ".join(admissibility.reasons)
            + "); pass override=True to run anyway")
    ops = ops or operators_for(grid, "cell", config.time_nodes)
    if ops.time_nodes != config.time_nodes:
        raise ConfigurationError("operator time nodes differ from the solver configuration")
    p, q = config.p, config.q
    levels = config.levels()
    S = config.trajectory_times()
    level_pos = [int(np.flatnonzero(np.isclose(S, t, rtol=1e-12))[0]) for t in levels]
    Vb = _as_boundary(V, grid)
    linear_only = h.is_zero and not np.any(Vb)

    u1_traj = np.stack([ops.semigroup_trace(u0, s).values for s in S])
    u1_int = np.stack([ops.semigroup(u0, t).values for t in levels])
    _finite([u1_traj, u1_int], "the linear part E(t)u0")

    def as_fields(inner, traj):
        return ([GridFunction(grid, a) for a in inner],
                [BoundaryFunction(grid, traj[k]) for k in level_pos])

    def dist(inner_a, traj_a, inner_b, traj_b):
        return e_norm(*as_fields(inner_a - inner_b, traj_a - traj_b), p, q)

    cur_int, cur_traj = u1_int, u1_traj
    diffs = [dist(cur_int, cur_traj, 0.0 * cur_int, 0.0 * cur_traj)]
    norms = [diffs[0]]
    ratios = []
    history = [as_fields(cur_int, cur_traj)] if keep_history else None
    converged = False
    corrections = 0
    for k in range(config.max_iterations):
        if linear_only:
            new_int, new_traj = u1_int, u1_traj
        else:
            with np.errstate(over="ignore", invalid="ignore"):
                flux = h(cur_traj) + Vb * cur_traj
            _finite([flux], f"the boundary flux of iterate {k + 1}")
            src = Trajectory(grid, S, flux)
            new_traj = np.empty_like(u1_traj)
            new_int = np.empty_like(u1_int)
            for i, s in enumerate(S):
                want_interior = i in level_pos
                inner, bdry = ops.duhamel(src, s, interior=want_interior)
                new_traj[i] = u1_traj[i] + bdry.values
                if want_interior:
                    new_int[level_pos.index(i)] = u1_int[level_pos.index(i)] + inner.values
            _finite([new_traj, new_int], f"Picard iterate {k + 2}")
        corrections += 1
        d = dist(new_int, new_traj, cur_int, cur_traj)
        prev = diffs[-1]
        ratios.append(d / prev if prev > 0 else 0.0)
        diffs.append(d)
        cur_int, cur_traj = new_int, new_traj
        norms.append(e_norm(*as_fields(cur_int, cur_traj), p, q))
        if keep_history:
            history.append(as_fields(cur_int, cur_traj))
        log.debug("Picard correction %d: difference %.3e ratio %.3e", k + 1, d, ratios[-1])
        if d < config.residual_tolerance:
            converged = True
            break
        if d > DIVERGENCE_FACTOR * max(diffs[0], 1e-300):
            break
    inner, bdry = as_fields(cur_int, cur_traj)
    return Solution(
        levels=levels, interior=inner, boundary=bdry, trajectory_times=S,
        boundary_trajectory=cur_traj, converged=converged,
        status="converged" if converged else "diverged", corrections=corrections,
        differences=diffs, ratios=ratios, iterate_norms=norms, config=config, u0=u0,
        admissibility=admissibility, history=history)


def fixed_point_residual(solution: Solution, V, h: Nonlinearity, ops: HeatOperators | None = None):
    """Per-level product-space norm of ``u - Phi(u)``."""
    grid = solution.grid
    cfg = solution.config
    ops = ops or operators_for(grid, "cell", cfg.time_nodes)
    Vb = _as_boundary(V, grid)
    traj = solution.boundary_trajectory
    src = Trajectory(grid, solution.trajectory_times, h(traj) + Vb * traj)
    out = []
    for t, ui, ub in zip(solution.levels, solution.interior, solution.boundary):
        inner, bdry = ops.duhamel(src, t)
        phi_i = ops.semigroup(solution.u0, t).values + inner.values
        phi_b = ops.semigroup_trace(solution.u0, t).values + bdry.values
        out.append(xpq_norm(GridFunction(grid, ui.values - phi_i),
                            BoundaryFunction(grid, ub.values - phi_b), cfg.p, cfg.q))
    return out


@dataclass(frozen=True)
class ContractionRow:
    k: int
    difference: float
    ratio: float


@dataclass(frozen=True)
class ContractionReport:
    rows: tuple[ContractionRow, ...]
    max_ratio: float
    contracting: bool
    monotone: bool
    flagged: tuple[int, ...]


def contraction_report(solution: Solution) -> ContractionReport:
    """Table of ``(k, ||u_(k+1) - u_k||_E, r_k)`` with the non-contracting steps flagged."""
    if len(solution.differences) < 2:
        raise ConfigurationError("contraction report needs at least two iterates")
    rows = tuple(ContractionRow(k + 1, d, r)
                 for k, (d, r) in enumerate(zip(solution.differences[1:], solution.ratios)))
    ratios = np.array(solution.ratios)
    flagged = tuple(int(i + 1) for i in np.flatnonzero(ratios >= 1.0))
    return ContractionReport(
        rows=rows,
        max_ratio=float(ratios.max()),
        contracting=not flagged,
        monotone=bool(np.all(np.diff(solution.differences[1:]) <= 0)),
        flagged=flagged)
