"""Numerical checks of decay rates, time integrals, scaling and symmetry.

Each check returns a small frozen dataclass carrying the statistic, the
threshold it is judged against and a ``passed`` flag, so the CLI can emit one
report row per check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .errors import ConfigurationError, PreconditionError, RangeError
from .grid import BoundaryFunction, Grid, GridFunction, sample_field
from .lorentz import LorentzIndex, norm
from .operators import Nonlinearity, evaluate_potential, operators_for
from .solver import SolverConfig, Solution, e_norm, picard_solve

NOISE_FLOOR = 1e-280


def _ops(grid, ops):
    return ops if ops is not None else operators_for(grid)


def _check_indices(d1, d2):
    if not 1 < d1 < d2 < math.inf:
        raise PreconditionError(f"indices must satisfy 1 < d1 < d2 < inf, got d1={d1}, d2={d2}")


# --------------------------------------------------------------------------
# Exponent fits
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ExponentFit:
    times: tuple[float, ...]
    norms: tuple[float, ...]
    slope: float
    intercept: float
    theory: float
    deviation: float

    def passed(self, tolerance=0.05):
        return self.deviation <= tolerance


def fit_exponent(times, norms, theory) -> ExponentFit:
    """Least-squares slope of ``log norm`` against ``log t``.

    ``deviation`` is relative to ``theory`` (absolute when ``theory == 0``).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(norms, dtype=float)
    if t.size < 6:
        raise PreconditionError(f"an exponent fit needs at least 6 times, got {t.size}")
    if t.max() / t.min() < 10.0 * (1 - 1e-12):
        raise PreconditionError("fit times must span at least one decade")
    if np.any(~(y > NOISE_FLOOR)):
        raise RangeError("norms at the floating-point noise floor; increase the data amplitude")
    slope, intercept = np.polyfit(np.log(t), np.log(y), 1)
    dev = abs(slope - theory) / abs(theory) if theory != 0 else abs(slope)
    return ExponentFit(tuple(t), tuple(y), float(slope), float(intercept), float(theory), float(dev))


def trace_decay_exponent(n, d1, d2):
    return -(n / (2.0 * d1) - (n - 1) / (2.0 * d2))


def g1_decay_exponent(n, d1, d2, target):
    if target == "boundary":
        return -((n - 1) / (2.0 * d1) - (n - 1) / (2.0 * d2) + 0.5)
    if target == "interior":
        return -((n - 1) / (2.0 * d1) - n / (2.0 * d2) + 0.5)
    raise ConfigurationError(f"target must be 'boundary' or 'interior', got {target!r}")


def fit_trace_decay(u0: GridFunction, d1, d2, times, r=math.inf, ops=None) -> ExponentFit:
    """Decay of ``||E(t)u0|bdry||_(d2,r)`` for ``u0`` homogeneous of degree ``-n/d1``."""
    _check_indices(d1, d2)
    ops = _ops(u0.grid, ops)
    idx = LorentzIndex(d2, r)
    norms = [norm(ops.semigroup_trace(u0, t), idx) for t in times]
    return fit_exponent(times, norms, trace_decay_exponent(u0.grid.n, d1, d2))


def fit_g1_decay(psi: BoundaryFunction, d1, d2, times, target="boundary", r=math.inf,
                 ops=None) -> ExponentFit:
    """Decay of ``||G1(psi)(t)||_(d2,r)`` on the boundary or in the interior."""
    _check_indices(d1, d2)
    theory = g1_decay_exponent(psi.grid.n, d1, d2, target)
    ops = _ops(psi.grid, ops)
    idx = LorentzIndex(d2, r)
    apply = ops.g1_boundary if target == "boundary" else ops.g1_interior
    norms = [norm(apply(psi, t), idx) for t in times]
    return fit_exponent(times, norms, theory)


# --------------------------------------------------------------------------
# Time-integrated estimates
# --------------------------------------------------------------------------

TIME_INTEGRAL_KINDS = ("trace", "layer-boundary", "layer-interior")


def time_integral_weight(n, d1, d2, which):
    """Power ``e`` in ``int t^e ||.|| dt``."""
    if which == "trace":
        return n / (2.0 * d1) - (n - 1) / (2.0 * d2) - 1.0
    if which == "layer-boundary":
        return (n - 1) / (2.0 * d1) - (n - 1) / (2.0 * d2) - 0.5
    if which == "layer-interior":
        return (n - 1) / (2.0 * d1) - n / (2.0 * d2) - 0.5
    raise ConfigurationError(f"unknown estimate {which!r}; expected one of {TIME_INTEGRAL_KINDS}")


@dataclass(frozen=True)
class TimeIntegralReport:
    which: str
    windows: tuple[tuple[float, float], ...]
    values: tuple[float, ...]
    relative_changes: tuple[float, ...]
    input_norm: float
    converged: bool
    status: str
    tolerance: float

    @property
    def integral(self):
        return self.values[-1]

    @property
    def constant(self):
        """Empirical ``C = integral / ||input||_(d1,1)``."""
        return self.integral / self.input_norm if self.input_norm > 0 else 0.0


def check_time_integrals(data, d1, d2, which="trace", t_min=2.0**-6, t_max=2.0**2,
                             rungs=12, per_octave=4, tolerance=0.01, ops=None) -> TimeIntegralReport:
    """Truncation ladder for ``int_0^inf t^e ||A(data)(t)||_(d2,1) dt``.

    ``A`` is the boundary trace of the semigroup for ``trace`` (``data``
    an interior field) and the single-layer operator ``G1`` on the boundary or
    in the interior for ``layer-boundary``/``layer-interior`` (``data`` a boundary
    field).  Each rung halves ``t_min`` and doubles ``t_max``; the integral is
    the trapezoid rule in ``log t`` on ``per_octave`` nodes per doubling.  The
    ladder stops at the first rung whose relative change is below
    ``tolerance``; otherwise the result is reported as inconclusive.
    """
    _check_indices(d1, d2)
    if not 0 < t_min < t_max:
        raise PreconditionError("need 0 < t_min < t_max")
    e = time_integral_weight(data.grid.n, d1, d2, which)
    ops = _ops(data.grid, ops)
    if which == "trace":
        if isinstance(data, BoundaryFunction):
            raise ConfigurationError("trace takes an interior field")
        apply = ops.g2
    else:
        if not isinstance(data, BoundaryFunction):
            raise ConfigurationError(f"{which} takes a boundary field")
        apply = ops.g1_boundary if which == "layer-boundary" else ops.g1_interior
    idx = LorentzIndex(d2, 1.0)
    input_norm = norm(data, LorentzIndex(d1, 1.0))

    cache = {}

    def weighted(k):
        # integrand in d(log t) at t = t_min 2^(k/per_octave)
        if k not in cache:
            t = t_min * 2.0 ** (k / per_octave)
            cache[k] = t ** (e + 1.0) * norm(apply(data, t), idx)
        return cache[k]

    span = round(math.log2(t_max / t_min) * per_octave)
    h = math.log(2.0) / per_octave
    windows, values, changes = [], [], []
    converged = False
    for rung in range(rungs + 1):
        lo, hi = -rung * per_octave, span + rung * per_octave
        w = np.array([weighted(k) for k in range(lo, hi + 1)])
        values.append(float(h * (w.sum() - 0.5 * (w[0] + w[-1]))))
        windows.append((t_min * 2.0 ** (lo / per_octave), t_min * 2.0 ** (hi / per_octave)))
        if rung == 0:
            continue
        prev = values[-2]
        if values[-1] == 0.0 and prev == 0.0:
            changes.append(0.0)
            converged = True
            break
        changes.append(abs(values[-1] - prev) / abs(values[-1]))
        if changes[-1] < tolerance:
            converged = True
            break
    if input_norm == 0.0:
        status = "zero input"
    else:
        status = "converged" if converged else "inconclusive"
    return TimeIntegralReport(which, tuple(windows), tuple(values), tuple(changes), input_norm,
                          converged, status, tolerance)


# --------------------------------------------------------------------------
# Scaling
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SelfSimilarityReport:
    defect: float
    per_lambda: dict
    compared: int
    excluded: int
    core_radius: float
    threshold: float = 0.05

    @property
    def passed(self):
        return self.defect <= self.threshold


def _interpolator(grid: Grid, inner: np.ndarray, bdry: np.ndarray):
    """Multilinear interpolant of an interior field with its trace as the ``x_n = 0`` layer."""
    coords = [a.centers for a in grid.tangential_axes]
    coords.append(np.concatenate([[0.0], grid.normal_axis.centers]))
    data = np.concatenate([bdry[..., None], inner], axis=-1)
    return (RegularGridInterpolator(coords, data, bounds_error=True),
            RegularGridInterpolator(coords[:-1], bdry, bounds_error=True))


def check_self_similarity(solution: Solution, lambdas=(0.5, 2.0), floor=1e-8,
                          threshold=0.05) -> SelfSimilarityReport:
    """Max relative defect of ``u(x,t) = lam^(1/(rho-1)) u(lam x, lam^2 t)``.

    Compared cells are those with ``|x| <= R/(2 max lam)`` at every level ``t``
    for which ``lam^2 t`` is also a stored level.
    """
    grid = solution.grid
    rho = solution.config.rho
    a = 1.0 / (rho - 1.0)
    lambdas = tuple(float(x) for x in lambdas)
    core = grid.spec.R / (2.0 * max(max(lambdas), 1.0))
    X = grid.centroids()
    Y = grid.boundary_centroids()
    in_core = np.linalg.norm(X, axis=-1) <= core
    b_core = np.linalg.norm(Y, axis=-1) <= core
    interp = [_interpolator(grid, np.asarray(i.values), np.asarray(b.values))
              for i, b in zip(solution.interior, solution.boundary)]
    umax = max(max(np.abs(i.values).max(), np.abs(b.values).max())
               for i, b in zip(solution.interior, solution.boundary))
    fl = floor * umax
    per_lambda, compared, excluded = {}, 0, 0
    for lam in lambdas:
        worst = 0.0
        for j, t in enumerate(solution.levels):
            k = solution.level_index(lam * lam * t)
            if k is None:
                continue
            fi, fb = interp[k]
            ui = np.asarray(solution.interior[j].values)
            ub = np.asarray(solution.boundary[j].values)
            si = lam**a * fi(lam * X[in_core])
            sb = lam**a * fb(lam * Y[b_core])
            di = np.abs(si - ui[in_core]) / (np.abs(ui[in_core]) + fl)
            db = np.abs(sb - ub[b_core]) / (np.abs(ub[b_core]) + fl)
            worst = max(worst, float(di.max(initial=0.0)), float(db.max(initial=0.0)))
            compared += int(in_core.sum() + b_core.sum())
            excluded += int((~in_core).sum() + (~b_core).sum())
        per_lambda[lam] = worst
    if compared == 0:
        raise ConfigurationError("no pair of stored levels is related by the requested lambdas")
    return SelfSimilarityReport(max(per_lambda.values()), per_lambda, compared, excluded, core,
                                threshold)


# --------------------------------------------------------------------------
# Sign and symmetry
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PositivityReport:
    minimum: float
    maximum: float
    expected_sign: int
    passed: bool
    status: str


def check_positivity(solution: Solution, expected_sign=1) -> PositivityReport:
    """Strict sign of ``u`` over all interior and boundary cells at every level."""
    vals = [np.asarray(f.values) for f in (*solution.interior, *solution.boundary)]
    lo = min(float(v.min()) for v in vals)
    hi = max(float(v.max()) for v in vals)
    if lo == 0.0 and hi == 0.0:
        return PositivityReport(lo, hi, expected_sign, False, "zero solution")
    ok = lo > 0.0 if expected_sign > 0 else hi < 0.0
    return PositivityReport(lo, hi, expected_sign, ok, "pass" if ok else "fail")


TRANSFORMS = ("rotation", "reflection")


def _transform(values: np.ndarray, transform: str, n_tangential: int):
    """Apply the cell permutation realizing ``u(T x)`` on the leading tangential axes."""
    if transform == "rotation":
        # T(x1, x2, ...) = (-x2, x1, ...)
        return np.swapaxes(np.flip(values, 0), 0, 1)
    if transform == "reflection":
        return np.flip(values, tuple(range(n_tangential)))
    raise ConfigurationError(f"unknown transform {transform!r}; expected one of {TRANSFORMS}")


def check_grid_closed(grid: Grid, transform: str):
    axes = grid.tangential_axes
    if not all(a.is_symmetric() for a in axes):
        raise ConfigurationError("grid is not symmetric about the origin")
    if transform == "rotation" and not np.array_equal(axes[0].edges, axes[1].edges):
        raise ConfigurationError("rotation needs identical first two tangential axes")
    if transform not in TRANSFORMS:
        raise ConfigurationError(f"unknown transform {transform!r}; expected one of {TRANSFORMS}")


@dataclass(frozen=True)
class SymmetryReport:
    transform: str
    parity: str
    defect: float
    threshold: float = 1e-10

    @property
    def passed(self):
        return self.defect <= self.threshold


def check_symmetry(solution: Solution, transform="rotation", parity="symmetric",
                   threshold=1e-10) -> SymmetryReport:
    """Max of ``|u(T x, t) - s u(x, t)|`` with ``s = +1`` or ``-1`` over all cells and levels."""
    grid = solution.grid
    check_grid_closed(grid, transform)
    if parity not in ("symmetric", "antisymmetric"):
        raise ConfigurationError(f"parity must be symmetric or antisymmetric, got {parity!r}")
    s = 1.0 if parity == "symmetric" else -1.0
    m = grid.n - 1
    defect = 0.0
    for f in (*solution.interior, *solution.boundary):
        v = np.asarray(f.values)
        defect = max(defect, float(np.max(np.abs(_transform(v, transform, m) - s * v))))
    return SymmetryReport(transform, parity, defect, threshold)


# --------------------------------------------------------------------------
# Dependence on data and behaviour at t = 0
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DependenceReport:
    data_distances: tuple[float, ...]
    solution_distances: tuple[float, ...]
    lipschitz: tuple[float, ...]
    spread: float
    threshold: float = 2.0

    @property
    def passed(self):
        return self.spread <= self.threshold


def check_continuous_dependence(u0: GridFunction, V, h: Nonlinearity, config: SolverConfig,
                                du0: GridFunction, dV: BoundaryFunction | None = None,
                                halvings=2, ops=None) -> DependenceReport:
    """Empirical Lipschitz ratios of the data-to-solution map as the perturbation halves.

    ``spread`` is the ratio of the largest to the smallest Lipschitz estimate.
    """
    grid = u0.grid
    Vb = V if isinstance(V, BoundaryFunction) else evaluate_potential(V, grid)
    dV = dV if dV is not None else BoundaryFunction(grid, np.zeros(grid.boundary_shape))
    p = config.p
    base = picard_solve(u0, Vb, h, config, ops=ops)
    dd, sd, L = [], [], []
    for k in range(halvings + 1):
        c = 0.5**k
        pert = picard_solve(u0 + c * du0, Vb + c * dV, h, config, ops=ops)
        d = norm(c * du0, LorentzIndex(p)) + norm(c * dV, LorentzIndex(grid.n - 1))
        if d == 0:
            raise PreconditionError("perturbation has zero data distance")
        s = e_norm([a - b for a, b in zip(pert.interior, base.interior)],
                   [a - b for a, b in zip(pert.boundary, base.boundary)], p, config.q)
        dd.append(d)
        sd.append(s)
        L.append(s / d)
    spread = max(L) / min(L) if min(L) > 0 else math.inf
    return DependenceReport(tuple(dd), tuple(sd), tuple(L), spread)


def smooth_bump(center, radius):
    """``C^inf`` bump ``exp(1 - 1/(1 - r^2))`` supported in the ball of ``radius``."""
    c = np.asarray(center, dtype=float)

    def phi(x):
        r2 = np.sum((x - c) ** 2, axis=-1) / radius**2
        out = np.zeros(r2.shape)
        inside = r2 < 1.0
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    return phi


def default_test_functions():
    """Three bumps overlapping unit-scale data near the origin (``n = 3``)."""
    return [smooth_bump((0.0, 0.0, 0.5), 1.0),
            smooth_bump((0.5, 0.0, 0.5), 0.8),
            smooth_bump((0.0, 0.0, 1.0), 0.5)]


@dataclass(frozen=True)
class InitialTraceReport:
    times: tuple[float, ...]
    pairings: tuple[tuple[float, ...], ...]
    monotone: tuple[bool, ...]

    @property
    def passed(self):
        return all(self.monotone)


def check_weak_initial_trace(solution: Solution, test_functions) -> InitialTraceReport:
    """``|<u(t) - u0, phi>|`` along the stored levels, checked to decrease as ``t`` decreases."""
    grid = solution.grid
    m = grid.cell_measures
    u0 = np.asarray(solution.u0.values)
    rows, mono = [], []
    for phi in test_functions:
        w = sample_field(phi, grid).values * m
        vals = tuple(abs(float(np.sum((np.asarray(u.values) - u0) * w))) for u in solution.interior)
        rows.append(vals)
        mono.append(bool(np.all(np.diff(vals) > 0)))
    return InitialTraceReport(tuple(float(t) for t in solution.levels), tuple(rows), tuple(mono))


@dataclass(frozen=True)
class CheckResult:
    """One report row: check name, parameters, statistic, threshold and verdict."""

    check: str
    parameters: dict = field(default_factory=dict)
    statistic: float = math.nan
    threshold: float = math.nan
    passed: bool = False
