"""Distribution functions, decreasing rearrangements and Lorentz norms.

A sampled field is a finite set of (value, measure) pairs, so its decreasing
rearrangement is an exact step function and every quantity below has a
closed form over the steps:

* ``quasi_norm_star``  uses ``f*``  (the quasi-norm),
* ``norm``             uses ``f**`` (the running average of ``f*``; a norm).

For ``r = inf`` the supremum of ``t^(1/p) f**(t)`` over a step is attained at
an endpoint (the function has a single interior critical point, a minimum),
so both weak norms reduce to a maximum over breakpoints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

INF = math.inf

# Gauss-Legendre rule for the f** integrals with finite r.
_GL_X, _GL_W = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class LorentzIndex:
    p: float
    r: float = INF

    def __post_init__(self):
        if not self.p > 1:
            raise ConfigurationError(f"Lorentz index p must exceed 1, got {self.p}")
        if not (self.r >= 1):
            raise ConfigurationError(f"Lorentz index r must be >= 1 or inf, got {self.r}")

    @property
    def weak(self):
        return math.isinf(self.r)


def _as_index(idx):
    if isinstance(idx, LorentzIndex):
        return idx
    if isinstance(idx, tuple):
        return LorentzIndex(*idx)
    return LorentzIndex(float(idx))


@dataclass(frozen=True, eq=False)
class StepRearrangement:
    """``f*`` as a step function: value ``values[k]`` on ``[t[k], t[k+1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    @property
    def total_measure(self):
        return float(self.breakpoints[-1])

    def __len__(self):
        return len(self.values)

    def __call__(self, t):
        """Evaluate ``f*`` (right-continuous); zero beyond the total measure."""
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        vals = np.append(self.values, 0.0)
        k = np.clip(k, 0, len(self.values))
        return np.where(t < self.breakpoints[-1], vals[k], 0.0)

    def cumulative(self):
        """``A_k = int_0^{t_k} f*``, aligned with ``breakpoints``."""
        return np.concatenate([[0.0], np.cumsum(self.values * np.diff(self.breakpoints))])


def _pairs(f):
    values = getattr(f, "values", None)
    if values is None:
        raise TypeError("expected a GridFunction or BoundaryFunction")
    return np.ravel(values), np.ravel(np.broadcast_to(f.cell_measures, np.shape(values)))


def rearrange(values, measures) -> StepRearrangement:
    """Exact decreasing rearrangement of weighted samples; ties are merged."""
    a = np.abs(np.ravel(np.asarray(values, dtype=float)))
    m = np.ravel(np.asarray(measures, dtype=float))
    if a.shape != m.shape:
        raise ConfigurationError("values and measures must have the same size")
    if a.size == 0:
        return StepRearrangement(np.zeros(1), np.zeros(0))
    order = np.argsort(-a, kind="stable")
    a, m = a[order], m[order]
    last = np.flatnonzero(np.append(a[1:] != a[:-1], True))
    cum = np.cumsum(m)[last]
    return StepRearrangement(np.concatenate([[0.0], cum]), a[last])


def rearrangement(f) -> StepRearrangement:
    """Decreasing rearrangement of a sampled field."""
    return rearrange(*_pairs(f))


def distribution_function(f, s):
    """Measure of ``{|f| > s}``."""
    if s < 0:
        raise ConfigurationError("distribution function needs s >= 0")
    values, measures = _pairs(f)
    return float(np.sum(measures[np.abs(values) > s]))


class DoubleStar:
    """Closed-form ``f**(t) = (1/t) int_0^t f*``.

    On the k-th step ``f**(t) = (B_k + v_k t) / t`` with
    ``B_k = A_{k-1} - v_k t_{k-1} >= 0``; beyond the support it is ``A_K / t``.
    """

    def __init__(self, rearr: StepRearrangement):
        self.rearr = rearr
        self.breakpoints = rearr.breakpoints
        self.values = rearr.values
        self.cumulative = rearr.cumulative()
        self.offsets = self.cumulative[:-1] - self.values * self.breakpoints[:-1]

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if len(self.values) == 0:
            return np.zeros_like(t)
        k = np.searchsorted(self.breakpoints, t, side="right") - 1
        inside = k < len(self.values)
        kk = np.clip(k, 0, len(self.values) - 1)
        with np.errstate(divide="ignore", invalid="ignore"):
            body = np.where(t > 0, (self.offsets[kk] + self.values[kk] * t) / t, self.values[0])
            tail = self.cumulative[-1] / t
        return np.where(inside, body, tail)


def double_star(rearr: StepRearrangement) -> DoubleStar:
    return DoubleStar(rearr)


def _quasi_from_steps(rearr, idx):
    t, v = rearr.breakpoints, rearr.values
    if len(v) == 0 or v[0] == 0.0:
        return 0.0
    if idx.weak:
        return float(np.max(t[1:] ** (1.0 / idx.p) * v))
    r, p = idx.r, idx.p
    pieces = v**r * (p / r) * (t[1:] ** (r / p) - t[:-1] ** (r / p))
    return float(np.sum(pieces) ** (1.0 / r))


def _norm_from_steps(rearr, idx):
    t, v = rearr.breakpoints, rearr.values
    if len(v) == 0 or v[0] == 0.0:
        return 0.0
    a = 1.0 / idx.p
    A = rearr.cumulative()
    if idx.weak:
        # f**(t_k) = A_k / t_k at every right breakpoint
        return float(np.max(A[1:] * t[1:] ** (a - 1.0)))
    r = idx.r
    total = v[0] ** r * t[1] ** (a * r) / (a * r)  # first step: f** = v_1
    total += A[-1] ** r * t[-1] ** (r * (a - 1.0)) / (r * (1.0 - a))  # beyond the support
    if len(v) > 1:
        B = (A[:-1] - v * t[:-1])[1:]
        lo, hi, vk = t[1:-1], t[2:], v[1:]
        if r == 1.0:
            total += np.sum(B * (hi ** (a - 1) - lo ** (a - 1)) / (a - 1)
                            + vk * (hi**a - lo**a) / a)
        else:
            total += _gl_pieces(B, vk, lo, hi, a, r)
    return float(total ** (1.0 / r))


def _gl_pieces(B, v, lo, hi, a, r):
    """Sum over steps of int_lo^hi (B t^(a-1) + v t^a)^r dt/t, Gauss-Legendre in log t."""
    span = np.log(hi / lo)
    nsub = np.maximum(1, np.ceil(span / math.log(2.0))).astype(int)
    rep = np.repeat(np.arange(len(B)), nsub)
    starts = np.concatenate([[0], np.cumsum(nsub)[:-1]])
    j = np.arange(rep.size) - np.repeat(starts, nsub)
    h = (span / nsub)[rep]
    u0 = np.log(lo)[rep] + j * h
    u = u0[:, None] + 0.5 * h[:, None] * (_GL_X[None, :] + 1.0)
    tt = np.exp(u)
    integrand = (B[rep, None] * tt ** (a - 1.0) + v[rep, None] * tt**a) ** r
    return float(np.sum(0.5 * h * (integrand @ _GL_W)))


def quasi_norm_star(f, idx) -> float:
    """Lorentz quasi-norm ``||f||*_(p,r)`` built from ``f*``."""
    idx = _as_index(idx)
    rearr = f if isinstance(f, StepRearrangement) else rearrangement(f)
    return _quasi_from_steps(rearr, idx)


def norm(f, idx) -> float:
    """Lorentz norm ``||f||_(p,r)`` built from ``f**``."""
    idx = _as_index(idx)
    rearr = f if isinstance(f, StepRearrangement) else rearrangement(f)
    return _norm_from_steps(rearr, idx)


def xpq_norm(interior, boundary, p, q) -> float:
    """``||f|| = ||f||_(p,inf) on the interior + ||f|_bdry||_(q,inf) on the boundary``."""
    return norm(interior, LorentzIndex(p)) + norm(boundary, LorentzIndex(q))


def lp_norm(f, p) -> float:
    """Quadrature L^p norm of a sampled field."""
    values, measures = _pairs(f)
    return float(np.sum(measures * np.abs(values) ** p) ** (1.0 / p))
