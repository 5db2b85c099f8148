"""Heat kernels on R^n and on the half-space, and their 1D cell weights.

The half-space kernel is the free Gaussian plus its mirror image across
``x_n = 0``::

    G(x, y, t) = (4 pi t)^(-n/2) [exp(-|x-y|^2/4t) + exp(-|x-y*|^2/4t)],
    y* = (y', -y_n).

Both factor over coordinates, which is what the quadrature in
:mod:`halfheat.operators` exploits: a tensor-product cell integral of ``G``
is a product of 1D integrals, each an erf difference.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erfc

from .errors import DomainError


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise DomainError(f"heat kernel requires t > 0, got {t}")
    return t


def whole_space_kernel(x, t):
    """``g(x, t) = (4 pi t)^(-n/2) exp(-|x|^2 / 4t)``; ``x`` has shape ``(..., n)``."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    return (4.0 * math.pi * t) ** (-n / 2.0) * np.exp(-np.sum(x * x, axis=-1) / (4.0 * t))


def half_space_kernel(x, y, t):
    """Neumann Green function of the half-space, ``G(x, y, t)``."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x[..., -1] < 0) or np.any(y[..., -1] < 0):
        raise DomainError("kernel points must lie in the closed half-space")
    ystar = np.concatenate([y[..., :-1], -y[..., -1:]], axis=-1)
    return whole_space_kernel(x - y, t) + whole_space_kernel(x - ystar, t)


def pointwise_ratio(x, t):
    """``g(x, t) (t + |x|^2)^(n/2)``, the quantity bounded by ``C_0``."""
    t = _check_time(t)
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    return whole_space_kernel(x, t) * (t + np.sum(x * x, axis=-1)) ** (n / 2.0)


def calibrate_pointwise_constant(n, samples=4001, z_max=200.0):
    """Smallest ``C_0`` with ``g(x,t) <= C_0 (t+|x|^2)^(-n/2)`` found by a coarse search.

    The ratio depends only on ``z = |x|^2/t``, so the search runs over ``z``.
    """
    z = np.linspace(0.0, z_max, samples)
    ratio = (4.0 * math.pi) ** (-n / 2.0) * (1.0 + z) ** (n / 2.0) * np.exp(-z / 4.0)
    return float(ratio.max())


def check_pointwise_bound(x, t, C0):
    """True where ``g(x, t) <= C0 (t + |x|^2)^(-n/2)``."""
    return pointwise_ratio(x, t) <= C0


def _interval_mass(lo, hi):
    """``0.5 * (erf(hi) - erf(lo))`` for ``lo <= hi`` without cancellation in the tails."""
    lo, hi = np.broadcast_arrays(lo, hi)
    right = lo >= 0
    left = hi <= 0
    out = np.empty(lo.shape)
    out[right] = 0.5 * (erfc(lo[right]) - erfc(hi[right]))
    out[left] = 0.5 * (erfc(-hi[left]) - erfc(-lo[left]))
    mid = ~(right | left)
    out[mid] = 1.0 - 0.5 * (erfc(-lo[mid]) + erfc(hi[mid]))
    return out


def cell_weights(targets, edges, t, reflect=False, rule="cell"):
    """1D quadrature weights ``W[a, b]`` of the heat kernel over cell ``b``.

    ``rule="cell"`` integrates the 1D Gaussian exactly over each cell (data
    piecewise constant); ``rule="midpoint"`` evaluates it at the cell center
    times the width.  With ``reflect`` the mirror term ``g(x + y)`` is added,
    which is the normal-axis factor of the half-space kernel.
    """
    t = float(_check_time(t))
    x = np.asarray(targets, dtype=float)[:, None]
    e = np.asarray(edges, dtype=float)
    if rule == "midpoint":
        c = 0.5 * (e[:-1] + e[1:])[None, :]
        w = np.diff(e)[None, :]
        g = np.exp(-((x - c) ** 2) / (4.0 * t))
        if reflect:
            g = g + np.exp(-((x + c) ** 2) / (4.0 * t))
        return g * w / math.sqrt(4.0 * math.pi * t)
    if rule != "cell":
        raise ValueError(f"unknown quadrature rule {rule!r}")
    s = math.sqrt(4.0 * t)
    W = _interval_mass((e[None, :-1] - x) / s, (e[None, 1:] - x) / s)
    if reflect:
        W = W + _interval_mass((e[None, :-1] + x) / s, (e[None, 1:] + x) / s)
    return W


def boundary_factor(xn, t):
    """Normal factor ``2 (4 pi t)^(-1/2) exp(-x_n^2/4t)`` of ``G(x, (y', 0), t)``."""
    t = _check_time(t)
    xn = np.asarray(xn, dtype=float)
    return 2.0 * np.exp(-xn * xn / (4.0 * t)) / np.sqrt(4.0 * math.pi * t)
