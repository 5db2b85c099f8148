"""Named initial-data and boundary-field profiles.

Interior profiles receive points of shape ``(..., n)``; boundary profiles
receive points of shape ``(..., n-1)``.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigurationError

INTERIOR = ("gaussian", "indicator", "homogeneous", "odd_gaussian", "zero")
BOUNDARY = ("boundary_power", "boundary_gaussian", "boundary_indicator")


def gaussian(amplitude=1.0, width=1.0, center=None):
    def f(x):
        c = 0.0 if center is None else np.asarray(center, dtype=float)
        return amplitude * np.exp(-np.sum((x - c) ** 2, axis=-1) / width**2)
    return f


def odd_gaussian(amplitude=1.0, width=1.0):
    """``x_1/width`` times a centered Gaussian; odd under ``x' -> -x'``."""
    g = gaussian(amplitude, width)
    return lambda x: x[..., 0] / width * g(x)


def indicator(amplitude=1.0, radius=1.0, center=None):
    def f(x):
        c = 0.0 if center is None else np.asarray(center, dtype=float)
        return amplitude * (np.linalg.norm(x - c, axis=-1) <= radius).astype(float)
    return f


def homogeneous(amplitude=1.0, degree=-0.5, theta=(1.0,)):
    """``amplitude * theta(x_n/|x|) * |x|^degree`` with ``theta`` a polynomial (low order first)."""
    coeffs = np.asarray(theta, dtype=float)

    def f(x):
        r = np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            s = x[..., -1] / r
            return amplitude * np.polynomial.polynomial.polyval(s, coeffs) * r**degree
    return f


def zero():
    return lambda x: np.zeros(x.shape[:-1])


def boundary_power(amplitude=1.0, exponent=1.0):
    """``amplitude |x'|^-exponent``."""
    def f(y):
        with np.errstate(divide="ignore"):
            return amplitude * np.linalg.norm(y, axis=-1) ** (-exponent)
    return f


def make_profile(name, **params):
    """Return ``(callable, domain)`` for a named profile; ``domain`` is interior or boundary."""
    builders = {
        "gaussian": (gaussian, "interior"),
        "indicator": (indicator, "interior"),
        "homogeneous": (homogeneous, "interior"),
        "odd_gaussian": (odd_gaussian, "interior"),
        "zero": (zero, "interior"),
        "boundary_power": (boundary_power, "boundary"),
        "boundary_gaussian": (gaussian, "boundary"),
        "boundary_indicator": (indicator, "boundary"),
    }
    if name not in builders:
        raise ConfigurationError(
            f"unknown data preset {name!r}; expected one of {INTERIOR + BOUNDARY}")
    build, domain = builders[name]
    try:
        return build(**params), domain
    except TypeError as exc:
        raise ConfigurationError(f"bad parameters for preset {name!r}: {exc}") from None
