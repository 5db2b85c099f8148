import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad

from halfheat.errors import DomainError
from halfheat.kernel import (
    boundary_factor,
    calibrate_pointwise_constant,
    cell_weights,
    check_pointwise_bound,
    half_space_kernel,
    pointwise_ratio,
    whole_space_kernel,
)

coord = st.floats(-5, 5)
normal = st.floats(0, 5)
times = st.floats(1e-3, 10)


def _direct(x, y, t):
    n = len(x)
    ys = np.array([*y[:-1], -y[-1]])
    return (4 * math.pi * t) ** (-n / 2) * (math.exp(-np.sum((x - y) ** 2) / (4 * t))
                                            + math.exp(-np.sum((x - ys) ** 2) / (4 * t)))


@given(coord, coord, normal, coord, coord, normal, times)
def test_half_space_kernel_formula(a, b, c, d, e, f, t):
    x, y = np.array([a, b, c]), np.array([d, e, f])
    assert half_space_kernel(x, y, t) == pytest.approx(_direct(x, y, t), rel=1e-13, abs=1e-300)


@given(coord, coord, normal, coord, coord, normal, times, st.sampled_from([0.5, 2.0, 7.0]))
def test_parabolic_scaling(a, b, c, d, e, f, t, lam):
    x, y = np.array([a, b, c]), np.array([d, e, f])
    g = half_space_kernel(x, y, t)
    gl = lam**3 * half_space_kernel(lam * x, lam * y, lam**2 * t)
    assert gl == pytest.approx(g, rel=1e-12, abs=1e-300)


@given(coord, coord, normal, coord, coord, times)
def test_symmetric_and_reflection_invariant(a, b, c, d, e, t):
    x = np.array([a, b, c])
    y = np.array([d, e, 0.7])
    assert half_space_kernel(x, y, t) == pytest.approx(half_space_kernel(y, x, t), rel=1e-13)


def test_kernel_rejects_bad_arguments():
    with pytest.raises(DomainError):
        whole_space_kernel(np.zeros(3), 0.0)
    with pytest.raises(DomainError):
        half_space_kernel(np.array([0, 0, -1.0]), np.zeros(3), 1.0)


def test_pointwise_constant_matches_analytic_maximum():
    # ratio (1+z)^(n/2) exp(-z/4) peaks at z = 2n - 1
    for n in (3, 4, 5):
        analytic = (4 * math.pi) ** (-n / 2) * (2 * n) ** (n / 2) * math.exp(-(2 * n - 1) / 4)
        assert calibrate_pointwise_constant(n, samples=200001) == pytest.approx(analytic, rel=1e-7)
    assert calibrate_pointwise_constant(3) == pytest.approx(0.09452, abs=2e-5)


@given(st.lists(coord, min_size=3, max_size=3), times)
def test_pointwise_bound_holds(x, t):
    C0 = calibrate_pointwise_constant(3, samples=200001)
    x = np.array(x)
    assert check_pointwise_bound(x, t, C0 * (1 + 1e-9))
    assert pointwise_ratio(x, t) >= 0


@pytest.mark.parametrize("reflect", [False, True])
@pytest.mark.parametrize("t", [1e-4, 0.01, 1.0, 30.0])
def test_cell_weights_against_quadrature(reflect, t):
    edges = np.array([0.0, 0.05, 0.3, 1.0, 2.5])
    targets = np.array([0.01, 0.4, 2.0, 4.0])
    W = cell_weights(targets, edges, t, reflect=reflect)

    def g(y, x):
        v = math.exp(-(x - y) ** 2 / (4 * t))
        if reflect:
            v += math.exp(-(x + y) ** 2 / (4 * t))
        return v / math.sqrt(4 * math.pi * t)

    for a, x in enumerate(targets):
        for b in range(len(edges) - 1):
            ref = quad(g, edges[b], edges[b + 1], args=(x,), points=[x], epsabs=1e-300,
                       epsrel=1e-12)[0]
            assert W[a, b] == pytest.approx(ref, rel=1e-9, abs=1e-300)


def test_cell_weights_far_tail_has_no_cancellation():
    W = cell_weights(np.array([0.0]), np.array([10.0, 11.0]), 0.01)
    # 0.5 (erfc(50) - erfc(55)) is about 1e-1088 -> underflows cleanly to 0, never negative
    assert W[0, 0] >= 0.0
    W = cell_weights(np.array([0.0]), np.array([1.0, 1.1]), 0.01)
    ref = quad(lambda y: math.exp(-y * y / 0.04) / math.sqrt(0.04 * math.pi), 1.0, 1.1,
               epsabs=0, epsrel=1e-12)[0]
    assert W[0, 0] == pytest.approx(ref, rel=1e-10)


def test_midpoint_rule_is_center_sampling():
    edges = np.linspace(-1, 1, 5)
    W = cell_weights(np.array([0.1]), edges, 0.3, rule="midpoint")
    c = 0.5 * (edges[1:] + edges[:-1])
    np.testing.assert_allclose(W[0], np.exp(-(0.1 - c) ** 2 / 1.2) * 0.5 / math.sqrt(1.2 * math.pi))
    with pytest.raises(ValueError):
        cell_weights(np.zeros(1), edges, 1.0, rule="simpson")


def test_boundary_factor():
    assert boundary_factor(0.0, 1.0) == pytest.approx(2 / math.sqrt(4 * math.pi))
    np.testing.assert_allclose(boundary_factor(np.array([0.0, 1.0]), np.array([1.0, 2.0])),
                               [2 / math.sqrt(4 * math.pi), 2 * math.exp(-1 / 8) / math.sqrt(8 * math.pi)])
