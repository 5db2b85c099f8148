import math

import numpy as np
import pytest

from halfheat.errors import ConfigurationError, HypothesisViolation, NumericalFailure
from halfheat.grid import GridSpec, build_grid, sample_field, zeros
from halfheat.operators import HeatOperators, Nonlinearity, Potential, evaluate_potential
from halfheat.solver import (
    Calibration,
    SolverConfig,
    calibrate,
    check_admissibility,
    check_hypothesis,
    contraction_report,
    fixed_point_residual,
    largest_epsilon,
    picard_solve,
)

CFG = SolverConfig(first_level=0.05, n_levels=3, steps_per_octave=2, octaves_below=4, time_nodes=16)


@pytest.fixture(scope="module")
def grid():
    return build_grid(GridSpec(n=3, R=6.0, cells_per_axis=16, grading=0.8))


@pytest.fixture(scope="module")
def bump(grid):
    return sample_field(lambda x: 0.1 * np.exp(-np.sum(x * x, axis=-1)), grid)


@pytest.fixture(scope="module")
def calib(grid):
    return calibrate(grid, CFG)


def test_exponents_and_hypothesis():
    cfg = SolverConfig(rho=3.0, n=3)
    assert (cfg.p, cfg.q) == (6.0, 4.0)
    check_hypothesis(3, 3.0)
    with pytest.raises(HypothesisViolation):
        SolverConfig(rho=2.0, n=3)  # rho/(rho-1) = 2 is not < 2
    with pytest.raises(HypothesisViolation):
        check_hypothesis(3, 1.5)
    check_hypothesis(4, 2.0)


def test_levels_are_geometric_and_inside_trajectory():
    cfg = SolverConfig(first_level=0.1, n_levels=4, steps_per_octave=3, octaves_below=2)
    np.testing.assert_allclose(cfg.levels(), [0.1, 0.2, 0.4, 0.8])
    S = cfg.trajectory_times()
    for t in cfg.levels():
        assert np.any(S == t)
    assert S[0] == pytest.approx(0.025)
    assert np.all(np.diff(S) > 0)


def test_zero_data_is_admissible(grid, calib):
    rep = check_admissibility(zeros(grid), Potential(), CFG, calib)
    assert rep.admissible and rep.gamma == 0.0 and rep.u0_norm == 0.0


def test_large_kappa_is_inadmissible(grid, bump, calib):
    kappa = 2.0 / (calib.delta1 * 3.5)
    rep = check_admissibility(bump, Potential.inverse_distance(kappa, 3), CFG, calib)
    assert rep.gamma >= 1 and not rep.admissible
    assert any("gamma" in r for r in rep.reasons)
    with pytest.raises(ConfigurationError):
        picard_solve(bump, Potential.inverse_distance(kappa, 3), Nonlinearity(3), CFG,
                     admissibility=rep)


def test_epsilon_satisfies_condition():
    for K, gamma, rho in [(0.1, 0.2, 3.0), (2.0, 0.0, 2.5), (0.01, 0.9, 4.0)]:
        eps = largest_epsilon(K, gamma, rho)
        cond = 2**rho * eps ** (rho - 1) * K / (1 - gamma) ** (rho - 1) + gamma
        assert cond < 1 and cond > 0.99 * 1 - 0.01
    assert largest_epsilon(0.0, 0.3, 3) == math.inf
    assert largest_epsilon(1.0, 1.2, 3) == 0.0


def test_calibration_is_positive_and_deterministic(grid, calib):
    assert calib.delta1 > 0 and calib.delta2 > 0 and calib.K > 0
    again = calibrate(grid, CFG)
    assert again.to_dict() == calib.to_dict()
    assert calibrate(grid, CFG, Nonlinearity(3, sign=0)).K == 0.0


def test_linear_case_one_correction(grid, bump):
    sol = picard_solve(bump, Potential(), Nonlinearity(3, sign=0), CFG)
    assert sol.converged and sol.corrections == 1 and sol.ratios == [0.0]
    ops = HeatOperators(grid, time_nodes=CFG.time_nodes)
    for t, u in zip(sol.levels, sol.interior):
        np.testing.assert_array_equal(u.values, ops.semigroup(bump, t).values)
    rep = contraction_report(sol)
    assert [r.ratio for r in rep.rows] == [0.0] and rep.contracting


def test_zero_fixed_point(grid):
    sol = picard_solve(zeros(grid), Potential.inverse_distance(0.05, 3), Nonlinearity(3), CFG)
    assert sol.converged
    assert all(np.all(u.values == 0) for u in sol.interior)


def test_contraction_run(grid, bump, calib):
    V = Potential.inverse_distance(0.05, 3)
    rep = check_admissibility(bump, V, CFG, calib)
    assert rep.admissible
    sol = picard_solve(bump, V, Nonlinearity(3), CFG, admissibility=rep, keep_history=True)
    assert sol.converged and sol.corrections <= 20
    assert max(sol.ratios) < 1
    assert sol.differences[-1] < CFG.residual_tolerance
    assert max(fixed_point_residual(sol, V, Nonlinearity(3))) <= 2 * CFG.residual_tolerance
    assert max(sol.iterate_norms) <= rep.ball_radius
    assert len(sol.history) == sol.corrections + 1
    report = contraction_report(sol)
    assert report.contracting and report.max_ratio < 1


def test_divergent_run_is_a_status(grid, bump, calib):
    V = Potential.inverse_distance(3.0, 3)
    rep = check_admissibility(bump, V, CFG, calib)
    sol = picard_solve(bump, V, Nonlinearity(3), SolverConfig(**{**CFG.__dict__, "max_iterations": 4}),
                       admissibility=rep, override=True)
    assert sol.status == "diverged" and not sol.converged
    report = contraction_report(sol)
    assert report.flagged and not report.contracting


def test_blow_up_raises_numerical_failure(grid):
    big = sample_field(lambda x: 1e120 * np.exp(-np.sum(x * x, axis=-1)), grid)
    with pytest.raises(NumericalFailure):
        picard_solve(big, Potential(), Nonlinearity(3), CFG)


def test_contraction_report_needs_two_iterates(grid, bump):
    sol = picard_solve(bump, Potential(), Nonlinearity(3, sign=0), CFG)
    sol.differences = sol.differences[:1]
    with pytest.raises(ConfigurationError):
        contraction_report(sol)


def test_sampled_potential_accepted(grid, bump):
    V = Potential.inverse_distance(0.05, 3)
    a = picard_solve(bump, V, Nonlinearity(3), CFG)
    b = picard_solve(bump, evaluate_potential(V, grid), Nonlinearity(3), CFG)
    np.testing.assert_array_equal(a.boundary_trajectory, b.boundary_trajectory)


def test_admissibility_uses_calibration_numbers(grid, bump):
    cal = Calibration(delta1=0.5, delta2=2.0, K=0.1)
    rep = check_admissibility(bump, Potential.inverse_distance(0.1, 3), CFG, cal)
    assert rep.gamma == pytest.approx(0.5 * rep.V_norm)
    assert rep.u0_bound == pytest.approx(rep.epsilon / 2.0)
    assert rep.condition < 1
