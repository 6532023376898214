import itertools
import logging
import math

import numpy as np
import pytest
from scipy.optimize import brentq

from freestm.exceptions import ConfigError, ImplicitSolveError
from freestm.models import ModelSpec, ScalarFn, builtin_model
from freestm.schemas.common import Strategy
from freestm.schemas.solver import SolverOptions
from freestm.services.implicit import (
    ClosedFormSolver,
    FixedPointSolver,
    SpectralNewtonSolver,
    check_admissible,
    get_implicit_solver,
    implicit_residual,
    resolve_strategy,
    solve_monotone,
)
from freestm.services.linalg import SymMatrix, l2_norm
from freestm.services.noise import generate_path
from freestm.services.solver import simulate


def cubic_model():
    drift = ScalarFn(eval=lambda x: -x ** 3, derivative=lambda x: -3.0 * x ** 2, name="-x^3")
    return ModelSpec(name="cubic", drift=drift, diffusion=())


def test_solve_monotone_cubic_matches_root_oracle():
    expected = brentq(lambda y: y + 0.1 * y ** 3 - 1.0, 0.0, 1.0, xtol=1e-14)
    y, iterations = solve_monotone(cubic_model().drift, np.array([1.0]), 0.1, 1e-13, 100)
    assert y[0] == pytest.approx(expected, abs=1e-10)
    assert y[0] == pytest.approx(0.92170, abs=1e-5)
    assert iterations >= 1


def test_solve_monotone_vectorized_over_eigenvalues():
    x = np.linspace(-5.0, 5.0, 11)
    y, _ = solve_monotone(cubic_model().drift, x, 0.5, 1e-13, 100)
    np.testing.assert_allclose(y + 0.5 * y ** 3, x, atol=1e-12)


def test_solve_monotone_reports_non_convergence():
    with pytest.raises(ImplicitSolveError, match="did not converge"):
        solve_monotone(cubic_model().drift, np.array([10.0]), 1.0, 1e-15, 1)


def test_spectral_newton_on_matrix_cubic(random_sym):
    x = random_sym(6, seed=1)
    result = SpectralNewtonSolver(tol=1e-13).solve(cubic_model(), x, x, 1.0, 0.1)
    assert result.residual == implicit_residual(cubic_model(), result.value, x, 1.0, 0.1)
    assert result.residual <= 1e-11


def test_spectral_newton_linear_matches_closed_form(random_sym):
    model = builtin_model("free_ou", {"mu": -3.0, "sigma": 1.0})
    x = random_sym(8, seed=2)
    newton = SpectralNewtonSolver().solve(model, x, x, 1.0, 0.5).value
    closed = ClosedFormSolver().solve(model, x, x, 1.0, 0.5).value
    assert l2_norm(newton - closed) <= 1e-10


def test_fixed_point_with_zero_theta_returns_x(random_sym):
    x = random_sym(4, seed=3)
    model = builtin_model("free_ou", {"mu": -3.0, "sigma": 1.0})
    result = FixedPointSolver().solve(model, x, SymMatrix.zeros(4), 0.0, 0.5)
    assert result.value is x
    assert result.iterations == 1


def test_fixed_point_linear_matches_closed_form_and_iteration_bound(random_sym):
    mu, theta, h, tol = -2.0, 1.0, 0.1, 1e-12
    model = builtin_model("free_ou", {"mu": mu, "sigma": 1.0})
    u_n = random_sym(6, seed=4)
    x = random_sym(6, seed=5)
    result = FixedPointSolver(tol=tol).solve(model, x, u_n, theta, h)
    closed = ClosedFormSolver().solve(model, x, u_n, theta, h).value
    ratio = theta * h * abs(mu)
    assert l2_norm(result.value - closed) <= tol / (1.0 - ratio)

    first_change = l2_norm(x + theta * h * mu * u_n - u_n)
    bound = math.ceil(math.log(tol / first_change) / math.log(ratio)) + 1
    assert result.iterations <= bound


def test_fixed_point_reports_non_convergence(random_sym):
    model = builtin_model("free_ou", {"mu": -2.0, "sigma": 1.0})
    x = random_sym(4, seed=6)
    with pytest.raises(ImplicitSolveError):
        FixedPointSolver(tol=1e-12, max_iter=2).solve(model, x, SymMatrix.zeros(4), 1.0, 0.1)


def test_auto_strategy_resolution():
    ou = builtin_model("free_ou", {"mu": -2.0, "sigma": 1.0})
    assert resolve_strategy(ou, Strategy.auto) is Strategy.closed_form
    assert resolve_strategy(cubic_model(), Strategy.auto) is Strategy.spectral_newton
    assert resolve_strategy(ou, Strategy.fixed_point) is Strategy.fixed_point


def test_get_implicit_solver_types():
    ou = builtin_model("free_ou", {"mu": -2.0, "sigma": 1.0})
    cfg = SolverOptions().configure(1.0, 0.1, 10)
    assert isinstance(get_implicit_solver(ou, cfg), ClosedFormSolver)
    assert isinstance(get_implicit_solver(cubic_model(), cfg), SpectralNewtonSolver)
    fp = SolverOptions(strategy="fixed_point").configure(1.0, 0.1, 10)
    assert isinstance(get_implicit_solver(ou, fp), FixedPointSolver)


def test_fixed_point_admissibility():
    ou = builtin_model("free_ou", {"mu": -4.0, "sigma": 1.0})
    with pytest.raises(ConfigError, match="contraction"):
        check_admissible(ou, SolverOptions(strategy="fixed_point").configure(1.0, 0.25, 4))
    with pytest.raises(ConfigError, match="Lipschitz"):
        check_admissible(cubic_model(), SolverOptions(strategy="fixed_point").configure(1.0, 0.01, 4))
    assert check_admissible(ou, SolverOptions(strategy="fixed_point").configure(1.0, 0.2, 4)) is Strategy.fixed_point


def test_spectral_newton_only_warns_on_large_steps(caplog):
    caplog.set_level(logging.WARNING)
    ou = builtin_model("free_ou", {"mu": -4.0, "sigma": 1.0})
    strategy = check_admissible(ou, SolverOptions(strategy="spectral_newton").configure(1.0, 4.0, 5))
    assert strategy is Strategy.spectral_newton
    assert "monotonicity" in caplog.text


def test_closed_form_missing_is_rejected():
    with pytest.raises(ConfigError, match="closed_form"):
        check_admissible(cubic_model(), SolverOptions(strategy="closed_form").configure(1.0, 0.1, 4))


def test_degenerate_closed_form_is_rejected():
    growing = builtin_model("free_ou", {"mu": 2.0, "sigma": 1.0})
    with pytest.raises(ConfigError, match="degenerate"):
        check_admissible(growing, SolverOptions().configure(1.0, 0.5, 4))


@pytest.mark.parametrize("name,params", [
    ("free_ou", {"mu": -2.0, "sigma": 1.0}),
    ("free_cir", {"alpha": 2.0, "beta": 4.0, "sigma": 1.0}),
])
@pytest.mark.parametrize("theta", [0.5, 1.0])
def test_strategies_agree_over_a_trajectory(name, params, theta):
    model = builtin_model(name, params)
    h, steps = 0.1, 100
    path = generate_path(8, steps, h, seed=99)
    initial = SymMatrix.identity(8)
    trajectories = {
        strategy: simulate(model, initial, path, SolverOptions(strategy=strategy).configure(theta, h, steps))
        for strategy in ("closed_form", "spectral_newton", "fixed_point")
    }
    for a, b in itertools.combinations(trajectories.values(), 2):
        for u, v in zip(a.states, b.states):
            assert l2_norm(u - v) <= 1e-9
