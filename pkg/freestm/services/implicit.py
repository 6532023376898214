"""
Implicit drift solves: find Y with Y - theta*h*alpha(Y) = X.

Three strategies share one interface:
- closed_form: the model's exact inverse of f(y) = y - theta*h*alpha(y)
- spectral_newton: eigendecompose X and invert f eigenvalue by eigenvalue
  with safeguarded Newton (bisection fallback inside a monotone bracket)
- fixed_point: V <- X + theta*h*alpha(V), a contraction when theta*h*L0 < 1
"""
from dataclasses import dataclass
from typing import Protocol, Tuple

import numpy as np

from freestm.exceptions import ConfigError, ImplicitSolveError
from freestm.models.base import ModelSpec, ScalarFn, drift_eval, lift
from freestm.schemas.common import Strategy
from freestm.schemas.solver import SolverConfig
from freestm.services.linalg import SymMatrix, eigh, l2_norm
from freestm.utils.logging import get_logger

logger = get_logger(__name__)

_MAX_BRACKET_EXPANSIONS = 64


@dataclass(frozen=True)
class ImplicitResult:
    value: SymMatrix
    iterations: int
    residual: float


class ImplicitSolver(Protocol):
    def solve(self, model: ModelSpec, x: SymMatrix, u_n: SymMatrix, theta: float, h: float) -> ImplicitResult:
        """Return Y solving Y - theta*h*alpha(Y) = X"""
        ...


def implicit_residual(model: ModelSpec, y: SymMatrix, x: SymMatrix, theta: float, h: float) -> float:
    return l2_norm(y - theta * h * drift_eval(model, y) - x)


class ClosedFormSolver:
    def solve(self, model: ModelSpec, x: SymMatrix, u_n: SymMatrix, theta: float, h: float) -> ImplicitResult:
        if model.implicit_closed_form is None:
            raise ConfigError(f"model {model.name} has no closed-form implicit solve")
        inverse = model.implicit_closed_form(theta, h)
        y, _ = lift(inverse, x)
        return ImplicitResult(value=y, iterations=0, residual=implicit_residual(model, y, x, theta, h))


def solve_monotone(
    fn: ScalarFn, x: np.ndarray, c: float, tol: float, max_iter: int
) -> Tuple[np.ndarray, int]:
    """
    Solve y - c*fn(y) = x elementwise for a strictly increasing left-hand side.

    Newton from y = x, falling back to bisection whenever the Newton step
    leaves the current bracket.
    """
    x = np.asarray(x, dtype=np.float64)

    def g(y):
        return y - c * fn.eval(y) - x

    width = np.maximum(c * np.abs(fn.eval(x)), 1e-12 * (1.0 + np.abs(x)))
    lo, hi = x - width, x + width
    for _ in range(_MAX_BRACKET_EXPANSIONS):
        g_lo, g_hi = g(lo), g(hi)
        low_bad = ~(g_lo <= 0.0)
        high_bad = ~(g_hi >= 0.0)
        if not (low_bad.any() or high_bad.any()):
            break
        lo = np.where(low_bad, lo - width, lo)
        hi = np.where(high_bad, hi + width, hi)
        width = 2.0 * width
    else:
        raise ImplicitSolveError(
            "could not bracket the implicit root; theta*h is likely too large for this drift"
        )

    y = x.copy()
    gy = g(y)
    for iteration in range(1, max_iter + 1):
        lo = np.where(gy < 0.0, y, lo)
        hi = np.where(gy > 0.0, y, hi)
        slope = 1.0 - c * fn.derivative_at(y)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = y - gy / slope
        outside = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        y = np.where(outside, 0.5 * (lo + hi), newton)
        gy = g(y)
        converged = (np.abs(gy) <= tol) | (hi - lo <= 4.0 * np.finfo(float).eps * (1.0 + np.abs(y)))
        if converged.all():
            return y, iteration
    raise ImplicitSolveError(
        f"spectral Newton did not converge in {max_iter} iterations (max residual {np.max(np.abs(gy)):.3e})"
    )


class SpectralNewtonSolver:
    def __init__(self, tol: float = 1e-12, max_iter: int = 100):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, model: ModelSpec, x: SymMatrix, u_n: SymMatrix, theta: float, h: float) -> ImplicitResult:
        c = theta * h
        if c == 0.0:
            return ImplicitResult(value=x, iterations=0, residual=0.0)
        spec = eigh(x)
        y, iterations = solve_monotone(model.drift, spec.eigenvalues, c, self.tol, self.max_iter)
        value = spec.reconstruct(y)
        return ImplicitResult(
            value=value, iterations=iterations, residual=implicit_residual(model, value, x, theta, h)
        )


class FixedPointSolver:
    def __init__(self, tol: float = 1e-12, max_iter: int = 100):
        self.tol = tol
        self.max_iter = max_iter

    def solve(self, model: ModelSpec, x: SymMatrix, u_n: SymMatrix, theta: float, h: float) -> ImplicitResult:
        c = theta * h
        if c == 0.0:
            return ImplicitResult(value=x, iterations=1, residual=0.0)
        v = u_n
        for iteration in range(1, self.max_iter + 1):
            v_next = x + c * drift_eval(model, v)
            change = l2_norm(v_next - v)
            v = v_next
            if change <= self.tol:
                return ImplicitResult(
                    value=v, iterations=iteration, residual=implicit_residual(model, v, x, theta, h)
                )
        raise ImplicitSolveError(
            f"fixed-point iteration did not converge in {self.max_iter} iterations (last change {change:.3e})"
        )


def resolve_strategy(model: ModelSpec, strategy: Strategy) -> Strategy:
    if strategy is Strategy.auto:
        return Strategy.closed_form if model.implicit_closed_form is not None else Strategy.spectral_newton
    return strategy


def check_admissible(model: ModelSpec, cfg: SolverConfig) -> Strategy:
    """Resolve `auto` and check the strategy's step-size precondition."""
    strategy = resolve_strategy(model, cfg.strategy)
    if strategy is Strategy.closed_form and model.implicit_closed_form is None:
        raise ConfigError(f"strategy closed_form requested but model {model.name} has none")
    if cfg.theta > 0.0:
        if strategy is Strategy.closed_form:
            model.implicit_closed_form(cfg.theta, cfg.h)
        bound = model.drift.lipschitz_bound
        contraction = None if bound is None else cfg.theta * cfg.h * bound
        if strategy is Strategy.fixed_point:
            if contraction is None:
                raise ConfigError(f"fixed_point needs a drift Lipschitz bound; model {model.name} has none")
            if contraction >= 1.0:
                raise ConfigError(
                    f"fixed_point is not a contraction: theta*h*L0 = {contraction:g} >= 1; "
                    f"use h < {1.0 / (cfg.theta * bound):g} or another strategy"
                )
        elif strategy is Strategy.spectral_newton and contraction is not None and contraction >= 1.0:
            logger.warning(
                f"theta*h*L0 = {contraction:g} >= 1: monotonicity of the implicit map is not guaranteed"
            )
    return strategy


def get_implicit_solver(model: ModelSpec, cfg: SolverConfig) -> ImplicitSolver:
    strategy = check_admissible(model, cfg)
    if strategy is Strategy.closed_form:
        return ClosedFormSolver()
    elif strategy is Strategy.spectral_newton:
        return SpectralNewtonSolver(tol=cfg.newton_tol, max_iter=cfg.max_iter)
    elif strategy is Strategy.fixed_point:
        return FixedPointSolver(tol=cfg.fp_tol, max_iter=cfg.max_iter)
    else:
        raise ValueError(f"Unknown implicit strategy: {strategy}")
