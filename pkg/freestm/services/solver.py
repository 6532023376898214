"""
Free stochastic theta method.

One step from U_n with increment dW:

    X       = U_n + (1 - theta) h alpha(U_n) + sum_i beta_i(U_n) dW gamma_i(U_n)
    U_{n+1} = f^{-1}(X),   f(y) = y - theta h alpha(y)

theta = 0 is free Euler-Maruyama (no implicit solve at all), theta = 1 is free
backward Euler.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, List, Literal, Optional, Tuple

import numpy as np

from freestm.exceptions import ConfigError, NumericalError, SimulationError, StabilityHypothesisError
from freestm.models.base import ModelSpec, drift_eval, evaluate_diffusion
from freestm.schemas.solver import SolverConfig
from freestm.services.implicit import ImplicitSolver, get_implicit_solver
from freestm.services.linalg import SymMatrix
from freestm.services.noise import NoisePath
from freestm.utils.logging import get_logger

logger = get_logger(__name__)

Observer = Callable[[int, float, SymMatrix], None]


@dataclass(frozen=True)
class StepDiagnostics:
    iterations: int
    residual: float
    clamped: int


@dataclass
class Trajectory:
    times: np.ndarray
    states: List[SymMatrix]
    diagnostics: List[StepDiagnostics] = field(default_factory=list)

    @property
    def initial(self) -> SymMatrix:
        return self.states[0]

    @property
    def final(self) -> SymMatrix:
        return self.states[-1]

    @property
    def max_residual(self) -> float:
        return max((d.residual for d in self.diagnostics), default=0.0)

    @property
    def max_iterations(self) -> int:
        return max((d.iterations for d in self.diagnostics), default=0)

    @property
    def total_clamped(self) -> int:
        return sum(d.clamped for d in self.diagnostics)


def stm_step(
    model: ModelSpec,
    u_n: SymMatrix,
    dw: SymMatrix,
    cfg: SolverConfig,
    solver: Optional[ImplicitSolver] = None,
) -> Tuple[SymMatrix, StepDiagnostics]:
    diffusion, clamped = evaluate_diffusion(model, u_n, dw, cfg.clamp_tol)
    if cfg.theta == 0.0:
        return u_n + cfg.h * drift_eval(model, u_n) + diffusion, StepDiagnostics(0, 0.0, clamped)

    explicit_weight = (1.0 - cfg.theta) * cfg.h
    x = u_n + diffusion if explicit_weight == 0.0 else u_n + explicit_weight * drift_eval(model, u_n) + diffusion
    if solver is None:
        solver = get_implicit_solver(model, cfg)
    result = solver.solve(model, x, u_n, cfg.theta, cfg.h)
    return result.value, StepDiagnostics(result.iterations, result.residual, clamped)


def simulate(
    model: ModelSpec,
    initial: SymMatrix,
    path: Optional[NoisePath],
    cfg: SolverConfig,
    *,
    store: Literal["all", "endpoints"] = "all",
    observer: Optional[Observer] = None,
) -> Trajectory:
    """
    Run cfg.P theta-method steps driven by `path`.

    store="endpoints" keeps only the initial and final state (times still holds
    the full grid); use `observer` to collect per-step statistics instead.
    """
    if cfg.P > 0:
        if path is None:
            raise ConfigError(f"a noise path with P={cfg.P} steps is required")
        if path.steps != cfg.P:
            raise ConfigError(f"noise path has {path.steps} steps but the solver expects P={cfg.P}")
        if not math.isclose(path.step_size, cfg.h, rel_tol=1e-12):
            raise ConfigError(f"noise path step {path.step_size!r} does not match solver h={cfg.h!r}")
        if path.dim != initial.dim:
            raise ConfigError(f"noise dimension {path.dim} does not match initial value dimension {initial.dim}")

    solver = get_implicit_solver(model, cfg) if cfg.theta > 0.0 else None
    times = np.arange(cfg.P + 1) * cfg.h
    states = [initial]
    diagnostics: List[StepDiagnostics] = []
    if observer is not None:
        observer(0, 0.0, initial)
    if cfg.P == 0:
        return Trajectory(times=times, states=states, diagnostics=diagnostics)

    u = initial
    for n, dw in enumerate(path.increments()):
        try:
            u, diag = stm_step(model, u, dw, cfg, solver)
        except NumericalError as exc:
            raise SimulationError(f"step {n} of {cfg.P} failed: {exc}", step=n) from exc
        diagnostics.append(diag)
        if observer is not None:
            observer(n + 1, float(times[n + 1]), u)
        if store == "all":
            states.append(u)

    if store != "all":
        states.append(u)
    clamped = sum(d.clamped for d in diagnostics)
    if clamped:
        logger.warning(f"[simulate] {model.name}: {clamped} eigenvalue(s) clamped below the sqrt domain")
    return Trajectory(times=times, states=states, diagnostics=diagnostics)


@dataclass(frozen=True)
class StabilityBound:
    """Mean-square stability bound: |U_n|^2 <= exp(-C(h) n h) |U_0|^2 for 0 < h < h_max."""

    theta: float
    l_prime: float
    k_hat: float
    k_bar: float
    h_max: float

    def decay_rate(self, h: float) -> float:
        gap = 2.0 * self.l_prime - self.k_hat
        return (gap - (1.0 - self.theta) ** 2 * self.k_bar * h) / (1.0 + 2.0 * self.l_prime * self.theta * h)

    def is_stable(self, h: float) -> bool:
        return 0.0 < h < self.h_max


def stability_bound(theta: float, l_prime: float, k_hat: float, k_bar: float) -> StabilityBound:
    if not 0.0 <= theta <= 1.0:
        raise ConfigError(f"theta must lie in [0, 1], got {theta}")
    if not 2.0 * l_prime > k_hat:
        raise StabilityHypothesisError(
            f"stability hypothesis 2L' > K_hat fails (2*{l_prime:g} <= {k_hat:g}); no bound available"
        )
    explicit_part = (1.0 - theta) ** 2 * k_bar
    h_max = math.inf if explicit_part == 0.0 else (2.0 * l_prime - k_hat) / explicit_part
    return StabilityBound(theta=theta, l_prime=l_prime, k_hat=k_hat, k_bar=k_bar, h_max=h_max)
