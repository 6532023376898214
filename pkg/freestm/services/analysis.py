"""
Experiment harness: spectra, strong convergence order, mean-square stability
sweeps and moment checks.

Every experiment fans out over (path_id, ...) tasks through the worker pool and
reduces the results in task order. Path p always uses the noise sub-stream
(seed, p), so compared configurations share their random numbers.
"""
import math
import time
from typing import List, Optional, Sequence, Tuple

import numpy as np

from freestm.exceptions import ConfigError, NumericalError, StabilityHypothesisError
from freestm.models.base import ModelSpec, StabilityConstants
from freestm.schemas.common import Classification, StabilityMode
from freestm.schemas.reports import (
    BoundPoint,
    BoundReport,
    ConvergenceReport,
    EfficiencyComparison,
    Histogram,
    LadderPoint,
    MomentReport,
    MomentRow,
    SimulationReport,
    SimulationRow,
    SpectrumReport,
    StabilityReport,
    StabilitySeries,
)
from freestm.schemas.solver import SolverOptions
from freestm.services.implicit import get_implicit_solver
from freestm.services.linalg import SymMatrix, eigvalsh, l2_norm, normalized_trace
from freestm.services.noise import RandomStream, coarsen, generate_path, sample_increment
from freestm.services.oracles import predicted_moments
from freestm.services.pool import WorkerPool, run_ordered
from freestm.services.solver import simulate, stability_bound, stm_step
from freestm.utils.logging import get_logger

logger = get_logger(__name__)

STABLE_RATIO = 1e-4
UNSTABLE_RATIO = 10.0
DEFAULT_BINS = 50


def histogram_from_eigenvalues(values: np.ndarray, bins: int = DEFAULT_BINS) -> Histogram:
    if bins < 1:
        raise ConfigError(f"bins must be >= 1, got {bins}")
    values = np.asarray(values, dtype=np.float64)
    counts, edges = np.histogram(values, bins=bins, range=(float(values.min()), float(values.max())))
    widths = np.diff(edges)
    total = counts.sum()
    density = counts / (total * widths) if total > 0 else np.zeros(bins)
    return Histogram(bin_edges=edges.tolist(), counts=counts.tolist(), density=density.tolist())


def spectral_histogram(u: SymMatrix, bins: int = DEFAULT_BINS) -> Histogram:
    return histogram_from_eigenvalues(eigvalsh(u), bins)


def fit_loglog_slope(points: Sequence[Tuple[float, float]]) -> Tuple[float, float]:
    """Least-squares line through (log h, log e); returns (slope, intercept)."""
    if len(points) < 2:
        raise ValueError(f"need at least 2 points for a slope, got {len(points)}")
    h = np.array([p[0] for p in points], dtype=np.float64)
    e = np.array([p[1] for p in points], dtype=np.float64)
    if np.any(h <= 0) or np.any(e <= 0):
        raise ValueError("log-log fit needs strictly positive step sizes and errors")
    slope, intercept = np.polyfit(np.log(h), np.log(e), 1)
    return float(slope), float(intercept)


def steps_for(T: float, h: float) -> int:
    steps = round(T / h)
    if steps < 1 or abs(steps * h - T) > 1e-9 * max(T, 1.0):
        raise ConfigError(f"step size h={h:g} does not divide the horizon T={T:g}")
    return steps


def spectrum_experiment(
    model: ModelSpec,
    initial: SymMatrix,
    M: int,
    P: int,
    T: float,
    theta: float,
    seed: int,
    bins: int = DEFAULT_BINS,
    options: SolverOptions = SolverOptions(),
    pool: Optional[WorkerPool] = None,
    initial_scale: Optional[float] = None,
) -> SpectrumReport:
    """Eigenvalues of the terminal states of M paths, pooled into one histogram."""
    N = initial.dim
    h = T / P
    cfg = options.configure(theta, h, P)

    def task(path_id: int) -> np.ndarray:
        path = generate_path(N, P, h, seed, path_id)
        return eigvalsh(simulate(model, initial, path, cfg, store="endpoints").final)

    logger.info(f"[spectrum] {model.name}: N={N} M={M} P={P} theta={theta}")
    eigenvalues = np.concatenate(run_ordered(task, range(M), pool))
    mean = float(eigenvalues.mean())
    second = float(np.mean(eigenvalues ** 2))
    oracle = predicted_moments(model, initial_scale, T) if initial_scale is not None else None
    return SpectrumReport(
        seed=seed,
        model=model.name,
        theta=theta,
        N=N,
        M=M,
        T=T,
        h=h,
        histogram=histogram_from_eigenvalues(eigenvalues, bins),
        mean=mean,
        second_moment=second,
        variance=second - mean * mean,
        lambda_min=float(eigenvalues.min()),
        lambda_max=float(eigenvalues.max()),
        max_abs=float(np.abs(eigenvalues).max()),
        oracle_mean=oracle.mean if oracle else None,
        oracle_variance=oracle.variance if oracle else None,
        oracle_support=list(oracle.support) if oracle and oracle.support else None,
    )


def strong_error_experiment(
    model: ModelSpec,
    initial: SymMatrix,
    M: int,
    P: int,
    h_fine: float,
    R_list: Sequence[int],
    theta: float,
    seed: int,
    options: SolverOptions = SolverOptions(),
    pool: Optional[WorkerPool] = None,
) -> ConvergenceReport:
    """
    Root-mean-square distance at the final time between the fine-grid solution
    and the solutions on grids coarsened by each R, driven by the same noise.
    """
    N = initial.dim
    ladder = sorted(set(int(r) for r in R_list))
    for factor in ladder:
        if factor < 1 or P % factor != 0:
            raise ConfigError(f"refinement factor R={factor} must be a positive divisor of P={P}")

    def task(path_id: int) -> List[float]:
        path = generate_path(N, P, h_fine, seed, path_id)
        reference = simulate(model, initial, path, options.configure(theta, h_fine, P), store="endpoints").final
        squared = []
        for factor in ladder:
            coarse = coarsen(path, factor)
            cfg = options.configure(theta, coarse.step_size, coarse.steps)
            final = simulate(model, initial, coarse, cfg, store="endpoints").final
            squared.append(l2_norm(reference - final) ** 2)
        logger.debug(f"[converge] path {path_id} done")
        return squared

    started = time.perf_counter()
    logger.info(f"[converge] {model.name}: N={N} M={M} P={P} R={ladder} theta={theta}")
    per_path = np.array(run_ordered(task, range(M), pool))
    errors = np.sqrt(per_path.mean(axis=0))
    points = [
        LadderPoint(R=factor, h=factor * h_fine, error=float(err)) for factor, err in zip(ladder, errors)
    ]
    positive = [(p.h, p.error) for p in points if p.error > 0]
    slope, intercept = fit_loglog_slope(positive) if len(positive) >= 2 else (None, None)
    logger.info(f"[converge] finished in {time.perf_counter() - started:.2f}s, slope={slope}")
    return ConvergenceReport(
        seed=seed,
        model=model.name,
        theta=theta,
        N=N,
        M=M,
        P=P,
        h_fine=h_fine,
        ladder=points,
        slope=slope,
        intercept=intercept,
    )


def classify_series(mean_square: Sequence[float]) -> Classification:
    initial, terminal = mean_square[0], mean_square[-1]
    if not math.isfinite(terminal):
        return Classification.unstable
    if not initial > 0:
        return Classification.inconclusive
    if terminal <= STABLE_RATIO * initial:
        return Classification.stable
    if terminal >= UNSTABLE_RATIO * initial:
        return Classification.unstable
    return Classification.inconclusive


def _decay_factors(mean_square: np.ndarray) -> List[Optional[float]]:
    factors: List[Optional[float]] = []
    for current, following in zip(mean_square[:-1], mean_square[1:]):
        if current > 0 and math.isfinite(current) and math.isfinite(following):
            factors.append(math.sqrt(following / current))
        else:
            factors.append(None)
    return factors


def _empirical_decay_rate(times: np.ndarray, mean_square: np.ndarray) -> Optional[float]:
    usable = np.isfinite(mean_square) & (mean_square > 0)
    if usable.sum() < 2:
        return None
    slope, _ = np.polyfit(times[usable], np.log(mean_square[usable]), 1)
    return float(-slope)


def stability_experiment(
    model: ModelSpec,
    mode: StabilityMode,
    initials: Sequence[SymMatrix],
    M: int,
    T: float,
    h_list: Sequence[float],
    theta: float,
    seed: int,
    options: SolverOptions = SolverOptions(),
    constants: Optional[StabilityConstants] = None,
    pool: Optional[WorkerPool] = None,
) -> StabilityReport:
    """
    Mean-square behaviour of the scheme for each step size.

    mode=norm tracks E|U_n|^2; mode=perturbation runs two initial values on the
    same increments and tracks E|U_n - V_n|^2. A path that overflows or fails
    numerically counts as diverged from that step on.
    The theoretical bound is reported only when the stability constants
    describe the tracked system.
    """
    mode = StabilityMode(mode)
    if mode is StabilityMode.perturbation and len(initials) != 2:
        raise ConfigError("perturbation mode needs exactly two initial values")
    if mode is StabilityMode.norm and len(initials) != 1:
        raise ConfigError("norm mode needs exactly one initial value")
    N = initials[0].dim
    grid = [(float(h), steps_for(T, float(h))) for h in h_list]
    constants = constants if constants is not None else model.stability_constants
    bound = None
    if constants is not None and not constants.describes(mode):
        logger.info(f"[stability] {model.name} constants do not describe the {mode.value} system; no theoretical bound")
    elif constants is not None:
        try:
            bound = stability_bound(theta, constants.l_prime, constants.k_hat, constants.k_bar)
        except StabilityHypothesisError as exc:
            logger.warning(f"[stability] no theoretical bound: {exc}")

    def task(item: Tuple[int, int]) -> np.ndarray:
        grid_index, path_id = item
        h, steps = grid[grid_index]
        cfg = options.configure(theta, h, steps)
        solver = get_implicit_solver(model, cfg) if theta > 0 else None
        path = generate_path(N, steps, h, seed, path_id)
        series = np.full(steps + 1, np.inf)
        states = list(initials)
        series[0] = _tracked(states) ** 2
        with np.errstate(over="ignore", invalid="ignore"):
            for n, dw in enumerate(path.increments()):
                try:
                    states = [stm_step(model, s, dw, cfg, solver)[0] for s in states]
                except NumericalError as exc:
                    logger.warning(f"[stability] h={h:g} path {path_id} diverged at step {n}: {exc}")
                    break
                value = _tracked(states) ** 2
                if not math.isfinite(value):
                    break
                series[n + 1] = value
        return series

    started = time.perf_counter()
    logger.info(f"[stability] {model.name} {mode.value}: N={N} M={M} T={T} h={[h for h, _ in grid]} theta={theta}")
    series_list = []
    for i, (h, steps) in enumerate(grid):
        level_started = time.perf_counter()
        paths = run_ordered(task, [(i, p) for p in range(M)], pool)
        logger.info(f"[stability] h={h:g}: {steps} steps in {time.perf_counter() - level_started:.2f}s")
        mean_square = np.mean(np.stack(paths), axis=0)
        times = np.arange(steps + 1) * h
        theoretical, theoretical_rate = None, None
        if bound is not None:
            if bound.is_stable(h):
                theoretical, theoretical_rate = Classification.stable, bound.decay_rate(h)
            else:
                theoretical = Classification.inconclusive
        series_list.append(
            StabilitySeries(
                h=h,
                steps=steps,
                times=times.tolist(),
                mean_square=mean_square.tolist(),
                decay_factors=_decay_factors(mean_square),
                empirical=classify_series(mean_square),
                empirical_decay_rate=_empirical_decay_rate(times, mean_square),
                theoretical=theoretical,
                theoretical_decay_rate=theoretical_rate,
            )
        )
    stable = [s.h for s in series_list if s.empirical is Classification.stable]
    logger.info(f"[stability] finished in {time.perf_counter() - started:.2f}s")
    return StabilityReport(
        seed=seed,
        model=model.name,
        mode=mode,
        theta=theta,
        N=N,
        M=M,
        T=T,
        h_max=bound.h_max if bound is not None else None,
        series=series_list,
        largest_stable_h=max(stable) if stable else None,
    )


def _tracked(states: Sequence[SymMatrix]) -> float:
    if len(states) == 1:
        return l2_norm(states[0])
    return l2_norm(states[0] - states[1])


def compare_efficiency(explicit: StabilityReport, implicit: StabilityReport) -> EfficiencyComparison:
    """Steps needed by each scheme at its largest empirically stable step size."""

    def cheapest(report: StabilityReport) -> Tuple[Optional[float], Optional[int]]:
        if report.largest_stable_h is None:
            return None, None
        series = next(s for s in report.series if s.h == report.largest_stable_h)
        return series.h, series.steps

    explicit_h, explicit_steps = cheapest(explicit)
    implicit_h, implicit_steps = cheapest(implicit)
    fewer = None
    if implicit_steps is not None:
        fewer = explicit_steps is None or implicit_steps < explicit_steps
    return EfficiencyComparison(
        explicit_theta=explicit.theta,
        implicit_theta=implicit.theta,
        explicit_h=explicit_h,
        explicit_steps=explicit_steps,
        implicit_h=implicit_h,
        implicit_steps=implicit_steps,
        implicit_fewer_steps=fewer,
    )


def _mean_and_error(samples: np.ndarray) -> Tuple[float, float]:
    mean = float(samples.mean())
    if samples.size < 2:
        return mean, 0.0
    return mean, float(samples.std(ddof=1) / math.sqrt(samples.size))


def _z_score(empirical: float, predicted: Optional[float], std_error: float) -> Optional[float]:
    if predicted is None:
        return None
    if std_error > 0:
        return (empirical - predicted) / std_error
    return 0.0 if empirical == predicted else math.copysign(math.inf, empirical - predicted)


def ito_moment_check(
    N: int,
    M: int,
    h: float,
    A: SymMatrix,
    B: SymMatrix,
    seed: int,
    pool: Optional[WorkerPool] = None,
) -> MomentReport:
    """
    Monte Carlo check of psi(A dW B dW) = psi(A) psi(B) h.

    At finite N the exact expectation of tr_N(A dW B dW) is
    h (tr_N(A) tr_N(B) + tr_N(AB) / N); the z-score is taken against that.
    """
    if A.dim != N or B.dim != N:
        raise ConfigError(f"A and B must be {N}x{N}")

    def task(draw: int) -> float:
        dw = sample_increment(N, h, RandomStream(seed, draw)).entries
        return float(np.sum((A.entries @ dw) * (B.entries @ dw).T)) / N

    samples = np.array(run_ordered(task, range(M), pool))
    empirical, std_error = _mean_and_error(samples)
    limit = h * normalized_trace(A) * normalized_trace(B)
    finite_n = limit + h * float(np.sum(A.entries * B.entries)) / (N * N)
    rows = [
        MomentRow(quantity="ito_free_limit", empirical=empirical, predicted=limit, std_error=std_error,
                  z_score=_z_score(empirical, limit, std_error)),
        MomentRow(quantity="ito_finite_n", empirical=empirical, predicted=finite_n, std_error=std_error,
                  z_score=_z_score(empirical, finite_n, std_error)),
    ]
    logger.info(f"[moments] ito: empirical={empirical:.6g} finite-N prediction={finite_n:.6g}")
    return MomentReport(seed=seed, quantity="ito", N=N, M=M, h=h, rows=rows)


def trace_moments_experiment(
    model: ModelSpec,
    initial_scale: float,
    N: int,
    M: int,
    P: int,
    T: float,
    theta: float,
    seed: int,
    options: SolverOptions = SolverOptions(),
    pool: Optional[WorkerPool] = None,
) -> MomentReport:
    """E[tr_N(U_T)] and the spectral variance E[tr_N(U_T^2) - tr_N(U_T)^2] against the oracles."""
    h = T / P
    cfg = options.configure(theta, h, P)
    initial = SymMatrix.identity(N, initial_scale)

    def task(path_id: int) -> Tuple[float, float]:
        path = generate_path(N, P, h, seed, path_id)
        final = simulate(model, initial, path, cfg, store="endpoints").final
        mean = normalized_trace(final)
        return mean, l2_norm(final) ** 2 - mean * mean

    logger.info(f"[moments] trace: {model.name} N={N} M={M} P={P} T={T} theta={theta}")
    samples = np.array(run_ordered(task, range(M), pool))
    oracle = predicted_moments(model, initial_scale, T)
    rows = []
    for column, quantity, predicted in ((0, "mean", oracle.mean), (1, "variance", oracle.variance)):
        empirical, std_error = _mean_and_error(samples[:, column])
        rows.append(MomentRow(quantity=quantity, empirical=empirical, predicted=predicted,
                              std_error=std_error, z_score=_z_score(empirical, predicted, std_error)))
    return MomentReport(seed=seed, quantity="trace", N=N, M=M, h=h, rows=rows)


def simulation_experiment(
    model: ModelSpec,
    initial_scale: float,
    N: int,
    M: int,
    P: int,
    T: float,
    theta: float,
    seed: int,
    options: SolverOptions = SolverOptions(),
    pool: Optional[WorkerPool] = None,
) -> SimulationReport:
    """Per-step trace, mean-square norm and spectral extremes, aggregated over M paths."""
    h = T / P
    cfg = options.configure(theta, h, P)
    initial = SymMatrix.identity(N, initial_scale)

    def task(path_id: int):
        stats = np.empty((P + 1, 4))

        def observe(step: int, t: float, u: SymMatrix) -> None:
            eigenvalues = eigvalsh(u)
            stats[step] = (normalized_trace(u), l2_norm(u) ** 2, eigenvalues[0], eigenvalues[-1])

        path = generate_path(N, P, h, seed, path_id) if P > 0 else None
        trajectory = simulate(model, initial, path, cfg, store="endpoints", observer=observe)
        return stats, trajectory.max_residual, trajectory.max_iterations, trajectory.total_clamped

    logger.info(f"[simulate] {model.name}: N={N} M={M} P={P} T={T} theta={theta}")
    results = run_ordered(task, range(M), pool)
    stacked = np.stack([r[0] for r in results])
    rows = []
    for step in range(P + 1):
        t = step * h
        support = predicted_moments(model, initial_scale, t).support if t > 0 else None
        rows.append(
            SimulationRow(
                step=step,
                time=t,
                mean_trace=float(stacked[:, step, 0].mean()),
                mean_square_norm=float(stacked[:, step, 1].mean()),
                lambda_min=float(stacked[:, step, 2].min()),
                lambda_max=float(stacked[:, step, 3].max()),
                support_lower=support[0] if support else None,
                support_upper=support[1] if support else None,
            )
        )
    return SimulationReport(
        seed=seed,
        model=model.name,
        theta=theta,
        N=N,
        M=M,
        P=P,
        T=T,
        rows=rows,
        max_residual=max(r[1] for r in results),
        max_iterations=max(r[2] for r in results),
        total_clamped=sum(r[3] for r in results),
    )


def bound_table(
    theta: float,
    l_prime: float,
    k_hat: float,
    k_bar: float,
    h_values: Sequence[float],
    seed: int = 0,
) -> BoundReport:
    """Theoretical h_max and decay rate C(h) for each requested step size."""
    bound = stability_bound(theta, l_prime, k_hat, k_bar)
    points = [
        BoundPoint(h=float(h), decay_rate=bound.decay_rate(float(h)), theoretically_stable=bound.is_stable(float(h)))
        for h in h_values
    ]
    return BoundReport(
        seed=seed,
        theta=theta,
        l_prime=l_prime,
        k_hat=k_hat,
        k_bar=k_bar,
        h_max=bound.h_max,
        points=points,
    )
