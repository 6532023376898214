import click

from freestm.commands.base import RunOptions, common_options, execute
from freestm.schemas.common import ExperimentKind, MomentQuantity
from freestm.schemas.config import RunConfig
from freestm.schemas.reports import (
    ConvergenceReport,
    MomentReport,
    SimulationReport,
    SpectrumReport,
    StabilityReport,
)
from freestm.services.analysis import (
    compare_efficiency,
    ito_moment_check,
    simulation_experiment,
    spectrum_experiment,
    stability_experiment,
    strong_error_experiment,
    trace_moments_experiment,
)
from freestm.services.exporters import format_value
from freestm.services.linalg import SymMatrix
from freestm.services.pool import WorkerPool


def run_spectrum(config: RunConfig, pool: WorkerPool) -> SpectrumReport:
    scale = config.initial_scale()
    return spectrum_experiment(
        config.build_model(),
        SymMatrix.identity(config.N, scale),
        M=config.M,
        P=config.P,
        T=config.T,
        theta=config.theta,
        seed=config.seed,
        bins=config.experiment.bins,
        options=config.solver,
        pool=pool,
        initial_scale=scale,
    )


def summarize_spectrum(report: SpectrumReport) -> str:
    line = (
        f"mean={format_value(report.mean)} second_moment={format_value(report.second_moment)} "
        f"max_abs={format_value(report.max_abs)}"
    )
    if report.oracle_variance is not None:
        line += f" oracle_variance={format_value(report.oracle_variance)}"
    return line


def run_converge(config: RunConfig, pool: WorkerPool) -> ConvergenceReport:
    return strong_error_experiment(
        config.build_model(),
        SymMatrix.identity(config.N, config.initial_scale()),
        M=config.M,
        P=config.P,
        h_fine=config.h,
        R_list=config.experiment.R_list,
        theta=config.theta,
        seed=config.seed,
        options=config.solver,
        pool=pool,
    )


def summarize_converge(report: ConvergenceReport) -> str:
    errors = " ".join(f"R={p.R}:{format_value(p.error)}" for p in report.ladder)
    return f"slope={format_value(report.slope) or 'n/a'} {errors}"


def run_stability(config: RunConfig, pool: WorkerPool) -> StabilityReport:
    experiment = config.experiment
    model = config.build_model()
    initials = [SymMatrix.identity(config.N, c) for c in experiment.initial_scales()]
    reports = [
        stability_experiment(
            model,
            experiment.mode,
            initials,
            M=config.M,
            T=config.T,
            h_list=h_list,
            theta=theta,
            seed=config.seed,
            options=config.solver,
            pool=pool,
        )
        for theta, h_list in experiment.sweeps(config.theta)
    ]
    report = reports[0]
    if len(reports) == 2:
        explicit, implicit = sorted(reports, key=lambda r: r.theta)
        report = report.model_copy(update={"efficiency": compare_efficiency(explicit, implicit)})
    return report


def summarize_stability(report: StabilityReport) -> str:
    rows = " ".join(f"h={s.h:g}:{s.empirical.value}" for s in report.series)
    summary = f"h_max={format_value(report.h_max) or 'n/a'} {rows}"
    if report.efficiency is not None:
        e = report.efficiency
        summary += (
            f" steps(theta={e.explicit_theta:g})={format_value(e.explicit_steps) or 'n/a'}"
            f" steps(theta={e.implicit_theta:g})={format_value(e.implicit_steps) or 'n/a'}"
        )
    return summary


def run_moments(config: RunConfig, pool: WorkerPool) -> MomentReport:
    experiment = config.experiment
    if experiment.quantity is MomentQuantity.ito:
        return ito_moment_check(
            config.N,
            config.M,
            config.h,
            experiment.A.build(config.N),
            experiment.B.build(config.N),
            seed=config.seed,
            pool=pool,
        )
    return trace_moments_experiment(
        config.build_model(),
        config.initial_scale(),
        N=config.N,
        M=config.M,
        P=config.P,
        T=config.T,
        theta=config.theta,
        seed=config.seed,
        options=config.solver,
        pool=pool,
    )


def summarize_moments(report: MomentReport) -> str:
    parts = []
    for row in report.rows:
        part = f"{row.quantity}={format_value(row.empirical)}"
        if row.predicted is not None:
            part += f" (predicted {format_value(row.predicted)}, z={row.z_score:.2f})"
        parts.append(part)
    return "; ".join(parts)


def run_simulate(config: RunConfig, pool: WorkerPool) -> SimulationReport:
    return simulation_experiment(
        config.build_model(),
        config.initial_scale(),
        N=config.N,
        M=config.M,
        P=config.P,
        T=config.T,
        theta=config.theta,
        seed=config.seed,
        options=config.solver,
        pool=pool,
    )


def summarize_simulate(report: SimulationReport) -> str:
    last = report.rows[-1]
    return (
        f"T={report.T:g} mean_trace={format_value(last.mean_trace)} "
        f"spectrum=[{format_value(last.lambda_min)}, {format_value(last.lambda_max)}] "
        f"max_iterations={report.max_iterations} clamped={report.total_clamped}"
    )


@click.command("spectrum")
@common_options
def spectrum(options: RunOptions):
    """Pooled terminal eigenvalue histogram."""
    execute(ExperimentKind.spectrum, options, run_spectrum, summarize_spectrum)


@click.command("converge")
@common_options
def converge(options: RunOptions):
    """Strong error against step size and the fitted order."""
    execute(ExperimentKind.converge, options, run_converge, summarize_converge)


@click.command("stability")
@common_options
def stability(options: RunOptions):
    """Mean-square stability sweep over step sizes."""
    execute(ExperimentKind.stability, options, run_stability, summarize_stability)


@click.command("moments")
@common_options
def moments(options: RunOptions):
    """Trace moments against oracles, or the free Ito product rule."""
    execute(ExperimentKind.moments, options, run_moments, summarize_moments)


@click.command("simulate")
@common_options
def simulate(options: RunOptions):
    """Per-step trace, norm and spectral extremes."""
    execute(ExperimentKind.simulate, options, run_simulate, summarize_simulate)


COMMANDS = (spectrum, converge, stability, moments, simulate)
