import click

from freestm.commands.base import RunOptions, common_options, execute
from freestm.schemas.common import ExperimentKind
from freestm.schemas.config import RunConfig
from freestm.schemas.reports import BoundReport
from freestm.services.analysis import bound_table
from freestm.services.exporters import format_value
from freestm.services.pool import WorkerPool


def run_bounds(config: RunConfig, pool: WorkerPool) -> BoundReport:
    experiment = config.experiment
    if experiment.constants == "from_model":
        constants = config.build_model().stability_constants
    else:
        constants = experiment.constants.to_constants()
    return bound_table(
        config.theta,
        constants.l_prime,
        constants.k_hat,
        constants.k_bar,
        experiment.h_values,
        seed=config.seed,
    )


def summarize_bounds(report: BoundReport) -> str:
    rates = " ".join(f"decay({p.h:g})={format_value(p.decay_rate)}" for p in report.points)
    return f"h_max={format_value(report.h_max)} {rates}"


@click.command("bounds")
@common_options
def bounds(options: RunOptions):
    """Theoretical stability step-size limit and decay rates (no simulation)."""
    execute(ExperimentKind.bounds, options, run_bounds, summarize_bounds)
