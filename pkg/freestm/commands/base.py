"""Options and the load/validate/run/write sequence shared by every command."""
import functools
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Optional

import click

from freestm.config import settings
from freestm.exceptions import ConfigError
from freestm.schemas.common import ExperimentKind
from freestm.schemas.config import RunConfig, load_config
from freestm.schemas.reports import ReportBase
from freestm.services.exporters import describe_outputs, write_results
from freestm.services.pool import WorkerPool, default_threads
from freestm.utils.logging import configure_logging, get_logger

logger = get_logger(__name__)

Runner = Callable[[RunConfig, WorkerPool], ReportBase]
Summary = Callable[[ReportBase], str]


@dataclass(frozen=True)
class RunOptions:
    config: Path
    seed: Optional[int] = None
    out: Optional[Path] = None
    quiet: bool = False
    verbose: bool = False
    threads: Optional[int] = None


def common_options(fn):
    @click.option("--config", "config", required=True, type=click.Path(dir_okay=False, path_type=Path),
                  help="Run config (JSON)")
    @click.option("--seed", type=click.IntRange(0, 2**64 - 1), default=None, help="Override the config seed")
    @click.option("--out", type=click.Path(file_okay=False, path_type=Path), default=None,
                  help="Output directory")
    @click.option("--quiet", is_flag=True, help="Only log errors; no summary line")
    @click.option("--verbose", is_flag=True, help="Debug logging")
    @click.option("--threads", type=click.IntRange(min=1), default=None,
                  help="Worker threads (default: number of CPUs)")
    @functools.wraps(fn)
    def wrapper(**kwargs):
        return fn(RunOptions(**kwargs))

    return wrapper


def prepare(kind: ExperimentKind, options: RunOptions) -> RunConfig:
    config = load_config(options.config)
    if config.kind is not kind:
        raise ConfigError(f"config describes a '{config.kind.value}' experiment but the command is '{kind.value}'")
    if options.seed is not None:
        config = RunConfig.model_validate({**config.model_dump(), "seed": options.seed})
    return config


def output_directory(config: RunConfig, options: RunOptions) -> Path:
    if options.out is not None:
        return options.out
    if config.output.directory is not None:
        return config.output.directory
    return settings.output_dir


def execute(kind: ExperimentKind, options: RunOptions, runner: Runner, summary: Summary) -> None:
    configure_logging(quiet=options.quiet, verbose=options.verbose)
    config = prepare(kind, options)
    config_hash = config.config_hash()
    threads = options.threads or default_threads()
    logger.info(f"[{kind.value}] config_hash={config_hash} seed={config.seed} threads={threads}")

    started = time.perf_counter()
    with WorkerPool(threads) as pool:
        report = runner(config, pool)
    logger.info(f"[{kind.value}] done in {time.perf_counter() - started:.2f}s")

    report = report.model_copy(update={"config_hash": config_hash})
    written = write_results(kind, report, output_directory(config, options), config.output.formats)
    for name, digest in describe_outputs(written):
        logger.debug(f"[output] {name} sha256={digest}")
    if not options.quiet:
        click.echo(summary(report))
