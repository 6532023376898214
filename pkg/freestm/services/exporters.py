"""
Result writers: CSV (artifact of record), JSON sidecar and optional SVG figure.

Every file carries the config hash and seed. Nothing time- or host-dependent
is written, so identical runs give identical bytes.
"""
import csv
import math
from enum import Enum
from pathlib import Path
from typing import Any, Iterable, List, Protocol, Sequence, Tuple

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from freestm.schemas.common import ExperimentKind, OutputFormat
from freestm.schemas.reports import (
    BoundReport,
    ConvergenceReport,
    MomentReport,
    ReportBase,
    SimulationReport,
    SpectrumReport,
    StabilityReport,
)
from freestm.services.oracles import semicircle_density
from freestm.utils.hashing import compute_file_hash
from freestm.utils.logging import get_logger

logger = get_logger(__name__)

SCHEMA_VERSION = 1

CSV_COLUMNS = {
    ExperimentKind.spectrum: ("bin_left", "bin_right", "count", "density"),
    ExperimentKind.converge: ("h", "error", "log_h", "log_error"),
    ExperimentKind.stability: ("h", "step", "time", "mean_square_norm"),
    ExperimentKind.moments: ("quantity", "empirical", "predicted", "std_error", "z_score"),
    ExperimentKind.bounds: ("h", "decay_rate", "theoretically_stable"),
    ExperimentKind.simulate: (
        "step", "time", "mean_trace", "mean_square_norm",
        "lambda_min", "lambda_max", "support_lower", "support_upper",
    ),
}


def format_value(value: Any) -> str:
    """17 significant digits for reals; empty cell for a missing value."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _log(x: float) -> float:
    return math.log(x) if x > 0 else -math.inf


def csv_rows(kind: ExperimentKind, report: ReportBase) -> Iterable[Sequence[Any]]:
    if kind is ExperimentKind.spectrum:
        hist = report.histogram
        for i, count in enumerate(hist.counts):
            yield hist.bin_edges[i], hist.bin_edges[i + 1], count, hist.density[i]
    elif kind is ExperimentKind.converge:
        for point in report.ladder:
            yield point.h, point.error, _log(point.h), _log(point.error)
    elif kind is ExperimentKind.stability:
        for series in report.series:
            for step, (t, value) in enumerate(zip(series.times, series.mean_square)):
                yield series.h, step, t, value
    elif kind is ExperimentKind.moments:
        for row in report.rows:
            yield row.quantity, row.empirical, row.predicted, row.std_error, row.z_score
    elif kind is ExperimentKind.bounds:
        for point in report.points:
            yield point.h, point.decay_rate, point.theoretically_stable
    elif kind is ExperimentKind.simulate:
        for row in report.rows:
            yield tuple(getattr(row, column) for column in CSV_COLUMNS[kind])
    else:
        raise ValueError(f"Unknown experiment kind: {kind}")


class ResultWriter(Protocol):
    suffix: str

    def write(self, kind: ExperimentKind, report: ReportBase, target: Path) -> None:
        """Write `report` to `target`"""
        ...


class CsvResultWriter:
    suffix = "csv"

    def write(self, kind: ExperimentKind, report: ReportBase, target: Path) -> None:
        with open(target, "w", encoding="utf-8", newline="") as f:
            f.write(f"# freestm schema={SCHEMA_VERSION} config_hash={report.config_hash} seed={report.seed}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(CSV_COLUMNS[kind])
            for row in csv_rows(kind, report):
                writer.writerow([format_value(v) for v in row])


class JsonResultWriter:
    suffix = "json"

    def write(self, kind: ExperimentKind, report: ReportBase, target: Path) -> None:
        target.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8")


class SvgResultWriter:
    suffix = "svg"

    def write(self, kind: ExperimentKind, report: ReportBase, target: Path) -> None:
        fig = Figure(figsize=(6.4, 4.8))
        ax = fig.add_subplot()
        _FIGURES[kind](ax, report)
        fig.tight_layout()
        metadata = {
            "Date": None,
            "Description": f"freestm schema={SCHEMA_VERSION} config_hash={report.config_hash} seed={report.seed}",
        }
        with rc_context({"svg.hashsalt": report.config_hash or "freestm"}):
            fig.savefig(target, format="svg", metadata=metadata)


def _draw_spectrum(ax, report: SpectrumReport) -> None:
    hist = report.histogram
    edges = np.asarray(hist.bin_edges)
    ax.bar(edges[:-1], hist.density, width=np.diff(edges), align="edge", alpha=0.6, label="eigenvalues")
    if report.model == "free_ou" and report.oracle_variance and report.oracle_mean is not None:
        x = np.linspace(edges[0], edges[-1], 400)
        ax.plot(x, semicircle_density(report.oracle_variance, x - report.oracle_mean), label="semicircle")
    ax.set_xlabel("eigenvalue")
    ax.set_ylabel("density")
    ax.set_title(f"{report.model}, N={report.N}, T={report.T:g}")
    ax.legend()


def _draw_convergence(ax, report: ConvergenceReport) -> None:
    points = [(p.h, p.error) for p in report.ladder if p.error > 0]
    if not points:
        return
    h, err = np.array(points).T
    ax.loglog(h, err, "o-", label="error")
    if report.slope is not None:
        ax.loglog(h, np.exp(report.intercept) * h ** report.slope, "--", label=f"slope {report.slope:.3f}")
    ax.set_xlabel("h")
    ax.set_ylabel("strong error")
    ax.legend()


def _draw_stability(ax, report: StabilityReport) -> None:
    for series in report.series:
        values = np.asarray(series.mean_square)
        finite = np.isfinite(values) & (values > 0)
        ax.semilogy(np.asarray(series.times)[finite], values[finite], label=f"h={series.h:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("mean-square norm")
    ax.set_title(f"{report.model} ({report.mode.value}), theta={report.theta:g}")
    ax.legend()


def _draw_simulation(ax, report: SimulationReport) -> None:
    t = [row.time for row in report.rows]
    ax.plot(t, [row.lambda_min for row in report.rows], label="lambda_min")
    ax.plot(t, [row.lambda_max for row in report.rows], label="lambda_max")
    support = [(row.time, row.support_lower, row.support_upper) for row in report.rows if row.support_lower is not None]
    if support:
        st, lower, upper = zip(*support)
        ax.plot(st, lower, "k--", label="support")
        ax.plot(st, upper, "k--")
    ax.set_xlabel("t")
    ax.legend()


def _draw_bounds(ax, report: BoundReport) -> None:
    ax.plot([p.h for p in report.points], [p.decay_rate for p in report.points], "o-")
    ax.set_xlabel("h")
    ax.set_ylabel("decay rate")


def _draw_moments(ax, report: MomentReport) -> None:
    labels = [row.quantity for row in report.rows]
    ax.errorbar(range(len(labels)), [row.empirical for row in report.rows],
                yerr=[row.std_error for row in report.rows], fmt="o", label="empirical")
    predicted = [(i, row.predicted) for i, row in enumerate(report.rows) if row.predicted is not None]
    if predicted:
        ax.plot(*zip(*predicted), "x", label="predicted")
    ax.set_xticks(range(len(labels)), labels)
    ax.legend()


_FIGURES = {
    ExperimentKind.spectrum: _draw_spectrum,
    ExperimentKind.converge: _draw_convergence,
    ExperimentKind.stability: _draw_stability,
    ExperimentKind.simulate: _draw_simulation,
    ExperimentKind.bounds: _draw_bounds,
    ExperimentKind.moments: _draw_moments,
}


def get_result_writer(fmt: OutputFormat) -> ResultWriter:
    if fmt == OutputFormat.csv:
        return CsvResultWriter()
    elif fmt == OutputFormat.json:
        return JsonResultWriter()
    elif fmt == OutputFormat.svg:
        return SvgResultWriter()
    else:
        raise ValueError(f"Unknown output format: {fmt}")


def write_results(
    kind: ExperimentKind,
    report: ReportBase,
    directory: Path,
    formats: Sequence[OutputFormat],
) -> List[Path]:
    """Write one file per format as <directory>/<kind>.<suffix>."""
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        writer = get_result_writer(OutputFormat(fmt))
        target = directory / f"{kind.value}.{writer.suffix}"
        writer.write(kind, report, target)
        written.append(target)
    logger.info(f"[output] wrote {', '.join(p.name for p in written)} to {directory}")
    return written


def describe_outputs(paths: Iterable[Path]) -> List[Tuple[str, str]]:
    """(file name, sha256) pairs for the written files."""
    return [(p.name, compute_file_hash(p)) for p in paths]
