"""End-to-end runs at the published problem sizes. Deselect with `-m "not slow"`."""
import math
from pathlib import Path

import pytest

from freestm.main import EXIT_OK, run
from freestm.models import builtin_model
from freestm.schemas.common import Classification, StabilityMode
from freestm.schemas.config import RandomMatrix
from freestm.services.analysis import (
    ito_moment_check,
    spectrum_experiment,
    stability_experiment,
    strong_error_experiment,
    trace_moments_experiment,
)
from freestm.schemas.solver import SolverOptions
from freestm.services.linalg import SymMatrix, eigvalsh
from freestm.services.noise import generate_path
from freestm.services.oracles import gbm1_support
from freestm.services.pool import WorkerPool
from freestm.services.solver import simulate

pytestmark = pytest.mark.slow

CONFIGS = Path(__file__).parent.parent / "configs"
LADDER = [8, 16, 32, 64, 128]


@pytest.fixture(scope="module")
def pool():
    with WorkerPool() as workers:
        yield workers


def test_ou_semicircle_radius(pool):
    report = spectrum_experiment(
        builtin_model("free_ou", {"mu": -2.0, "sigma": 1.0}), SymMatrix.zeros(500),
        M=1, P=256, T=1.0, theta=1.0, seed=20240101, pool=pool, initial_scale=0.0,
    )
    assert report.second_moment == pytest.approx(0.2454, rel=0.10)
    assert report.max_abs == pytest.approx(0.9908, rel=0.10)


def test_gbm1_spectrum_inside_support():
    mu, h, P, N = -1.0, 1.0 / 1024, 300, 300
    model = builtin_model("free_gbm1", {"mu": mu})
    cfg = SolverOptions().configure(1.0, h, P)
    path = generate_path(N, P, h, 20240101, 0)
    final = simulate(model, SymMatrix.identity(N), path, cfg, store="endpoints").final
    eigenvalues = eigvalsh(final)

    lo, hi = gbm1_support(mu, P * h)
    inside = (eigenvalues >= lo - 0.05) & (eigenvalues <= hi + 0.05)
    assert inside.mean() >= 0.98


def test_gbm2_mean_and_variance(pool):
    report = trace_moments_experiment(
        builtin_model("free_gbm2", {"mu": -1.0}), 1.0,
        N=200, M=8, P=100, T=100 / 1024, theta=1.0, seed=20240101, pool=pool,
    )
    mean, variance = report.rows
    assert mean.empirical == pytest.approx(0.9070, rel=0.02)
    assert variance.empirical == pytest.approx(0.3548, rel=0.15)


def test_cir_mean(pool):
    report = trace_moments_experiment(
        builtin_model("free_cir", {"alpha": 2.0, "beta": 4.0, "sigma": 1.0}), 1.0,
        N=200, M=8, P=300, T=300 / 1024, theta=1.0, seed=20240101, pool=pool,
    )
    assert report.rows[0].empirical == pytest.approx(0.6549, rel=0.02)


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_strong_order_multiplicative_noise(pool, theta):
    report = strong_error_experiment(
        builtin_model("free_gbm2", {"mu": -1.0}), SymMatrix.identity(10),
        M=64, P=4096, h_fine=0.25 / 4096, R_list=LADDER, theta=theta, seed=20240101, pool=pool,
    )
    assert 0.35 <= report.slope <= 0.70


@pytest.mark.parametrize("theta", [0.0, 0.5, 1.0])
def test_strong_order_additive_noise(pool, theta):
    report = strong_error_experiment(
        builtin_model("free_ou", {"mu": -2.0, "sigma": 1.0}), SymMatrix.zeros(10),
        M=64, P=4096, h_fine=0.25 / 4096, R_list=LADDER, theta=theta, seed=20240101, pool=pool,
    )
    assert 0.80 <= report.slope <= 1.20


def test_stability_dichotomy(pool):
    model = builtin_model("free_ou", {"mu": -4.0, "sigma": 1.0})
    initials = [SymMatrix.identity(100), SymMatrix.identity(100, 2.0)]

    explicit = stability_experiment(
        model, StabilityMode.perturbation, initials, M=4, T=20.0, h_list=[1.0], theta=0.0, seed=1, pool=pool,
    )
    assert explicit.series[0].empirical is Classification.unstable

    h_list = [0.25, 0.5, 1.0, 2.0, 4.0]
    implicit = stability_experiment(
        model, StabilityMode.perturbation, initials, M=4, T=20.0, h_list=h_list, theta=1.0, seed=1, pool=pool,
    )
    for series, h in zip(implicit.series, h_list):
        assert series.empirical is Classification.stable
        resolved = [(f, ms) for f, ms in zip(series.decay_factors, series.mean_square) if ms >= 1e-4]
        assert resolved
        for factor, _ in resolved:
            assert factor == pytest.approx(1.0 / (1.0 + 4.0 * h), rel=1e-12)
        levels = [ms for _, ms in resolved]
        assert all(a > b for a, b in zip(levels, levels[1:]))


def test_ito_identity_at_finite_n(pool):
    report = ito_moment_check(
        N=200, M=200, h=0.1, A=RandomMatrix(seed=1).build(200), B=RandomMatrix(seed=2).build(200),
        seed=20240101, pool=pool,
    )
    finite = next(row for row in report.rows if row.quantity == "ito_finite_n")
    assert math.isfinite(finite.z_score)
    assert abs(finite.z_score) <= 4.0


def test_cli_output_is_thread_count_independent(tmp_path):
    config = CONFIGS / "ou_spectrum.json"
    for threads in (1, 3):
        code = run(["spectrum", "--config", str(config), "--out", str(tmp_path / f"t{threads}"),
                    "--threads", str(threads), "--quiet"])
        assert code == EXIT_OK

    assert (tmp_path / "t1" / "spectrum.csv").read_bytes() == (tmp_path / "t3" / "spectrum.csv").read_bytes()
