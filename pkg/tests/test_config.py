import json
from pathlib import Path

import numpy as np
import pytest

from freestm.exceptions import ConfigError
from freestm.schemas.common import ExperimentKind, OutputFormat, StabilityMode, Strategy
from freestm.schemas.config import DiagonalMatrix, RandomMatrix, load_config, parse_config


def _parse(document):
    return parse_config(json.dumps(document))


def test_minimal_config_gets_defaults():
    config = _parse({"model": {"name": "free_gbm1", "params": {"mu": -1.0}}, "experiment": {"kind": "simulate"}})

    assert config.schema_version == 1
    assert (config.N, config.M, config.P, config.T, config.theta, config.seed) == (100, 1, 1024, 1.0, 1.0, 0)
    assert config.kind is ExperimentKind.simulate
    assert config.solver.strategy is Strategy.auto
    assert config.output.formats == [OutputFormat.csv, OutputFormat.json]
    assert config.h == pytest.approx(1.0 / 1024)
    assert config.initial_scale() == 1.0


def test_explicit_initial_overrides_model_default(ou_document):
    ou_document["initial"] = 3.0
    assert _parse(ou_document).initial_scale() == 3.0


def test_theta_out_of_range_names_the_field(ou_document):
    ou_document["theta"] = 1.5
    with pytest.raises(ConfigError, match="theta"):
        _parse(ou_document)


def test_unknown_key_rejected(ou_document):
    ou_document["step_size"] = 0.1
    with pytest.raises(ConfigError, match="step_size"):
        _parse(ou_document)


def test_unknown_model_rejected(ou_document):
    ou_document["model"] = {"name": "free_heston"}
    with pytest.raises(ConfigError, match="model"):
        _parse(ou_document)


def test_non_finite_numbers_rejected(ou_document):
    with pytest.raises(ConfigError):
        parse_config(json.dumps(ou_document).replace('"T": 0.5', '"T": Infinity'))


def test_feller_violation_reported(ou_document):
    ou_document["model"] = {"name": "free_cir", "params": {"alpha": 0.1, "beta": 1.0, "sigma": 1.0}}
    with pytest.raises(ConfigError, match="Feller"):
        _parse(ou_document)


def test_invalid_json():
    with pytest.raises(ConfigError, match="not valid JSON"):
        parse_config('{"model": ')


def test_top_level_must_be_object():
    with pytest.raises(ConfigError, match="JSON object"):
        parse_config("[1, 2]")


def test_refinement_factor_must_divide_P(ou_document):
    ou_document["experiment"] = {"kind": "converge", "R_list": [2, 3]}
    with pytest.raises(ConfigError, match=r"\[3\] do not divide P=16"):
        _parse(ou_document)


def test_stability_step_must_divide_T(ou_document):
    ou_document["experiment"] = {"kind": "stability", "h_list": [0.25, 0.3]}
    with pytest.raises(ConfigError, match="h=0.3 does not divide"):
        _parse(ou_document)


def test_stability_initials_count(ou_document):
    ou_document["experiment"] = {"kind": "stability", "h_list": [0.25], "initials": [1.0]}
    with pytest.raises(ConfigError, match="perturbation needs 2"):
        _parse(ou_document)

    ou_document["experiment"] = {"kind": "stability", "mode": "norm", "h_list": [0.25]}
    config = _parse(ou_document)
    assert config.experiment.mode is StabilityMode.norm
    assert config.experiment.initial_scales() == [1.0]


def test_stability_comparison_sweep_is_validated(ou_document):
    ou_document["experiment"] = {"kind": "stability", "h_list": [0.25], "compare_theta": 0.0}
    config = _parse(ou_document)
    assert config.experiment.sweeps(config.theta) == [(1.0, [0.25]), (0.0, [0.25])]

    ou_document["experiment"] = {"kind": "stability", "h_list": [0.25], "compare_theta": 1.0}
    with pytest.raises(ConfigError, match="compare_theta must differ"):
        _parse(ou_document)

    ou_document["experiment"] = {"kind": "stability", "h_list": [0.25], "compare_theta": 0.0, "compare_h_list": [0.3]}
    with pytest.raises(ConfigError, match="h=0.3 does not divide"):
        _parse(ou_document)


def test_fixed_point_must_contract(ou_document):
    ou_document.update(T=1.0, P=1, solver={"strategy": "fixed_point"})
    with pytest.raises(ConfigError, match="not a contraction"):
        _parse(ou_document)


def test_degenerate_implicit_solve_rejected(ou_document):
    ou_document["model"] = {"name": "free_gbm1", "params": {"mu": 2.0}}
    ou_document.update(T=1.0, P=1)
    with pytest.raises(ConfigError, match="degenerate"):
        _parse(ou_document)


def test_bounds_constants_from_model_or_explicit(ou_document):
    ou_document["model"] = {"name": "free_cir", "params": {"alpha": 2.0, "beta": 4.0, "sigma": 1.0}}
    ou_document["experiment"] = {"kind": "bounds"}
    config = _parse(ou_document)
    assert config.experiment.h_values == [0.25, 0.5, 1.0, 2.0, 4.0]

    ou_document["experiment"] = {"kind": "bounds", "constants": {"L_prime": 4.0, "K_hat": -1.0, "K_bar": 0.0}}
    with pytest.raises(ConfigError, match="K_hat"):
        _parse(ou_document)


def test_ito_diagonal_must_match_N(ou_document):
    ou_document["experiment"] = {
        "kind": "moments",
        "quantity": "ito",
        "A": {"kind": "diagonal", "values": [1.0, 2.0]},
    }
    with pytest.raises(ConfigError, match="diagonal has 2 values but N=6"):
        _parse(ou_document)


def test_config_hash_ignores_output_block(ou_document):
    base = _parse(ou_document).config_hash()
    ou_document["output"] = {"directory": "elsewhere", "formats": ["svg"]}
    assert _parse(ou_document).config_hash() == base
    assert len(base) == 64

    ou_document["seed"] = 43
    assert _parse(ou_document).config_hash() != base


def test_config_hash_ignores_defaults_being_spelled_out(ou_document):
    base = _parse(ou_document).config_hash()
    ou_document["solver"] = {"strategy": "auto", "max_iter": 100}
    ou_document["M"] = 2
    assert _parse(ou_document).config_hash() == base


def test_matrix_specs_build():
    diag = DiagonalMatrix(values=[1.0, -1.0, 2.0]).build(3)
    np.testing.assert_array_equal(np.diag(diag.entries), [1.0, -1.0, 2.0])
    with pytest.raises(ConfigError):
        DiagonalMatrix(values=[1.0]).build(3)

    a = RandomMatrix(seed=5).build(8)
    np.testing.assert_array_equal(a.entries, a.entries.T)
    np.testing.assert_array_equal(a.entries, RandomMatrix(seed=5).build(8).entries)

    traceless = RandomMatrix(seed=5, traceless=True).build(8)
    assert abs(np.trace(traceless.entries)) < 1e-12


def test_load_config_missing_file_is_os_error(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "missing.json")


def test_shipped_configs_validate():
    configs = sorted((Path(__file__).parent.parent / "configs").glob("*.json"))
    assert configs
    for path in configs:
        load_config(path)
