import json

import numpy as np
import pytest

from freestm.services.linalg import SymMatrix


@pytest.fixture
def write_config(tmp_path):
    """Write a config document to tmp_path and return its path."""

    def _write(document, name="run.json"):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write


@pytest.fixture
def random_sym():
    def _make(dim, seed=0):
        g = np.random.default_rng(seed).standard_normal((dim, dim))
        return SymMatrix(0.5 * (g + g.T))

    return _make


@pytest.fixture
def ou_document():
    return {
        "schema_version": 1,
        "model": {"name": "free_ou", "params": {"mu": -2.0, "sigma": 1.0}},
        "N": 6,
        "M": 2,
        "P": 16,
        "T": 0.5,
        "theta": 1.0,
        "seed": 42,
        "experiment": {"kind": "spectrum", "bins": 5},
    }
