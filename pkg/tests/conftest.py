import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))

from spin_bath import ModelParams  # noqa: E402
from wavepacket import PacketSpec  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: lattice oracle runs that take minutes')


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)


@pytest.fixture
def single_spin():
    return ModelParams(m=1.0, mu=1.0, N=1)


@pytest.fixture
def benchmark_spec():
    return PacketSpec(k0=10.0, sigma0=2.0, y0=-30.0)


@pytest.fixture
def write_config(tmp_path):
    """Write a config dict to a JSON file and return its path."""

    def _write(document, name='config.json'):
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding='utf-8')
        return str(path)

    return _write
