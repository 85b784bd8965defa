import numpy as np
import pytest

from spinflow.lattice import ModelParams


@pytest.fixture
def xy_params():
    return ModelParams(model="xy", N=10, dt=1e-4, beta=10.0)


@pytest.fixture
def heisenberg_params():
    return ModelParams(model="heisenberg", N=10, dt=1e-4, beta=10.0)


def make_unit_config(seed, n_sites, n_components):
    """Random unit-spin configuration, reproducible from the seed."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n_sites, n_components))
    return v / np.linalg.norm(v, axis=-1, keepdims=True)
