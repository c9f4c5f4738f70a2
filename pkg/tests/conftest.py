import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from roughshear.fields import FieldRecipe, Grid, GridField, generate

settings.register_profile(
    "default", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture])
settings.load_profile("default")


@pytest.fixture(scope="session")
def grid256():
    return Grid(256)


@pytest.fixture(scope="session")
def cos_field(grid256):
    return GridField.from_function(grid256, np.cos)


def rough_field(n=256, seed=0, alpha=-0.25, amplitude=1.0):
    return generate(FieldRecipe.random_fourier(alpha, amplitude, seed), Grid(n))


def random_complex_field(grid, seed):
    rng = np.random.default_rng(seed)
    return GridField(grid, rng.standard_normal(grid.n_points) + 1j * rng.standard_normal(grid.n_points))
