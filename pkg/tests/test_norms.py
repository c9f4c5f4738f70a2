import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughshear.fields import FieldRecipe, Grid, GridField, SpectralField, generate, truncate_modes
from roughshear.norms import (BesovParams, CampanatoParams, besov_seminorm, block_index,
                              campanato_seminorm, littlewood_paley_blocks, sobolev_norm)

from conftest import rough_field


def test_block_index():
    m = np.array([0, 1, -1, 2, 3, 4, 7, 8, -9, 15, 16])
    assert block_index(m).tolist() == [0, 0, 0, 1, 1, 2, 2, 3, 3, 3, 4]


@pytest.mark.parametrize("cls,kwargs", [
    (BesovParams, {"s": 0.0, "p": 0.5}),
    (CampanatoParams, {"p": 0.5, "alpha": 1.0}),
    (CampanatoParams, {"p": np.inf, "alpha": 1.0}),
    (CampanatoParams, {"p": 2.0, "alpha": 1.0, "k": -1}),
    (CampanatoParams, {"p": 2.0, "alpha": 0.0}),
])
def test_invalid_params(cls, kwargs):
    with pytest.raises(ValueError):
        cls(**kwargs)


def test_zero_field_norms(grid256):
    z = generate(FieldRecipe.zero(), grid256)
    assert besov_seminorm(z, BesovParams(-0.25)) == 0
    assert sobolev_norm(z, -1) == 0
    assert campanato_seminorm(z, CampanatoParams(2, 1.5)) == 0


@pytest.mark.parametrize("j0", [1, 3, 5])
@pytest.mark.parametrize("s,p", [(-0.25, 2.0), (0.5, 1.0), (0.0, np.inf)])
def test_single_mode_besov(j0, s, p):
    g = Grid(256)
    m = 2**j0
    f = GridField.from_function(g, lambda y: np.exp(1j * m * y))
    lp = {2.0: np.sqrt(2 * np.pi), 1.0: 2 * np.pi, np.inf: 1.0}[p]
    assert besov_seminorm(f, BesovParams(s, p)) == pytest.approx(2.0 ** (j0 * s) * lp, rel=1e-12)


def test_besov_monotone_under_truncation():
    f = rough_field(512, seed=3).to_spectral()
    prev = np.inf
    for M in (255, 128, 64, 16, 4):
        v = besov_seminorm(truncate_modes(f, M), BesovParams(-0.25))
        assert v <= prev + 1e-12
        prev = v


def test_random_fourier_besov_concentrated():
    vals = [besov_seminorm(rough_field(1024, s), BesovParams(-0.25)) for s in range(20)]
    assert max(vals) / min(vals) < 10


@given(st.integers(0, 1000), st.floats(-1.0, 1.0), st.floats(0.0, 1.0))
def test_besov_nondecreasing_in_s(seed, s, ds):
    f = rough_field(128, seed)
    assert besov_seminorm(f, BesovParams(s)) <= besov_seminorm(f, BesovParams(s + ds)) * (1 + 1e-12)


@given(st.integers(0, 1000), st.floats(-2.0, 2.0), st.floats(0.0, 1.0))
def test_sobolev_nondecreasing_in_s(seed, s, ds):
    f = rough_field(128, seed)
    assert sobolev_norm(f, s) <= sobolev_norm(f, s + ds) * (1 + 1e-12)


def test_sobolev_examples(grid256):
    f = GridField.from_function(grid256, lambda y: np.exp(1j * y))
    assert sobolev_norm(f, -1) == pytest.approx(np.sqrt(2 * np.pi) * 2**-0.5, rel=1e-12)
    u = rough_field(256, 1)
    assert sobolev_norm(u, 0) == pytest.approx(u.l2_norm(), rel=1e-12)


def test_sobolev_triangle_wave():
    """|y| on [-pi, pi): c_0 = pi/2, c_m = -2/(pi m^2) for odd m."""
    n = 2**14
    g = Grid(n)
    f = GridField.from_function(g, np.abs)
    m = np.arange(1, 10**6, 2, dtype=float)
    analytic = 2 * np.pi * ((np.pi / 2) ** 2 + 2 * np.sum((2 / (np.pi * m**2)) ** 2 / (1 + m**2)))
    assert sobolev_norm(f, -1) ** 2 == pytest.approx(analytic, rel=1e-8)


def test_campanato_linear_function():
    g = Grid(1024)
    f = GridField.from_function(g, lambda y: y)
    val = campanato_seminorm(f, CampanatoParams(2.0, 1.5, 0))
    assert val == pytest.approx(12**-0.5, rel=1e-3)
    assert campanato_seminorm(f, CampanatoParams(2.0, 1.5, 1)) < 1e-12


def test_campanato_constant_and_normalization(grid256):
    c = generate(FieldRecipe.constant(4.0), grid256)
    assert campanato_seminorm(c, CampanatoParams(1.0, 0.5, 2)) < 1e-12
    u = rough_field(256, 2)
    plain = campanato_seminorm(u, CampanatoParams(2.0, 0.5))
    norm = campanato_seminorm(u, CampanatoParams(2.0, 0.5, normalized=True))
    assert plain != norm and plain > 0 and norm > 0


def test_campanato_holder_weierstrass_refinement():
    """A 1/2-Holder Weierstrass field has a resolution-stable Campanato value
    at alpha = 1/2 + 1/p."""
    recipe = FieldRecipe.weierstrass(2**-0.5, 2, 30)
    params = CampanatoParams(2.0, 1.0, 0)
    vals = [campanato_seminorm(generate(recipe, Grid(n)), params) for n in (1024, 2048, 4096)]
    for a, b in zip(vals, vals[1:]):
        assert b == pytest.approx(a, rel=0.2)


def test_littlewood_paley_blocks_reconstruct_l2():
    u = rough_field(256, 9)
    rows = littlewood_paley_blocks(u, 2.0)
    assert np.sum(rows[:, 1] ** 2) == pytest.approx(u.l2_norm() ** 2, rel=1e-12)
