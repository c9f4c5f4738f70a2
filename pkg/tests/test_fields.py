import numpy as np
import pytest
from hypothesis import given, strategies as st

from roughshear.fields import (FieldRecipe, Grid, GridField, SpectralField, fbm_path, generate,
                               random_fourier_coeffs, stream_rng, transform, truncate_modes)
from roughshear.norms import BesovParams, littlewood_paley_blocks, sobolev_norm

from conftest import random_complex_field, rough_field


@pytest.mark.parametrize("n", [15, 48, 8, 0])
def test_grid_rejects_bad_sizes(n):
    with pytest.raises(ValueError):
        Grid(n)


def test_grid_layout():
    g = Grid(16)
    assert g.spacing == pytest.approx(2 * np.pi / 16)
    assert g.points[0] == pytest.approx(-np.pi)
    assert g.modes[0] == -8 and g.modes[-1] == 7
    assert g.nyquist == 8


def test_constant_has_only_mean_mode(grid256):
    c = transform(GridField.from_function(grid256, lambda y: 3.0 + 0 * y)).coeffs
    assert c[grid256.nyquist] == pytest.approx(3.0, abs=1e-14)
    others = np.delete(c, grid256.nyquist)
    assert np.max(np.abs(others)) < 1e-14


def test_cosine_coefficients(cos_field):
    s = cos_field.to_spectral()
    assert s.coeff(1) == pytest.approx(0.5, abs=1e-12)
    assert s.coeff(-1) == pytest.approx(0.5, abs=1e-12)
    rest = np.delete(s.coeffs, [s.grid.nyquist - 1, s.grid.nyquist + 1])
    assert np.max(np.abs(rest)) < 1e-12


@given(st.integers(0, 2**32), st.sampled_from([16, 64, 512]))
def test_round_trip_identity(seed, n):
    f = random_complex_field(Grid(n), seed)
    back = transform(transform(f))
    assert np.linalg.norm(back.values - f.values) <= 1e-12 * np.linalg.norm(f.values)


@given(st.integers(0, 2**32))
def test_parseval(seed):
    g = Grid(128)
    f = random_complex_field(g, seed)
    s = f.to_spectral()
    lhs = 2 * np.pi * np.sum(np.abs(s.coeffs) ** 2)
    rhs = g.spacing * np.sum(np.abs(f.values) ** 2)
    assert lhs == pytest.approx(rhs, rel=1e-10)


def test_shifted_origin_round_trip():
    g = Grid(64, domain_length=3.0, origin=0.25)
    f = GridField.from_function(g, lambda y: np.sin(2 * np.pi * y / 3.0))
    s = f.to_spectral()
    assert abs(s.coeff(1)) == pytest.approx(0.5, abs=1e-12)
    assert np.allclose(s.to_grid().values, f.values, atol=1e-13)


def test_fields_are_read_only(cos_field):
    with pytest.raises(ValueError):
        cos_field.values[0] = 1.0


@pytest.mark.parametrize("recipe", [
    FieldRecipe.random_fourier(-0.25, 1.0, 3),
    FieldRecipe.fbm(0.5, 3),
    FieldRecipe.weierstrass(0.5, 3, 6),
    FieldRecipe.single_mode(4, 1 - 2j),
    FieldRecipe.constant(2.5),
    FieldRecipe.zero(),
])
def test_generators_real_and_deterministic(recipe):
    g = Grid(256)
    a, b = generate(recipe, g), generate(recipe, g)
    assert a.values.tobytes() == b.values.tobytes()
    assert a.is_real
    assert a.to_spectral().is_conjugate_symmetric()


def test_constant_and_weierstrass_examples(grid256):
    assert np.all(generate(FieldRecipe.constant(3), grid256).real == 3)
    w = generate(FieldRecipe.weierstrass(0.5, 2, 1), grid256)
    assert np.allclose(w.real, np.cos(grid256.points), atol=1e-15)


def test_weierstrass_caps_terms_at_nyquist():
    g = Grid(16)
    w = generate(FieldRecipe.weierstrass(0.5, 2, 10), g)
    expected = sum(0.5**j * np.cos(2**j * g.points) for j in range(4))  # 2^3 = 8 = N/2
    assert np.allclose(w.real, expected)


@pytest.mark.parametrize("kind,params", [
    ("random_fourier", {"alpha": -0.5, "amplitude": 1.0}),
    ("random_fourier", {"alpha": 1.0, "amplitude": 1.0}),
    ("fbm", {"hurst": 1.0}),
    ("weierstrass", {"a": 1.0, "b": 2, "terms": 3}),
    ("bogus", {}),
])
def test_invalid_recipes(kind, params):
    with pytest.raises(ValueError):
        FieldRecipe(kind, params)


def test_recipe_dict_round_trip():
    for r in (FieldRecipe.random_fourier(-0.25, 2.0, 7), FieldRecipe.single_mode(3, 1 + 1j)):
        assert FieldRecipe.from_dict(r.to_dict()) == r


def test_random_fourier_law():
    g = Grid(64)
    s = rough_field(64, seed=5).to_spectral()
    assert abs(s.coeff(0)) < 1e-15 and abs(s.coeffs[0]) < 1e-15  # mean and Nyquist
    m = np.arange(1, 32)
    amp = np.abs(s.coeffs[g.nyquist + m]) * m ** 0.25
    # |g + i g'| / sqrt 2 has mean sqrt(pi)/2 ~ 0.886
    assert 0.6 < amp.mean() < 1.2


def test_random_fourier_nested_resolutions():
    coarse = random_fourier_coeffs(Grid(128), -0.25, 1.0, 2)
    fine = random_fourier_coeffs(Grid(256), -0.25, 1.0, 2)
    assert np.array_equal(coarse[1:], fine[65:192])  # all modes but the coarse Nyquist
    # and through the grid representation up to round-off
    a, b = rough_field(128, seed=2).to_spectral(), rough_field(256, seed=2).to_spectral()
    assert np.allclose(a.coeffs[1:], b.coeffs[65:192], atol=1e-14)


def test_stream_rng_is_order_independent():
    a = [stream_rng(1, i, 2).standard_normal() for i in range(5)]
    b = [stream_rng(1, i, 2).standard_normal() for i in reversed(range(5))][::-1]
    assert a == b
    assert stream_rng(1, 0, 2).standard_normal() != stream_rng(1, 0, 3).standard_normal()


def test_brownian_increment_variance():
    n = 10_000
    path = fbm_path(n, 0.5, np.pi, seed=11)
    inc = np.diff(path)
    h = np.pi / n
    var = inc.var()
    stderr = h * np.sqrt(2.0 / n)
    assert abs(var - h) < 5 * stderr


def test_fbm_reflection_is_even():
    g = Grid(256)
    f = generate(FieldRecipe.fbm(0.7, 1), g).real
    j = np.arange(1, 128)
    assert np.array_equal(f[128 + j], f[128 - j])
    assert f[128] == 0.0


def test_fbm_needs_centered_grid():
    with pytest.raises(ValueError):
        generate(FieldRecipe.fbm(0.5), Grid(64, origin=0.0))


def test_truncate_modes_examples():
    s = rough_field(128, seed=1).to_spectral()
    assert np.array_equal(truncate_modes(s, 64).coeffs, s.coeffs)
    t0 = truncate_modes(s, 0).coeffs
    assert np.count_nonzero(t0) <= 1
    with pytest.raises(ValueError):
        truncate_modes(s, 65)


def test_truncation_error_decreases_in_negative_sobolev_norm():
    s = rough_field(512, seed=4).to_spectral()
    errs = [sobolev_norm(SpectralField(s.grid, s.coeffs - truncate_modes(s, M).coeffs), -1)
            for M in (4, 8, 16, 32, 64, 128, 255)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


def test_random_fourier_block_scaling():
    """Seed-averaged 2^(j alpha) ||Delta_j u|| stays within a factor 10 across blocks."""
    n, alpha = 1024, -0.25
    acc = None
    for seed in range(50):
        blocks = littlewood_paley_blocks(rough_field(n, seed).to_spectral(), 2.0)
        scaled = np.array([2.0 ** (j * alpha) * v for j, v in blocks])
        acc = scaled if acc is None else acc + scaled
    # block 0 only holds |m| = 1 and the last block only the (zero) Nyquist mode
    acc = acc[1:-1] / 50
    assert acc.max() / acc.min() < 10
