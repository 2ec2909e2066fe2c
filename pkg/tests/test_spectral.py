"""Periodic grid calculus: exactness on band-limited data and shift behavior."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smflow.errors import ResolutionError
from smflow.spectral import SpectralGrid


def band_limited(grid, rng, modes=5):
    x = grid.nodes
    out = np.zeros_like(x)
    for m in range(1, modes + 1):
        a, b = rng.normal(size=2)
        out += a * np.cos(2 * np.pi * m * x / grid.period)
        out += b * np.sin(2 * np.pi * m * x / grid.period)
    return out


def test_grid_validation():
    with pytest.raises(ResolutionError):
        SpectralGrid(3)
    with pytest.raises(ResolutionError):
        SpectralGrid(7)
    assert SpectralGrid(4).period == 1.0
    assert SpectralGrid(8, kind="torus").period == pytest.approx(2 * np.pi)
    assert SpectralGrid(8, kind="line", half_width=3.0).period == 6.0


def test_derivative_exact_on_band_limited_data():
    for kind, hw in (("circle", None), ("torus", None), ("line", 2.5)):
        grid = SpectralGrid(64, kind=kind, half_width=hw) if hw else SpectralGrid(64, kind=kind)
        k = 2 * np.pi * 3 / grid.period
        f = np.sin(k * grid.nodes)
        assert np.abs(grid.derivative(f) - k * np.cos(k * grid.nodes)).max() < 1e-11
        assert np.abs(grid.derivative(f, order=2) + k**2 * f).max() < 1e-9


def test_integrate_and_cumulative():
    grid = SpectralGrid(128)
    f = 2.0 + np.sin(2 * np.pi * grid.nodes)
    assert grid.integrate(f) == pytest.approx(2.0, abs=1e-13)
    F = grid.cumulative_integral(f)
    expected = 2.0 * grid.nodes + (1 - np.cos(2 * np.pi * grid.nodes)) / (2 * np.pi)
    assert F[0] == pytest.approx(0.0, abs=1e-14)
    assert np.abs(F - expected).max() < 1e-12
    assert np.abs(grid.derivative(F - 2.0 * grid.nodes) - (f - 2.0)).max() < 1e-10


def test_upsample_preserves_node_values():
    grid = SpectralGrid(32)
    rng = np.random.default_rng(0)
    f = band_limited(grid, rng)
    fine = grid.upsample(f, 4)
    assert fine.shape[0] == 128
    assert np.abs(fine[::4] - f).max() < 1e-12
    fine_grid = SpectralGrid(128)
    k = 2 * np.pi * 2
    g = np.cos(k * grid.nodes)
    assert np.abs(grid.upsample(g, 4) - np.cos(k * fine_grid.nodes)).max() < 1e-12


def test_shift_is_exact_roll_on_grid_multiples():
    grid = SpectralGrid(64)
    rng = np.random.default_rng(1)
    f = rng.normal(size=64)
    s = 5 / 64.0
    shifted = grid.shift(f, s)
    assert np.array_equal(shifted, np.roll(f, 5))


def test_shift_fractional_matches_analytic():
    grid = SpectralGrid(64)
    k = 2 * np.pi * 3
    f = np.sin(k * grid.nodes)
    s = 0.1234
    assert np.abs(grid.shift(f, s) - np.sin(k * (grid.nodes - s))).max() < 1e-12


def test_vector_valued_operations_broadcast():
    grid = SpectralGrid(32)
    f = np.stack([np.sin(2 * np.pi * grid.nodes), np.cos(2 * np.pi * grid.nodes)], axis=-1)
    df = grid.derivative(f)
    assert df.shape == f.shape
    assert np.abs(df[:, 0] - 2 * np.pi * np.cos(2 * np.pi * grid.nodes)).max() < 1e-11


@settings(max_examples=25, deadline=None)
@given(
    m=st.integers(min_value=1, max_value=7),
    cells=st.integers(min_value=0, max_value=31),
)
def test_shift_composes_and_inverts(m, cells):
    grid = SpectralGrid(32)
    f = np.sin(2 * np.pi * m * grid.nodes) + 0.3 * np.cos(2 * np.pi * grid.nodes)
    s = cells / 32.0
    back = grid.shift(grid.shift(f, s), -s)
    assert np.abs(back - f).max() < 1e-12
