"""Grid construction and derivative operators."""

import numpy as np
import pytest

from iiblab import GridError, SPECTRAL, TorusGrid


@pytest.fixture(scope="module")
def grid():
    return TorusGrid(3, (0, 1), 32)


def test_rejects_bad_construction():
    with pytest.raises(GridError):
        TorusGrid(2, (0,), 8)
    with pytest.raises(GridError):
        TorusGrid(3, (), 8)
    with pytest.raises(GridError):
        TorusGrid(3, (1, 0), 8)
    with pytest.raises(GridError):
        TorusGrid(3, (0, 6), 8)
    with pytest.raises(GridError):
        TorusGrid(3, (0,), 12)  # not a power of two


def test_shape_and_spacing(grid):
    assert grid.shape == (32, 32)
    assert grid.spacing == 1.0 / 32


def test_coordinate_layout(grid):
    # real axes interleave as x^1, y^1, x^2, y^2, ...: axis 1 is y^1 here
    x = grid.coordinate(0)
    y = grid.coordinate(1)
    assert x.shape == grid.shape
    assert x[1, 0] == pytest.approx(1.0 / 32)
    assert y[0, 1] == pytest.approx(1.0 / 32)


def test_inactive_axis_derivative_is_zero(grid):
    f = np.sin(2 * np.pi * grid.coordinate(0))
    assert np.all(grid.real_derivative(f, 2) == 0.0)


def test_spectral_derivative_exact_on_band_limited(grid):
    x, y = grid.coordinate(0), grid.coordinate(1)
    f = np.sin(2 * np.pi * x) * np.cos(4 * np.pi * y)
    df = grid.real_derivative(f, 0)
    exact = 2 * np.pi * np.cos(2 * np.pi * x) * np.cos(4 * np.pi * y)
    assert np.abs(df - exact).max() < 1e-12


@pytest.mark.parametrize("scheme,order", [("fd4", 4), ("fd8", 8)])
def test_fd_derivative_converges(scheme, order):
    errs = []
    for res in (16, 32):
        g = TorusGrid(3, (0,), res)
        x = g.coordinate(0)
        f = np.sin(2 * np.pi * x)
        df = g.real_derivative(f, 0, scheme)
        errs.append(np.abs(df - 2 * np.pi * np.cos(2 * np.pi * x)).max())
    ratio = errs[0] / errs[1]
    assert 0.5 * 2**order < ratio < 2.0 * 2**order


def test_holomorphic_derivative_convention(grid):
    # d/dz of exp(2 pi i x^1) is pi i exp(...): half the real-axis rate
    x = grid.coordinate(0)
    f = np.exp(2j * np.pi * x)
    dz = grid.complex_derivative(f, 0)
    assert np.abs(dz - 1j * np.pi * f).max() < 1e-12
    # and exp(2 pi i x^1) depends on zbar^1 too: the barred half survives
    dzb = grid.complex_derivative_bar(f, 0)
    assert np.abs(dzb - 1j * np.pi * f).max() < 1e-12


def test_complex_derivative_symbol(grid):
    # for exp(2 pi i (k x + l y)): d/dz multiplies by pi i (k - i l)
    x, y = grid.coordinate(0), grid.coordinate(1)
    f = np.exp(2j * np.pi * (x + 2 * y))
    dz = grid.complex_derivative(f, 0)
    dzb = grid.complex_derivative_bar(f, 0)
    assert np.abs(dz - 1j * np.pi * (1 - 2j) * f).max() < 1e-12
    assert np.abs(dzb - 1j * np.pi * (1 + 2j) * f).max() < 1e-12
    grad = grid.holomorphic_gradient(f)
    assert grad.shape == grid.shape + (3,)
    assert np.abs(grad[..., 1]).max() < 1e-12  # no z^2 dependence


def test_gradient_axis_insertion_order(grid):
    field = np.zeros(grid.shape + (3, 3), dtype=complex)
    field[..., 0, 0] = np.exp(2j * np.pi * (grid.coordinate(0)))
    grad = grid.holomorphic_gradient(field)
    assert grad.shape == grid.shape + (3, 3, 3)
    # derivative axis sits in front of the matrix axes
    assert np.abs(grad[..., 0, 0, 0]).max() > 1.0
    assert np.abs(grad[..., 1, 0, 0]).max() < 1e-12


def test_mean_is_node_average(grid):
    f = 2.5 + np.sin(2 * np.pi * grid.coordinate(0))
    assert grid.mean(f) == pytest.approx(2.5)


def test_top_band_fraction_flags_rough_fields(grid):
    smooth = np.sin(2 * np.pi * grid.coordinate(0))
    rng = np.random.default_rng(0)
    rough = rng.standard_normal(grid.shape)
    assert grid.top_band_fraction(smooth) < 1e-12
    assert grid.top_band_fraction(rough) > 0.1
