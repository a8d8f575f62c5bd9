import numpy as np
import pytest

from lattice_efimov.potential import (
    LatticePotential,
    aliased_symbol,
    convolution_matrix,
    from_config,
    halfpower_kernel,
    momentum_kernel,
    nearest_neighbor,
    zero_range,
)
from lattice_efimov.torus import TorusGrid


def test_validation():
    with pytest.raises(ValueError, match="not even"):
        LatticePotential(((1, 0, 0),), (1.0,))
    with pytest.raises(ValueError, match="nonnegative"):
        LatticePotential(((0, 0, 0),), (-1.0,))
    with pytest.raises(ValueError, match="duplicate"):
        LatticePotential(((0, 0, 0), (0, 0, 0)), (1.0, 1.0))
    with pytest.raises(ValueError):
        zero_range(-1.0)
    with pytest.raises(ValueError):
        zero_range(float("nan"))


def test_builders_and_config():
    nn = nearest_neighbor(1.0, 0.25, mu=2.0)
    assert len(nn.sites) == 7 and nn.span() == 2
    assert np.allclose(sorted(nn.coefficients), sorted([2.0] + [0.5] * 6))
    assert from_config({"type": "zero_range", "mu": 3.0}) == zero_range(3.0)
    assert from_config({"type": "nearest_neighbor", "mu": 2.0, "coefficients": [1.0, 0.25]}) == nn
    table = from_config({"type": "table", "coefficients": [[0, 0, 0, 1.0], [0, 1, 0, 0.5], [0, -1, 0, 0.5]]})
    assert table.span() == 2
    with pytest.raises(ValueError):
        from_config({"type": "gaussian"})
    with pytest.raises(ValueError):
        from_config({"type": "table", "coefficients": [[0, 0, 1.0]]})


def test_scaling_helpers():
    p = nearest_neighbor(1.0, 0.5, mu=2.0)
    assert p.with_mu(3.0).mu == 3.0
    assert np.allclose(p.scaled(2.0).coefficients, 2 * p.coefficients)
    assert zero_range(0.0).is_zero and not p.is_zero


def test_kernels_real_and_even():
    p = nearest_neighbor(1.0, 0.3, mu=1.5)
    q = np.random.default_rng(3).uniform(-np.pi, np.pi, (50, 3))
    assert np.allclose(momentum_kernel(p, q), momentum_kernel(p, -q))
    # zero-range: constant kernel mu (2 pi)^{-3/2}
    assert np.allclose(momentum_kernel(zero_range(2.0), q), 2.0 * (2 * np.pi) ** -1.5)
    assert np.allclose(halfpower_kernel(zero_range(4.0), q), 2.0 * (2 * np.pi) ** -1.5)


def test_half_convolution_squares_to_full():
    pot = nearest_neighbor(1.0, 0.3, mu=1.7)
    g = TorusGrid(4)
    half = convolution_matrix(pot, g, half=True)
    full = convolution_matrix(pot, g)
    assert np.allclose(half @ half, full, atol=1e-13)
    assert np.allclose(full, full.T)


def test_aliasing_rejected():
    with pytest.raises(ValueError, match="aliases"):
        nearest_neighbor(1.0, 0.3).check_grid(TorusGrid(2))
    nearest_neighbor(1.0, 0.3).check_grid(TorusGrid(3))


def test_aliased_symbol_diagonalises_convolution():
    pot = nearest_neighbor(0.7, 0.2, mu=1.3)
    g = TorusGrid(4)
    mat = convolution_matrix(pot, g)
    sym = aliased_symbol(pot, 4)
    f = np.random.default_rng(5).standard_normal(g.size)
    via_fft = np.fft.ifftn(sym * np.fft.fftn(f.reshape(4, 4, 4))).real.ravel()
    assert np.allclose(mat @ f, via_fft, atol=1e-13)
