import numpy as np
import pytest

from mlwf import Grid, SampledField, SpectralField, inverse_transform


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(grid: Grid, rng, band=None) -> SampledField:
    """Random field, band-limited when ``band`` is given (exactness margin)."""
    if band is None:
        vals = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        return SampledField(grid, vals)
    sel = grid.k_radii() <= band
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[sel] = rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum()))
    return inverse_transform(SpectralField(grid, coeffs))


@pytest.fixture
def grid64():
    return Grid(1, 64)


@pytest.fixture
def grid2d32():
    return Grid(2, 32)
