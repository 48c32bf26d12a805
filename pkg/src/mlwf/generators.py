"""Synthetic test fields: the singularity library driven by JSON specs.

Each generator is deterministic given its parameters (and a seed for the
random kind).  Jump fields are synthesised band-limited from their analytic
Fourier series, so the computed coefficients match the closed form to
rounding error while keeping the 1/k singular signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .grids import TWO_PI, Grid, SampledField, SpectralField, inverse_transform


@dataclass(frozen=True)
class FieldGeneratorSpec:
    """Named generator plus its parameter dict (mirrors the JSON config)."""

    kind: str
    params: dict = field(default_factory=dict)

    @staticmethod
    def from_config(cfg: dict) -> "FieldGeneratorSpec":
        cfg = dict(cfg)
        kind = cfg.pop("kind")
        return FieldGeneratorSpec(kind=kind, params=cfg)


def gaussian_bump(grid: Grid, center, width: float = 1.0, amplitude: float = 1.0) -> SampledField:
    """Periodized Gaussian exp(-|x-center|^2 / (2 width^2))."""
    if width <= 0:
        raise ParameterError("width must be positive")
    center = np.atleast_1d(np.asarray(center, dtype=float))
    images = max(2, int(np.ceil(4.0 * width)))
    mesh = grid.x_mesh()
    vals = np.zeros(grid.shape)
    shifts = TWO_PI * np.arange(-images, images + 1)
    combos = np.array(np.meshgrid(*([shifts] * grid.dimension), indexing="ij"))
    for axis_shifts in combos.reshape(grid.dimension, -1).T:
        sq = sum((m - c - s) ** 2 for m, c, s in zip(mesh, center, axis_shifts))
        vals += np.exp(-sq / (2.0 * width**2))
    return SampledField(grid, amplitude * vals)


def delta_surrogate(grid: Grid, center) -> SampledField:
    """Unit point mass: impulse scaled (n/2pi)^d so the spectrum is flat
    (2pi)^{-d/2} on the whole lattice."""
    vals = np.zeros(grid.shape)
    vals[grid.index_of_point(center)] = (grid.n / TWO_PI) ** grid.dimension
    return SampledField(grid, vals)


def _step_series(grid: Grid, a: float, b: float, taper=None) -> np.ndarray:
    """1-d analytic coefficients of the indicator of (a, b) on the lattice.

    An optional smooth radial taper (lo, hi) rolls the series off inside the
    dealias band so that operator images stay free of box-edge ringing; the
    coefficients below ``lo`` are the exact analytic values.
    """
    if not (0 <= a < b < TWO_PI):
        raise ParameterError("need 0 <= a < b < 2*pi")
    k = grid.k_axis
    out = np.empty(grid.n, dtype=complex)
    nz = k != 0
    out[nz] = (np.exp(-1j * k[nz] * a) - np.exp(-1j * k[nz] * b)) / (1j * k[nz])
    out[~nz] = b - a
    out = TWO_PI ** -0.5 * out
    if taper is not None:
        lo, hi = taper
        from .grids import smooth_ramp

        out = out * smooth_ramp((hi - np.abs(k)) / (hi - lo))
    return out


def _default_taper(grid: Grid, taper):
    if taper is False:
        return None
    if taper is None:
        return (2.0 * grid.nyquist / 3.0, 7.0 * grid.nyquist / 8.0)
    return taper


def jump_1d(grid: Grid, a: float, b: float, taper=None) -> SampledField:
    """Band-limited synthesis of the indicator of (a, b) on the circle."""
    if grid.dimension != 1:
        raise ParameterError("jump-1d needs a 1-d grid")
    series = _step_series(grid, a, b, _default_taper(grid, taper))
    return inverse_transform(SpectralField(grid, series))


def line_jump_2d(grid: Grid, a: float, b: float, axis: int = 0, taper=None) -> SampledField:
    """2-d field jumping across the lines x_axis = a and x_axis = b.

    The spectrum is the 1-d step series on the chosen axis tensored with the
    constant function, so it is supported exactly on one frequency line and
    decays like 1/k along it.
    """
    if grid.dimension != 2:
        raise ParameterError("line-jump-2d needs a 2-d grid")
    if axis not in (0, 1):
        raise ParameterError("axis must be 0 or 1")
    series = _step_series(grid, a, b, _default_taper(grid, taper))
    const = np.zeros(grid.n, dtype=complex)
    const[grid.n // 2] = TWO_PI**0.5  # coefficients of the constant 1
    coeffs = np.multiply.outer(series, const) if axis == 0 else np.multiply.outer(const, series)
    return inverse_transform(SpectralField(grid, coeffs))


def chirp(
    grid: Grid,
    center,
    width: float = 0.35,
    rate: float = 8.0,
    direction=None,
    carrier: float = 0.0,
) -> SampledField:
    """Gaussian wave packet with a quadratic phase sweep along a direction.

    f(x) = exp(-|x-c|^2 / (2 width^2)) exp(i (carrier <u, x-c> +
    rate <u, x-c>^2)), periodized.  Smooth with an empty wave-front set;
    the Gaussian envelope keeps both the spatial tails and the spectral
    tails (content up to about carrier + 2 rate width + 1/width) genuinely
    small, so operator images stay localized.
    """
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if direction is None:
        direction = (1.0,) + (0.0,) * (grid.dimension - 1)
    u = np.atleast_1d(np.asarray(direction, dtype=float))
    u = u / np.linalg.norm(u)
    pts = grid.x_points()
    vals = np.zeros(grid.shape, dtype=complex)
    images = max(1, int(np.ceil(3.0 * width)))
    shifts = TWO_PI * np.arange(-images, images + 1)
    combos = np.array(np.meshgrid(*([shifts] * grid.dimension), indexing="ij"))
    for offs in combos.reshape(grid.dimension, -1).T:
        s = pts - center - offs
        rho2 = (s**2).sum(axis=-1).reshape(grid.shape)
        proj = (s @ u).reshape(grid.shape)
        vals += np.exp(-rho2 / (2.0 * width**2)) * np.exp(
            1j * (carrier * proj + rate * proj**2)
        )
    return SampledField(grid, vals)


def random_bandlimited(grid: Grid, band: float, rng=None, real: bool = False) -> SampledField:
    """Random field with spectrum supported in {|k| <= band}."""
    if band <= 0 or band > grid.nyquist:
        raise ParameterError("band must lie in (0, nyquist]")
    rng = np.random.default_rng(rng)
    sel = grid.k_radii() <= band
    coeffs = np.zeros(grid.shape, dtype=complex)
    coeffs[sel] = rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum()))
    f = inverse_transform(SpectralField(grid, coeffs))
    if real:
        f = SampledField(grid, f.values.real.astype(complex))
    return f


def generate(spec: FieldGeneratorSpec | dict, grid: Grid, seed: int | None = None) -> SampledField:
    """Produce a field from a generator spec; deterministic given the seed."""
    if isinstance(spec, dict):
        spec = FieldGeneratorSpec.from_config(spec)
    p = spec.params
    if spec.kind == "gaussian-bump":
        return gaussian_bump(
            grid, p.get("center", (np.pi,) * grid.dimension),
            width=p.get("width", 1.0), amplitude=p.get("amplitude", 1.0),
        )
    if spec.kind == "delta-surrogate":
        return delta_surrogate(grid, p.get("center", (np.pi,) * grid.dimension))
    if spec.kind == "jump-1d":
        return jump_1d(
            grid, p.get("a", np.pi / 2), p.get("b", 3 * np.pi / 2), taper=p.get("taper")
        )
    if spec.kind == "line-jump-2d":
        return line_jump_2d(
            grid, p.get("a", np.pi / 2), p.get("b", 3 * np.pi / 2),
            axis=p.get("axis", 0), taper=p.get("taper"),
        )
    if spec.kind == "chirp":
        return chirp(
            grid, p.get("center", (np.pi,) * grid.dimension),
            width=p.get("width", 0.35), rate=p.get("rate", 8.0),
            direction=p.get("direction"), carrier=p.get("carrier", 0.0),
        )
    if spec.kind == "random-bandlimited":
        return random_bandlimited(
            grid, p.get("band", grid.nyquist / 4),
            rng=p.get("seed", seed), real=p.get("real", False),
        )
    if spec.kind == "sum-of":
        parts = [generate(sub, grid, seed=seed) for sub in p["parts"]]
        total = parts[0]
        for part in parts[1:]:
            total = total + part
        return total
    raise ParameterError(f"unknown generator kind {spec.kind!r}")
