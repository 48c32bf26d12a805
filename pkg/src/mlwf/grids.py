"""Discrete function spaces on the 2*pi-periodic torus.

Grids, the unitary Fourier transform pair, frequency cones, smooth cutoff
constructors and dyadic frequency shells.  Everything downstream (semi-norms,
operators, wave-front estimation) is built on the conventions fixed here:

* sample points ``x_j = 2*pi*j/n`` per axis, ``j = 0..n-1``;
* integer frequency lattice ``k in {-n/2, ..., n/2-1}`` per axis, stored in
  ascending order;
* forward transform ``fhat(k) = (2*pi)^{-d/2} (2*pi/n)^d sum_j f(x_j)
  exp(-i<k, x_j>)`` -- the Riemann-sum discretisation of the unitary
  convention, exact for band-limited fields;
* the inverse transform is an exact lattice sum (dual spacing is 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParameterError

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid on the d-torus with its dual integer lattice.

    Parameters
    ----------
    dimension : int
        Spatial dimension, 1 or 2.
    n : int
        Samples per axis; a power of two, at least 8.
    """

    dimension: int
    n: int

    def __post_init__(self):
        if self.dimension not in (1, 2):
            raise ParameterError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.n < 8 or (self.n & (self.n - 1)) != 0:
            raise ParameterError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dimension

    @property
    def size(self) -> int:
        return self.n**self.dimension

    @property
    def spacing(self) -> float:
        return TWO_PI / self.n

    @property
    def nyquist(self) -> float:
        return self.n / 2.0

    @property
    def x_axis(self) -> np.ndarray:
        return TWO_PI * np.arange(self.n) / self.n

    @property
    def k_axis(self) -> np.ndarray:
        """Frequencies in ascending order; array index i maps to k = i - n/2."""
        return np.arange(-(self.n // 2), self.n // 2, dtype=float)

    def x_mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.x_axis] * self.dimension), indexing="ij")

    def k_mesh(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*([self.k_axis] * self.dimension), indexing="ij")

    def x_points(self) -> np.ndarray:
        """All grid points as an (size, d) array."""
        return np.stack([m.ravel() for m in self.x_mesh()], axis=-1)

    def k_points(self) -> np.ndarray:
        """All lattice frequencies as an (size, d) array."""
        return np.stack([m.ravel() for m in self.k_mesh()], axis=-1)

    def k_radii(self) -> np.ndarray:
        return np.sqrt(sum(m**2 for m in self.k_mesh()))

    def index_of_point(self, point) -> tuple[int, ...]:
        """Nearest grid index of a physical point (wrapped to the torus)."""
        point = np.atleast_1d(np.asarray(point, dtype=float))
        if point.shape != (self.dimension,):
            raise InputError(f"point must have {self.dimension} coordinates")
        idx = np.rint(point / self.spacing).astype(int) % self.n
        return tuple(int(i) for i in idx)


def wrap_delta(delta: np.ndarray) -> np.ndarray:
    """Wrap coordinate differences into (-pi, pi] per axis."""
    return (np.asarray(delta) + np.pi) % TWO_PI - np.pi


def torus_distance(points: np.ndarray, center) -> np.ndarray:
    """Euclidean distance on the torus from ``points`` (..., d) to ``center``."""
    d = wrap_delta(np.asarray(points, dtype=float) - np.asarray(center, dtype=float))
    return np.sqrt((d**2).sum(axis=-1))


def _check_values(grid: Grid, values: np.ndarray) -> np.ndarray:
    arr = np.asarray(values, dtype=complex)
    if arr.shape != grid.shape:
        if arr.size == grid.size:
            arr = arr.reshape(grid.shape)
        else:
            raise InputError(
                f"field has {arr.size} values, grid expects {grid.size}"
            )
    if not np.all(np.isfinite(arr)):
        raise InputError("field contains non-finite entries")
    return arr


@dataclass(frozen=True)
class SampledField:
    """Complex samples of a function (or distribution surrogate) on the grid."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _check_values(self.grid, self.values))
        self.values.flags.writeable = False

    def __add__(self, other: "SampledField") -> "SampledField":
        if other.grid != self.grid:
            raise InputError("grid mismatch")
        return SampledField(self.grid, self.values + other.values)

    def __mul__(self, factor) -> "SampledField":
        if isinstance(factor, SampledField):
            if factor.grid != self.grid:
                raise InputError("grid mismatch")
            return SampledField(self.grid, self.values * factor.values)
        return SampledField(self.grid, self.values * factor)

    __rmul__ = __mul__

    def shift(self, steps) -> "SampledField":
        """Translate by a lattice vector given in grid steps."""
        steps = np.atleast_1d(np.asarray(steps, dtype=int))
        return SampledField(self.grid, np.roll(self.values, steps, axis=tuple(range(self.grid.dimension))))


@dataclass(frozen=True)
class SpectralField:
    """Fourier coefficients on the integer lattice, axes in ascending k order."""

    grid: Grid
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_values(self.grid, self.coeffs))
        self.coeffs.flags.writeable = False

    def __add__(self, other: "SpectralField") -> "SpectralField":
        if other.grid != self.grid:
            raise InputError("grid mismatch")
        return SpectralField(self.grid, self.coeffs + other.coeffs)

    def __mul__(self, factor) -> "SpectralField":
        if isinstance(factor, SpectralField):
            if factor.grid != self.grid:
                raise InputError("grid mismatch")
            return SpectralField(self.grid, self.coeffs * factor.coeffs)
        return SpectralField(self.grid, self.coeffs * factor)

    __rmul__ = __mul__


def forward_transform(f: SampledField) -> SpectralField:
    """Unitary-convention forward transform, exact for band-limited fields."""
    g = f.grid
    scale = (TWO_PI) ** (-g.dimension / 2.0) * (TWO_PI / g.n) ** g.dimension
    coeffs = scale * np.fft.fftshift(np.fft.fftn(f.values))
    return SpectralField(g, coeffs)


def inverse_transform(F: SpectralField) -> SampledField:
    """Exact inverse of :func:`forward_transform` (lattice sum, spacing 1)."""
    g = F.grid
    scale = (TWO_PI) ** (-g.dimension / 2.0) * g.size
    values = scale * np.fft.ifftn(np.fft.ifftshift(F.coeffs))
    return SampledField(g, values)


def quad_norm(f: SampledField) -> float:
    """L2 norm with the (2*pi/n)^d quadrature weight; equals the lattice-sum
    L2 norm of the coefficients (Parseval)."""
    g = f.grid
    return float(np.sqrt((TWO_PI / g.n) ** g.dimension * np.sum(np.abs(f.values) ** 2)))


def quad_inner(f: SampledField, g: SampledField) -> complex:
    """Quadrature inner product (f, g) = (2*pi/n)^d sum f conj(g)."""
    if f.grid != g.grid:
        raise InputError("grid mismatch")
    w = (TWO_PI / f.grid.n) ** f.grid.dimension
    return complex(w * np.sum(f.values * np.conj(g.values)))


def relative_l2(got: np.ndarray, expected: np.ndarray) -> float:
    """Global relative l2 error ||got - expected|| / ||expected||."""
    got = np.asarray(got)
    expected = np.asarray(expected)
    denom = np.linalg.norm(expected.ravel())
    if denom == 0.0:
        return float(np.linalg.norm(got.ravel()))
    return float(np.linalg.norm((got - expected).ravel()) / denom)


# ---------------------------------------------------------------------------
# cones
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cone:
    """Open frequency cone: direction, half-angle and inner radius.

    In d=1 the cone is a sign half-line; any half-angle below pi selects the
    matching sign, while half-angle pi means both signs (the full cone).  The
    lattice point k=0 belongs to the mask only for a full cone with zero inner
    radius, so that the full-cone semi-norm recovers the global norm.
    """

    direction: tuple[float, ...]
    half_angle: float = np.pi / 8
    inner_radius: float = 0.0

    def __post_init__(self):
        d = np.atleast_1d(np.asarray(self.direction, dtype=float))
        norm = np.linalg.norm(d)
        if norm == 0:
            raise ParameterError("cone direction must be nonzero")
        object.__setattr__(self, "direction", tuple(float(v) for v in d / norm))
        if not (0.0 < self.half_angle <= np.pi):
            raise ParameterError("half_angle must lie in (0, pi]")
        if self.inner_radius < 0:
            raise ParameterError("inner_radius must be >= 0")

    @property
    def is_full(self) -> bool:
        return self.half_angle >= np.pi

    @staticmethod
    def full(dimension: int, inner_radius: float = 0.0) -> "Cone":
        return Cone(direction=(1.0,) * dimension, half_angle=np.pi, inner_radius=inner_radius)

    def angles(self, grid: Grid) -> np.ndarray:
        """Angle between every lattice point and the cone axis (0 at k=0)."""
        kmesh = grid.k_mesh()
        dot = sum(km * di for km, di in zip(kmesh, self.direction))
        radii = np.sqrt(sum(km**2 for km in kmesh))
        with np.errstate(invalid="ignore", divide="ignore"):
            cosang = np.where(radii > 0, dot / np.where(radii > 0, radii, 1.0), 1.0)
        return np.arccos(np.clip(cosang, -1.0, 1.0))

    def mask(self, grid: Grid) -> np.ndarray:
        """Boolean lattice mask {k : |k| >= R, angle(k, dir) <= half_angle}."""
        radii = grid.k_radii()
        m = radii >= self.inner_radius
        if not self.is_full:
            m &= self.angles(grid) <= self.half_angle
            m &= radii > 0
        return m


# ---------------------------------------------------------------------------
# cutoffs
# ---------------------------------------------------------------------------


def smooth_ramp(u: np.ndarray) -> np.ndarray:
    """C-infinity ramp: 0 for u <= 0, 1 for u >= 1, exp(-1/t) transition."""
    u = np.asarray(u, dtype=float)
    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        a = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
        b = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1.0 - u, 1.0)), 0.0)
    out = np.where(u <= 0, 0.0, np.where(u >= 1, 1.0, a / (a + b)))
    return out


@dataclass(frozen=True)
class CutoffSpec:
    """Radial bump: 1 inside radius r1 of the center, 0 outside r2."""

    center: tuple[float, ...]
    r1: float
    r2: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", tuple(float(v) for v in np.atleast_1d(self.center))
        )
        if not (0 < self.r1 < self.r2):
            raise ParameterError("need 0 < r1 < r2")
        if self.r2 >= np.pi:
            raise ParameterError("r2 must be < pi to fit the torus")

    def halved(self) -> "CutoffSpec":
        return CutoffSpec(self.center, self.r1 / 2, self.r2 / 2)


def cutoff_profile(rho: np.ndarray, r1: float, r2: float) -> np.ndarray:
    """Radial profile: 1 for rho <= r1, 0 for rho >= r2, smooth between."""
    return smooth_ramp((r2 - np.asarray(rho, dtype=float)) / (r2 - r1))


def make_cutoff(spec: CutoffSpec, grid: Grid) -> SampledField:
    """Sample the smooth radial bump of ``spec`` on the grid."""
    if len(spec.center) != grid.dimension:
        raise InputError("cutoff center dimension does not match grid")
    rho = torus_distance(grid.x_points(), spec.center).reshape(grid.shape)
    return SampledField(grid, cutoff_profile(rho, spec.r1, spec.r2))


@dataclass(frozen=True)
class DirectionalCutoffSpec:
    """Smooth 0-homogeneous frequency cutoff supported in a cone.

    ``transition_radius`` is where the radial ramp (rising from the cone's
    inner radius) reaches 1; ``angular_margin`` is the smoothing band inside
    the cone boundary.  Zero margin with ``transition_radius`` equal to the
    inner radius gives the sharp indicator of the cone mask.
    """

    cone: Cone
    transition_radius: float
    angular_margin: float = 0.0

    def __post_init__(self):
        if self.transition_radius < self.cone.inner_radius:
            raise ParameterError("transition_radius must be >= cone.inner_radius")
        if self.angular_margin < 0:
            raise ParameterError("angular_margin must be >= 0")
        if not self.cone.is_full and (
            self.cone.half_angle + self.angular_margin >= np.pi
        ):
            raise ParameterError("cone aperture plus margin must stay below pi")


def make_directional_cutoff(spec: DirectionalCutoffSpec, grid: Grid) -> SpectralField:
    """Sample the directional cutoff on the frequency lattice.

    The result is 0-homogeneous beyond the transition radius (exactly: the
    angular factor depends only on direction and the radial factor is 1),
    equals 1 on the shrunken cone beyond it, and is supported in the cone
    mask.
    """
    cone = spec.cone
    radii = grid.k_radii()
    r0, rt = cone.inner_radius, spec.transition_radius
    if rt > r0:
        radial = smooth_ramp((radii - r0) / (rt - r0))
    else:
        radial = (radii >= r0).astype(float)
    if cone.is_full:
        angular = np.ones_like(radii)
    else:
        theta = cone.angles(grid)
        if spec.angular_margin > 0:
            angular = smooth_ramp((cone.half_angle - theta) / spec.angular_margin)
        else:
            angular = (theta <= cone.half_angle).astype(float)
        angular = np.where(radii > 0, angular, 0.0)
    return SpectralField(grid, radial * angular)


# ---------------------------------------------------------------------------
# dyadic shells
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Shell:
    """One dyadic frequency shell: boolean lattice mask plus its radii."""

    mask: np.ndarray
    lo: float
    hi: float


def dyadic_shells(
    grid: Grid, inner_radius: float, radius_cap: float | None = None
) -> list[Shell]:
    """Dyadic shells {R 2^m <= |k| < R 2^{m+1}} up to the Nyquist radius.

    The final shell is clamped at n/2 (or at an explicit ``radius_cap``
    below it).  Shells are pairwise disjoint and cover {R <= |k| < cap};
    the list is empty when the inner radius already exceeds the cap.
    """
    if inner_radius < 1.0:
        raise ParameterError("inner_radius must be >= 1")
    cap = grid.nyquist if radius_cap is None else min(radius_cap, grid.nyquist)
    radii = grid.k_radii()
    shells = []
    lo = float(inner_radius)
    while lo < cap:
        hi = min(2.0 * lo, cap)
        shells.append(Shell((radii >= lo) & (radii < hi), lo, hi))
        lo = 2.0 * lo
    return shells
