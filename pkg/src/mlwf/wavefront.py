"""Wave-front estimation: per (base point, direction) decay diagnostics.

A query fixes a fan of direction bins, a two-radius localisation template
and the weighted space in which decay is measured.  For every base point the
field is multiplied by a cutoff centred there (plus a half-radius probe
whose verdicts must agree, otherwise the entry is flagged unstable and
counted singular) and each direction cone gets a decay slope.  Reports are
plain arrays, serialisable, diffable and comparable with angular slack.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InputError, ParameterError
from .grids import Cone, CutoffSpec, Grid, SampledField, forward_transform, make_cutoff
from .spaces import ANALYSIS_BAND_FRACTION, BFSpaceSpec, spectral_seminorm
from .weights import Weight

TWO_PI = 2.0 * np.pi


def direction_fan(dimension: int, count: int) -> np.ndarray:
    """Equally spaced unit directions (signs in d=1, a circle fan in d=2)."""
    if dimension == 1:
        return np.array([[1.0], [-1.0]])
    ang = TWO_PI * np.arange(count) / count
    return np.stack([np.cos(ang), np.sin(ang)], axis=-1)


@dataclass(frozen=True)
class WavefrontQuery:
    """Geometry and space parameters of a wave-front scan."""

    base_points: tuple
    weight: Weight
    space: BFSpaceSpec
    n_directions: int | None = None  # default 16 in d=2, 2 in d=1
    cutoff_r1: float = 0.7
    cutoff_r2: float = 1.4
    aperture: float | None = None  # default: 1.5x bin half-width
    inner_radius: float | None = None  # default: min(4, max(2, nyquist/8))
    eta: float = 1.0
    two_scale: bool = True
    band_fraction: float = ANALYSIS_BAND_FRACTION

    def resolved_directions(self, grid: Grid) -> int:
        if self.n_directions is not None:
            return self.n_directions
        return 2 if grid.dimension == 1 else 16

    def resolved_aperture(self, grid: Grid) -> float:
        if self.aperture is not None:
            return self.aperture
        if grid.dimension == 1:
            return np.pi / 4
        # bins of width 2*pi/D; half a bin of overlap on each side
        return 1.5 * np.pi / self.resolved_directions(grid)

    def resolved_radius(self, grid: Grid) -> float:
        if self.inner_radius is not None:
            return self.inner_radius
        return min(4.0, max(2.0, grid.nyquist / 8.0))

    def geometry(self, grid: Grid) -> tuple[np.ndarray, list[Cone]]:
        dirs = direction_fan(grid.dimension, self.resolved_directions(grid))
        ap = self.resolved_aperture(grid)
        R = self.resolved_radius(grid)
        if ap < np.pi / dirs.shape[0] and grid.dimension == 2:
            raise ParameterError("aperture must cover at least a bin half-width")
        cones = [Cone(tuple(dv), half_angle=ap, inner_radius=R) for dv in dirs]
        return dirs, cones

    def meta(self, grid: Grid) -> dict:
        return {
            "dimension": grid.dimension,
            "n": grid.n,
            "n_directions": self.resolved_directions(grid),
            "cutoff_r1": self.cutoff_r1,
            "cutoff_r2": self.cutoff_r2,
            "aperture": self.resolved_aperture(grid),
            "inner_radius": self.resolved_radius(grid),
            "eta": self.eta,
            "two_scale": self.two_scale,
            "space": self.space.describe(),
            "weight": repr(self.weight),
        }


@dataclass(frozen=True)
class WavefrontReport:
    """Per (base point, direction bin) diagnostics of one scan."""

    base_points: np.ndarray  # (P, d)
    directions: np.ndarray  # (D, d)
    values: np.ndarray  # (P, D)
    slopes: np.ndarray  # (P, D)
    singular: np.ndarray  # (P, D) bool
    unstable: np.ndarray  # (P, D) bool
    shell_norms: np.ndarray  # (P, D, M)
    meta: dict = field(default_factory=dict)

    @property
    def singular_mask(self) -> np.ndarray:
        return self.singular

    @property
    def singular_entries(self) -> list[tuple[int, int]]:
        return [tuple(ij) for ij in np.argwhere(self.singular)]

    def to_json(self) -> str:
        entries = []
        P, D = self.values.shape
        for i in range(P):
            for j in range(D):
                entries.append(
                    {
                        "point": [float(v) for v in self.base_points[i]],
                        "bin": j,
                        "direction": [float(v) for v in self.directions[j]],
                        "value": float(self.values[i, j]),
                        "slope": None if not np.isfinite(self.slopes[i, j]) else float(self.slopes[i, j]),
                        "singular": bool(self.singular[i, j]),
                        "unstable": bool(self.unstable[i, j]),
                    }
                )
        return json.dumps({"query": self.meta, "entries": entries}, sort_keys=True, indent=1)

    def to_csv_rows(self) -> list[list]:
        d = self.base_points.shape[1]
        header = [f"point_x{ax + 1}" for ax in range(d)] + [
            "bin",
            "value",
            "slope",
            "singular",
            "unstable",
        ]
        rows = [header]
        P, D = self.values.shape
        for i in range(P):
            for j in range(D):
                rows.append(
                    [*(float(v) for v in self.base_points[i]), j,
                     float(self.values[i, j]), float(self.slopes[i, j]),
                     int(self.singular[i, j]), int(self.unstable[i, j])]
                )
        return rows


@dataclass(frozen=True)
class MaskReport:
    """Bare singular mask on a shared (base point, direction) binning."""

    base_points: np.ndarray
    directions: np.ndarray
    singular: np.ndarray

    @property
    def singular_mask(self) -> np.ndarray:
        return self.singular


def _localized_spectra(f: SampledField, point, q: WavefrontQuery):
    spec_list = []
    base = CutoffSpec(tuple(point), q.cutoff_r1, q.cutoff_r2)
    probes = [base, base.halved()] if q.two_scale else [base]
    for cspec in probes:
        phi = make_cutoff(cspec, f.grid)
        spec_list.append(forward_transform(phi * f).coeffs)
    return spec_list


def _scan_point(f: SampledField, point, cones, q: WavefrontQuery):
    grid = f.grid
    spectra = _localized_spectra(f, point, q)
    out = []
    for cone in cones:
        results = [
            spectral_seminorm(
                grid, coeffs, q.weight, cone, q.space,
                x_ref=point, eta=q.eta, band_fraction=q.band_fraction,
            )
            for coeffs in spectra
        ]
        primary = results[0]
        unstable = len(results) > 1 and any(r.regular != primary.regular for r in results[1:])
        singular = (not primary.regular) or unstable
        out.append((primary, singular, unstable))
    return out


def wf_estimate(f: SampledField, q: WavefrontQuery, jobs: int = 1) -> WavefrontReport:
    """Estimate the singular (point, direction) set of ``f`` under the query."""
    grid = f.grid
    points = np.atleast_2d(np.asarray(q.base_points, dtype=float))
    if points.shape[1] != grid.dimension:
        raise InputError("base point dimension does not match the grid")
    dirs, cones = q.geometry(grid)
    P, D = points.shape[0], dirs.shape[0]

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(lambda p: _scan_point(f, p, cones, q), points))
    else:
        rows = [_scan_point(f, p, cones, q) for p in points]

    n_shells = max((len(r[0].shell_norms) for row in rows for r in row), default=0)
    values = np.zeros((P, D))
    slopes = np.full((P, D), np.nan)
    singular = np.zeros((P, D), dtype=bool)
    unstable = np.zeros((P, D), dtype=bool)
    shell_norms = np.zeros((P, D, n_shells))
    for i, row in enumerate(rows):
        for j, (res, sing, unst) in enumerate(row):
            values[i, j] = res.value
            slopes[i, j] = res.slope
            singular[i, j] = sing
            unstable[i, j] = unst
            shell_norms[i, j, : len(res.shell_norms)] = res.shell_norms
    return WavefrontReport(
        base_points=points,
        directions=dirs,
        values=values,
        slopes=slopes,
        singular=singular,
        unstable=unstable,
        shell_norms=shell_norms,
        meta=q.meta(grid),
    )


def wf_family(
    f: SampledField,
    q: WavefrontQuery,
    weights,
    specs,
    mode: str,
    jobs: int = 1,
    per_member_cones: bool = False,
) -> WavefrontReport:
    """Sup/inf wave-front set over a finite family of (weight, space) pairs.

    The cone fan is shared across the family; sup-mode marks a direction
    regular iff it is regular for every member, inf-mode iff for some member.
    With ``per_member_cones`` each member may instead certify a direction
    through any cone of the fan containing it (the current bin or one of its
    neighbours), realising the "some cone" quantifier member by member.
    """
    weights = list(weights)
    specs = list(specs)
    if not weights:
        raise ParameterError("family must not be empty")
    if len(specs) == 1:
        specs = specs * len(weights)
    if len(specs) != len(weights):
        raise ParameterError("weights and specs must pair up")
    if mode not in ("sup", "inf"):
        raise ParameterError("mode must be 'sup' or 'inf'")

    reports = [
        wf_estimate(f, replace(q, weight=w, space=s), jobs=jobs)
        for w, s in zip(weights, specs)
    ]
    if per_member_cones:
        regular_stack = np.stack([_dilate_bins(~r.singular, 1) for r in reports])
    else:
        regular_stack = np.stack([~r.singular for r in reports])
    regular = regular_stack.all(axis=0) if mode == "sup" else regular_stack.any(axis=0)
    ref = reports[0]
    meta = dict(ref.meta)
    meta.update({"family_size": len(weights), "family_mode": mode})
    return WavefrontReport(
        base_points=ref.base_points,
        directions=ref.directions,
        values=np.max(np.stack([r.values for r in reports]), axis=0),
        slopes=np.max(np.stack([r.slopes for r in reports]), axis=0),
        singular=~regular,
        unstable=np.any(np.stack([r.unstable for r in reports]), axis=0),
        shell_norms=ref.shell_norms,
        meta=meta,
    )


def wf_classical(
    f: SampledField, q: WavefrontQuery, j_max: int, p_exponent: float = 1.0, jobs: int = 1
) -> WavefrontReport:
    """Rapid-decay surrogate: sup-type family over bracket powers <xi>^j.

    A direction is classically regular iff it passes for every weight
    <xi>^j, j = 0..j_max, in the L^p space with the given exponent.
    """
    from .weights import BracketPower

    if j_max < 2:
        raise ParameterError("j_max must be >= 2")
    weights = [BracketPower(float(j)) for j in range(j_max + 1)]
    specs = [BFSpaceSpec("lp", p_exponent)] * len(weights)
    return wf_family(f, q, weights, specs, mode="sup", jobs=jobs)


# ---------------------------------------------------------------------------
# report comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReportComparison:
    subset: bool
    violations: tuple[tuple[int, int], ...]
    jaccard: float


def _dilate_bins(mask: np.ndarray, slack: int) -> np.ndarray:
    """Dilate a (P, D) singular mask cyclically along the bin axis."""
    if slack <= 0:
        return mask.copy()
    out = mask.copy()
    for s in range(1, slack + 1):
        out |= np.roll(mask, s, axis=1) | np.roll(mask, -s, axis=1)
    return out


def _check_binning(A, B):
    if A.base_points.shape != B.base_points.shape or not np.allclose(
        A.base_points, B.base_points
    ):
        raise InputError("reports use different base points")
    if A.directions.shape != B.directions.shape or not np.allclose(
        A.directions, B.directions
    ):
        raise InputError("reports use different direction binnings")


def compare_reports(A, B, angular_slack: int = 0) -> ReportComparison:
    """Subset / overlap comparison of two singular sets with angular slack.

    ``subset`` holds iff every singular entry of A has a singular entry of B
    within ``angular_slack`` bins at the same base point.  The jaccard index
    is taken over the slack-dilated singular sets (1.0 when both are empty).
    """
    _check_binning(A, B)
    a = A.singular_mask
    b = B.singular_mask
    b_dil = _dilate_bins(b, angular_slack)
    violations = tuple(tuple(ij) for ij in np.argwhere(a & ~b_dil))
    a_dil = _dilate_bins(a, angular_slack)
    union = a_dil | b_dil
    inter = a_dil & b_dil
    jaccard = 1.0 if not union.any() else float(inter.sum() / union.sum())
    return ReportComparison(subset=len(violations) == 0, violations=violations, jaccard=jaccard)


def report_union(A, B) -> MaskReport:
    """Union of two singular sets on the same binning."""
    _check_binning(A, B)
    return MaskReport(
        base_points=np.asarray(A.base_points),
        directions=np.asarray(A.directions),
        singular=A.singular_mask | B.singular_mask,
    )
