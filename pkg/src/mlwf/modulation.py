"""Short-time Fourier analysis and modulation-space semi-norms.

The STFT of a field is computed shift-by-shift on the full n^d x n^d phase
space grid (no frame subsampling, so norm values are canonical).  Phase-space
norms put the (2*pi/n)^d quadrature weight on the spatial block and the
counting measure on the frequency block; with that convention the discrete
reproducing identity under twisted convolution holds exactly, and the full
plane L^2 norm factorises as ||f||_2 ||window||_2.

Wave-front estimation on the modulation side reuses the wave-front query
geometry; the spatial block of the norm runs over the whole torus since the
localisation has already been done by the cutoff.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CostGuardError, InputError, ParameterError, RefusalError
from .grids import (
    TWO_PI,
    Cone,
    CutoffSpec,
    Grid,
    SampledField,
    forward_transform,
    make_cutoff,
    quad_norm,
    torus_distance,
)
from .spaces import (
    ANALYSIS_BAND_FRACTION,
    BFSpaceSpec,
    SeminormResult,
    _decide,
    bf_norm,
    induced_projection_spec,
)
from .wavefront import (
    ReportComparison,
    WavefrontQuery,
    WavefrontReport,
    compare_reports,
    wf_estimate,
)
from .weights import Weight

_TWIST_GUARD = {1: 64, 2: 16}
_STFT_CHUNK = 256


@dataclass(frozen=True)
class Window:
    """A nonzero analysis window with its construction tag."""

    kind: str
    samples: SampledField

    def __post_init__(self):
        if quad_norm(self.samples) == 0.0:
            raise ParameterError("window must not vanish")

    @property
    def grid(self) -> Grid:
        return self.samples.grid


def gaussian_window(grid: Grid, width: float = 1.0, center=None) -> Window:
    """Periodized Gaussian window exp(-|x - center|^2 / (2 width^2))."""
    if width <= 0:
        raise ParameterError("width must be positive")
    if center is None:
        center = (0.0,) * grid.dimension
    images = max(2, int(np.ceil(4.0 * width)))
    mesh = grid.x_mesh()
    vals = np.zeros(grid.shape)
    shifts = TWO_PI * np.arange(-images, images + 1)
    combos = np.array(np.meshgrid(*([shifts] * grid.dimension), indexing="ij"))
    for axis_shifts in combos.reshape(grid.dimension, -1).T:
        sq = sum((m - c - s) ** 2 for m, c, s in zip(mesh, center, axis_shifts))
        vals += np.exp(-sq / (2.0 * width**2))
    return Window("gaussian", SampledField(grid, vals))


def bump_window(grid: Grid, r1: float = 0.5, r2: float = 1.0) -> Window:
    """Smooth compactly supported window from the radial bump profile."""
    spec = CutoffSpec((0.0,) * grid.dimension, r1, r2)
    return Window("bump", make_cutoff(spec, grid))


def window_from_config(grid: Grid, cfg) -> Window:
    """Window from JSON ({"kind": "gaussian", "width": 1.0}) or "gauss:1.0"."""
    if isinstance(cfg, str):
        kind, _, args = cfg.partition(":")
        if kind in ("gauss", "gaussian"):
            return gaussian_window(grid, float(args or 1.0))
        if kind == "bump":
            parts = [float(v) for v in args.split(",")] if args else [0.5, 1.0]
            return bump_window(grid, *parts)
        raise ParameterError(f"unknown window spec {cfg!r}")
    kind = cfg.get("kind")
    if kind in ("gauss", "gaussian"):
        return gaussian_window(grid, float(cfg.get("width", 1.0)))
    if kind == "bump":
        return bump_window(grid, float(cfg.get("r1", 0.5)), float(cfg.get("r2", 1.0)))
    raise ParameterError(f"unknown window kind {kind!r}")


@dataclass(frozen=True)
class PhaseSpaceField:
    """Values on grid x lattice; rows are flattened x, columns sorted k."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.shape != (self.grid.size, self.grid.size):
            raise InputError("phase-space array must be (n^d, n^d)")
        object.__setattr__(self, "values", v)


def _shifted_window_rows(window: SampledField, flat_indices: np.ndarray) -> np.ndarray:
    """Window translates w(y - x_j) for a chunk of shift indices, flattened."""
    grid = window.grid
    n = grid.n
    if grid.dimension == 1:
        idx = (np.arange(n)[None, :] - flat_indices[:, None]) % n
        return window.values[idx]
    j0, j1 = np.divmod(flat_indices, n)
    i0, i1 = np.divmod(np.arange(grid.size), n)
    return window.values[(i0[None, :] - j0[:, None]) % n, (i1[None, :] - j1[:, None]) % n]


def _stft_chunks(f: SampledField, window: Window, chunk: int = _STFT_CHUNK):
    """Yield (flat shift indices, V rows) without materialising the whole STFT."""
    grid = f.grid
    if window.grid != grid:
        raise InputError("window and field grid mismatch")
    scale = TWO_PI ** (-grid.dimension / 2.0) * (TWO_PI / grid.n) ** grid.dimension
    fvals = f.values.ravel()
    axes = tuple(range(1, grid.dimension + 1))
    for lo in range(0, grid.size, chunk):
        sel = np.arange(lo, min(lo + chunk, grid.size))
        rows = fvals[None, :] * np.conj(_shifted_window_rows(window.samples, sel))
        rows = rows.reshape((len(sel),) + grid.shape)
        spec = scale * np.fft.fftshift(np.fft.fftn(rows, axes=axes), axes=axes)
        yield sel, spec.reshape(len(sel), grid.size)


def stft(f: SampledField, window: Window) -> PhaseSpaceField:
    """Short-time Fourier transform V(x_j, k) on the full phase-space grid."""
    grid = f.grid
    out = np.empty((grid.size, grid.size), dtype=complex)
    for sel, rows in _stft_chunks(f, window):
        out[sel] = rows
    return PhaseSpaceField(grid, out)


def twisted_convolution(
    F: PhaseSpaceField, G: PhaseSpaceField, override_guard: bool = False
) -> PhaseSpaceField:
    """Direct-quadrature twisted convolution of two phase-space fields.

    (F tw* G)(x, xi) = (2*pi)^{-d/2} (2*pi/n)^d sum_{y, eta}
    F(x-y, xi-eta) G(y, eta) exp(-i<x-y, eta>), with cyclic index wrap on
    both blocks.  Oracle-grade O(n^{4d}) cost, guarded.
    """
    grid = F.grid
    if G.grid != grid:
        raise InputError("grid mismatch")
    if not override_guard and grid.n > _TWIST_GUARD[grid.dimension]:
        raise CostGuardError(
            f"twisted convolution is O(n^(4d)); n={grid.n} exceeds the guard "
            f"{_TWIST_GUARD[grid.dimension]} (override_guard=True to force)"
        )
    d = grid.dimension
    shape4 = grid.shape + grid.shape
    Fb = F.values.reshape(shape4)
    Gb = G.values.reshape(shape4)
    xpts = grid.x_points()
    kpts = grid.k_points()
    out = np.zeros(shape4, dtype=complex)
    roll_axes = tuple(range(2 * d))
    half = grid.n // 2
    for jy in range(grid.size):
        y = xpts[jy]
        iy = np.unravel_index(jy, grid.shape)
        for je in range(grid.size):
            ik = np.unravel_index(je, grid.shape)
            g = Gb[iy + ik]
            if g == 0:
                continue
            eta = kpts[je]
            # frequency-axis shift is by the integer frequency, index - n/2
            shift = iy + tuple(i - half for i in ik)
            shifted = np.roll(Fb, shift, axis=roll_axes)
            phase = np.exp(-1j * ((xpts - y) @ eta)).reshape(grid.shape + (1,) * d)
            out += g * shifted * phase
    out *= TWO_PI ** (-d / 2.0) * (TWO_PI / grid.n) ** d
    return PhaseSpaceField(grid, out.reshape(grid.size, grid.size))


# ---------------------------------------------------------------------------
# modulation norms (streaming column reductions)
# ---------------------------------------------------------------------------


def _phase_weight_rows(omega: Weight, grid: Grid, sel: np.ndarray, kpts: np.ndarray):
    if omega.x_dependent:
        xp = grid.x_points()[sel]
        return omega(xp[:, None, :], kpts[None, :, :])
    return omega(None, kpts)[None, :]


class _ColumnReduction:
    """Accumulate per-frequency-column statistics of |V * omega| over x rows."""

    def __init__(self, grid: Grid, spec: BFSpaceSpec):
        if spec.kind == "lpq2":
            raise ParameterError("column reduction does not apply to lpq2")
        self.spec = spec
        self.cell_x = (TWO_PI / grid.n) ** grid.dimension
        p = spec.p
        self.p = p
        self.cols = np.zeros(grid.size)

    def add(self, rows_abs: np.ndarray):
        if np.isinf(self.p):
            self.cols = np.maximum(self.cols, rows_abs.max(axis=0))
        else:
            self.cols += self.cell_x * (rows_abs**self.p).sum(axis=0)

    def norm_over(self, mask_flat: np.ndarray) -> float:
        spec = self.spec
        cols = self.cols[mask_flat]
        if cols.size == 0:
            return 0.0
        if spec.kind == "lp":
            if np.isinf(spec.p):
                return float(cols.max())
            return float(cols.sum() ** (1.0 / spec.p))
        # lpq1: inner over x already folded into cols (power p); outer q over k
        inner = cols if np.isinf(spec.p) else cols ** (1.0 / spec.p)
        if np.isinf(spec.q):
            return float(inner.max())
        return float((inner**spec.q).sum() ** (1.0 / spec.q))


class _RowRegionReduction:
    """lpq2 path: per-region inner xi reductions per x row, outer over x."""

    def __init__(self, grid: Grid, spec: BFSpaceSpec, masks: list[np.ndarray]):
        self.spec = spec
        self.cell_x = (TWO_PI / grid.n) ** grid.dimension
        self.masks = [m.ravel() for m in masks]
        self.acc = [0.0 if not np.isinf(spec.q) else -np.inf for _ in masks]

    def add(self, rows_abs: np.ndarray):
        p, q = self.spec.p, self.spec.q
        for r, mask in enumerate(self.masks):
            sub = rows_abs[:, mask]
            inner = sub.max(axis=1) if np.isinf(p) else (sub**p).sum(axis=1) ** (1.0 / p)
            if np.isinf(q):
                self.acc[r] = max(self.acc[r], float(inner.max(initial=0.0)))
            else:
                self.acc[r] += self.cell_x * float((inner**q).sum())

    def norms(self) -> list[float]:
        q = self.spec.q
        if np.isinf(q):
            return [max(a, 0.0) for a in self.acc]
        return [a ** (1.0 / q) for a in self.acc]


def _mod_region_norms(
    f: SampledField,
    omega: Weight,
    spec: BFSpaceSpec,
    window: Window,
    masks: list[np.ndarray],
) -> list[float]:
    """Norms of V_w(f) * omega over frequency-masked regions, one STFT pass."""
    grid = f.grid
    kpts = grid.k_points()
    if spec.kind == "lpq2":
        red: _RowRegionReduction | _ColumnReduction = _RowRegionReduction(grid, spec, masks)
    else:
        red = _ColumnReduction(grid, spec)
    for sel, rows in _stft_chunks(f, window):
        wvals = _phase_weight_rows(omega, grid, sel, kpts)
        red.add(np.abs(rows * wvals))
    if spec.kind == "lpq2":
        return red.norms()
    return [red.norm_over(m.ravel()) for m in masks]


def mod_seminorm(
    f: SampledField,
    omega: Weight,
    cone: Cone,
    spec: BFSpaceSpec,
    window: Window,
    eta: float = 1.0,
    band_fraction: float = ANALYSIS_BAND_FRACTION,
) -> SeminormResult:
    """Cone-restricted weighted phase-space semi-norm with decay diagnostics.

    Masks the frequency block of the STFT by the cone, weights by
    omega(x, xi) on the full phase-space grid and applies the two-block norm
    (spatial quadrature x frequency counting).  Shells as in the spectral
    semi-norm.
    """
    from .grids import dyadic_shells

    grid = f.grid
    mask = cone.mask(grid)
    if not mask.any():
        return SeminormResult(
            value=0.0, shell_norms=(), shell_bounds=(), slope=float("nan"),
            regular=True, eta=eta, degenerate=True, note="cone mask empty beyond Nyquist",
        )
    shells = dyadic_shells(grid, max(cone.inner_radius, 1.0), radius_cap=band_fraction * grid.nyquist)
    masks = [mask] + [mask & s.mask for s in shells]
    norms = _mod_region_norms(f, omega, spec, window, masks)
    value, shell_norms = norms[0], tuple(norms[1:])
    slope, regular = _decide(value, shell_norms, eta)
    return SeminormResult(
        value=value,
        shell_norms=shell_norms,
        shell_bounds=tuple((s.lo, s.hi) for s in shells),
        slope=slope,
        regular=regular,
        eta=eta,
        effectively_infinite=not np.isfinite(value),
    )


def mod_norm(f: SampledField, omega: Weight, spec: BFSpaceSpec, window: Window) -> float:
    """Full-plane modulation norm ||V_w(f) omega|| (no cone restriction)."""
    grid = f.grid
    return _mod_region_norms(f, omega, spec, window, [np.ones(grid.shape, dtype=bool)])[0]


# ---------------------------------------------------------------------------
# wave-front estimation on the modulation side
# ---------------------------------------------------------------------------


def wf_modulation(
    f: SampledField, q: WavefrontQuery, window: Window, jobs: int = 1
) -> WavefrontReport:
    """Same pipeline as :func:`mlwf.wavefront.wf_estimate` with phase-space
    semi-norms: localise, then measure cone decay of the weighted STFT."""
    from .grids import dyadic_shells

    grid = f.grid
    points = np.atleast_2d(np.asarray(q.base_points, dtype=float))
    dirs, cones = q.geometry(grid)
    P, D = points.shape[0], dirs.shape[0]
    shells = dyadic_shells(
        grid, max(q.resolved_radius(grid), 1.0), radius_cap=q.band_fraction * grid.nyquist
    )
    M = len(shells)

    cone_masks = [c.mask(grid) for c in cones]
    masks = []
    for cm in cone_masks:
        masks.append(cm)
        masks.extend(cm & s.mask for s in shells)

    values = np.zeros((P, D))
    slopes = np.full((P, D), np.nan)
    singular = np.zeros((P, D), dtype=bool)
    unstable = np.zeros((P, D), dtype=bool)
    shell_norms = np.zeros((P, D, M))

    def _point_norms(point):
        base = CutoffSpec(tuple(point), q.cutoff_r1, q.cutoff_r2)
        probes = [base, base.halved()] if q.two_scale else [base]
        return [
            _mod_region_norms(make_cutoff(c, grid) * f, q.weight, q.space, window, masks)
            for c in probes
        ]

    if jobs > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=jobs) as pool:
            all_norms = list(pool.map(_point_norms, points))
    else:
        all_norms = [_point_norms(p) for p in points]

    for i, point in enumerate(points):
        per_scale = all_norms[i]
        for j in range(D):
            off = j * (M + 1)
            flags = []
            slope = float("nan")
            for scale_idx, norms in enumerate(per_scale):
                value = norms[off]
                shn = norms[off + 1 : off + 1 + M]
                s, regular = _decide(value, shn, q.eta)
                flags.append(regular)
                if scale_idx == 0:
                    values[i, j] = value
                    slope = s
                    shell_norms[i, j, :] = shn
            slopes[i, j] = slope
            unstable[i, j] = any(fl != flags[0] for fl in flags[1:])
            singular[i, j] = (not flags[0]) or unstable[i, j]

    meta = q.meta(grid)
    meta.update({"side": "modulation", "window": window.kind})
    return WavefrontReport(
        base_points=points,
        directions=dirs,
        values=values,
        slopes=slopes,
        singular=singular,
        unstable=unstable,
        shell_norms=shell_norms,
        meta=meta,
    )


@dataclass(frozen=True)
class WindowIndependenceReport:
    comparison: ReportComparison
    jaccard: float
    report_a: WavefrontReport
    report_b: WavefrontReport
    differing_entries: tuple[tuple[int, int], ...]


def window_independence_check(
    f: SampledField, q: WavefrontQuery, window_a: Window, window_b: Window, jobs: int = 1
) -> WindowIndependenceReport:
    """Compare modulation wave-front reports under two windows (slack 1)."""
    ra = wf_modulation(f, q, window_a, jobs=jobs)
    rb = wf_modulation(f, q, window_b, jobs=jobs)
    cmp_ = compare_reports(ra, rb, angular_slack=1)
    diff = tuple(tuple(ij) for ij in np.argwhere(ra.singular != rb.singular))
    return WindowIndependenceReport(
        comparison=cmp_, jaccard=cmp_.jaccard, report_a=ra, report_b=rb, differing_entries=diff
    )


# ---------------------------------------------------------------------------
# local equivalence of spectral and phase-space norms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    ratios: tuple[float, ...]
    c_empirical: float
    ratio_spread: float
    fb_report: WavefrontReport | None
    mod_report: WavefrontReport | None
    fb_in_mod: ReportComparison | None
    mod_in_fb: ReportComparison | None


def _support_radius(f: SampledField) -> float:
    mags = np.abs(f.values)
    peak = mags.max()
    if peak == 0.0:
        return 0.0
    pts = f.grid.x_points()
    center = pts[int(np.argmax(mags.ravel()))]
    heavy = mags.ravel() > 1e-12 * peak
    return float(torus_distance(pts[heavy], center).max())


def fb_mod_equivalence(
    f: SampledField,
    omega: Weight,
    spec2d: BFSpaceSpec,
    window: Window,
    q: WavefrontQuery | None = None,
    n_probes: int = 20,
    probe_band: float | None = None,
    seed: int = 5,
    jobs: int = 1,
) -> EquivalenceReport:
    """Two-sided check that phase-space and projected spectral norms agree.

    Norm level: the ratio ||g||_{M} / ||g||_{proj} is measured over a family
    of modulated bumps; the empirical equivalence constant and its spread are
    reported.  Wave-front level (when a query is given): compare the
    spectral report in the induced projection space against the modulation
    report, both ways with slack 1.
    """
    grid = f.grid
    if _support_radius(f) > np.pi / 4 + 1e-9:
        raise RefusalError("field support exceeds the pi/4 compactness ball")

    ind_spec, phi_expo = induced_projection_spec(spec2d)
    cellx = (TWO_PI / grid.n) ** grid.dimension
    phi_factor = bf_norm(BFSpaceSpec("lp", phi_expo), window.samples.values, cell=(cellx, 1.0))

    rng = np.random.default_rng(seed)
    band = probe_band if probe_band is not None else grid.nyquist / 4.0
    mesh = grid.x_mesh()
    x_ref = (np.pi,) * grid.dimension
    w0 = omega.xi_profile(grid, x_ref=np.asarray(x_ref))
    ratios = []
    for _ in range(n_probes):
        # modulated bumps of varying radius: translations alone leave both
        # norms exactly invariant, so shape variation is what probes C
        r2 = rng.uniform(np.pi / 8, np.pi / 4)
        bump = make_cutoff(CutoffSpec(x_ref, r2 / 2, r2), grid)
        kvec = rng.integers(-int(band), int(band) + 1, size=grid.dimension)
        phase = sum(km * xm for km, xm in zip(kvec, mesh))
        g = SampledField(grid, bump.values * np.exp(1j * phase))
        m_norm = mod_norm(g, omega, spec2d, window)
        ghat = forward_transform(g)
        proj = phi_factor * bf_norm(ind_spec, ghat.coeffs * w0)
        if proj > 0:
            ratios.append(m_norm / proj)
    ratios_t = tuple(float(r) for r in ratios)
    c_emp = max(max(ratios_t), 1.0 / min(ratios_t))
    spread = max(ratios_t) / min(ratios_t)

    fb_report = mod_report = None
    fb_in_mod = mod_in_fb = None
    if q is not None:
        from dataclasses import replace

        fb_report = wf_estimate(f, replace(q, weight=omega, space=ind_spec), jobs=jobs)
        mod_report = wf_modulation(f, replace(q, weight=omega, space=spec2d), window, jobs=jobs)
        fb_in_mod = compare_reports(fb_report, mod_report, angular_slack=1)
        mod_in_fb = compare_reports(mod_report, fb_report, angular_slack=1)
    return EquivalenceReport(
        ratios=ratios_t,
        c_empirical=float(c_emp),
        ratio_spread=float(spread),
        fb_report=fb_report,
        mod_report=mod_report,
        fb_in_mod=fb_in_mod,
        mod_in_fb=mod_in_fb,
    )
