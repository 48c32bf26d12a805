"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines and timings.  Tolerances are pinned here and nowhere else.
"""

import time
from dataclasses import replace

import numpy as np
import pytest

from mlwf import (
    BFSpaceSpec,
    BracketPower,
    Cone,
    ConstantWeight,
    CutoffSpec,
    DirectionalCutoffSpec,
    Grid,
    QuotientWeight,
    WavefrontQuery,
    apply_kn,
    apply_t,
    bf_norm,
    bump_window,
    char_set,
    compare_reports,
    compose,
    cutoff_product_symbol,
    direction_fan,
    fb_mod_equivalence,
    forward_transform,
    gaussian_window,
    generate,
    induced_projection_spec,
    polynomial_symbol,
    quad_inner,
    quad_norm,
    relative_l2,
    report_union,
    requantize,
    smoothing_probe,
    stft,
    twisted_convolution,
    wf_estimate,
    wf_family,
    wf_modulation,
    young_check,
)
from mlwf.symbols import CharParams

from conftest import random_field


def _report(name, passed, detail=""):
    print(f"\n[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


# ---------------------------------------------------------------------------
# shared suites
# ---------------------------------------------------------------------------

SITE = (np.pi / 2, 3 * np.pi / 2)
CHIRP_CENTER = (np.pi, 1.0)


def suite_cases(grid, chirp_probes):
    """The test-singularity suite with per-field probe points.

    Probe points sit either on a singular locus or in a region exactly
    decoupled from every other locus (clear of the cutoff radius and of the
    kernel arms through the point-mass site).
    """
    return {
        "delta": (
            generate({"kind": "delta-surrogate", "center": list(SITE)}, grid),
            (SITE, (3.97, 0.83), (3 * np.pi / 2, np.pi / 2)),
        ),
        "jump": (
            generate({"kind": "line-jump-2d", "a": np.pi / 2, "b": 3 * np.pi / 2}, grid),
            ((np.pi / 2, 3 * np.pi / 2), (3 * np.pi / 2, np.pi / 2)),
        ),
        "chirp": (
            generate({"kind": "chirp", "center": list(CHIRP_CENTER), "width": 0.4, "rate": 4.0}, grid),
            chirp_probes,
        ),
    }


@pytest.fixture(scope="module")
def inclusion_suite():
    """Criteria 6 and 7: all reports at n=128, d=2 for both weights and symbols."""
    t0 = time.time()
    g = Grid(2, 128)
    cases = suite_cases(g, chirp_probes=(CHIRP_CENTER, (4.14, 1.5)))
    space = BFSpaceSpec("lp", 2)
    elliptic = polynomial_symbol(
        g, [((0, 0), 1.0), ((2, 0), 1.0), ((0, 2), 1.0)], omega0=BracketPower(2.0)
    )
    cone0 = Cone((1.0, 0.0), half_angle=np.pi / 6, inner_radius=2.0)
    directional = cutoff_product_symbol(
        g,
        CutoffSpec(SITE, 0.8, 1.5),
        DirectionalCutoffSpec(cone0, transition_radius=6.0, angular_margin=np.pi / 18),
    )
    symbols = {
        "elliptic": (elliptic, BracketPower(2.0)),
        "directional": (directional, ConstantWeight(1.0)),
    }
    rows = []
    for s in (0.0, 1.0):
        omega = BracketPower(s) if s else ConstantWeight(1.0)
        for sym_name, (sym, omega0) in symbols.items():
            for field_name, (f, points) in cases.items():
                q = WavefrontQuery(base_points=points, weight=omega, space=space, two_scale=False)
                rep_f = wf_estimate(f, q)
                rep_g = wf_estimate(
                    apply_kn(sym, f), replace(q, weight=QuotientWeight(omega, omega0))
                )
                chars = char_set(
                    sym, omega0, rep_f.base_points, rep_f.directions,
                    CharParams(aperture=q.resolved_aperture(g)),
                )
                rows.append(
                    {
                        "weight": f"sigma_{s:g}",
                        "symbol": sym_name,
                        "field": field_name,
                        "forward": compare_reports(rep_g, rep_f, angular_slack=1),
                        "backward": compare_reports(rep_f, report_union(rep_g, chars), angular_slack=1),
                        "jaccard": compare_reports(rep_f, rep_g, angular_slack=1).jaccard,
                    }
                )
    return rows, time.time() - t0


@pytest.fixture(scope="module")
def identity_suite():
    """Criteria 9 and 10: spectral vs modulation reports at n=64, d=2."""
    t0 = time.time()
    g = Grid(2, 64)
    cases = suite_cases(g, chirp_probes=(CHIRP_CENTER, (0.0, CHIRP_CENTER[1] + np.pi)))
    spec2d = BFSpaceSpec("lp", 2)
    ind_spec, _ = induced_projection_spec(spec2d)
    omega = ConstantWeight(1.0)
    win_gauss = gaussian_window(g, 0.6)
    win_bump = bump_window(g, 0.5, 1.0)
    out = {}
    for name, (f, points) in cases.items():
        q = WavefrontQuery(base_points=points, weight=omega, space=ind_spec)
        rep_fb = wf_estimate(f, q)
        q_mod = replace(q, space=spec2d)
        rep_gauss = wf_modulation(f, q_mod, win_gauss)
        rep_bump = wf_modulation(f, q_mod, win_bump)
        out[name] = (rep_fb, rep_gauss, rep_bump)
    return g, out, time.time() - t0


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


def test_criterion_01_exact_calculus_regression(rng):
    t0 = time.time()
    g1 = Grid(1, 64)
    x = g1.x_axis
    pairs_1d = [
        (polynomial_symbol(g1, [((1,), 1.0)]), polynomial_symbol(g1, [((0,), np.exp(1j * x))])),
        (polynomial_symbol(g1, [((2,), 1.0), ((0,), 1.0)]), polynomial_symbol(g1, [((1,), np.exp(1j * x))])),
        (polynomial_symbol(g1, [((3,), 1.0)]), polynomial_symbol(g1, [((0,), np.cos(2 * x))])),
        (polynomial_symbol(g1, [((1,), np.exp(2j * x))]), polynomial_symbol(g1, [((2,), 1.0)])),
        (polynomial_symbol(g1, [((2,), np.exp(-1j * x))]), polynomial_symbol(g1, [((1,), np.exp(1j * x))])),
        (polynomial_symbol(g1, [((2,), 1.0), ((1,), 1.0), ((0,), 1.0)]), polynomial_symbol(g1, [((1,), np.sin(x))])),
    ]
    g2 = Grid(2, 32)
    x1, x2 = g2.x_mesh()
    pairs_2d = [
        (polynomial_symbol(g2, [((1, 1), 1.0)]), polynomial_symbol(g2, [((0, 0), np.exp(1j * x1))])),
        (polynomial_symbol(g2, [((2, 0), 1.0), ((0, 2), 1.0), ((0, 0), 1.0)]),
         polynomial_symbol(g2, [((1, 0), np.exp(1j * x2))])),
        (polynomial_symbol(g2, [((2, 1), 1.0)]), polynomial_symbol(g2, [((0, 0), np.exp(-1j * x1) * np.exp(1j * x2))])),
        (polynomial_symbol(g2, [((1, 0), np.exp(1j * x1)), ((0, 1), 1.0)]),
         polynomial_symbol(g2, [((0, 1), np.cos(x2))])),
    ]
    worst = 0.0
    for grid, pairs, band in ((g1, pairs_1d, 12.0), (g2, pairs_2d, 5.0)):
        for a1, a2 in pairs:
            c = compose(a1, a2, a1.xi_degree + 1)
            for _ in range(50):
                f = random_field(grid, rng, band=band)
                lhs = apply_kn(a1, apply_kn(a2, f))
                worst = max(worst, relative_l2(apply_kn(c, f).values, lhs.values))
    elapsed = time.time() - t0
    _report(
        "criterion-01 exact-calculus",
        worst <= 1e-10 and elapsed <= 60,
        f"worst rel err {worst:.2e} over 10 pairs x 50 fields, {elapsed:.1f}s",
    )


def test_criterion_02_quantization_consistency(rng):
    t0 = time.time()
    g = Grid(1, 32)
    x = g.x_axis
    symbols = [
        polynomial_symbol(g, [((1,), np.exp(2j * x))]),
        polynomial_symbol(g, [((2,), 1.0), ((0,), 1.0)]),
        polynomial_symbol(g, [((2,), np.cos(2 * x)), ((0,), 2.0)]),
        polynomial_symbol(g, [((3,), 1.0), ((1,), np.exp(-2j * x))]),
        polynomial_symbol(g, [((1,), 1.0 + 0.5 * np.cos(2 * x))]),
    ]
    worst = 0.0
    for a in symbols:
        for t in (0.5, 1.0):
            b = requantize(a, 0.0, t, a.xi_degree + 1)
            for _ in range(5):
                f = random_field(g, rng, band=6)
                direct = apply_t(a, t, f, method="direct")
                worst = max(worst, relative_l2(apply_kn(b, f).values, direct.values))
    elapsed = time.time() - t0
    _report(
        "criterion-02 quantization-consistency",
        worst <= 1e-8 and elapsed <= 120,
        f"worst rel err {worst:.2e}, t in {{1/2, 1}}, {elapsed:.1f}s",
    )


def test_criterion_03_reproducing_identity(rng):
    t0 = time.time()
    g = Grid(1, 64)
    f = random_field(g, rng)
    w1, w2, w3 = (gaussian_window(g, s) for s in (1.0, 0.8, 1.3))
    lhs = twisted_convolution(stft(f, w1), stft(w3.samples, w2)).values
    rhs = quad_inner(w3.samples, w1.samples) * stft(f, w2).values
    err = np.linalg.norm(lhs - rhs) / np.linalg.norm(rhs)
    elapsed = time.time() - t0
    _report(
        "criterion-03 reproducing-identity",
        err <= 1e-6 and elapsed <= 30,
        f"rel err {err:.2e}, {elapsed:.1f}s",
    )


def test_criterion_04_char_set_sanity():
    t0 = time.time()
    g = Grid(2, 128)
    pts = [(np.pi, np.pi), (1.3, 4.4)]
    dirs = direction_fan(2, 16)
    elliptic = polynomial_symbol(g, [((0, 0), 1.0), ((2, 0), 1.0), ((0, 2), 1.0)], omega0=BracketPower(2.0))
    n_ell = int(char_set(elliptic, BracketPower(2.0), pts, dirs).characteristic.sum())
    zero = polynomial_symbol(g, [((0, 0), 0.0)], omega0=ConstantWeight(1.0))
    rep_zero = char_set(zero, ConstantWeight(1.0), pts, dirs)
    all_zero = bool(rep_zero.characteristic.all())
    heat = polynomial_symbol(g, [((1, 0), 1j), ((0, 2), 1.0)], omega0=BracketPower(1.0))
    n_heat = int(
        char_set(heat, BracketPower(1.0), pts, dirs, CharParams(c_min=0.1, inner_radius=g.n / 8)).characteristic.sum()
    )
    elapsed = time.time() - t0
    _report(
        "criterion-04 char-set-sanity",
        n_ell == 0 and all_zero and n_heat == 0 and elapsed <= 60,
        f"elliptic {n_ell} char, zero all-char {all_zero}, heat {n_heat} char, {elapsed:.1f}s",
    )


def test_criterion_05_char_requantization_invariance():
    t0 = time.time()
    g = Grid(2, 64)
    x1, _ = g.x_mesh()
    library = [
        (polynomial_symbol(g, [((0, 0), 1.0), ((2, 0), 1.0), ((0, 2), 1.0)], omega0=BracketPower(2.0)), BracketPower(2.0)),
        (polynomial_symbol(g, [((1, 0), 1j), ((0, 2), 1.0)], omega0=BracketPower(1.0)), BracketPower(1.0)),
        (polynomial_symbol(g, [((1, 0), 1.0 + 0.3 * np.cos(x1)), ((0, 1), 1j)], omega0=BracketPower(1.0)), BracketPower(1.0)),
        (polynomial_symbol(g, [((1, 0), 1.0)], omega0=BracketPower(1.0)), BracketPower(1.0)),
    ]
    pts = [(np.pi, np.pi), (2.0, 4.0)]
    dirs = direction_fan(2, 16)
    agree = True
    for a, w0 in library:
        b = requantize(a, 0.0, 1.0, a.xi_degree + 1)
        ra = char_set(a, w0, pts, dirs, CharParams(inner_radius=16.0))
        rb = char_set(b, w0, pts, dirs, CharParams(inner_radius=16.0))
        agree &= bool(np.array_equal(ra.characteristic, rb.characteristic))
    elapsed = time.time() - t0
    _report(
        "criterion-05 char-requantization-invariance",
        agree and elapsed <= 60,
        f"bin-for-bin agreement on {len(library)} symbols, {elapsed:.1f}s",
    )


def test_criterion_06_microlocal_inclusion(inclusion_suite):
    rows, elapsed = inclusion_suite
    violations = sum(
        len(r["forward"].violations) + len(r["backward"].violations) for r in rows
    )
    ok = all(r["forward"].subset and r["backward"].subset for r in rows)
    _report(
        "criterion-06 microlocal-inclusion",
        ok and violations == 0 and elapsed <= 600,
        f"{len(rows)} (weight, symbol, field) cases, {violations} violations, {elapsed:.1f}s",
    )


def test_criterion_07_elliptic_equality(inclusion_suite):
    rows, elapsed = inclusion_suite
    jacs = [r["jaccard"] for r in rows if r["symbol"] == "elliptic"]
    ok = all(j >= 0.9 for j in jacs)
    _report(
        "criterion-07 elliptic-equality",
        ok and elapsed <= 600,
        f"jaccards {[round(j, 3) for j in jacs]} (need >= 0.9), {elapsed:.1f}s",
    )


def test_criterion_08_smoothing_probe():
    t0 = time.time()
    g = Grid(2, 128)
    a = polynomial_symbol(g, [((0, 0), 1.0), ((2, 0), 1.0), ((0, 2), 1.0)], omega0=BracketPower(2.0))
    c2 = (2.0, 2.0)
    f = generate({"kind": "delta-surrogate", "center": list(c2)}, g)
    rep = smoothing_probe(a, CutoffSpec((5.0, 5.0), 0.5, 1.0), CutoffSpec(c2, 0.5, 1.0), f, n_directions=16)
    slopes_ok = all(r.value < 1e-10 or r.slope <= -2.0 for r in rep.results)
    elapsed = time.time() - t0
    supra = [r for r in rep.results if r.value >= 1e-10]
    _report(
        "criterion-08 smoothing-probe",
        rep.all_regular and slopes_ok and elapsed <= 60,
        f"all regular, {len(supra)} cones above the floor all with slope <= -2, {elapsed:.1f}s",
    )


def test_criterion_09_wf_identity(identity_suite):
    g, reports, elapsed = identity_suite
    t0 = time.time()
    ok = True
    details = []
    for name, (rep_fb, rep_gauss, _) in reports.items():
        fwd = compare_reports(rep_fb, rep_gauss, angular_slack=1)
        back = compare_reports(rep_gauss, rep_fb, angular_slack=1)
        ok &= fwd.subset and back.subset and fwd.jaccard >= 0.9
        details.append(f"{name}: jac {fwd.jaccard:.2f}")
    delta = generate({"kind": "delta-surrogate", "center": [np.pi, np.pi]}, g)
    eq = fb_mod_equivalence(
        delta, ConstantWeight(1.0), BFSpaceSpec("lpq1", 1, 2), gaussian_window(g, 0.6), n_probes=20
    )
    ok &= eq.ratio_spread <= 2.0
    elapsed += time.time() - t0
    _report(
        "criterion-09 fb-modulation-wf-identity",
        ok and elapsed <= 900,
        f"{'; '.join(details)}; constant spread {eq.ratio_spread:.2f} (<= 2), {elapsed:.1f}s",
    )


def test_criterion_10_window_independence(identity_suite):
    _, reports, elapsed = identity_suite
    jacs = {}
    for name, (_, rep_gauss, rep_bump) in reports.items():
        jacs[name] = compare_reports(rep_gauss, rep_bump, angular_slack=1).jaccard
    ok = all(j >= 0.9 for j in jacs.values())
    _report(
        "criterion-10 window-independence",
        ok and elapsed <= 600,
        f"gauss-vs-bump jaccards {({k: round(v, 3) for k, v in jacs.items()})}, {elapsed:.1f}s",
    )


def test_criterion_11_invariant_suites():
    t0 = time.time()
    rng = np.random.default_rng(2024)
    failures = []

    # Parseval
    g = Grid(1, 64)
    for _ in range(20):
        f = random_field(g, rng)
        lattice = np.sqrt((np.abs(forward_transform(f).coeffs) ** 2).sum())
        if abs(lattice - quad_norm(f)) > 1e-12 * quad_norm(f):
            failures.append("parseval")

    # solidity
    for _ in range(20):
        G = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        F = G * rng.uniform(0, 1, (8, 8))
        for spec in (BFSpaceSpec("lp", 1), BFSpaceSpec("lpq1", 2, 1), BFSpaceSpec("lpq2", np.inf, 2)):
            if bf_norm(spec, F) > bf_norm(spec, G) + 1e-12:
                failures.append("solidity")

    # cone monotonicity
    from mlwf import fb_seminorm

    g2 = Grid(2, 32)
    for _ in range(10):
        f = random_field(g2, rng)
        small = Cone((1.0, 0.0), half_angle=np.pi / 8, inner_radius=4.0)
        large = Cone((1.0, 0.0), half_angle=np.pi / 4, inner_radius=4.0)
        vs = fb_seminorm(f, ConstantWeight(1.0), small, BFSpaceSpec("lp", 2)).value
        vl = fb_seminorm(f, ConstantWeight(1.0), large, BFSpaceSpec("lp", 2)).value
        if vs > vl + 1e-12:
            failures.append("cone-monotonicity")

    # weight monotonicity of regularity flags on a sigma-family field
    from mlwf import SpectralField, inverse_transform

    g1 = Grid(1, 64)
    coeffs = (1.0 + np.abs(g1.k_axis)) ** -1.6 + 0j
    f = inverse_transform(SpectralField(g1, coeffs))
    cone = Cone((1.0,), inner_radius=2.0)
    flags = [
        fb_seminorm(f, BracketPower(s), cone, BFSpaceSpec("lp", 2)).regular for s in (0.0, 1.0, 2.0)
    ]
    if not (flags[0] and not flags[1] and not flags[2]):
        failures.append("weight-monotonicity")

    # Young ratio <= 1 for L1 with v == 1
    for _ in range(100):
        phi = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        h = rng.standard_normal(64) + 1j * rng.standard_normal(64)
        rep = young_check(phi, h, BFSpaceSpec("lp", 1), ConstantWeight(1.0), grid=g1)
        if rep.ratio > 1 + 1e-12:
            failures.append("young")

    # sup/inf sandwich
    gd = Grid(2, 32)
    fd = generate({"kind": "delta-surrogate", "center": [np.pi, np.pi]}, gd)
    q = WavefrontQuery(base_points=((np.pi, np.pi),), weight=ConstantWeight(1.0), space=BFSpaceSpec("lp", 2))
    weights = [BracketPower(s) for s in (0.0, 1.0)]
    sup = wf_family(fd, q, weights, [BFSpaceSpec("lp", 2)], "sup")
    inf = wf_family(fd, q, weights, [BFSpaceSpec("lp", 2)], "inf")
    for w in weights:
        rep = wf_estimate(fd, replace(q, weight=w))
        if np.any(inf.singular & ~rep.singular) or np.any(rep.singular & ~sup.singular):
            failures.append("sup-inf-sandwich")

    elapsed = time.time() - t0
    _report(
        "criterion-11 invariant-suites",
        not failures and elapsed <= 300,
        f"failures: {failures or 'none'}, {elapsed:.1f}s",
    )
