"""Symbols a(x, xi) on grid x lattice, their calculus, and characteristic sets.

A symbol is held in one (or several) of three forms:

* a *term list* ``a(x, xi) = sum_T c_T(x) m_T(xi)`` where each xi-part is a
  lattice monomial ``xi^beta`` or a tabulated lattice profile -- the exact,
  fast representation used throughout the calculus;
* a dense *table* on grid x lattice (cost-guarded);
* a plain *evaluator* callable, usable at arbitrary points.

Composition and requantisation follow the standard expansions with
``D = -i d/dx``: spatial derivatives are taken spectrally on the
(band-limited) coefficient fields, frequency derivatives exactly on
monomials and by unit-step centered differences otherwise.  For a
xi-polynomial left factor the composition series terminates, and the
discrete operators then compose exactly on fields with enough spectral
margin.
"""

from __future__ import annotations

import itertools
import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import CostGuardError, DegenerateRegionError, InputError, ParameterError, RefusalError
from .grids import (
    Cone,
    CutoffSpec,
    DirectionalCutoffSpec,
    Grid,
    SampledField,
    make_cutoff,
    make_directional_cutoff,
    torus_distance,
)
from .weights import BracketPower, ConstantWeight, Weight, bracket

_TABLE_GUARD = 1 << 22  # max entries of a dense grid x lattice table


# ---------------------------------------------------------------------------
# terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SymbolTerm:
    """One separable term c(x) * m(xi): monomial exponent or lattice profile."""

    coeff: np.ndarray  # complex, grid-shaped
    beta: tuple[int, ...] | None = None
    profile: np.ndarray | None = None  # lattice-shaped when beta is None

    def __post_init__(self):
        if (self.beta is None) == (self.profile is None):
            raise ParameterError("term needs exactly one of beta / profile")
        c = np.asarray(self.coeff, dtype=complex)
        c.flags.writeable = False
        object.__setattr__(self, "coeff", c)
        if self.beta is not None:
            object.__setattr__(self, "beta", tuple(int(b) for b in self.beta))
            if any(b < 0 for b in self.beta):
                raise ParameterError("monomial exponents must be nonnegative")
        else:
            p = np.asarray(self.profile, dtype=complex)
            p.flags.writeable = False
            object.__setattr__(self, "profile", p)


def _monomial(grid: Grid, beta) -> np.ndarray:
    out = np.ones(grid.shape)
    for axis, b in enumerate(beta):
        if b:
            kax = grid.k_axis.reshape([-1 if a == axis else 1 for a in range(grid.dimension)])
            out = out * kax**b
    return out


class Symbol:
    """Evaluator a(x, xi) with class metadata and optional exact forms."""

    def __init__(
        self,
        grid: Grid,
        terms=None,
        table: np.ndarray | None = None,
        evaluator=None,
        omega0: Weight | None = None,
        rho: float = 1.0,
        delta: float = 0.0,
    ):
        if terms is None and table is None and evaluator is None:
            raise ParameterError("symbol needs terms, a table or an evaluator")
        self.grid = grid
        self.terms = tuple(terms) if terms is not None else None
        self.evaluator = evaluator
        self.rho = float(rho)
        self.delta = float(delta)
        self.omega0 = omega0 if omega0 is not None else self._default_weight()
        if table is not None:
            table = np.asarray(table, dtype=complex)
            if table.shape != grid.shape + grid.shape:
                if table.size == grid.size**2:
                    table = table.reshape(grid.shape + grid.shape)
                else:
                    raise InputError("symbol table has the wrong size")
            table.flags.writeable = False
        self.table = table
        self._coeff_spectra: dict[int, np.ndarray] = {}
        if self.terms is not None and self.evaluator is not None:
            self._validate_forms()

    # -- basic structure ----------------------------------------------------

    def _default_weight(self) -> Weight:
        deg = self.xi_degree
        if deg is not None and deg > 0:
            return BracketPower(float(deg))
        return ConstantWeight(1.0)

    @property
    def is_polynomial(self) -> bool:
        return self.terms is not None and all(t.beta is not None for t in self.terms)

    @property
    def xi_degree(self) -> int | None:
        """Total xi-degree for polynomial symbols, else None."""
        if self.terms is None or not self.is_polynomial:
            return None
        if not self.terms:
            return 0
        return max(sum(t.beta) for t in self.terms)

    @property
    def mu(self) -> float:
        return self.rho - self.delta

    def _validate_forms(self):
        rng = np.random.default_rng(7)
        g = self.grid
        m = 64
        xi = g.x_points()[rng.integers(0, g.size, m)]
        ki = g.k_points()[rng.integers(0, g.size, m)]
        direct = np.asarray(self.evaluator(xi, ki), dtype=complex)
        via_terms = self._eval_terms_points(xi, ki)
        scale = max(np.abs(direct).max(), 1.0)
        if np.abs(direct - via_terms).max() > 1e-12 * scale:
            raise InputError("exact form and evaluator disagree on the lattice")

    # -- evaluation ----------------------------------------------------------

    def _coeff_spectrum(self, idx: int) -> np.ndarray:
        if idx not in self._coeff_spectra:
            c = self.terms[idx].coeff
            self._coeff_spectra[idx] = np.fft.fftshift(np.fft.fftn(c)) / self.grid.size
        return self._coeff_spectra[idx]

    def _coeff_at(self, idx: int, x: np.ndarray) -> np.ndarray:
        """Trigonometric evaluation of a coefficient field at points (..., d)."""
        chat = self._coeff_spectrum(idx)
        kpts = self.grid.k_points()
        phases = np.exp(1j * (x @ kpts.T))
        return phases @ chat.ravel()

    def _term_xi_part(self, term: SymbolTerm, xi: np.ndarray) -> np.ndarray:
        if term.beta is not None:
            out = np.ones(xi.shape[:-1], dtype=complex)
            for axis, b in enumerate(term.beta):
                if b:
                    out = out * xi[..., axis] ** b
            return out
        idx = self._lattice_index(xi)
        return term.profile.reshape(-1)[idx]

    def _lattice_index(self, xi: np.ndarray) -> np.ndarray:
        n = self.grid.n
        ik = np.rint(xi).astype(int) + n // 2
        if np.any((ik < 0) | (ik >= n)):
            raise InputError("tabulated profile queried outside the lattice box")
        flat = ik[..., 0]
        for axis in range(1, self.grid.dimension):
            flat = flat * n + ik[..., axis]
        return flat

    def _eval_terms_points(self, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
        out = np.zeros(np.broadcast_shapes(x.shape[:-1], xi.shape[:-1]), dtype=complex)
        for idx, term in enumerate(self.terms):
            out = out + self._coeff_at(idx, x) * self._term_xi_part(term, xi)
        return out

    def eval_points(self, x, xi) -> np.ndarray:
        """Evaluate at paired points; x may be off-grid (trig interpolation)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.evaluator is not None:
            return np.asarray(self.evaluator(x, xi), dtype=complex)
        if self.terms is not None:
            return self._eval_terms_points(x, xi)
        # table: trig-interpolate along the grid axes
        g = self.grid
        idx = self._lattice_index(xi)
        that = np.fft.fftshift(
            np.fft.fftn(self.table, axes=tuple(range(g.dimension))),
            axes=tuple(range(g.dimension)),
        ) / g.size
        that = that.reshape(g.size, g.size)
        kpts = g.k_points()
        phases = np.exp(1j * (x @ kpts.T))
        return np.einsum("...m,m...->...", phases, that[:, idx])

    def eval_table(self, override_guard: bool = False) -> np.ndarray:
        """Dense values on grid x lattice, shaped grid.shape + grid.shape."""
        g = self.grid
        if self.table is not None:
            return self.table
        if g.size**2 > _TABLE_GUARD and not override_guard:
            raise CostGuardError(
                f"dense symbol table would hold {g.size**2} entries; "
                "pass override_guard=True to force"
            )
        if self.terms is not None:
            out = np.zeros(g.shape + g.shape, dtype=complex)
            for term in self.terms:
                xi_part = (
                    _monomial(g, term.beta).astype(complex)
                    if term.beta is not None
                    else term.profile
                )
                out += np.multiply.outer(term.coeff, xi_part)
            return out
        xp = g.x_points()
        kp = g.k_points()
        vals = self.evaluator(xp[:, None, :], kp[None, :, :])
        return np.asarray(vals, dtype=complex).reshape(g.shape + g.shape)

    def eval_lattice_slice(self, xi_points: np.ndarray, x_indices=None) -> np.ndarray:
        """Values at grid x (all, or a flat index subset) for given lattice
        points; returns (n_x, m)."""
        g = self.grid
        xi_points = np.atleast_2d(np.asarray(xi_points, dtype=float))
        if self.terms is not None:
            n_x = g.size if x_indices is None else len(x_indices)
            out = np.zeros((n_x, xi_points.shape[0]), dtype=complex)
            for term in self.terms:
                xi_part = self._term_xi_part(term, xi_points)
                coeff = term.coeff.ravel()
                if x_indices is not None:
                    coeff = coeff[x_indices]
                out += np.multiply.outer(coeff, xi_part)
            return out
        if self.table is not None:
            idx = self._lattice_index(xi_points)
            rows = self.table.reshape(g.size, g.size)
            if x_indices is not None:
                rows = rows[x_indices]
            return rows[:, idx]
        xp = g.x_points()
        if x_indices is not None:
            xp = xp[x_indices]
        return np.asarray(
            self.evaluator(xp[:, None, :], xi_points[None, :, :]), dtype=complex
        )

    @property
    def x_independent(self) -> bool:
        """True when every coefficient field is constant over the grid."""
        if self.terms is None:
            return False
        for t in self.terms:
            c = t.coeff.ravel()
            if not np.allclose(c, c[0], rtol=0.0, atol=1e-14 * max(1.0, float(np.abs(c[0])))):
                return False
        return True

    def scaled(self, factor: complex) -> "Symbol":
        return symbol_scale(self, factor)


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def _as_coeff(grid: Grid, coeff) -> np.ndarray:
    if isinstance(coeff, SampledField):
        return coeff.values
    if np.isscalar(coeff):
        return np.full(grid.shape, complex(coeff))
    arr = np.asarray(coeff, dtype=complex)
    if arr.shape != grid.shape:
        raise InputError("coefficient field does not match the grid")
    return arr


def polynomial_symbol(grid: Grid, terms, omega0=None, rho=1.0, delta=0.0) -> Symbol:
    """Symbol sum_beta c_beta(x) xi^beta from (beta, coeff) pairs."""
    tlist = [SymbolTerm(coeff=_as_coeff(grid, c), beta=tuple(b)) for b, c in terms]
    return Symbol(grid, terms=tlist, omega0=omega0, rho=rho, delta=delta)


def multiplier_symbol(grid: Grid, profile, omega0=None, rho=1.0, delta=0.0, evaluator=None) -> Symbol:
    """xi-only symbol from a lattice profile array or a function of k points."""
    if callable(profile):
        kpts = grid.k_points()
        prof = np.asarray(profile(kpts), dtype=complex).reshape(grid.shape)
        evaluator = evaluator or (lambda x, xi, _f=profile: np.asarray(_f(xi), dtype=complex))
    else:
        prof = np.asarray(profile, dtype=complex).reshape(grid.shape)
    term = SymbolTerm(coeff=np.ones(grid.shape, dtype=complex), profile=prof)
    return Symbol(grid, terms=[term], evaluator=evaluator, omega0=omega0, rho=rho, delta=delta)


def bracket_symbol(grid: Grid, s: float) -> Symbol:
    """<xi>^s as a multiplier symbol of class sigma_s."""
    return multiplier_symbol(
        grid,
        lambda kp: bracket(kp) ** s,
        omega0=BracketPower(s),
        rho=1.0,
        delta=0.0,
    )


def cutoff_product_symbol(
    grid: Grid, cutoff: CutoffSpec, dircutoff: DirectionalCutoffSpec
) -> Symbol:
    """phi(x) psi(xi) for a spatial cutoff and a directional cutoff."""
    phi = make_cutoff(cutoff, grid)
    psi = make_directional_cutoff(dircutoff, grid)
    term = SymbolTerm(coeff=phi.values, profile=psi.coeffs)
    return Symbol(grid, terms=[term], omega0=ConstantWeight(1.0), rho=1.0, delta=0.0)


# -- coefficient expression grammar -----------------------------------------

_NUM_RE = re.compile(r"^[+-]?(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?$")
_EXP_RE = re.compile(r"^e\^\{\s*(?P<m>[+-]?\d*)\s*i\s*x(?P<axis>[12])?\s*\}$")
_TRIG_RE = re.compile(r"^(?P<fn>cos|sin)\(\s*(?P<m>[+-]?\d*)\s*x(?P<axis>[12])?\s*\)$")


def parse_coefficient(grid: Grid, expr) -> np.ndarray:
    """Parse a coefficient expression into a band-limited field on the grid.

    Grammar: '*'-separated factors, each a real literal, 'i', a coordinate
    exponential like 'e^{ix1}' / 'e^{-2ix2}', or 'cos(2x1)' / 'sin(x2)'.
    Scalars and arrays pass through unchanged.
    """
    if not isinstance(expr, str):
        return _as_coeff(grid, expr)
    mesh = grid.x_mesh()
    out = np.ones(grid.shape, dtype=complex)
    for raw in expr.split("*"):
        tok = raw.strip()
        if tok == "i":
            out = out * 1j
            continue
        if _NUM_RE.match(tok):
            out = out * float(tok)
            continue
        m = _EXP_RE.match(tok)
        if m is None:
            m = _TRIG_RE.match(tok)
            if m is None:
                raise ParameterError(f"cannot parse coefficient factor {tok!r}")
            mult = m.group("m")
            mult = 1 if mult in ("", "+") else (-1 if mult == "-" else int(mult))
            axis = int(m.group("axis") or 1) - 1
            if axis >= grid.dimension:
                raise ParameterError(f"axis x{axis + 1} exceeds dimension")
            fn = np.cos if m.group("fn") == "cos" else np.sin
            out = out * fn(mult * mesh[axis])
            continue
        mult = m.group("m")
        mult = 1 if mult in ("", "+") else (-1 if mult == "-" else int(mult))
        axis = int(m.group("axis") or 1) - 1
        if axis >= grid.dimension:
            raise ParameterError(f"axis x{axis + 1} exceeds dimension")
        out = out * np.exp(1j * mult * mesh[axis])
    return out


def symbol_from_config(grid: Grid, cfg: dict) -> Symbol:
    """Build a symbol from its JSON configuration (see the CLI docs)."""
    kind = cfg.get("kind")
    rho = float(cfg.get("rho", 1.0))
    delta = float(cfg.get("delta", 0.0))
    if kind == "polynomial":
        terms = [
            (tuple(t["beta"]), parse_coefficient(grid, t.get("coeff", 1.0)))
            for t in cfg["terms"]
        ]
        return polynomial_symbol(grid, terms, rho=rho, delta=delta)
    if kind == "bracket":
        sym = bracket_symbol(grid, float(cfg["s"]))
        if "coeff" in cfg:
            coeff = parse_coefficient(grid, cfg["coeff"])
            term = SymbolTerm(coeff=coeff, profile=sym.terms[0].profile)
            return Symbol(grid, terms=[term], omega0=sym.omega0, rho=rho, delta=delta)
        return sym
    if kind == "cutoff-product":
        cut = cfg["cutoff"]
        dc = cfg["dircutoff"]
        cone = Cone(
            direction=tuple(dc["direction"]),
            half_angle=float(dc.get("half_angle", np.pi / 4)),
            inner_radius=float(dc.get("inner_radius", grid.nyquist / 4)),
        )
        spec = DirectionalCutoffSpec(
            cone=cone,
            transition_radius=float(dc.get("transition_radius", 2 * cone.inner_radius)),
            angular_margin=float(dc.get("angular_margin", cone.half_angle / 3)),
        )
        return cutoff_product_symbol(
            grid, CutoffSpec(tuple(cut["center"]), float(cut["r1"]), float(cut["r2"])), spec
        )
    if kind == "grid":
        table = np.load(cfg["path"])
        return Symbol(grid, table=table, rho=rho, delta=delta)
    raise ParameterError(f"unknown symbol kind {cfg.get('kind')!r}")


# ---------------------------------------------------------------------------
# symbol algebra
# ---------------------------------------------------------------------------


def _merge_terms(terms) -> list[SymbolTerm]:
    """Sum coefficient fields of monomial terms sharing an exponent."""
    by_beta: dict[tuple[int, ...], np.ndarray] = {}
    others: list[SymbolTerm] = []
    for t in terms:
        if t.beta is not None:
            if t.beta in by_beta:
                by_beta[t.beta] = by_beta[t.beta] + t.coeff
            else:
                by_beta[t.beta] = t.coeff.copy()
        else:
            others.append(t)
    merged = [SymbolTerm(coeff=c, beta=b) for b, c in sorted(by_beta.items())]
    return merged + others


def symbol_scale(a: Symbol, factor: complex) -> Symbol:
    if a.terms is not None:
        terms = [
            SymbolTerm(coeff=factor * t.coeff, beta=t.beta, profile=t.profile)
            for t in a.terms
        ]
        return Symbol(a.grid, terms=terms, omega0=a.omega0, rho=a.rho, delta=a.delta)
    if a.table is not None:
        return Symbol(a.grid, table=factor * a.table, omega0=a.omega0, rho=a.rho, delta=a.delta)
    ev = a.evaluator
    return Symbol(
        a.grid,
        evaluator=lambda x, xi: factor * ev(x, xi),
        omega0=a.omega0,
        rho=a.rho,
        delta=a.delta,
    )


def symbol_add(a: Symbol, b: Symbol, coeff: complex = 1.0, omega0=None) -> Symbol:
    """a + coeff * b, staying in term form when both operands carry one."""
    if a.grid != b.grid:
        raise InputError("grid mismatch")
    rho = min(a.rho, b.rho)
    delta = max(a.delta, b.delta)
    omega0 = omega0 or a.omega0
    if a.terms is not None and b.terms is not None:
        terms = list(a.terms) + [
            SymbolTerm(coeff=coeff * t.coeff, beta=t.beta, profile=t.profile)
            for t in b.terms
        ]
        return Symbol(a.grid, terms=_merge_terms(terms), omega0=omega0, rho=rho, delta=delta)
    table = a.eval_table() + coeff * b.eval_table()
    return Symbol(a.grid, table=table, omega0=omega0, rho=rho, delta=delta)


def _multi_indices_below(d: int, N: int):
    for total in range(N):
        for alpha in itertools.product(range(total + 1), repeat=d):
            if sum(alpha) == total:
                yield alpha


def _x_spectral_derivative(grid: Grid, coeff: np.ndarray, alpha) -> np.ndarray:
    """(D_x^alpha c) computed spectrally; D = -i d/dx, so the multiplier is m^alpha."""
    if not any(alpha):
        return coeff
    chat = np.fft.fftshift(np.fft.fftn(coeff))
    for axis, a in enumerate(alpha):
        if a:
            kax = grid.k_axis.reshape(
                [-1 if ax == axis else 1 for ax in range(grid.dimension)]
            )
            chat = chat * kax**a
    return np.fft.ifftn(np.fft.ifftshift(chat))


def _xi_centered_derivative(arr: np.ndarray, axes_offset: int, alpha) -> np.ndarray:
    """(D_xi^alpha) of a lattice-sampled array by unit centered differences."""
    out = np.asarray(arr, dtype=complex)
    for axis, a in enumerate(alpha):
        for _ in range(a):
            out = -1j * np.gradient(out, axis=axes_offset + axis, edge_order=2)
    return out


def _xi_derivative_terms(a: Symbol, alpha) -> list[SymbolTerm]:
    """Term list of D_xi^alpha a for a term-form symbol."""
    out = []
    total = sum(alpha)
    for term in a.terms:
        if term.beta is not None:
            if any(bl < al for bl, al in zip(term.beta, alpha)):
                continue
            fac = (-1j) ** total
            for bl, al in zip(term.beta, alpha):
                fac *= math.factorial(bl) / math.factorial(bl - al)
            new_beta = tuple(bl - al for bl, al in zip(term.beta, alpha))
            out.append(SymbolTerm(coeff=fac * term.coeff, beta=new_beta))
        else:
            prof = _xi_centered_derivative(term.profile, 0, alpha)
            out.append(SymbolTerm(coeff=term.coeff, profile=prof))
    return out


def _term_product(grid: Grid, ta: SymbolTerm, tb: SymbolTerm, factor: complex) -> SymbolTerm:
    coeff = factor * ta.coeff * tb.coeff
    if ta.beta is not None and tb.beta is not None:
        return SymbolTerm(coeff=coeff, beta=tuple(x + y for x, y in zip(ta.beta, tb.beta)))
    if ta.beta is not None:
        return SymbolTerm(coeff=coeff, profile=tb.profile * _monomial(grid, ta.beta))
    if tb.beta is not None:
        return SymbolTerm(coeff=coeff, profile=ta.profile * _monomial(grid, tb.beta))
    return SymbolTerm(coeff=coeff, profile=ta.profile * tb.profile)


def _check_class(a: Symbol, name: str):
    if a.mu <= 0:
        raise ParameterError(f"{name} requires rho - delta > 0 (got mu={a.mu})")


def compose(a1: Symbol, a2: Symbol, N: int) -> Symbol:
    """Truncated composition symbol of Op(a1) o Op(a2).

    c_N = sum_{|alpha| < N} i^|alpha| (D_xi^alpha a1)(D_x^alpha a2) / alpha!.
    For xi-polynomial a1 with N > deg_xi(a1) the series terminates and
    Op(c_N) equals Op(a1) Op(a2) exactly on fields with spectral margin.
    """
    if N < 1:
        raise ParameterError("composition order N must be >= 1")
    if a1.grid != a2.grid:
        raise InputError("grid mismatch")
    _check_class(a1, "compose")
    grid = a1.grid
    d = grid.dimension
    omega0 = a1.omega0 * a2.omega0
    rho = min(a1.rho, a2.rho)
    delta = max(a1.delta, a2.delta)

    if a1.terms is not None and a2.terms is not None:
        out_terms: list[SymbolTerm] = []
        for alpha in _multi_indices_below(d, N):
            fac = (1j) ** sum(alpha) / np.prod([math.factorial(al) for al in alpha])
            da1 = _xi_derivative_terms(a1, alpha)
            if not da1:
                continue
            for tb in a2.terms:
                dcoeff = _x_spectral_derivative(grid, tb.coeff, alpha)
                if any(alpha) and np.max(np.abs(dcoeff)) < 1e-300:
                    continue
                tb_d = SymbolTerm(coeff=dcoeff, beta=tb.beta, profile=tb.profile)
                for ta in da1:
                    out_terms.append(_term_product(grid, ta, tb_d, fac))
        return Symbol(grid, terms=_merge_terms(out_terms), omega0=omega0, rho=rho, delta=delta)

    # dense path
    T1 = a1.eval_table()
    T2 = a2.eval_table()
    out = np.zeros_like(T1)
    for alpha in _multi_indices_below(d, N):
        fac = (1j) ** sum(alpha) / np.prod([math.factorial(al) for al in alpha])
        dT1 = _xi_centered_derivative(T1, d, alpha)
        dT2 = T2
        if any(alpha):
            that = np.fft.fftshift(np.fft.fftn(T2, axes=tuple(range(d))), axes=tuple(range(d)))
            for axis, al in enumerate(alpha):
                if al:
                    kax = grid.k_axis.reshape(
                        [-1 if ax == axis else 1 for ax in range(d)] + [1] * d
                    )
                    that = that * kax**al
            dT2 = np.fft.ifftn(np.fft.ifftshift(that, axes=tuple(range(d))), axes=tuple(range(d)))
        out += fac * dT1 * dT2
    return Symbol(grid, table=out, omega0=omega0, rho=rho, delta=delta)


def requantize(a: Symbol, s: float, t: float, N: int) -> Symbol:
    """Truncated exponential series b_N = sum_{k<N} (i(t-s)<D_x, D_xi>)^k a / k!.

    For xi-polynomial ``a`` the series terminates (N > deg) and the exact
    quantisation relation Op_t(a) = Op_s(b) holds at the operator level.
    """
    if N < 1:
        raise ParameterError("truncation order N must be >= 1")
    _check_class(a, "requantize")
    if s == t:
        return a
    grid = a.grid
    d = grid.dimension
    lam = 1j * (t - s)

    if a.terms is not None:

        def _mixed(termlist):
            out = []
            for term in termlist:
                for axis in range(d):
                    alpha = tuple(1 if ax == axis else 0 for ax in range(d))
                    for dt in _xi_derivative_terms(
                        Symbol(grid, terms=[term], rho=a.rho, delta=a.delta), alpha
                    ):
                        dc = _x_spectral_derivative(grid, dt.coeff, alpha)
                        out.append(SymbolTerm(coeff=dc, beta=dt.beta, profile=dt.profile))
            return out

        acc = list(a.terms)
        current = list(a.terms)
        fac = 1.0
        for k in range(1, N):
            current = _mixed(current)
            if not current:
                break
            fac *= lam / k
            acc.extend(
                SymbolTerm(coeff=fac * t.coeff, beta=t.beta, profile=t.profile)
                for t in current
            )
        return Symbol(
            grid, terms=_merge_terms(acc), omega0=a.omega0, rho=a.rho, delta=a.delta
        )

    T = a.eval_table()
    acc = T.copy()
    current = T
    fac = 1.0
    for k in range(1, N):
        nxt = np.zeros_like(current)
        for axis in range(d):
            alpha = tuple(1 if ax == axis else 0 for ax in range(d))
            step = _xi_centered_derivative(current, d, alpha)
            that = np.fft.fftshift(np.fft.fftn(step, axes=tuple(range(d))), axes=tuple(range(d)))
            kax = grid.k_axis.reshape([-1 if ax == axis else 1 for ax in range(d)] + [1] * d)
            that = that * kax
            nxt += np.fft.ifftn(np.fft.ifftshift(that, axes=tuple(range(d))), axes=tuple(range(d)))
        current = nxt
        fac *= lam / k
        acc += fac * current
    return Symbol(grid, table=acc, omega0=a.omega0, rho=a.rho, delta=a.delta)


# ---------------------------------------------------------------------------
# class-bound diagnostics
# ---------------------------------------------------------------------------


def class_bound_report(a: Symbol, max_alpha: int = 2, max_beta: int = 2) -> dict:
    """Sup of |D_x^alpha D_xi^beta a| / (omega0 <xi>^{-rho|beta| + delta|alpha|}).

    Finite differences throughout: grid-step centered differences in x
    (cyclic on the torus), unit-step centered differences in xi.  Keys are
    (alpha, beta) multi-index pairs; the caller judges boundedness.
    """
    if max_alpha > 3 or max_beta > 3:
        raise ParameterError("difference orders are capped at 3")
    grid = a.grid
    d = grid.dimension
    T = a.eval_table()
    kmesh = grid.k_mesh()
    br = np.sqrt(1.0 + sum(m**2 for m in kmesh))
    x0 = np.zeros(d)
    kp = grid.k_points().reshape(grid.shape + (d,))
    w = a.omega0(x0, kp)
    h = grid.spacing

    def x_diff(arr, axis):
        return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2 * h)

    report = {}
    for atotal in range(max_alpha + 1):
        for alpha in itertools.product(range(atotal + 1), repeat=d):
            if sum(alpha) != atotal:
                continue
            dxa = T
            for axis, m in enumerate(alpha):
                for _ in range(m):
                    dxa = x_diff(dxa, axis)
            for btotal in range(max_beta + 1):
                for beta in itertools.product(range(btotal + 1), repeat=d):
                    if sum(beta) != btotal:
                        continue
                    dab = dxa
                    for axis, m in enumerate(beta):
                        for _ in range(m):
                            dab = np.gradient(dab, axis=d + axis, edge_order=2)
                    bound = w * br ** (-a.rho * btotal + a.delta * atotal)
                    ratio = np.abs(dab) / bound
                    report[(alpha, beta)] = float(ratio.max())
    return report


# ---------------------------------------------------------------------------
# characteristic sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PsiInvertibility:
    """Outcome of the lower-bound scan |a| >= C omega0 on a ball x cone tail."""

    invertible: bool
    constant: float
    c_min: float
    n_ball: int
    n_tail: int


def _ball_indices(grid: Grid, x0, radius: float) -> np.ndarray:
    pts = grid.x_points()
    return np.nonzero(torus_distance(pts, x0) <= radius)[0]


def psi_invertible(
    a: Symbol,
    omega0: Weight | None,
    x0,
    cone: Cone,
    x_radius: float = 0.5,
    c_min: float = 0.1,
) -> PsiInvertibility:
    """Scan C = inf |a(x, xi)| / omega0(x, xi) over ball(x0) x cone tail.

    The cone supplies both the direction neighbourhood and the tail radius
    (inner_radius >= 1).  Returns the verdict C >= c_min with the witness C.
    """
    if cone.inner_radius < 1.0:
        raise ParameterError("cone.inner_radius must be >= 1 for tail scans")
    omega0 = omega0 or a.omega0
    grid = a.grid
    ball = _ball_indices(grid, x0, x_radius)
    tail_mask = cone.mask(grid)
    kpts = grid.k_points()[tail_mask.ravel()]
    if ball.size == 0 or kpts.shape[0] == 0:
        raise DegenerateRegionError("empty sampled ball x cone tail")
    if a.x_independent and not omega0.x_dependent:
        vals = a.eval_lattice_slice(kpts, x_indices=ball[:1])
        wvals = omega0(None, kpts)[None, :]
    else:
        vals = a.eval_lattice_slice(kpts, x_indices=ball)
        if omega0.x_dependent:
            xpts = grid.x_points()[ball]
            wvals = omega0(xpts[:, None, :], kpts[None, :, :])
        else:
            wvals = omega0(None, kpts)[None, :]
    C = float(np.min(np.abs(vals) / wvals))
    return PsiInvertibility(
        invertible=bool(C >= c_min),
        constant=C,
        c_min=c_min,
        n_ball=int(ball.size),
        n_tail=int(kpts.shape[0]),
    )


@dataclass(frozen=True)
class CharParams:
    """Sampling geometry for characteristic-set scans."""

    c_min: float = 0.1
    x_radius: float = 0.5
    aperture: float = np.deg2rad(22.5)
    inner_radius: float | None = None  # defaults to Nyquist / 4

    def resolved_radius(self, grid: Grid) -> float:
        return self.inner_radius if self.inner_radius is not None else grid.nyquist / 4.0


@dataclass(frozen=True)
class CharSetReport:
    """Characteristic flags over a (base point, direction) product grid."""

    base_points: np.ndarray  # (P, d)
    directions: np.ndarray  # (D, d)
    tail_bounds: np.ndarray  # (P, D)
    characteristic: np.ndarray  # (P, D) bool
    params: CharParams

    @property
    def singular_mask(self) -> np.ndarray:
        return self.characteristic


def char_set(
    a: Symbol,
    omega0: Weight | None,
    base_points,
    directions,
    params: CharParams = CharParams(),
) -> CharSetReport:
    """Run the psi-invertibility scan over base points x direction bins."""
    grid = a.grid
    base_points = np.atleast_2d(np.asarray(base_points, dtype=float))
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    R = params.resolved_radius(grid)
    P, D = base_points.shape[0], directions.shape[0]
    bounds = np.empty((P, D))
    for j in range(D):
        cone = Cone(tuple(directions[j]), half_angle=params.aperture, inner_radius=R)
        for i in range(P):
            res = psi_invertible(
                a, omega0, base_points[i], cone, x_radius=params.x_radius, c_min=params.c_min
            )
            bounds[i, j] = res.constant
    return CharSetReport(
        base_points=base_points,
        directions=directions,
        tail_bounds=bounds,
        characteristic=bounds < params.c_min,
        params=params,
    )


# ---------------------------------------------------------------------------
# parametrix
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ParametrixCutoffs:
    """Nested cutoff pairs: level 1 builds b and c, level 2 marks the core."""

    phi1: CutoffSpec
    psi1: DirectionalCutoffSpec
    phi2: CutoffSpec
    psi2: DirectionalCutoffSpec

    @staticmethod
    def around(x0, xi0, grid: Grid, x_radii=(0.9, 1.5), inner_radius=None, half_angles=None):
        """Build a nested pair centred at (x0, xi0) with desk-scale radii.

        The frequency ramps are kept wide (well resolved on the lattice) so
        that the centered xi-differences inside the composition stay
        accurate through Neumann iterations.
        """
        R = inner_radius if inner_radius is not None else max(2.0, grid.nyquist / 32.0)
        T1 = max(R + 4.0, grid.nyquist / 10.7)
        T2 = min(T1 * 5.0 / 3.0, 0.9 * grid.nyquist)
        if half_angles is None:
            half_angles = (np.pi / 3, np.pi / 5)
        phi1 = CutoffSpec(tuple(x0), x_radii[0], x_radii[1])
        phi2 = CutoffSpec(tuple(x0), x_radii[0] * 0.45, x_radii[0] * 0.93)
        cone1 = Cone(tuple(xi0), half_angle=half_angles[0], inner_radius=R)
        cone2 = Cone(tuple(xi0), half_angle=half_angles[1], inner_radius=T1)
        psi1 = DirectionalCutoffSpec(cone1, transition_radius=T1, angular_margin=half_angles[0] / 4)
        psi2 = DirectionalCutoffSpec(cone2, transition_radius=T2, angular_margin=half_angles[1] / 4)
        return ParametrixCutoffs(phi1, psi1, phi2, psi2)


@dataclass(frozen=True)
class ParametrixResult:
    """Approximate inverse b with Op(b)Op(a) = Op(c) + Op(h)."""

    b: Symbol
    c: Symbol
    h: Symbol
    order: int
    residual_norm: float  # max probe residual of Op(b)Op(a) - Op(c)
    identity_residual: float  # max probe residual including Op(h)
    remainder_shell_sups: tuple[float, ...]
    remainder_slope: float


def _symbol_probe_sup(sym: Symbol, n_probe: int = 96) -> float:
    rng = np.random.default_rng(3)
    g = sym.grid
    x = g.x_points()[rng.integers(0, g.size, n_probe)]
    k = g.k_points()[rng.integers(0, g.size, n_probe)]
    return float(np.abs(sym.eval_points(x, k)).max())


def symbol_cone_shell_sups(sym: Symbol, cone: Cone, inner_radius: float) -> tuple[float, ...]:
    """Per-dyadic-shell sup of |sym| over grid x, restricted to a cone."""
    from .grids import dyadic_shells  # local import to avoid cycles at import time

    grid = sym.grid
    shells = dyadic_shells(grid, max(inner_radius, 1.0))
    mask = cone.mask(grid)
    sups = []
    for shell in shells:
        sel = (mask & shell.mask).ravel()
        if not sel.any():
            sups.append(0.0)
            continue
        kp = grid.k_points()[sel]
        vals = sym.eval_lattice_slice(kp)
        sups.append(float(np.abs(vals).max()))
    return tuple(sups)


def parametrix(
    a: Symbol,
    omega0: Weight | None,
    x0,
    xi0,
    j: int,
    cutoffs: ParametrixCutoffs | None = None,
    N_c: int | None = None,
    n_probes: int = 10,
    probe_band: float | None = None,
    seed: int = 11,
) -> ParametrixResult:
    """Neumann-series approximate inverse of Op(a) near (x0, xi0).

    b_1 = phi_1 psi_1 / a on the sampled set; the remainder of the first
    composition drives the alternating Neumann sum through order ``j``.  The
    identity Op(b)Op(a) = Op(c) + Op(h) holds by construction of h; the
    reported ``residual_norm`` measures Op(b)Op(a) - Op(c) alone, whose
    high-frequency part shrinks with j for genuinely x-dependent symbols.
    """
    from .operators import apply_kn  # deferred: operators imports symbols

    if j < 1:
        raise ParameterError("Neumann order j must be >= 1")
    omega0 = omega0 or a.omega0
    grid = a.grid
    if cutoffs is None:
        cutoffs = ParametrixCutoffs.around(x0, xi0, grid)
    phi1 = make_cutoff(cutoffs.phi1, grid)
    psi1 = make_directional_cutoff(cutoffs.psi1, grid)

    # preconditions: nesting plus the psi-invertibility lower bound
    phi2 = make_cutoff(cutoffs.phi2, grid)
    if np.any((phi2.values > 0) & (phi1.values < 1.0 - 1e-12)):
        raise ParameterError("cutoff nesting violated: phi1 must be 1 on supp phi2")
    scan_cone = cutoffs.psi1.cone
    scan = psi_invertible(
        a, omega0, x0, scan_cone, x_radius=cutoffs.phi1.r2, c_min=1e-12
    )
    if not scan.invertible or scan.constant < 1e-12:
        raise RefusalError(
            f"symbol is not psi-invertible on the cutoff geometry (C={scan.constant:.3e})"
        )

    support = psi1.coeffs.real > 0
    kpts_all = grid.k_points()
    avals = a.eval_lattice_slice(kpts_all)  # (size_x, size_k)
    amin_on_supp = np.abs(avals[:, support.ravel()])
    phi_mask = (phi1.values.ravel() > 0)
    if np.min(amin_on_supp[phi_mask, :]) < 1e-12:
        raise RefusalError("|a| falls below 1e-12 inside supp psi1")

    # b1 = phi1 psi1 / a, separable when a is x-independent on supp psi1
    x_const = np.allclose(avals, avals[:1, :], rtol=0, atol=1e-13 * max(1.0, np.abs(avals).max()))
    if x_const:
        prof = np.where(support, psi1.coeffs / avals[0].reshape(grid.shape), 0.0)
        b1 = Symbol(
            grid,
            terms=[SymbolTerm(coeff=phi1.values.astype(complex), profile=prof)],
            omega0=None,
            rho=a.rho,
            delta=a.delta,
        )
    else:
        table = np.where(
            support.ravel()[None, :],
            phi1.values.ravel()[:, None] * psi1.coeffs.ravel()[None, :] / avals,
            0.0,
        ).reshape(grid.shape + grid.shape)
        b1 = Symbol(grid, table=table, rho=a.rho, delta=a.delta)

    c1 = Symbol(
        grid,
        terms=[SymbolTerm(coeff=phi1.values.astype(complex), profile=psi1.coeffs)],
        omega0=ConstantWeight(1.0),
        rho=a.rho,
        delta=a.delta,
    )
    if N_c is None:
        N_c = (a.xi_degree + 1) if a.xi_degree is not None else 3

    h1 = symbol_add(compose(b1, a, N_c), c1, coeff=-1.0)
    scale = max(_symbol_probe_sup(b1), 1e-30)

    r = b1
    b = b1
    sign = 1.0
    for _ in range(1, j):
        r = compose(h1, r, N_c)
        sign = -sign
        if _symbol_probe_sup(r) < 1e-14 * scale:
            break
        b = symbol_add(b, r, coeff=sign)
    h = symbol_add(compose(b, a, N_c), c1, coeff=-1.0)

    # probe residuals on band-pass fields living on the cone-tail annulus,
    # where the parametrix is meant to invert
    rng = np.random.default_rng(seed)
    band = probe_band if probe_band is not None else 0.8 * grid.nyquist
    lo = cutoffs.psi2.cone.inner_radius
    res_noh, res_full = 0.0, 0.0
    for _ in range(n_probes):
        g = _random_bandpass(grid, lo, band, rng)
        ag = apply_kn(a, g)
        bag = apply_kn(b, ag)
        cg = apply_kn(c1, g)
        hg = apply_kn(h, g)
        gn = np.linalg.norm(g.values)
        res_noh = max(res_noh, np.linalg.norm(bag.values - cg.values) / gn)
        res_full = max(res_full, np.linalg.norm(bag.values - cg.values - hg.values) / gn)

    sups = symbol_cone_shell_sups(h, cutoffs.psi2.cone, cutoffs.psi2.cone.inner_radius)
    from .spaces import decay_slope

    return ParametrixResult(
        b=b,
        c=c1,
        h=h,
        order=j,
        residual_norm=float(res_noh),
        identity_residual=float(res_full),
        remainder_shell_sups=sups,
        remainder_slope=decay_slope(sups),
    )


def _random_bandpass(grid: Grid, lo: float, hi: float, rng) -> SampledField:
    from .grids import SpectralField, inverse_transform

    radii = grid.k_radii()
    sel = (radii >= lo) & (radii <= hi)
    if not sel.any():
        sel = radii <= hi
    coeffs = np.zeros(grid.shape, dtype=complex)
    vals = rng.standard_normal(int(sel.sum())) + 1j * rng.standard_normal(int(sel.sum()))
    coeffs[sel] = vals
    return inverse_transform(SpectralField(grid, coeffs))
