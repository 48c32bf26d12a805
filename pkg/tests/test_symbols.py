import numpy as np
import pytest

from mlwf import (
    BracketPower,
    Cone,
    ConstantWeight,
    CutoffSpec,
    DirectionalCutoffSpec,
    Grid,
    ParameterError,
    RefusalError,
    apply_kn,
    bracket_symbol,
    char_set,
    class_bound_report,
    compose,
    cutoff_product_symbol,
    parametrix,
    polynomial_symbol,
    psi_invertible,
    relative_l2,
    requantize,
    symbol_from_config,
)
from mlwf.symbols import CharParams, parse_coefficient
from mlwf.wavefront import direction_fan

from conftest import random_field


class TestCompose:
    def test_xi_times_exponential(self, grid64, rng):
        x = grid64.x_axis
        a1 = polynomial_symbol(grid64, [((1,), 1.0)])
        a2 = polynomial_symbol(grid64, [((0,), np.exp(1j * x))])
        c = compose(a1, a2, 2)
        # c = xi e^{ix} + e^{ix}: check against the operator product
        for _ in range(50):
            f = random_field(grid64, rng, band=16)
            lhs = apply_kn(a1, apply_kn(a2, f))
            rhs = apply_kn(c, f)
            assert relative_l2(rhs.values, lhs.values) < 1e-10

    def test_identity_left_factor(self, grid64, rng):
        one = polynomial_symbol(grid64, [((0,), 1.0)])
        a2 = polynomial_symbol(grid64, [((2,), np.exp(2j * grid64.x_axis)), ((0,), 1.5)])
        c = compose(one, a2, 1)
        f = random_field(grid64, rng, band=16)
        assert relative_l2(apply_kn(c, f).values, apply_kn(a2, f).values) < 1e-13

    def test_constant_coefficient_symbols_commute(self, grid64):
        a1 = polynomial_symbol(grid64, [((2,), 1.0)])
        a2 = polynomial_symbol(grid64, [((1,), 1.0)])
        c = compose(a1, a2, 3)
        # all alpha >= 1 terms vanish: c = xi^3
        assert len(c.terms) == 1
        assert c.terms[0].beta == (3,)
        assert np.allclose(c.terms[0].coeff, 1.0)

    def test_exactness_invariant_2d(self, grid2d32, rng):
        x1, _ = grid2d32.x_mesh()
        a1 = polynomial_symbol(grid2d32, [((1, 1), 1.0), ((0, 1), np.exp(1j * x1))])
        a2 = polynomial_symbol(grid2d32, [((1, 0), np.exp(-1j * x1)), ((0, 0), 2.0)])
        c = compose(a1, a2, a1.xi_degree + 1)
        for _ in range(10):
            f = random_field(grid2d32, rng, band=6)
            lhs = apply_kn(a1, apply_kn(a2, f))
            assert relative_l2(apply_kn(c, f).values, lhs.values) < 1e-10

    def test_order_must_be_positive(self, grid64):
        a = polynomial_symbol(grid64, [((1,), 1.0)])
        with pytest.raises(ParameterError):
            compose(a, a, 0)


class TestRequantize:
    def test_series_example(self, grid64):
        x = grid64.x_axis
        a = polynomial_symbol(grid64, [((1,), np.exp(1j * x))])
        b = requantize(a, 0.0, 1.0, 2)
        # b = xi e^{ix} + e^{ix}
        by_beta = {t.beta: t.coeff for t in b.terms}
        assert relative_l2(by_beta[(0,)], np.exp(1j * x)) < 1e-12
        assert relative_l2(by_beta[(1,)], np.exp(1j * x)) < 1e-12

    def test_equal_parameters_identity(self, grid64):
        a = polynomial_symbol(grid64, [((2,), np.exp(1j * grid64.x_axis))])
        b = requantize(a, 0.5, 0.5, 4)
        assert b is a

    def test_constant_coefficient_invariant(self, grid64):
        a = polynomial_symbol(grid64, [((3,), 1.0), ((1,), -2.0)])
        b = requantize(a, 0.0, 1.0, 5)
        by_beta = {t.beta: t.coeff for t in b.terms if np.abs(t.coeff).max() > 1e-14}
        assert set(by_beta) == {(3,), (1,)}

    def test_round_trip(self, grid64, rng):
        x = grid64.x_axis
        a = polynomial_symbol(grid64, [((2,), np.exp(1j * x)), ((0,), 0.5)])
        N = a.xi_degree + 1
        back = requantize(requantize(a, 0.0, 0.7, N), 0.7, 0.0, N)
        by_beta = {t.beta: t.coeff for t in back.terms}
        assert relative_l2(by_beta[(2,)], np.exp(1j * x)) < 1e-12
        assert relative_l2(by_beta[(0,)], np.full(64, 0.5)) < 1e-12


class TestClassBounds:
    def test_bracket_squared_ratios(self, grid64):
        a = polynomial_symbol(grid64, [((2,), 1.0), ((0,), 1.0)], omega0=BracketPower(2.0))
        report = class_bound_report(a, max_alpha=2, max_beta=2)
        assert max(report.values()) <= 5.0

    def test_constant_symbol(self, grid64):
        a = polynomial_symbol(grid64, [((0,), 1.0)], omega0=ConstantWeight(1.0))
        report = class_bound_report(a, max_alpha=1, max_beta=1)
        assert report[((0,), (0,))] == pytest.approx(1.0)
        assert report[((1,), (0,))] == pytest.approx(0.0, abs=1e-12)
        assert report[((0,), (1,))] == pytest.approx(0.0, abs=1e-12)

    def test_grid_refinement_stability(self):
        reports = {}
        for n in (64, 128):
            g = Grid(1, n)
            a = polynomial_symbol(g, [((1,), np.exp(1j * g.x_axis))], omega0=BracketPower(1.0))
            reports[n] = class_bound_report(a, max_alpha=1, max_beta=1)
        for key in reports[64]:
            r64, r128 = reports[64][key], reports[128][key]
            assert np.isfinite(r64) and np.isfinite(r128)
            if r64 > 1e-10:
                assert abs(r128 - r64) / r64 <= 0.10

    def test_order_cap(self, grid64):
        a = polynomial_symbol(grid64, [((0,), 1.0)])
        with pytest.raises(ParameterError):
            class_bound_report(a, max_alpha=4)


class TestPsiInvertible:
    def test_elliptic_everywhere(self):
        g = Grid(2, 64)
        a = polynomial_symbol(g, [((0, 0), 1.0), ((2, 0), 1.0), ((0, 2), 1.0)], omega0=BracketPower(2.0))
        for x0 in [(0.0, 0.0), (np.pi, np.pi), (1.0, 5.0)]:
            for d in [(1.0, 0.0), (0.0, 1.0), (0.7, -0.7)]:
                res = psi_invertible(a, BracketPower(2.0), x0, Cone(d, half_angle=np.pi / 8, inner_radius=8.0))
                assert res.invertible and res.constant >= 0.5

    def test_cutoff_product_at_its_center(self):
        g = Grid(2, 64)
        x0, d0 = (np.pi, np.pi), (1.0, 0.0)
        cone = Cone(d0, half_angle=np.pi / 4, inner_radius=4.0)
        sym = cutoff_product_symbol(
            g, CutoffSpec(x0, 0.8, 1.4),
            DirectionalCutoffSpec(cone, transition_radius=8.0, angular_margin=np.pi / 16),
        )
        probe = Cone(d0, half_angle=np.pi / 10, inner_radius=10.0)
        res = psi_invertible(sym, ConstantWeight(1.0), x0, probe, x_radius=0.5, c_min=0.5)
        assert res.invertible

    def test_degenerate_direction_of_first_coordinate(self):
        # a(xi) = xi_1 with omega_0 = <xi>: the second-axis direction is
        # characteristic (the axis zeroes a), and widening a cone towards the
        # axis drives the constant to zero
        g = Grid(2, 64)
        a = polynomial_symbol(g, [((1, 0), 1.0)], omega0=BracketPower(1.0))
        res_axis = psi_invertible(
            a, BracketPower(1.0), (np.pi, np.pi), Cone((0.0, 1.0), half_angle=np.pi / 16, inner_radius=8.0), c_min=0.1
        )
        assert not res_axis.invertible and res_axis.constant == pytest.approx(0.0, abs=1e-12)

        diag = (np.sqrt(0.5), np.sqrt(0.5))
        consts = []
        for ang in (np.pi / 16, np.pi / 8, np.pi / 4, np.pi / 2.2):
            res = psi_invertible(a, BracketPower(1.0), (np.pi, np.pi), Cone(diag, half_angle=ang, inner_radius=8.0))
            consts.append(res.constant)
        assert all(consts[i] >= consts[i + 1] for i in range(3))
        assert consts[0] > 0.3 and consts[-1] < 0.1


class TestCharSet:
    def test_elliptic_empty(self):
        g = Grid(2, 64)
        a = polynomial_symbol(g, [((2, 0), 1.0), ((0, 2), 1.0), ((0, 0), 1.0)], omega0=BracketPower(2.0))
        rep = char_set(a, BracketPower(2.0), [(np.pi, np.pi)], direction_fan(2, 16))
        assert rep.characteristic.sum() == 0

    def test_heat_type_no_characteristic_directions(self):
        g = Grid(2, 128)
        a = polynomial_symbol(g, [((1, 0), 1j), ((0, 2), 1.0)], omega0=BracketPower(1.0))
        rep = char_set(
            a, BracketPower(1.0), [(np.pi, np.pi)], direction_fan(2, 16),
            CharParams(c_min=0.1, inner_radius=g.n / 8),
        )
        assert rep.characteristic.sum() == 0

    def test_zero_symbol_all_characteristic(self, grid2d32):
        a = polynomial_symbol(grid2d32, [((0, 0), 0.0)], omega0=ConstantWeight(1.0))
        rep = char_set(a, ConstantWeight(1.0), [(1.0, 1.0), (4.0, 2.0)], direction_fan(2, 8))
        assert rep.characteristic.all()

    def test_requantization_invariance(self):
        g = Grid(2, 32)
        x1, _ = g.x_mesh()
        lib = [
            polynomial_symbol(g, [((2, 0), 1.0), ((0, 2), 1.0), ((0, 0), 1.0)], omega0=BracketPower(2.0)),
            polynomial_symbol(g, [((1, 0), 1.0 + 0.3 * np.cos(x1)), ((0, 1), 1j)], omega0=BracketPower(1.0)),
            polynomial_symbol(g, [((1, 0), 1j), ((0, 2), 1.0)], omega0=BracketPower(1.0)),
        ]
        dirs = direction_fan(2, 8)
        pts = [(np.pi, np.pi), (2.0, 4.0)]
        for a in lib:
            b = requantize(a, 0.0, 1.0, a.xi_degree + 1)
            ra = char_set(a, a.omega0, pts, dirs, CharParams(inner_radius=8.0))
            rb = char_set(b, a.omega0, pts, dirs, CharParams(inner_radius=8.0))
            assert np.array_equal(ra.characteristic, rb.characteristic)

    def test_scaling_invariance_of_flags(self):
        g = Grid(2, 32)
        a = polynomial_symbol(g, [((1, 0), 1.0)], omega0=BracketPower(1.0))
        lam = 7.0
        r1 = char_set(a, BracketPower(1.0), [(np.pi, np.pi)], direction_fan(2, 8), CharParams(c_min=0.1, inner_radius=8.0))
        r2 = char_set(a.scaled(lam), BracketPower(1.0), [(np.pi, np.pi)], direction_fan(2, 8), CharParams(c_min=0.1 * lam, inner_radius=8.0))
        assert np.array_equal(r1.characteristic, r2.characteristic)


class TestParametrix:
    def test_identity_symbol(self, grid64):
        one = polynomial_symbol(grid64, [((0,), 1.0)], omega0=ConstantWeight(1.0))
        res = parametrix(one, ConstantWeight(1.0), (np.pi,), (1.0,), j=2)
        assert res.residual_norm < 1e-10
        assert res.identity_residual < 1e-10

    def test_xi_only_symbol_exactly_inverted(self, grid64):
        a = bracket_symbol(grid64, 2.0)
        res1 = parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=1)
        res3 = parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=3)
        # multipliers commute: the remainder vanishes at every order, so the
        # shell profile sits at the floor for both truncations
        for res in (res1, res3):
            assert res.identity_residual < 1e-10
            assert max(res.remainder_shell_sups, default=0.0) < 1e-12
        assert res3.residual_norm <= res1.residual_norm + 1e-12

    def test_neumann_improves_x_dependent_symbol(self):
        g = Grid(1, 128)
        x = g.x_axis
        a = polynomial_symbol(g, [((2,), 1.0 + 0.5 * np.cos(x)), ((0,), 1.0)], omega0=BracketPower(2.0))
        res1 = parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=1)
        res3 = parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=3)
        # high-frequency remainder slope gains at least 2 mu = 2 over two orders
        assert np.isfinite(res1.remainder_slope) and np.isfinite(res3.remainder_slope)
        assert res3.remainder_slope <= res1.remainder_slope - 2.0
        # the operator identity is limited by iterated centered differences
        assert res1.identity_residual < 1e-2 and res3.identity_residual < 0.5

    def test_scaling_equivariance(self, grid64, rng):
        a = bracket_symbol(grid64, 2.0)
        r1 = parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=2)
        r2 = parametrix(a.scaled(2.0), BracketPower(2.0), (np.pi,), (1.0,), j=2)
        kpts = grid64.k_points()[::5]
        v1 = r1.b.eval_lattice_slice(kpts)
        v2 = r2.b.eval_lattice_slice(kpts)
        assert relative_l2(v2, v1 / 2.0) < 1e-12

    def test_refusal_when_not_invertible(self, grid64):
        a = polynomial_symbol(grid64, [((0,), 0.0)], omega0=ConstantWeight(1.0))
        with pytest.raises(RefusalError):
            parametrix(a, ConstantWeight(1.0), (np.pi,), (1.0,), j=1)

    def test_residual_nonincreasing_in_order(self):
        # elliptic constant-coefficient library: the Neumann terms vanish and
        # the probe residual stays at the floor for every order
        g = Grid(1, 128)
        for a in (bracket_symbol(g, 2.0), polynomial_symbol(g, [((2,), 1.0), ((0,), 1.0)], omega0=BracketPower(2.0))):
            res = [parametrix(a, BracketPower(2.0), (np.pi,), (1.0,), j=j).residual_norm for j in (1, 2, 3)]
            assert res[1] <= res[0] + 1e-12
            assert res[2] <= res[1] + 1e-12


class TestSymbolConfig:
    def test_polynomial_expression(self, grid64):
        sym = symbol_from_config(grid64, {"kind": "polynomial", "terms": [{"beta": [1], "coeff": "e^{ix1}"}]})
        assert sym.xi_degree == 1
        vals = sym.eval_points(np.array([[0.5]]), np.array([[3.0]]))
        assert vals[0] == pytest.approx(3.0 * np.exp(0.5j))

    def test_expression_grammar(self, grid64):
        x = grid64.x_axis
        assert relative_l2(parse_coefficient(grid64, "2.5*e^{-2ix1}"), 2.5 * np.exp(-2j * x)) < 1e-12
        assert relative_l2(parse_coefficient(grid64, "cos(3x1)"), np.cos(3 * x)) < 1e-12
        assert relative_l2(parse_coefficient(grid64, "i*sin(x1)"), 1j * np.sin(x)) < 1e-12
        with pytest.raises(ParameterError):
            parse_coefficient(grid64, "exp(x**2)")

    def test_bracket_config(self, grid64):
        sym = symbol_from_config(grid64, {"kind": "bracket", "s": 2.0})
        vals = sym.eval_points(np.array([[0.0]]), np.array([[3.0]]))
        assert vals[0] == pytest.approx(10.0)

    def test_exact_form_validation(self, grid64):
        with pytest.raises(Exception):
            from mlwf.symbols import Symbol, SymbolTerm

            Symbol(
                grid64,
                terms=[SymbolTerm(coeff=np.ones(64), beta=(1,))],
                evaluator=lambda x, xi: 2.0 * xi[..., 0],
            )
