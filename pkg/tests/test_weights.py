import itertools

import numpy as np
import pytest

from mlwf import (
    AxisBracketPower,
    BracketPower,
    ConstantWeight,
    ParameterError,
    QuotientWeight,
    moderation_check,
    weight_from_config,
)


def lattice_probes(limit, step=8):
    pts = np.arange(-limit, limit + 1, step, dtype=float)
    return [((a,), (b,)) for a, b in itertools.product(pts, pts)]


def test_peetre_constant_for_bracket():
    # <xi+eta> <= sqrt(2) <xi> <eta> on all probes up to 64
    s1 = BracketPower(1.0)
    C = moderation_check(s1, s1, lattice_probes(64, step=4))
    assert C <= np.sqrt(2) + 1e-12


def test_constant_weight_moderation_is_one():
    C = moderation_check(ConstantWeight(3.0), ConstantWeight(1.0), lattice_probes(16))
    assert C == pytest.approx(1.0)


def test_negative_power_moderated_by_positive():
    C = moderation_check(BracketPower(-2.0), BracketPower(2.0), lattice_probes(64, step=4))
    assert C <= 4.0


def test_witness_even():
    v = BracketPower(-1.5).witness
    pts = np.array([[3.0], [-3.0]])
    vals = v(None, pts)
    assert vals[0] == pytest.approx(vals[1])


def test_quotient_and_product_values():
    w = BracketPower(2.0) / BracketPower(1.0)
    xi = np.array([[0.0, 3.0]])
    assert w(None, xi)[0] == pytest.approx(np.sqrt(10.0))
    p = BracketPower(1.0) * BracketPower(1.0)
    assert p(None, xi)[0] == pytest.approx(10.0)


def test_anisotropic_weight():
    w = AxisBracketPower([1.0, 2.0])
    xi = np.array([[3.0, 4.0]])
    assert w(None, xi)[0] == pytest.approx(np.sqrt(10) * 17.0)


def test_quotient_witness_is_product():
    q = QuotientWeight(BracketPower(1.0), BracketPower(2.0))
    v = q.witness
    xi = np.array([[5.0]])
    assert v(None, xi)[0] == pytest.approx((1 + 25.0) ** 0.5 * (1 + 25.0))


def test_config_round_trip():
    w = weight_from_config({"family": "polybracket", "s": 2.0})
    assert w(None, np.array([[0.0]]))[0] == pytest.approx(1.0)
    q = weight_from_config(
        {"family": "quotient", "num": {"family": "constant", "c": 1.0}, "den": {"family": "polybracket", "s": 2.0}}
    )
    assert q(None, np.array([[1.0]]))[0] == pytest.approx(0.5)
    with pytest.raises(ParameterError):
        weight_from_config({"family": "nope"})


def test_empty_probe_set_rejected():
    with pytest.raises(ParameterError):
        moderation_check(BracketPower(1.0), BracketPower(1.0), [])
