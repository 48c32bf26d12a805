"""Parametric positive weights on phase space with moderation witnesses.

A weight is a strictly positive function w(x, xi) used to tilt spectral
norms.  Every weight carries a submultiplicative, even *witness* v such that
w(z + y) <= C w(z) v(y) holds on sampled probe sets; :func:`moderation_check`
measures the best sampled constant C.  Weights may also carry a smoothness
class tag (rho, delta) asserting the usual derivative bounds relative to
bracket powers.
"""

from __future__ import annotations

import numpy as np

from .errors import ParameterError


def bracket(xi: np.ndarray) -> np.ndarray:
    """Japanese bracket <xi> = (1 + |xi|^2)^(1/2) along the last axis."""
    xi = np.asarray(xi, dtype=float)
    return np.sqrt(1.0 + (xi**2).sum(axis=-1))


class Weight:
    """Base class: positive weight with witness and product/quotient algebra.

    ``__call__(x, xi)`` takes point arrays of shape (..., d) (broadcastable)
    and returns positive values of the broadcast shape.  Weights that ignore
    one slot accept ``None`` there.
    """

    class_tag: tuple[float, float] | None = None

    def __call__(self, x, xi) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError

    @property
    def witness(self) -> "Weight":
        """Submultiplicative even weight moderating this one (frequency slot)."""
        raise NotImplementedError  # pragma: no cover - interface

    @property
    def x_dependent(self) -> bool:
        return False

    def xi_profile(self, grid, x_ref=None) -> np.ndarray:
        """Sample w(x_ref, k) on the frequency lattice of ``grid``."""
        k = grid.k_points().reshape(grid.shape + (grid.dimension,))
        x = None if x_ref is None else np.asarray(x_ref, dtype=float)
        return self(x, k)

    def __mul__(self, other: "Weight") -> "Weight":
        return ProductWeight(self, other)

    def __truediv__(self, other: "Weight") -> "Weight":
        return QuotientWeight(self, other)


class ConstantWeight(Weight):
    def __init__(self, value: float = 1.0):
        if value <= 0:
            raise ParameterError("weight must be positive")
        self.value = float(value)

    def __call__(self, x, xi):
        ref = xi if xi is not None else x
        if ref is None:
            return np.float64(self.value)
        shape = np.asarray(ref).shape[:-1]
        return np.full(shape, self.value)

    @property
    def witness(self) -> "Weight":
        return ConstantWeight(1.0)

    def __repr__(self):
        return f"ConstantWeight({self.value})"


class BracketPower(Weight):
    """sigma_s(x, xi) = <xi>^s; the workhorse polynomial weight family."""

    def __init__(self, s: float):
        self.s = float(s)
        self.class_tag = (1.0, 0.0)

    def __call__(self, x, xi):
        return bracket(xi) ** self.s

    @property
    def witness(self) -> "Weight":
        # Peetre: <xi+eta>^s <= 2^{|s|/2} <xi>^s <eta>^{|s|}
        return BracketPower(abs(self.s))

    def __repr__(self):
        return f"BracketPower({self.s})"


class AxisBracketPower(Weight):
    """Anisotropic weight prod_i <xi_i>^{s_i}."""

    def __init__(self, exponents):
        self.exponents = tuple(float(s) for s in np.atleast_1d(exponents))

    def __call__(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.ones(xi.shape[:-1])
        for axis, s in enumerate(self.exponents):
            out = out * (1.0 + xi[..., axis] ** 2) ** (s / 2.0)
        return out

    @property
    def witness(self) -> "Weight":
        return AxisBracketPower([abs(s) for s in self.exponents])

    def __repr__(self):
        return f"AxisBracketPower({self.exponents})"


class SeparableWeight(Weight):
    """w(x, xi) = w_x(x) * w_xi(xi) with a positive spatial factor."""

    def __init__(self, x_factor, xi_weight: Weight, x_ratio_bound: float = np.inf):
        self.x_factor = x_factor
        self.xi_weight = xi_weight
        # sup w_x(x+y)/w_x(x): feeds the witness constant, not its shape
        self.x_ratio_bound = float(x_ratio_bound)

    def __call__(self, x, xi):
        out = self.xi_weight(None, xi)
        if x is not None:
            out = out * np.asarray(self.x_factor(np.asarray(x, dtype=float)))
        return out

    @property
    def x_dependent(self) -> bool:
        return True

    @property
    def witness(self) -> "Weight":
        return self.xi_weight.witness

    def __repr__(self):
        return f"SeparableWeight({self.x_factor}, {self.xi_weight})"


class ProductWeight(Weight):
    def __init__(self, left: Weight, right: Weight):
        self.left = left
        self.right = right

    def __call__(self, x, xi):
        return self.left(x, xi) * self.right(x, xi)

    @property
    def x_dependent(self) -> bool:
        return self.left.x_dependent or self.right.x_dependent

    @property
    def witness(self) -> "Weight":
        return ProductWeight(self.left.witness, self.right.witness)

    def __repr__(self):
        return f"({self.left} * {self.right})"


class QuotientWeight(Weight):
    """w1/w2; moderate with witness v1*v2 since 1/w2 is v2-moderate."""

    def __init__(self, num: Weight, den: Weight):
        self.num = num
        self.den = den

    def __call__(self, x, xi):
        return self.num(x, xi) / self.den(x, xi)

    @property
    def x_dependent(self) -> bool:
        return self.num.x_dependent or self.den.x_dependent

    @property
    def witness(self) -> "Weight":
        return ProductWeight(self.num.witness, self.den.witness)

    def __repr__(self):
        return f"({self.num} / {self.den})"


def moderation_check(omega: Weight, v: Weight, probes) -> float:
    """Largest sampled ratio C = max w(xi+eta) / (w(xi) v(eta)).

    ``probes`` is a sequence of (xi, eta) frequency-vector pairs; the spatial
    slot is frozen at the origin.  A finite C certifies sampled moderation of
    ``omega`` by ``v`` on the probe set.
    """
    pairs = [(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))) for a, b in probes]
    if not pairs:
        raise ParameterError("probe set is empty")
    xi = np.stack([p[0] for p in pairs])
    eta = np.stack([p[1] for p in pairs])
    x0 = np.zeros(xi.shape[-1])
    num = omega(x0, xi + eta)
    den = omega(x0, xi) * v(x0, eta)
    return float(np.max(num / den))


def weight_from_config(cfg: dict) -> Weight:
    """Build a weight from its JSON configuration.

    Families: ``{"family": "polybracket", "s": 2.0}``,
    ``{"family": "constant", "c": 1.0}``,
    ``{"family": "anisotropic", "s": [1, 2]}``,
    ``{"family": "product"|"quotient", "left"|"num": ..., "right"|"den": ...}``.
    """
    family = cfg.get("family")
    if family == "polybracket":
        return BracketPower(cfg["s"])
    if family == "constant":
        return ConstantWeight(cfg.get("c", 1.0))
    if family == "anisotropic":
        return AxisBracketPower(cfg["s"])
    if family == "product":
        return ProductWeight(weight_from_config(cfg["left"]), weight_from_config(cfg["right"]))
    if family == "quotient":
        return QuotientWeight(weight_from_config(cfg["num"]), weight_from_config(cfg["den"]))
    raise ParameterError(f"unknown weight family: {family!r}")
