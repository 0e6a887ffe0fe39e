"""Model parameters (p, q, r) and the constants derived from them.

Parameters are held as exact rationals so that the rational and floating
code paths share one source of truth.  Decimal strings such as ``"0.5"`` or
``"1/3"`` are parsed exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

__all__ = [
    "ParameterError",
    "ModelParams",
    "DerivedConstants",
    "derive",
    "c_w",
    "log_c_w",
    "to_fraction",
]


class ParameterError(ValueError):
    """Invalid model parameters or parameter-dependent precondition."""


def to_fraction(value) -> Fraction:
    """Exact rational from a decimal string, int, Fraction or float.

    Floats are converted through ``repr`` so that ``0.1`` becomes 1/10 rather
    than its binary expansion.
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, Rational):
        return Fraction(value)
    if isinstance(value, float):
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ParameterError(f"cannot parse {value!r} as a rational number") from exc
    raise ParameterError(f"unsupported numeric type {type(value).__name__}")


@dataclass(frozen=True)
class ModelParams:
    """Probabilities of the three-vertex interaction model.

    p: a new vertex is added in a step.
    q: an old-vertex step picks a triangle proportionally to its weight.
    r: a new-vertex step picks an edge proportionally to its weight.
    """

    p: Fraction
    q: Fraction
    r: Fraction

    def __init__(self, p, q, r):
        object.__setattr__(self, "p", to_fraction(p))
        object.__setattr__(self, "q", to_fraction(q))
        object.__setattr__(self, "r", to_fraction(r))
        if not 0 < self.p <= 1:
            raise ParameterError(f"p must satisfy 0 < p <= 1, got {self.p}")
        for name in ("q", "r"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise ParameterError(f"{name} must lie in [0, 1], got {v}")

    @property
    def floats(self) -> tuple[float, float, float]:
        return float(self.p), float(self.q), float(self.r)

    def as_strings(self) -> dict[str, str]:
        return {k: str(getattr(self, k)) for k in ("p", "q", "r")}


@dataclass(frozen=True)
class DerivedConstants:
    """alpha1, alpha2, alpha, beta as exact rationals.

    ``degenerate`` is set when alpha == 0, i.e. there is no preferential
    component; asymptotic formulas refuse such constants.
    """

    alpha1: Fraction
    alpha2: Fraction
    alpha: Fraction
    beta: Fraction
    params: ModelParams = field(repr=False)
    degenerate: bool = False

    @property
    def f(self) -> "FloatConstants":
        return FloatConstants(
            float(self.alpha1), float(self.alpha2), float(self.alpha),
            float(self.beta), float(self.params.p),
        )


@dataclass(frozen=True)
class FloatConstants:
    alpha1: float
    alpha2: float
    alpha: float
    beta: float
    p: float


def derive(params: ModelParams) -> DerivedConstants:
    p, q, r = params.p, params.q, params.r
    alpha1 = (1 - p) * q
    alpha2 = Fraction(2) * p * r / 3
    alpha = alpha1 + alpha2
    # beta * p / V is the chance a given vertex joins a uniformly chosen pair
    # (new-vertex step) or triple (old-vertex step); the pair term carries p.
    beta = 2 * (1 - r) + 3 * (1 - p) * (1 - q) / p
    return DerivedConstants(alpha1, alpha2, alpha, beta, params, degenerate=(alpha == 0))


def c_w(constants: DerivedConstants, w: int, exact: bool = False):
    """Product (alpha*w+beta+1)(alpha*(w-1)+beta+1)...(alpha+beta+1).

    Returns a Fraction when ``exact``; otherwise a float, which may overflow to
    inf for large w (use :func:`log_c_w` there).
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if exact:
        a, b = constants.alpha, constants.beta
        out = Fraction(1)
        for i in range(1, w + 1):
            out *= a * i + b + 1
        return out
    a, b = float(constants.alpha), float(constants.beta)
    out = 1.0
    for i in range(1, w + 1):
        out *= a * i + b + 1.0
    return out


def log_c_w(constants: DerivedConstants, w: int) -> float:
    if w < 1:
        raise ValueError("w must be >= 1")
    a, b = float(constants.alpha), float(constants.beta)
    if a == 0:
        return w * math.log(b + 1.0)
    # prod_{i=1}^{w} a*(i + (b+1)/a) = a^w Gamma(w+1+s)/Gamma(1+s), s=(b+1)/a
    s = (b + 1.0) / a
    return w * math.log(a) + math.lgamma(w + 1 + s) - math.lgamma(1 + s)
