"""Limiting distributions of weight and degree.

Two arithmetic backends share every signature: floating point (numpy float64)
and exact rationals (numpy object arrays of ``Fraction``), chosen with
``exact=True``.  Arrays are indexed directly by w and d; index 0 (and d=1) is
always zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

import numpy as np

from ._jit import njit
from .params import DerivedConstants, ModelParams, ParameterError, c_w, derive

__all__ = [
    "WeightDistribution",
    "JointDistribution",
    "XiLaw",
    "DegreeMarginal",
    "weight_dist",
    "weight_tail_mass",
    "weight_tail_asymptote",
    "joint_recursion",
    "elementary_sum",
    "joint_explicit_exact",
    "joint_explicit_poly",
    "joint_explicit_sum",
    "xi_law",
    "sum_law_pmf",
    "iter_sum_law_pmfs",
    "gaussian_joint",
    "degree_marginal",
    "degree_marginal_asymptote",
    "participation_probability",
    "transition_probabilities",
    "TRANSITION_CELLS",
]

EXACT_CONVOLUTION_LIMIT = 512


def _zeros(shape, exact):
    if exact:
        out = np.empty(shape, dtype=object)
        out.fill(Fraction(0))
        return out
    return np.zeros(shape)


def _consts(constants: DerivedConstants, exact: bool):
    if exact:
        return constants.alpha1, constants.alpha2, constants.alpha, constants.beta
    f = constants.f
    return f.alpha1, f.alpha2, f.alpha, f.beta


@dataclass(frozen=True)
class WeightDistribution:
    values: np.ndarray  # values[w], w = 1..w_max
    exact: bool = False

    @property
    def w_max(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, w):
        return self.values[w]


@dataclass(frozen=True)
class JointDistribution:
    """Triangular array ``entries[w, d]`` for 1 <= w <= w_max, d <= 2 w_max."""

    entries: np.ndarray
    w_max: int
    exact: bool = False

    def get(self, d: int, w: int):
        if w < 1 or w > self.w_max or d < 0 or d > 2 * w:
            return Fraction(0) if self.exact else 0.0
        return self.entries[w, d]

    def row_sums(self) -> np.ndarray:
        return self.entries.sum(axis=1)


@dataclass(frozen=True)
class XiLaw:
    w: int
    prob0: Fraction
    prob1: Fraction
    prob2: Fraction


@dataclass(frozen=True)
class DegreeMarginal:
    values: np.ndarray  # values[d], d = 0..d_max
    w_cutoff: int
    truncation_bound: float  # mass of weights above w_cutoff


def _require_nondegenerate(constants: DerivedConstants):
    if constants.alpha == 0 and constants.beta == 0:  # pragma: no cover - impossible for p > 0
        raise ParameterError("alpha = beta = 0: weight distribution undefined")


def weight_dist(constants: DerivedConstants, w_max: int, exact: bool = False) -> WeightDistribution:
    """x_1 = 1/(alpha+beta+1), x_w = x_{w-1} (alpha(w-1)+beta)/(alpha w+beta+1)."""
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    _require_nondegenerate(constants)
    _, _, a, b = _consts(constants, exact)
    x = _zeros(w_max + 1, exact)
    x[1] = 1 / (a + b + 1)
    if exact:
        for w in range(2, w_max + 1):
            x[w] = x[w - 1] * (a * (w - 1) + b) / (a * w + b + 1)
    else:
        w = np.arange(2, w_max + 1, dtype=float)
        x[2:] = np.cumprod((a * (w - 1) + b) / (a * w + b + 1)) * x[1]
    return WeightDistribution(x, exact)


def weight_tail_mass(constants: DerivedConstants, x: WeightDistribution, w: int):
    """Sum of x_v over v > w, which telescopes to (alpha w + beta) x_w."""
    _, _, a, b = _consts(constants, x.exact)
    return (a * w + b) * x[w]


def _tail_prefactor(constants: DerivedConstants) -> float:
    a, b = float(constants.alpha), float(constants.beta)
    return math.exp(math.lgamma(1 + (b + 1) / a) - math.lgamma(1 + b / a))


def weight_tail_asymptote(constants: DerivedConstants, w):
    """Gamma(1+(beta+1)/alpha) / (alpha Gamma(1+beta/alpha)) * w^-(1+1/alpha)."""
    if constants.alpha == 0:
        raise ParameterError("alpha = 0: no power-law tail")
    a = float(constants.alpha)
    w = np.asarray(w, dtype=float)
    return _tail_prefactor(constants) / a * w ** (-(1 + 1 / a))


def joint_recursion(constants: DerivedConstants, w_max: int, exact: bool = False) -> JointDistribution:
    if w_max < 1:
        raise ValueError("w_max must be >= 1")
    _require_nondegenerate(constants)
    a1, a2, a, b = _consts(constants, exact)
    x = _zeros((w_max + 1, 2 * w_max + 1), exact)
    x[1, 2] = 1 / (a + b + 1)
    for w in range(2, w_max + 1):
        prev = x[w - 1]
        hi = 2 * w + 1
        row = a1 * (w - 1) * prev[:hi]
        row[1:hi] = row[1:hi] + a2 * (w - 1) * prev[: hi - 1]
        row[2:hi] = row[2:hi] + b * prev[: hi - 2]
        x[w, :hi] = row / (a * w + b + 1)
    return JointDistribution(x, w_max, exact)


@lru_cache(maxsize=None)
def _elementary_row(n: int) -> tuple[int, ...]:
    """(S_n(0), ..., S_n(n)): coefficients of prod_{i<=n} (1 + i t)."""
    if n == 0:
        return (1,)
    prev = _elementary_row(n - 1)
    row = list(prev) + [0]
    for k in range(n, 0, -1):
        row[k] += n * prev[k - 1]
    return tuple(row)


def elementary_sum(n: int, k: int) -> int:
    """Sum of i_1 i_2 ... i_k over 1 <= i_1 < ... < i_k <= n."""
    if n < 0 or k < 0:
        raise ValueError("n and k must be nonnegative")
    if k > n:
        return 0
    return _elementary_row(n)[k]


def joint_explicit_poly(constants: DerivedConstants, w: int) -> list[Fraction]:
    """Coefficients in z of prod_{i=1}^{w-1} (i(alpha1 + alpha2 z) + beta z^2) / c_w.

    Entry k of the result is x_{k+2,w}.
    """
    a1, a2, b = constants.alpha1, constants.alpha2, constants.beta
    poly = [Fraction(1)]
    for i in range(1, w):
        factor = (i * a1, i * a2, b)
        out = [Fraction(0)] * (len(poly) + 2)
        for k, c in enumerate(poly):
            if c:
                for j, f in enumerate(factor):
                    out[k + j] += c * f
        poly = out
    cw = c_w(constants, w, exact=True)
    return [c / cw for c in poly]


def joint_explicit_sum(constants: DerivedConstants, d: int, w: int) -> Fraction:
    """Closed-form summation over k with elementary symmetric sums of 1..w-1."""
    if w < 1 or d < 2 or d > 2 * w:
        return Fraction(0)
    a1, a2, b = constants.alpha1, constants.alpha2, constants.beta
    total = Fraction(0)
    for k in range(1, w + 1):
        j = d - 2 * k
        if j < 0 or j > w - k:
            continue
        total += (elementary_sum(w - 1, w - k) * comb(w - k, j)
                  * a1 ** (w - d + k) * a2 ** j * b ** (k - 1))
    return total / c_w(constants, w, exact=True)


def joint_explicit_exact(constants: DerivedConstants, d: int, w: int) -> Fraction:
    """x_{d,w} from the explicit solution, evaluated both ways.

    Raises ``ArithmeticError`` if the polynomial coefficient and the summation
    form ever disagree.
    """
    if w < 1 or d < 2 or d > 2 * w:
        return Fraction(0)
    via_poly = joint_explicit_poly(constants, w)[d - 2]
    via_sum = joint_explicit_sum(constants, d, w)
    if via_poly != via_sum:
        raise ArithmeticError(f"explicit forms disagree at d={d}, w={w}: {via_poly} != {via_sum}")
    return via_poly


def xi_law(constants: DerivedConstants, w: int) -> XiLaw:
    """Law of the degree increment attached to the w-th unit of weight."""
    if w < 1:
        raise ValueError("w must be >= 1")
    if w == 1:
        return XiLaw(1, Fraction(0), Fraction(0), Fraction(1))
    a1, a2, a, b = constants.alpha1, constants.alpha2, constants.alpha, constants.beta
    den = a * (w - 1) + b
    if den == 0:
        raise ParameterError(f"xi law undefined at w={w}: alpha(w-1)+beta = 0")
    return XiLaw(w, a1 * (w - 1) / den, a2 * (w - 1) / den, b / den)


def iter_sum_law_pmfs(constants: DerivedConstants, w_max: int, exact: bool = False):
    """Yield (w, pmf of S_w) for w = 1..w_max; pmf is indexed by d = 0..2w."""
    pmf = _zeros(3, exact)
    pmf[2] = 1 if not exact else Fraction(1)
    yield 1, pmf
    for w in range(2, w_max + 1):
        law = xi_law(constants, w)
        probs = (law.prob0, law.prob1, law.prob2)
        if not exact:
            probs = tuple(float(x) for x in probs)
        out = _zeros(2 * w + 1, exact)
        n = len(pmf)
        out[:n] = out[:n] + probs[0] * pmf
        out[1:n + 1] = out[1:n + 1] + probs[1] * pmf
        out[2:n + 2] = out[2:n + 2] + probs[2] * pmf
        pmf = out
        yield w, pmf


def sum_law_pmf(constants: DerivedConstants, w: int, exact: bool | None = None) -> np.ndarray:
    """pmf of S_w = xi_1 + ... + xi_w, support within [2, 2w].

    Exact rationals by default for w <= 512, floats beyond.
    """
    if w < 1:
        raise ValueError("w must be >= 1")
    if exact is None:
        exact = w <= EXACT_CONVOLUTION_LIMIT
    for _, pmf in iter_sum_law_pmfs(constants, w, exact):
        pass
    return pmf


def _require_both_alphas(constants: DerivedConstants):
    if constants.alpha1 <= 0 or constants.alpha2 <= 0:
        raise ParameterError("Gaussian form requires alpha1 > 0 and alpha2 > 0")


def gaussian_joint(constants: DerivedConstants, d, w: int, x_w: float | None = None):
    """Normal approximation of x_{d,w}; ``d`` may be an array."""
    _require_both_alphas(constants)
    if w < 1:
        raise ValueError("w must be >= 1")
    f = constants.f
    if x_w is None:
        x_w = weight_dist(constants, w)[w]
    d = np.asarray(d, dtype=float)
    var = f.alpha1 * f.alpha2 * w
    return x_w * f.alpha / math.sqrt(2 * math.pi * var) * np.exp(-(f.alpha * d - f.alpha2 * w) ** 2 / (2 * var))


@njit
def _degree_marginal_kernel(a1, a2, a, b, d_max, w_cutoff):
    u = np.zeros(d_max + 1)
    row = np.zeros(d_max + 1)
    nxt = np.zeros(d_max + 1)
    x_w = 1.0 / (a + b + 1.0)
    if d_max >= 2:
        row[2] = x_w
        u[2] = x_w
    for w in range(2, w_cutoff + 1):
        den = a * w + b + 1.0
        c0 = a1 * (w - 1)
        c1 = a2 * (w - 1)
        hi = min(2 * w, d_max)
        nxt[0] = 0.0
        nxt[1] = 0.0
        for d in range(2, hi + 1):
            nxt[d] = (c0 * row[d] + c1 * row[d - 1] + b * row[d - 2]) / den
            u[d] += nxt[d]
        peak = 0.0
        for d in range(2, hi + 1):
            row[d] = nxt[d]
            if nxt[d] > peak:
                peak = nxt[d]
        x_w *= (a * (w - 1) + b) / den
        if peak < 1e-300:
            # rows only shrink from here; avoids crawling through subnormals
            for v in range(w + 1, w_cutoff + 1):
                x_w *= (a * (v - 1) + b) / (a * v + b + 1.0)
            break
    return u, x_w


def _log_weight_prob(constants: DerivedConstants, w: int) -> float:
    """log x_w in closed form (ratio of gamma functions), for cutoff search."""
    f = constants.f
    if f.alpha == 0:
        return (w - 1) * math.log(f.beta / (f.beta + 1)) - math.log(f.beta + 1)
    s = (f.beta + 1) / f.alpha
    t = f.beta / f.alpha
    return (math.lgamma(w + t) + math.lgamma(1 + s) - math.lgamma(1 + t)
            - math.lgamma(w + 1 + s) - math.log(f.alpha))


def _auto_cutoff(constants: DerivedConstants, tol: float, w_limit: int) -> int:
    """Smallest w with (alpha w + beta) x_w < tol, by bisection (the tail is decreasing)."""
    f = constants.f

    def tail(w):
        return (f.alpha * w + f.beta) * math.exp(_log_weight_prob(constants, w))

    if tail(w_limit) >= tol:
        raise ParameterError(f"tail mass above {tol} even at w={w_limit}")
    lo, hi = 1, w_limit
    if tail(lo) < tol:
        return lo
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if tail(mid) < tol:
            hi = mid
        else:
            lo = mid
    return hi


def degree_marginal(constants: DerivedConstants, d_max: int, w_cutoff: int | None = None,
                    tol: float = 1e-8, w_limit: int = 50_000_000) -> DegreeMarginal:
    """u_d = sum over w of x_{d,w}, truncated at ``w_cutoff``.

    Without an explicit cutoff the smallest w whose remaining weight mass
    (alpha w + beta) x_w falls below ``tol`` is used.  Only degrees up to
    ``d_max`` are tracked, which is exact since the recursion never looks at
    larger degrees.
    """
    _require_nondegenerate(constants)
    if d_max < 2:
        raise ValueError("d_max must be >= 2")
    if w_cutoff is None:
        w_cutoff = _auto_cutoff(constants, tol, w_limit)
    f = constants.f
    u, x_last = _degree_marginal_kernel(f.alpha1, f.alpha2, f.alpha, f.beta, int(d_max), int(w_cutoff))
    bound = (f.alpha * w_cutoff + f.beta) * x_last
    return DegreeMarginal(u, int(w_cutoff), float(bound))


def degree_marginal_asymptote(constants: DerivedConstants, d):
    """Gamma(1+(beta+1)/alpha)/(alpha2 Gamma(1+beta/alpha)) (alpha d/alpha2)^-(1+1/alpha)."""
    if constants.alpha == 0 or constants.alpha2 == 0:
        raise ParameterError("degree tail needs alpha > 0 and alpha2 > 0")
    f = constants.f
    d = np.asarray(d, dtype=float)
    return _tail_prefactor(constants) / f.alpha2 * (f.alpha * d / f.alpha2) ** (-(1 + 1 / f.alpha))


def participation_probability(constants: DerivedConstants, w: int, n: int, V: int) -> float:
    """Chance that a weight-w vertex takes part in step n, given V vertices before it.

    Equals alpha w / n + beta p / V, whatever the degree.
    """
    if n < 1 or V < 3 or not 1 <= w <= n:
        raise ValueError("need n >= 1, V >= 3, 1 <= w <= n")
    f = constants.f
    value = f.alpha * w / n + f.beta * f.p / V
    if value > 1 + 1e-12:
        raise ValueError(f"participation probability {value} > 1: inconsistent (w, n, V)")
    return value


TRANSITION_CELLS = (
    "new-preferential:+1",
    "new-uniform:+1",
    "new-uniform:+2",
    "old-preferential:+0",
    "old-uniform:+0",
    "old-uniform:+1",
    "old-uniform:+2",
    "idle",
)


def transition_probabilities(params: ModelParams, w: int, d: int, n: int, V: int) -> dict[str, Fraction]:
    """Exact one-step law of (branch, degree increment) for a fixed old vertex.

    The state holds ``n`` completed steps (total edge weight 3(n+1), total
    triangle weight n+1) and ``V`` vertices; the vertex has weight ``w`` and
    degree ``d``.  Every participation raises the weight by one.
    """
    p, q, r = params.p, params.q, params.r
    pairs = Fraction(V * (V - 1), 2)
    triples = Fraction(V * (V - 1) * (V - 2), 6)
    out = {
        "new-preferential:+1": p * r * Fraction(2 * w, 3 * (n + 1)),
        "new-uniform:+1": p * (1 - r) * d / pairs,
        "new-uniform:+2": p * (1 - r) * (V - d - 1) / pairs,
        "old-preferential:+0": (1 - p) * q * Fraction(w, n + 1),
        "old-uniform:+0": (1 - p) * (1 - q) * comb(d, 2) / triples,
        "old-uniform:+1": (1 - p) * (1 - q) * d * (V - d - 1) / triples,
        "old-uniform:+2": (1 - p) * (1 - q) * comb(V - d - 1, 2) / triples,
    }
    out["idle"] = 1 - sum(out.values())
    return out


def constants_for(p, q, r) -> DerivedConstants:
    return derive(ModelParams(p, q, r))
