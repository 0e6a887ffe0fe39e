"""Compare simulated graphs with the limiting distributions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import kernels as K
from .simulator import Checkpoint, GraphState, make_rng
from .theory import TRANSITION_CELLS, JointDistribution, transition_probabilities

__all__ = [
    "EmpiricalJoint",
    "ExponentFit",
    "TVResult",
    "KernelReport",
    "tv_distance",
    "tv_between",
    "fit_power_law",
    "fit_growth_exponent",
    "degree_weight_ratio",
    "kernel_test",
    "summarize",
]


@dataclass(frozen=True)
class EmpiricalJoint:
    """Vertex counts X[n, d, w] stored as ``counts[w, d]``; last row/column are overflow."""

    counts: np.ndarray
    n: int
    V: int

    def __post_init__(self):
        if self.V <= 0:
            raise ValueError("V must be positive")
        if int(self.counts.sum()) != self.V:
            raise ValueError(f"counts sum to {int(self.counts.sum())}, expected V={self.V}")

    @classmethod
    def from_checkpoint(cls, cp: Checkpoint) -> "EmpiricalJoint":
        return cls(cp.occupancy, cp.n, cp.V)

    @classmethod
    def from_state(cls, state: GraphState) -> "EmpiricalJoint":
        return cls(state.occupancy(), state.n, state.num_vertices)

    @property
    def w_cap(self) -> int:
        return self.counts.shape[0] - 2

    @property
    def d_cap(self) -> int:
        return self.counts.shape[1] - 2

    def proportion(self, d: int, w: int) -> float:
        return self.counts[w, d] / self.V


@dataclass(frozen=True)
class ExponentFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    points: int = 0


@dataclass(frozen=True)
class TVResult:
    """Total variation on the capped support plus one lumped tail cell.

    ``conservative`` instead charges both tails in full, which bounds the TV
    distance on the uncapped space from above.
    """

    tv: float
    support: float
    tail_a: float
    tail_b: float

    @property
    def conservative(self) -> float:
        return self.support + 0.5 * (self.tail_a + self.tail_b)


def _grid(obj, cap: int) -> np.ndarray:
    """Proportions on w = 1..cap, d = 0..2cap as an array [cap+1, 2cap+1] (row 0 zero)."""
    out = np.zeros((cap + 1, 2 * cap + 1))
    if isinstance(obj, EmpiricalJoint):
        if obj.w_cap < cap or obj.d_cap < 2 * cap:
            raise ValueError(f"empirical caps (w<={obj.w_cap}, d<={obj.d_cap}) do not cover w<={cap}, d<={2 * cap}")
        out[1:] = obj.counts[1: cap + 1, : 2 * cap + 1] / obj.V
        return out
    if isinstance(obj, JointDistribution):
        if obj.w_max < cap:
            raise ValueError(f"theory computed to w_max={obj.w_max} < support cap {cap}")
        out[1:] = np.asarray(obj.entries[1: cap + 1, : 2 * cap + 1], dtype=float)
        return out
    raise TypeError(f"cannot take a joint distribution from {type(obj).__name__}")


def tv_distance(a, b, support_cap: int) -> TVResult:
    """Total variation between two joint laws of (degree, weight) for weights <= ``support_cap``.

    Either argument may be an :class:`EmpiricalJoint` or a
    :class:`~triadic.theory.JointDistribution`.  Mass outside the support
    (weights above the cap, overflow buckets) forms one extra cell.
    """
    ga, gb = _grid(a, support_cap), _grid(b, support_cap)
    tail_a = max(0.0, 1.0 - float(ga.sum()))
    tail_b = max(0.0, 1.0 - float(gb.sum()))
    support = 0.5 * float(np.abs(ga - gb).sum())
    return TVResult(support + 0.5 * abs(tail_a - tail_b), support, tail_a, tail_b)


def tv_between(p, q) -> float:
    """Half the l1 distance between two probability vectors."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("shape mismatch")
    return 0.5 * float(np.abs(p - q).sum())


def _loglog(x, y, window) -> ExponentFit:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(y <= 0) or np.any(x <= 0):
        raise ValueError("log-log fit needs positive values throughout the window")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return ExponentFit(float(slope), float(intercept), min(1.0, max(0.0, r2)),
                       (float(window[0]), float(window[1])), len(x))


def fit_power_law(dist, window: tuple[int, int]) -> ExponentFit:
    """Least squares of log dist[k] on log k for lo <= k <= hi (dist indexed by k)."""
    lo, hi = int(window[0]), int(window[1])
    if not 1 <= lo < hi < len(dist):
        raise ValueError(f"window {window} invalid for a sequence of length {len(dist)}")
    k = np.arange(lo, hi + 1)
    return _loglog(k, np.asarray(dist[lo: hi + 1], dtype=float), (lo, hi))


def fit_growth_exponent(ns, values, window: tuple[float, float] | None = None,
                        min_points: int = 5) -> ExponentFit:
    """Slope of log value against log n over checkpoints inside ``window``.

    The default window is [n_max / 100, n_max].
    """
    ns = np.asarray(ns, dtype=float)
    values = np.asarray(values, dtype=float)
    if window is None:
        window = (ns.max() / 100, ns.max())
    mask = (ns >= window[0]) & (ns <= window[1])
    if mask.sum() < min_points:
        raise ValueError(f"only {int(mask.sum())} checkpoints in window {window}; need {min_points}")
    return _loglog(ns[mask], values[mask], window)


def degree_weight_ratio(degrees, weights) -> np.ndarray:
    """D/W per checkpoint; checkpoints before the vertex exists (W = 0) are dropped."""
    d = np.asarray(degrees, dtype=float)
    w = np.asarray(weights, dtype=float)
    keep = w > 0
    return d[keep] / w[keep]


def summarize(values) -> dict:
    v = np.asarray(values, dtype=float)
    return {
        "mean": float(v.mean()),
        "std": float(v.std(ddof=1)) if len(v) > 1 else 0.0,
        "values": [float(x) for x in v],
    }


# ---------------------------------------------------------------- kernel test

KERNEL_CELLS = TRANSITION_CELLS + ("impossible",)


@dataclass
class VertexCells:
    label: int
    weight: int
    degree: int
    observed: dict[str, int]
    expected: dict[str, float]
    z: dict[str, float]
    merged: list[str]
    chi2: float
    dof: int
    p_value: float


@dataclass
class KernelReport:
    trials: int
    n: int
    V: int
    births_observed: int
    births_expected: float
    births_z: float
    vertices: list[VertexCells] = field(default_factory=list)
    threshold: float = 4.0

    @property
    def max_abs_z(self) -> float:
        zs = [abs(self.births_z)] + [abs(z) for v in self.vertices for z in v.z.values()]
        return max(zs)

    @property
    def passed(self) -> bool:
        return self.max_abs_z <= self.threshold

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "n": self.n,
            "V": self.V,
            "threshold_sigma": self.threshold,
            "max_abs_z": _finite(self.max_abs_z),
            "passed": self.passed,
            "births": {"observed": self.births_observed, "expected": self.births_expected,
                       "z": _finite(self.births_z)},
            "vertices": [
                {
                    "label": v.label, "weight": v.weight, "degree": v.degree,
                    "observed": v.observed, "expected": v.expected,
                    "z": {k: _finite(z) for k, z in v.z.items()},
                    "merged_cells": v.merged, "chi2": v.chi2, "dof": v.dof, "p_value": v.p_value,
                }
                for v in self.vertices
            ],
        }


def _finite(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _z(obs: float, prob: float, trials: int) -> float:
    exp = trials * prob
    if prob <= 0:
        return 0.0 if obs == 0 else math.inf
    if prob >= 1:
        return 0.0 if obs == trials else -math.inf
    return (obs - exp) / math.sqrt(trials * prob * (1 - prob))


def kernel_test(state: GraphState, trials: int, watch=None, seed: int = 12345,
                threshold: float = 4.0, min_expected: float = 5.0) -> KernelReport:
    """Sample one step ``trials`` times from the frozen ``state`` and compare the
    per-vertex (branch, degree increment) frequencies with their exact law.

    Cells with expected count below ``min_expected`` are pooled into one cell
    per vertex; a cell with zero expectation and a nonzero count gives an
    infinite z-score.  The state itself is not modified.
    """
    if watch is None:
        watch = list(range(-2, min(state.num_vertices, 8) - 2))
    watch = [int(x) for x in watch]
    idx = np.array([x + 2 for x in watch], dtype=np.int64)
    p, q, r = state.params.floats
    rng = make_rng(seed)
    counts, births = K.tabulate_transitions(
        rng, p, q, r, int(trials), idx, state.ctr, state.eu, state.ev, state.etree,
        state.ta, state.tb, state.tc, state.ttree, state.ekeys, state.evals)
    n, V = state.n, state.num_vertices
    pb = float(state.params.p)
    report = KernelReport(trials, n, V, int(births), trials * pb, _z(births, pb, trials),
                          threshold=threshold)
    for row, label in zip(counts, watch):
        w, d = state.vertex(label)
        probs = {k: float(v) for k, v in transition_probabilities(state.params, w, d, n, V).items()}
        probs["impossible"] = 0.0
        obs = {k: int(c) for k, c in zip(KERNEL_CELLS, row)}
        merged = [k for k in KERNEL_CELLS if trials * probs[k] < min_expected]
        cells_obs = {k: obs[k] for k in KERNEL_CELLS if k not in merged}
        cells_p = {k: probs[k] for k in KERNEL_CELLS if k not in merged}
        if merged:
            cells_obs["merged"] = sum(obs[k] for k in merged)
            cells_p["merged"] = sum(probs[k] for k in merged)
        z = {k: _z(cells_obs[k], cells_p[k], trials) for k in cells_obs}
        chi2 = 0.0
        used = 0
        for k in cells_obs:
            e = trials * cells_p[k]
            if e > 0:
                chi2 += (cells_obs[k] - e) ** 2 / e
                used += 1
            elif cells_obs[k] > 0:
                chi2 = math.inf
        dof = max(used - 1, 1)
        pval = float(stats.chi2.sf(chi2, dof)) if math.isfinite(chi2) else 0.0
        report.vertices.append(VertexCells(
            label, w, d, obs, {k: trials * probs[k] for k in KERNEL_CELLS}, z, merged,
            float(chi2), dof, pval))
    return report
