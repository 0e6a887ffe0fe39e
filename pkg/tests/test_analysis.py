import math

import numpy as np
import pytest

from triadic import analysis as A
from triadic import theory as T
from triadic.experiment import crafted_state
from triadic.params import ModelParams
from triadic.simulator import init, run


def joint_from_theory(c, w_max, scale):
    """Empirical counts proportional to theory (rounded)."""
    j = T.joint_recursion(c, w_max)
    counts = np.zeros((w_max + 2, 2 * w_max + 2), dtype=np.int64)
    counts[1: w_max + 1, : 2 * w_max + 1] = np.rint(j.entries[1:] * scale)
    counts[w_max + 1, 0] = scale - counts.sum()  # remaining mass in overflow
    return A.EmpiricalJoint(counts, 0, int(counts.sum())), j


def test_empirical_joint_checks_total():
    with pytest.raises(ValueError):
        A.EmpiricalJoint(np.ones((4, 6), dtype=np.int64), 1, 5)
    with pytest.raises(ValueError):
        A.EmpiricalJoint(np.zeros((4, 6), dtype=np.int64), 1, 0)


def test_tv_theory_with_itself(mixed_constants):
    j = T.joint_recursion(mixed_constants, 20)
    res = A.tv_distance(j, j, 20)
    assert res.tv == 0 and res.support == 0
    assert res.tail_a == res.tail_b > 0


def test_tv_proportional_counts(ba_constants):
    emp, j = joint_from_theory(ba_constants, 32, 10 ** 9)
    res = A.tv_distance(emp, j, 32)
    assert res.tv < 1e-8
    assert res.tail_a == pytest.approx(res.tail_b, abs=1e-8)
    assert res.conservative == pytest.approx(res.tail_b, abs=1e-8)


def test_tv_tail_from_theory_identity(ba_constants):
    j = T.joint_recursion(ba_constants, 32)
    x = T.weight_dist(ba_constants, 32)
    res = A.tv_distance(j, j, 32)
    assert res.tail_b == pytest.approx(T.weight_tail_mass(ba_constants, x, 32), rel=1e-10)


def test_tv_mismatched_caps(ba_constants):
    j = T.joint_recursion(ba_constants, 10)
    s = init(ModelParams(1, 0, 1), w_cap=8, d_cap=16)
    emp = A.EmpiricalJoint.from_state(s)
    with pytest.raises(ValueError):
        A.tv_distance(emp, j, 10)
    with pytest.raises(ValueError):
        A.tv_distance(j, j, 12)
    with pytest.raises(TypeError):
        A.tv_distance(j, [1, 2], 5)


def test_tv_between_basic():
    assert A.tv_between([0.5, 0.5], [1, 0]) == 0.5
    with pytest.raises(ValueError):
        A.tv_between([1], [0.5, 0.5])


# ------------------------------------------------------------------ fits

def test_fit_exact_power_law():
    k = np.arange(0, 200, dtype=float)
    dist = np.zeros(200)
    dist[1:] = 3.0 * k[1:] ** -2.5
    fit = A.fit_power_law(dist, (1, 199))
    assert fit.slope == pytest.approx(-2.5, abs=1e-10)
    assert fit.intercept == pytest.approx(math.log(3.0), abs=1e-10)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_rejects_nonpositive():
    with pytest.raises(ValueError):
        A.fit_power_law(np.array([0.0, 1.0, 0.0, 2.0]), (1, 3))
    with pytest.raises(ValueError):
        A.fit_power_law(np.ones(10), (5, 20))


def test_fit_weight_tail(ba_constants):
    x = T.weight_dist(ba_constants, 10 ** 4)
    fit = A.fit_power_law(x.values, (10 ** 3, 10 ** 4))
    assert abs(fit.slope + 2.5) < 0.01


def test_fit_degree_marginal_tail():
    c = T.constants_for("1/2", 1, 1)
    u = T.degree_marginal(c, 200, tol=1e-8)
    fit = A.fit_power_law(u.values, (50, 200))
    assert abs(fit.slope + (1 + 1 / float(c.alpha))) < 0.05


def test_growth_exponent():
    ns = np.unique(np.round(np.logspace(2, 6, 33)))
    fit = A.fit_growth_exponent(ns, 7 * ns ** 0.5)
    assert fit.slope == pytest.approx(0.5, abs=1e-10)
    assert fit.window == (ns.max() / 100, ns.max())
    assert fit.points == 17
    with pytest.raises(ValueError):
        A.fit_growth_exponent(ns[:4], ns[:4] ** 0.5, window=(1, 1e9))
    with pytest.raises(ValueError):
        A.fit_growth_exponent(ns, ns ** 0.5, window=(1e5, 2e5))


def test_degree_weight_ratio():
    r = A.degree_weight_ratio([0, 2, 3, 8], [0, 1, 2, 5])
    assert list(r) == [2.0, 1.5, 1.6]


def test_degree_weight_ratio_on_simulation():
    s = init(ModelParams("0.5", "0.5", "0.5"), seed=3)
    cps = list(run(s, 5000, checkpoints=range(100, 5001, 100), track=[0]))
    ratio = A.degree_weight_ratio([c.tracked[0][1] for c in cps], [c.tracked[0][0] for c in cps])
    assert np.all((ratio > 0) & (ratio <= 2))


def test_summarize():
    s = A.summarize([1.0, 2.0, 3.0])
    assert s["mean"] == 2.0 and s["std"] == 1.0 and s["values"] == [1.0, 2.0, 3.0]


# ------------------------------------------------------------------ kernel test

def test_kernel_init_preferential():
    s = init(ModelParams(1, 0, 1), seed=0)
    rep = A.kernel_test(s, 10 ** 5, seed=4)
    assert rep.passed
    for v in rep.vertices:
        joined = rep.trials - v.observed["idle"]
        assert abs(joined - rep.trials * 2 / 3) <= 3 * math.sqrt(rep.trials * 2 / 9)
        assert v.observed["impossible"] == 0
        assert v.observed["new-preferential:+1"] == joined


def test_kernel_init_uniform_pairs():
    s = init(ModelParams(1, 0, 0), seed=0)
    rep = A.kernel_test(s, 10 ** 5, seed=5)
    assert rep.passed
    for v in rep.vertices:
        joined = rep.trials - v.observed["idle"]
        assert abs(joined - rep.trials * 2 / 3) <= 3 * math.sqrt(rep.trials * 2 / 9)


def test_kernel_crafted_state_does_not_mutate():
    s = crafted_state(ModelParams("0.6", "0.3", "0.7"))
    before = s.to_dict()
    rep = A.kernel_test(s, 10 ** 5, seed=6)
    assert rep.passed and len(rep.vertices) == 6
    assert s.to_dict() == before
    doc = rep.to_dict()
    assert doc["passed"] and doc["births"]["observed"] == rep.births_observed
    assert all(v.p_value > 1e-4 for v in rep.vertices)


def test_kernel_merges_rare_cells():
    s = crafted_state(ModelParams("0.5", "0.5", "0.5"))
    rep = A.kernel_test(s, 10 ** 5, seed=8)
    merged = [v for v in rep.vertices if v.merged]
    assert merged and all("merged" in v.z for v in merged)
    assert all(c in KERNEL_CELLS for v in merged for c in v.merged)


def test_kernel_flags_impossible_transitions():
    assert A._z(1, 0.0, 100) == math.inf
    assert A._z(0, 0.0, 100) == 0.0


KERNEL_CELLS = A.KERNEL_CELLS
