"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""
import math
import os
import random
import time
from fractions import Fraction as F

import numpy as np
import pytest

from triadic import analysis as A
from triadic import theory as T
from triadic.cli import main
from triadic.experiment import crafted_state, read_csv
from triadic.params import ModelParams, derive
from triadic.simulator import init, run

ORACLE_SETS = [(1, 0, 1), ("1/2", "1/2", "1/2"), ("1/3", "2/3", "1/4")]
# alpha1, alpha2 > 0 with beta = 0: the Gaussian and degree-tail limits are reached
# without the slowly vanishing log(w) shift that a positive beta adds
BIVARIATE_SET = ("1/2", 1, 1)
JOBS = str(os.cpu_count() or 1)


def test_c1_oracle_equivalence(criterion):
    t0 = time.perf_counter()
    mismatches = 0
    for pqr in ORACLE_SETS:
        c = T.constants_for(*pqr)
        j = T.joint_recursion(c, 12, exact=True)
        for w in range(1, 13):
            for d in range(2, 2 * w + 1):
                mismatches += T.joint_explicit_exact(c, d, w) != j.get(d, w)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10
    criterion("C1", ok, f"recursion == explicit form, 3 sets, w<=12: {mismatches} mismatches, {elapsed:.2f}s (<10s)")
    assert ok


def test_c2_construction_identity(criterion):
    t0 = time.perf_counter()
    mismatches = 0
    for pqr in ORACLE_SETS:
        c = T.constants_for(*pqr)
        x = T.weight_dist(c, 64, exact=True)
        j = T.joint_recursion(c, 64, exact=True)
        for w, pmf in T.iter_sum_law_pmfs(c, 64, exact=True):
            mismatches += sum(pmf[d] * x[w] != j.get(d, w) for d in range(len(pmf)))
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 30
    criterion("C2", ok, f"P(S_w=d) x_w == x_(d,w) exactly, w<=64, 3 sets: {mismatches} mismatches, {elapsed:.2f}s (<30s)")
    assert ok


def test_c3_marginal_consistency(criterion):
    worst = 0.0
    for pqr in ORACLE_SETS + [BIVARIATE_SET, ("0.05", "0.9", "0.1")]:
        c = T.constants_for(*pqr)
        j = T.joint_recursion(c, 200)
        x = T.weight_dist(c, 200)
        worst = max(worst, float(np.max(np.abs(j.row_sums()[1:] - x.values[1:]))))
    ok = worst <= 1e-12
    criterion("C3", ok, f"max |sum_d x_(d,w) - x_w|, w<=200, 5 sets: {worst:.2e} (<=1e-12)")
    assert ok


def test_c4_weight_tail_slope(criterion):
    t0 = time.perf_counter()
    c = T.constants_for(1, 0, 1)
    x = T.weight_dist(c, 10 ** 4)
    fit = A.fit_power_law(x.values, (10 ** 3, 10 ** 4))
    elapsed = time.perf_counter() - t0
    target = -(1 + 1 / float(c.alpha))
    ok = abs(fit.slope - target) <= 0.01 and elapsed < 5
    criterion("C4", ok, f"x_w slope on [1e3,1e4], p=r=1: {fit.slope:.5f} vs {target} (+/-0.01), {elapsed:.3f}s (<5s)")
    assert ok


def test_c5_gaussian_local_limit(criterion):
    c = T.constants_for(*BIVARIATE_SET)
    j = T.joint_recursion(c, 1600)
    errs = []
    for w in (100, 400, 1600):
        d = np.arange(0, 2 * w + 1)
        x_w = j.row_sums()[w]
        g = T.gaussian_joint(c, d, w, x_w)
        errs.append(float(np.max(np.abs(j.entries[w, : 2 * w + 1] - g)) * math.sqrt(w) / x_w))
    ok = all(b <= 1.05 * a for a, b in zip(errs, errs[1:]))
    criterion("C5", ok, "sup_d |x_(d,w) - gauss| sqrt(w)/x_w at w=100,400,1600 for (p,q,r)=(1/2,1,1): "
              + ", ".join(f"{e:.4f}" for e in errs) + " (non-increasing, 5% slack)")
    assert ok


def test_c6_degree_marginal_tail(criterion):
    c = T.constants_for(*BIVARIATE_SET)
    u = T.degree_marginal(c, 200, tol=1e-8)
    fit = A.fit_power_law(u.values, (50, 200))
    target = -(1 + 1 / float(c.alpha))
    ratio = u.values[200] / T.degree_marginal_asymptote(c, 200)
    ok = abs(fit.slope - target) <= 0.05 and abs(ratio - 1) <= 0.1
    criterion("C6", ok, f"u_d slope on [50,200]: {fit.slope:.4f} vs {target:.4f} (+/-0.05); "
              f"u_200/asymptote = {ratio:.4f} (+/-10%); cutoff w={u.w_cutoff}, omitted mass <= {u.truncation_bound:.1e}")
    assert ok


# ------------------------------------------------------------------ simulation criteria


def _pipeline(tmp_path_factory, name, pqr, extra=()):
    out = tmp_path_factory.mktemp(name)
    t0 = time.perf_counter()
    code = main(["all", "--p", str(pqr[0]), "--q", str(pqr[1]), "--r", str(pqr[2]), "--steps", "1000000",
                 "--seeds", "0:9", "--jobs", JOBS, "--track", "0", "--no-snapshot", "--out", str(out), *extra])
    elapsed = time.perf_counter() - t0
    runs = []
    for seed in range(10):
        d = out / "simulate" / f"seed_{seed}"
        head, rows, _ = read_csv(d / "checkpoints.csv")
        table = np.array(rows, dtype=float)
        occ_head, occ_rows, occ_meta = read_csv(d / "occupancy.csv")
        runs.append({"cols": {h: table[:, i] for i, h in enumerate(head)},
                     "occ": np.array(occ_rows, dtype=np.int64), "V": int(occ_meta["V"]), "n": int(occ_meta["n"])})
    return {"code": code, "elapsed": elapsed, "runs": runs, "out": out}


@pytest.fixture(scope="module")
def ba_runs(tmp_path_factory):
    return _pipeline(tmp_path_factory, "ba", (1, 0, 1))


@pytest.fixture(scope="module")
def mixed_runs(tmp_path_factory):
    return _pipeline(tmp_path_factory, "mixed", ("1/2", "1/2", "1/2"), ["--slope-tol", "0.07", "--tv-tol", "0.05"])


def test_c7_simulation_convergence(ba_runs, criterion):
    c = derive(ModelParams(1, 0, 1))
    theory = T.joint_recursion(c, 32)
    tv, tv_cons, x1 = [], [], []
    for r in ba_runs["runs"]:
        occ = np.zeros((32 + 2, 64 + 2), dtype=np.int64)  # default caps plus overflow buckets
        for w, d, cnt in r["occ"]:
            occ[w, d] = cnt
        emp = A.EmpiricalJoint(occ, r["n"], r["V"])
        res = A.tv_distance(emp, theory, 32)
        tv.append(res.tv)
        tv_cons.append(res.conservative)
        x1.append(emp.proportion(2, 1))
    mt, mc, mx = np.mean(tv), np.mean(tv_cons), np.mean(x1)
    ok = mc <= 0.01 and abs(mx - 0.6) <= 0.01 and ba_runs["elapsed"] < 300 and ba_runs["code"] == 0
    criterion("C7", ok, f"p=1,q=0,r=1, n=1e6, 10 seeds: mean TV {mt:.4f} (overflow charged in full {mc:.4f}, <=0.01); "
              f"mean X[n,2,1]/V {mx:.4f} vs 0.6 (+/-0.01); pipeline {ba_runs['elapsed']:.0f}s (<300s); verdict exit {ba_runs['code']}")
    assert ok


KERNEL_SETS = [(1, 0, 1), ("1/2", "1/2", 1), ("0.6", "0.3", "0.7")]


def test_c8_kernel_correctness(criterion):
    worst, parts = 0.0, []
    ok = True
    for pqr in KERNEL_SETS:
        params = ModelParams(*pqr)
        for label, state in (("init", init(params, seed=1)), ("crafted", crafted_state(params, seed=1))):
            rep = A.kernel_test(state, 10 ** 6, seed=2024)
            worst = max(worst, rep.max_abs_z)
            ok &= rep.passed
            parts.append(f"{label}{pqr}")
    criterion("C8", ok, f"kernel test, 1e6 trials, {len(parts)} cases (r=1 boundary and interior): max |z| {worst:.2f} (<=4)")
    assert ok


def _growth_summary(runs, window=(1e4, 1e6)):
    out = {}
    for key in ("W[0]", "D[0]", "max_weight", "max_degree"):
        out[key] = float(np.mean([A.fit_growth_exponent(r["cols"]["n"], r["cols"][key], window).slope for r in runs]))
    out["ratio"] = float(np.mean([r["cols"]["max_degree"][-1] / r["cols"]["max_weight"][-1] for r in runs]))
    return out


def test_c9_growth_laws(ba_runs, mixed_runs, criterion):
    lines, ok = [], True
    for name, res, pqr, tol in (("p=1,r=1", ba_runs, (1, 0, 1), 0.05),
                                ("(1/2,1/2,1/2)", mixed_runs, ("1/2", "1/2", "1/2"), 0.07)):
        c = derive(ModelParams(*pqr))
        alpha, ratio_target = float(c.alpha), float(c.alpha2 / c.alpha)
        g = _growth_summary(res["runs"])
        good = all(abs(g[k] - alpha) <= tol for k in ("W[0]", "D[0]", "max_weight", "max_degree"))
        good &= abs(g["ratio"] - ratio_target) <= 0.1
        good &= res["code"] == 0
        ok &= good
        lines.append(f"{name}: slopes W0 {g['W[0]']:.3f} D0 {g['D[0]']:.3f} maxW {g['max_weight']:.3f} "
                     f"maxD {g['max_degree']:.3f} vs {alpha:.4f} (+/-{tol}), maxD/maxW {g['ratio']:.3f} vs {ratio_target:.3f} (+/-0.1)")
    criterion("C9", ok, "; ".join(lines))
    assert ok


def test_c10_invariant_fuzz(criterion):
    rnd = random.Random(20240601)
    violations, done = [], 0
    for _ in range(20):
        pqr = (F(rnd.randint(1, 20), 20), F(rnd.randint(0, 20), 20), F(rnd.randint(0, 20), 20))
        seed = rnd.randrange(2 ** 31)
        state = init(ModelParams(*pqr), seed=seed)
        try:
            for _cp in run(state, 10 ** 4, checkpoints=[2500, 5000, 7500, 10 ** 4], debug=True):
                pass
            done += 1
        except AssertionError as exc:
            violations.append(f"{pqr} seed {seed}: {exc}")
    ok = not violations and done == 20
    criterion("C10", ok, f"20 random parameter sets x 1e4 steps, identities checked every step: {len(violations)} violations")
    assert ok, violations
