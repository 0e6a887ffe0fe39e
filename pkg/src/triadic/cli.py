"""``triadic`` command line: theory tables, simulations, comparisons, kernel tests."""
from __future__ import annotations

import argparse
import json
import sys
import time
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis as A
from . import theory as T
from .experiment import (
    ConfigError,
    ExperimentConfig,
    crafted_state,
    fraction_text,
    occupancy_rows,
    read_config_file,
    read_csv,
    resolve_config,
    run_metadata,
    save_snapshot,
    simulate_seeds,
    write_csv,
    write_json,
)
from .params import ParameterError, derive
from .simulator import RNG_ALGORITHM, init

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 1, 2
VERDICT_SCHEMA = "triadic-verdict/1"
KERNEL_SCHEMA = "triadic-kernel-test/1"
THEORY_SCHEMA = "triadic-theory/1"
MIN_KERNEL_TRIALS = 10 ** 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _fmt(x, exact: bool) -> str:
    if exact:
        return fraction_text(x)
    return repr(float(x))


def _meta(config: ExperimentConfig, notes=()) -> dict:
    return {"config": config.content_dict(), "config_sha256": config.digest(), "notes": list(notes)}


def _mkdir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write-test"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise UsageError(f"output directory {path} is not writable: {exc.strerror}") from exc
    return path


# ---------------------------------------------------------------- theory


def cmd_theory(config: ExperimentConfig) -> int:
    out = _mkdir(Path(config.out) / "theory")
    c = derive(config.params)
    exact = config.exact
    wm = config.w_max
    x = T.weight_dist(c, wm, exact=exact)
    joint = T.joint_recursion(c, wm, exact=exact)
    meta = _meta(config)
    has_tail = c.alpha > 0

    rows = []
    for w in range(1, wm + 1):
        tail = T.weight_tail_mass(c, x, w)
        asym = repr(float(T.weight_tail_asymptote(c, w))) if has_tail else ""
        rows.append([w, _fmt(x[w], exact), _fmt(tail, exact), asym])
    write_csv(out / "weight.csv", ["w", "x_w", "tail_mass_above_w", "asymptote"], rows, meta)

    rows = [[w, d, _fmt(joint.entries[w, d], exact)] for w in range(1, wm + 1) for d in range(2, 2 * w + 1)]
    write_csv(out / "joint.csv", ["w", "d", "x_dw"], rows, meta)
    files = ["weight.csv", "joint.csv"]

    if c.alpha1 > 0 and c.alpha2 > 0:
        rows = []
        for w in range(1, wm + 1):
            ds = np.arange(2, 2 * w + 1)
            g = T.gaussian_joint(c, ds, w, x_w=float(x[w]))
            rows += [[w, int(d), repr(float(joint.entries[w, d])), repr(float(gv))] for d, gv in zip(ds, g)]
        write_csv(out / "gaussian.csv", ["w", "d", "x_dw", "gaussian"], rows, meta)
        files.append("gaussian.csv")

    u = T.degree_marginal(c, config.d_max, tol=1e-6, w_limit=5_000_000)
    dtail = c.alpha > 0 and c.alpha2 > 0
    rows = []
    for d in range(2, config.d_max + 1):
        asym = repr(float(T.degree_marginal_asymptote(c, d))) if dtail else ""
        rows.append([d, repr(float(u.values[d])), asym])
    write_csv(out / "degree_marginal.csv", ["d", "u_d", "asymptote"], rows,
              {**meta, "notes": [f"weights truncated at w_cutoff={u.w_cutoff}; omitted mass <= {u.truncation_bound!r}"]})
    files.append("degree_marginal.csv")

    write_json(out / "theory.json", {
        "schema": THEORY_SCHEMA,
        **run_metadata(config),
        "constants": {k: fraction_text(getattr(c, k)) for k in ("alpha1", "alpha2", "alpha", "beta")},
        "tail_exponent": (fraction_text(1 + 1 / c.alpha) if has_tail else None),
        "degree_marginal": {"w_cutoff": u.w_cutoff, "truncation_bound": u.truncation_bound},
        "files": files,
    })
    print(f"theory: wrote {', '.join(files)} to {out}")
    print(f"  alpha1={c.alpha1} alpha2={c.alpha2} alpha={c.alpha} beta={c.beta}  x_1={x[1]}")
    return EXIT_OK


# ---------------------------------------------------------------- simulate


def cmd_simulate(config: ExperimentConfig) -> int:
    root = _mkdir(Path(config.out) / "simulate")
    t0 = time.perf_counter()
    runs = simulate_seeds(config)
    meta = _meta(config)
    per_seed = []
    for run in runs:
        d = _mkdir(root / f"seed_{run.seed}")
        write_csv(d / "checkpoints.csv", run.header, run.rows, meta)
        occ_meta = {**meta, "notes": [f"overflow: w={config.w_max + 1} or d={run.occupancy.shape[1] - 1}",
                                      f"n={run.n}", f"V={run.V}"]}
        write_csv(d / "occupancy.csv", ["w", "d", "count"], occupancy_rows(run.occupancy), occ_meta)
        if run.snapshot is not None:
            save_snapshot(d / "snapshot.json.gz", run.snapshot)
        per_seed.append({"seed": run.seed, "n": run.n, "V": run.V, "wall_time_s": run.wall_time})
        print(f"simulate: seed {run.seed}: n={run.n} V={run.V} "
              f"max_weight={run.rows[-1][4]} max_degree={run.rows[-1][5]} ({run.wall_time:.2f}s)")
    write_json(root / "metadata.json", run_metadata(config, {
        "rng": RNG_ALGORITHM,
        "wall_time_s": time.perf_counter() - t0,
        "seeds": per_seed,
    }))
    return EXIT_OK


# ---------------------------------------------------------------- compare


def _load_joint(path: Path, w_max: int) -> T.JointDistribution:
    _, rows, _ = read_csv(path)
    entries = np.zeros((w_max + 1, 2 * w_max + 1))
    for w, d, v in rows:
        w, d = int(w), int(d)
        if w <= w_max:
            entries[w, d] = float(Fraction(v))
    return T.JointDistribution(entries, w_max)


def _load_occupancy(path: Path, w_cap: int, d_cap: int) -> A.EmpiricalJoint:
    header, rows, meta = read_csv(path)
    occ = np.zeros((w_cap + 2, d_cap + 2), dtype=np.int64)
    for w, d, cnt in rows:
        occ[int(w), int(d)] = int(cnt)
    return A.EmpiricalJoint(occ, int(meta["n"]), int(meta["V"]))


def _check(name, value, target, tol, **extra) -> dict:
    ok = bool(abs(value - target) <= tol) if np.isfinite(value) else False
    return {"name": name, "value": value, "target": target, "tolerance": tol, "passed": ok, **extra}


def cmd_compare(config: ExperimentConfig, self_check: bool = False) -> int:
    root = Path(config.out)
    c = derive(config.params)
    theory_files = [root / "theory" / "joint.csv", root / "theory" / "theory.json"]
    sim_dirs = [root / "simulate" / f"seed_{s}" for s in config.seeds]
    needed = list(theory_files)
    if not self_check:
        for d in sim_dirs:
            needed += [d / "checkpoints.csv", d / "occupancy.csv"]
    missing = [str(p) for p in needed if not p.exists()]
    if missing:
        raise UsageError("missing inputs (run `triadic theory` / `triadic simulate` first):\n  " + "\n  ".join(missing))
    theory_meta = json.loads((root / "theory" / "theory.json").read_text())
    want = config.params.as_strings()
    got = {k: str(Fraction(v)) for k, v in ((k, theory_meta["config"][k]) for k in ("p", "q", "r"))}
    if got != want:
        raise UsageError(f"theory tables were computed for {got}, config asks for {want}")
    cap = min(config.w_max, int(theory_meta["config"]["w_max"]))
    joint = _load_joint(root / "theory" / "joint.csv", cap)
    tv_tol, x1_tol = float(Fraction(config.tv_tol)), float(Fraction(config.x1_tol))
    slope_tol, ratio_tol = float(Fraction(config.slope_tol)), float(Fraction(config.ratio_tol))
    checks, per_seed = [], []
    x1_theory = float(joint.get(2, 1))

    if self_check:
        res = A.tv_distance(joint, joint, cap)
        checks.append({"name": "tv(theory, theory)", "value": res.tv, "target": 0.0, "tolerance": tv_tol,
                       "passed": bool(res.tv <= tv_tol)})
    else:
        alpha = float(c.alpha)
        ratio_target = float(c.alpha2 / c.alpha) if c.alpha > 0 else None
        fits: dict[str, list[float]] = {}
        ratios: dict[str, list[float]] = {}
        notes = []
        tvs, tvc, x1s = [], [], []
        for seed, d in zip(config.seeds, sim_dirs):
            ch_meta = read_csv(d / "checkpoints.csv")[2]
            sim_cfg = json.loads(ch_meta["config"])
            emp = _load_occupancy(d / "occupancy.csv", int(sim_cfg["w_max"]),
                                  max(int(sim_cfg["d_max"]), 2 * int(sim_cfg["w_max"])))
            res = A.tv_distance(emp, joint, cap)
            x1 = emp.proportion(2, 1)
            tvs.append(res.tv)
            tvc.append(res.conservative)
            x1s.append(x1)
            head, rows, _ = read_csv(d / "checkpoints.csv")
            table = np.array(rows, dtype=float)
            col = {h: table[:, i] for i, h in enumerate(head)}
            row = {"seed": seed, "tv": res.tv, "tv_conservative": res.conservative,
                   "empirical_tail": res.tail_a, "theory_tail": res.tail_b, "x1": x1}
            series = [("max_weight", "max_weight"), ("max_degree", "max_degree")]
            for j in config.track:
                series += [(f"W[{j}]", f"W[{j}]"), (f"D[{j}]", f"D[{j}]")]
            for label, key in series:
                if key not in col:
                    continue
                try:
                    fit = A.fit_growth_exponent(col["n"], col[key])
                except ValueError as exc:
                    notes.append(f"seed {seed} {label}: fit skipped ({exc})")
                    continue
                fits.setdefault(label, []).append(fit.slope)
                row[f"slope {label}"] = fit.slope
            pairs = [("max_degree/max_weight", "max_degree", "max_weight")]
            pairs += [(f"D[{j}]/W[{j}]", f"D[{j}]", f"W[{j}]") for j in config.track]
            for label, dk, wk in pairs:
                if dk in col and col[wk][-1] > 0:
                    ratios.setdefault(label, []).append(float(col[dk][-1] / col[wk][-1]))
                    row[label] = ratios[label][-1]
            per_seed.append(row)
        checks.append({**_check("mean tv (support w<=%d, overflow charged in full)" % cap,
                                float(np.mean(tvc)), 0.0, tv_tol), "per_seed": A.summarize(tvc)})
        checks.append({**_check("mean X[n,2,1]/V_n", float(np.mean(x1s)), x1_theory, x1_tol),
                       "per_seed": A.summarize(x1s)})
        if c.alpha > 0:
            for label, vals in fits.items():
                if label.startswith("D") or label == "max_degree":
                    if c.alpha2 == 0:
                        continue
                checks.append({**_check(f"mean growth exponent {label}", float(np.mean(vals)), alpha, slope_tol),
                               "per_seed": A.summarize(vals)})
            if c.alpha2 > 0:
                for label, vals in ratios.items():
                    checks.append({**_check(f"mean final {label}", float(np.mean(vals)), ratio_target, ratio_tol),
                                   "per_seed": A.summarize(vals)})
        if notes:
            checks.append({"name": "notes", "passed": True, "notes": notes})
        heads = sorted({k for r in per_seed for k in r}, key=lambda k: (k != "seed", k))
        _mkdir(root / "compare")
        write_csv(root / "compare" / "per_seed.csv", heads,
                  ([r.get(h, "") for h in heads] for r in per_seed), _meta(config))

    passed = all(ch["passed"] for ch in checks)
    out = _mkdir(root / "compare")
    write_json(out / "verdict.json", {
        "schema": VERDICT_SCHEMA,
        **run_metadata(config),
        "mode": "self" if self_check else "simulation",
        "support_cap": cap,
        "checks": checks,
        "passed": passed,
    })
    for ch in checks:
        if "value" in ch:
            print(f"compare: {'PASS' if ch['passed'] else 'FAIL'}  {ch['name']}: {ch['value']:.6g} "
                  f"(target {ch['target']:.6g} +/- {ch['tolerance']:.3g})")
    print(f"compare: verdict {'PASS' if passed else 'FAIL'} -> {out / 'verdict.json'}")
    return EXIT_OK if passed else EXIT_FAIL


# ---------------------------------------------------------------- kernel test


def cmd_kernel_test(config: ExperimentConfig) -> int:
    if config.trials < MIN_KERNEL_TRIALS:
        print(f"warning: {config.trials} trials is below the recommended {MIN_KERNEL_TRIALS}", file=sys.stderr)
    out = _mkdir(Path(config.out) / "kernel_test")
    seed = config.seeds[0]
    state = crafted_state(config.params, seed) if config.state == "crafted" else init(config.params, seed)
    report = A.kernel_test(state, config.trials, seed=seed)
    write_json(out / f"report_{config.state}.json", {
        "schema": KERNEL_SCHEMA,
        **run_metadata(config),
        "state": config.state,
        "report": report.to_dict(),
    })
    print(f"kernel-test ({config.state} state, {config.trials} trials): max |z| = {report.max_abs_z:.3f} "
          f"-> {'PASS' if report.passed else 'FAIL'}")
    for v in report.vertices:
        print(f"  vertex {v.label:>3} (w={v.weight}, d={v.degree}): chi2={v.chi2:.2f} dof={v.dof} p={v.p_value:.3f}")
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_all(config: ExperimentConfig) -> int:
    cmd_theory(config)
    cmd_simulate(config)
    return cmd_compare(config)


# ---------------------------------------------------------------- parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("experiment settings (override --config)")
    g.add_argument("--config", help="flat key = value file")
    g.add_argument("--p", help="probability of a new vertex (decimal or fraction string)")
    g.add_argument("--q", help="preferential probability in old-vertex steps")
    g.add_argument("--r", help="preferential probability in new-vertex steps")
    g.add_argument("--steps", help="number of steps per run")
    g.add_argument("--seeds", help="comma list, ranges as lo:hi (e.g. 0:9)")
    g.add_argument("--checkpoints", help="'geometric' or comma list of step numbers")
    g.add_argument("--jobs", help="worker processes for seeds")
    g.add_argument("--w-max", dest="w_max", help="weight cap for tables and occupancy")
    g.add_argument("--d-max", dest="d_max", help="degree cap (default 2 * w-max)")
    g.add_argument("--track", help="vertex labels whose (W, D) are recorded")
    g.add_argument("--out", help="output directory")
    g.add_argument("--exact", action="store_const", const="true", default=None,
                   help="rational arithmetic for theory tables")
    g.add_argument("--no-snapshot", dest="snapshot", action="store_const", const="false", default=None,
                   help="skip writing final snapshots")
    g.add_argument("--trials", help="kernel-test trials")
    g.add_argument("--state", choices=("init", "crafted"), help="kernel-test starting state")
    for name in ("tv-tol", "x1-tol", "slope-tol", "ratio-tol"):
        g.add_argument(f"--{name}", dest=name.replace("-", "_"), help="comparison tolerance")

    parser = _Parser(prog="triadic", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("theory", parents=[common], help="limit distributions as CSV")
    sub.add_parser("simulate", parents=[common], help="replicated simulations")
    cmp_ = sub.add_parser("compare", parents=[common], help="verdict of simulations against theory")
    cmp_.add_argument("--self", dest="self_check", action="store_true", help="compare theory with itself")
    sub.add_parser("kernel-test", parents=[common], help="single-step transition frequencies")
    sub.add_parser("all", parents=[common], help="theory, simulate and compare")
    return parser


_SETTINGS = ("p", "q", "r", "steps", "seeds", "checkpoints", "jobs", "w_max", "d_max", "track", "out",
             "exact", "snapshot", "trials", "state", "tv_tol", "x1_tol", "slope_tol", "ratio_tol")


def config_from_args(args) -> ExperimentConfig:
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {k: getattr(args, k) for k in _SETTINGS}
    return resolve_config(file_values, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = config_from_args(args)
        if args.command == "theory":
            return cmd_theory(config)
        if args.command == "simulate":
            return cmd_simulate(config)
        if args.command == "compare":
            return cmd_compare(config, self_check=args.self_check)
        if args.command == "kernel-test":
            return cmd_kernel_test(config)
        return cmd_all(config)
    except (ConfigError, ParameterError, UsageError) as exc:
        print(f"triadic {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
