"""Throughput of the compiled kernels against the plain-Python fallback.

Each backend runs in its own interpreter (the switch is read at import time):

    python3 benchmarks/bench_kernels.py              # both backends
    python3 benchmarks/bench_kernels.py --steps 200000 --fallback-steps 20000

The fallback executes the same kernel source without numba, so it is only
useful for checking results and profiling in Python; both backends must
reach the same state from the same seed, which is verified by hash.
"""
import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import hashlib, json, sys, time
from triadic.params import ModelParams
from triadic.simulator import init, describe_backend
from triadic import theory as T

steps, seed = int(sys.argv[1]), int(sys.argv[2])
params = ModelParams("0.6", "0.3", "0.7")

warm = init(params, seed=seed)
warm.advance(100)  # compile outside the timed region

state = init(params, seed=seed)
state.reserve(steps)
t0 = time.perf_counter()
state.advance(steps)
sim = time.perf_counter() - t0

snap = state.to_dict()
snap.pop("rng")
digest = hashlib.sha256(json.dumps(snap, sort_keys=True).encode()).hexdigest()

c = T.constants_for("0.5", "0.5", "0.5")
T.degree_marginal(c, 8, w_cutoff=50)
t0 = time.perf_counter()
T.degree_marginal(c, 64, w_cutoff=20000)
dm = time.perf_counter() - t0

print(json.dumps({"backend": describe_backend()["kernels"], "steps": steps,
                  "sim_seconds": sim, "steps_per_second": steps / sim,
                  "degree_marginal_seconds": dm, "state_sha256": digest}))
"""


def run_backend(steps, seed, no_jit):
    env = dict(os.environ)
    if no_jit:
        env["TRIADIC_NO_JIT"] = "1"
    else:
        env.pop("TRIADIC_NO_JIT", None)
    out = subprocess.run([sys.executable, "-c", WORKER, str(steps), str(seed)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--steps", type=int, default=1_000_000, help="steps for the compiled backend")
    ap.add_argument("--fallback-steps", type=int, default=20_000, help="steps for the Python backend")
    ap.add_argument("--seed", type=int, default=1)
    args = ap.parse_args(argv)

    jit = run_backend(args.steps, args.seed, no_jit=False)
    py = run_backend(args.fallback_steps, args.seed, no_jit=True)
    # same number of steps on both sides for the equality check
    jit_small = run_backend(args.fallback_steps, args.seed, no_jit=False)

    print(f"{'backend':<16}{'steps':>10}{'steps/s':>14}{'deg. marginal [s]':>20}")
    for r in (jit, py):
        print(f"{r['backend']:<16}{r['steps']:>10}{r['steps_per_second']:>14.0f}{r['degree_marginal_seconds']:>20.3f}")
    print(f"speedup (steps/s): {jit['steps_per_second'] / py['steps_per_second']:.1f}x")
    same = jit_small["state_sha256"] == py["state_sha256"]
    print(f"identical state after {args.fallback_steps} steps: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
