"""The compiled kernels and the plain-Python fallback must agree bit for bit."""
import json
import os
import subprocess
import sys

import pytest

from triadic._jit import JIT_ENABLED

SCRIPT = r"""
import hashlib, json
from triadic.params import ModelParams
from triadic.simulator import init, describe_backend
from triadic import theory as T
from triadic.analysis import kernel_test

s = init(ModelParams("0.6", "0.3", "0.7"), seed=7)
s.advance(3000)
snap = s.to_dict()
snap.pop("rng")
u = T.degree_marginal(T.constants_for("1/2", "1/2", "1/2"), 30, w_cutoff=400)
rep = kernel_test(init(ModelParams("0.5", "0.5", "0.5"), seed=1), 2000, seed=3)
print(json.dumps({
    "backend": describe_backend()["kernels"],
    "state": hashlib.sha256(json.dumps(snap, sort_keys=True).encode()).hexdigest(),
    "marginal": [float(v) for v in u.values],
    "kernel": [v.observed for v in rep.vertices],
}))
"""


def run_with(no_jit: bool):
    env = dict(os.environ)
    env.pop("TRIADIC_NO_JIT", None)
    if no_jit:
        env["TRIADIC_NO_JIT"] = "1"
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@pytest.mark.skipif(not JIT_ENABLED, reason="numba unavailable or disabled")
def test_jit_and_fallback_agree():
    fast, slow = run_with(False), run_with(True)
    assert fast["backend"].startswith("numba") and slow["backend"] == "python"
    assert fast["state"] == slow["state"]
    assert fast["kernel"] == slow["kernel"]
    assert fast["marginal"] == pytest.approx(slow["marginal"], rel=1e-13, abs=0)
