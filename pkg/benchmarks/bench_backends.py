"""Benchmark: numba-jitted event loop vs the pure-numpy/Python fallback.

Runs the identical simulation (same kernel, same seed, same uniform
stream) in two subprocesses — one with numba enabled, one with
``SIPLAB_NO_NUMBA=1`` — reports proposals/second for each backend, and
verifies that the final configurations are bit-identical.

Usage: python benchmarks/bench_backends.py [--proposals P]
"""

import argparse
import json
import os
import subprocess
import sys

_WORKER = r"""
import json, sys, time
import numpy as np
from siplab.jumpkernel import KernelSpec, build_discrete_kernel
from siplab.seeding import derive_seed, make_rng
from siplab.simulate import (InitialProfile, ProfileKind, SimParams,
                             UniformStream, advance_to, init_product_negbin)

target_proposals = int(sys.argv[1])
n = 64
kernel = build_discrete_kernel(KernelSpec(d=1, beta=1.0), n)
params = SimParams(alpha=1.0, beta=1.0, horizon=float("inf"))
profile = InitialProfile(kind=ProfileKind.GAUSSIAN_BUMP, level=1.0,
                         amplitude=2.0, center=0.5, width=0.1)
rng = make_rng(derive_seed(424242, 0, "bench"))
state = init_product_negbin(profile, 1.0, n, 1, rng)
stream = UniformStream(rng)

# warm-up (jit compilation happens here on the numba path)
advance_to(state, kernel, params, stream, 0.001)

t0 = time.perf_counter()
horizon = 0.001
while state.proposals < target_proposals:
    horizon += 0.5
    advance_to(state, kernel, params, stream, horizon)
elapsed = time.perf_counter() - t0

print(json.dumps({
    "proposals": state.proposals,
    "accepted": state.accepted,
    "elapsed_s": elapsed,
    "proposals_per_s": state.proposals / elapsed,
    "final_time": repr(state.time),
    "occ_digest": hash(tuple(state.occ.tolist())),
}))
"""


def run_backend(no_numba: bool, proposals: int) -> dict:
    env = dict(os.environ)
    env["SIPLAB_NO_NUMBA"] = "1" if no_numba else "0"
    out = subprocess.run([sys.executable, "-c", _WORKER, str(proposals)],
                         env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--proposals", type=int, default=2_000_000,
                    help="events to simulate per backend (numba path)")
    ap.add_argument("--fallback-proposals", type=int, default=200_000,
                    help="events for the (much slower) fallback path")
    args = ap.parse_args()

    jit = run_backend(no_numba=False, proposals=args.proposals)
    fallback = run_backend(no_numba=True, proposals=args.fallback_proposals)

    print(f"{'backend':<12} {'proposals':>12} {'elapsed [s]':>12} {'rate [1/s]':>14}")
    for name, r in [("numba", jit), ("fallback", fallback)]:
        print(f"{name:<12} {r['proposals']:>12} {r['elapsed_s']:>12.3f} "
              f"{r['proposals_per_s']:>14.0f}")
    print(f"speedup: {jit['proposals_per_s'] / fallback['proposals_per_s']:.1f}x")

    check = run_backend(no_numba=False, proposals=args.fallback_proposals)
    same = (check["occ_digest"] == fallback["occ_digest"]
            and check["final_time"] == fallback["final_time"]
            and check["proposals"] == fallback["proposals"])
    print(f"bit-identical trajectories across backends: {same}")
    return 0 if same else 1


if __name__ == "__main__":
    sys.exit(main())
