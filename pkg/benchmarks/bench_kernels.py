"""Compare the numba kernels with the plain numpy fallback.

Each backend runs in its own interpreter because ``CPC_DISABLE_NUMBA`` is read
at import time. Numba compile time is excluded by a warm-up call (the kernels
are also cached on disk after the first run).

    python3 benchmarks/bench_kernels.py [--repeat 3]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, time
import numpy as np
from cpconsensus import CommGraph, CutCollection, StopRule, USE_NUMBA, box_basis, run, solve_min_norm
from cpconsensus.problems import gen_dunham_robust_lp, reference_solve

def lp_batch(seed, count=300, d=10, m=40):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        H = CutCollection(rng.normal(size=(m, d)), rng.uniform(0.1, 2.0, m)).union(box_basis(d, 100.0))
        out.append((H, rng.normal(size=d)))
    return out

warm = lp_batch(0, 5)
for H, c in warm:
    solve_min_norm(H, c)

res = {"numba": USE_NUMBA}
batch = lp_batch(1)
t = time.perf_counter()
for H, c in batch:
    solve_min_norm(H, c)
res["min_norm_lp_ms"] = 1e3 * (time.perf_counter() - t) / len(batch)

inst = gen_dunham_robust_lp(10, 50, 3)
ref = reference_solve(inst)
t = time.perf_counter()
log = run(inst, CommGraph.erdos_renyi(50, seed=0), stop=StopRule.all_within(0.1, ref.z, 500), record=False)
res["cpc_run_s"] = time.perf_counter() - t
res["cpc_rounds"] = log.stop_round
print(json.dumps(res))
"""


def measure(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("CPC_DISABLE_NUMBA", None)
    if disable:
        env["CPC_DISABLE_NUMBA"] = "1"
    out = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    rows = {}
    for label, disable in (("numba", False), ("numpy", True)):
        runs = [measure(disable) for _ in range(args.repeat)]
        rows[label] = {k: min(r[k] for r in runs) for k in ("min_norm_lp_ms", "cpc_run_s")}
        rows[label]["rounds"] = runs[0]["cpc_rounds"]
        rows[label]["active"] = runs[0]["numba"]
    print(f"{'backend':8} {'min-norm LP [ms]':>17} {'CPC run n=50 [s]':>17} {'rounds':>7}")
    for label, r in rows.items():
        print(f"{label:8} {r['min_norm_lp_ms']:17.3f} {r['cpc_run_s']:17.2f} {r['rounds']:7d}")
    a, b = rows["numba"], rows["numpy"]
    print(f"speed-up: LP x{b['min_norm_lp_ms'] / a['min_norm_lp_ms']:.1f}, "
          f"run x{b['cpc_run_s'] / a['cpc_run_s']:.1f}")
    if a["rounds"] != b["rounds"]:
        print("warning: backends disagree on the round count", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
