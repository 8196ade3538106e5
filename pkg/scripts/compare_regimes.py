"""Compare fully discrete, fully continuous, a mixed kappa and dynamic partitioning.

    python3 scripts/compare_regimes.py [--model models/gene.sccp] [--runs 200] [--t-end 100]

Prints wall time, event counts and the largest deviation of the mean store
trajectory from the fully discrete ensemble.
"""
import argparse
import time

import numpy as np

from sccphybrid.config import PartitionSpec, build_setup
from sccphybrid.engine import SimConfig, simulate_ensemble
from sccphybrid.lang import load_program
from sccphybrid.rts import prepare


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--model", default="models/gene.sccp")
    ap.add_argument("--runs", type=int, default=200)
    ap.add_argument("--t-end", type=float, default=100.0)
    ap.add_argument("--K", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    ext = prepare(load_program(args.model))
    store = [ext.variables.index(v) for v in ext.store_vars]
    variants = [
        ("bottom", PartitionSpec(), "bottom"),
        ("top", PartitionSpec(), "top"),
        (f"dynamic K={args.K:g}", PartitionSpec(mode="dynamic", policy="population", K=args.K), "bottom"),
    ]
    if "gene0" in {r.component for r in ext.rts}:
        variants.insert(2, ("mixed", PartitionSpec(), "gene0=100111,deg=1,dimer=11"))
    cfg = SimConfig(args.t_end, seed=args.seed, runs=args.runs, workers=args.workers)

    ref = None
    print(f"{'variant':<16}{'wall_s':>9}{'stoch':>10}{'switch':>9}{'max_dev':>10}")
    for name, part, kappa in variants:
        t0 = time.perf_counter()
        res = simulate_ensemble(build_setup(ext, part, kappa), cfg)
        wall = time.perf_counter() - t0
        mean = res.mean[:, store]
        ref = mean if ref is None else ref
        dev = float(np.max(np.abs(mean - ref)))
        c = res.event_counts
        print(f"{name:<16}{wall:>9.2f}{c.get('stochastic', 0) / args.runs:>10.1f}"
              f"{c.get('switch', 0) / args.runs:>9.1f}{dev:>10.3f}")


if __name__ == "__main__":
    main()
