"""Ensemble mean and variance of the immigration-death model against the exact Poisson law.

    python3 scripts/birth_death_moments.py [--runs 2000] [--out bd.csv]
"""
import argparse

import numpy as np

from sccphybrid.engine import SimConfig, simulate_ensemble
from sccphybrid.lang import load_program
from sccphybrid.output import write_ensemble
from sccphybrid.rts import prepare
from sccphybrid.tdsha import bottom_family, compile_program


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--runs", type=int, default=2000)
    ap.add_argument("--t-end", type=float, default=10.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out")
    args = ap.parse_args()

    ext = prepare(load_program("models/birth_death.sccp"))
    k, kd = ext.params["k"], ext.params["kd"]
    res = simulate_ensemble(compile_program(ext, bottom_family(ext)),
                            SimConfig(args.t_end, dt_out=args.t_end / 10, seed=args.seed, runs=args.runs))
    exact = k / kd * (1 - np.exp(-kd * res.times))  # Poisson: mean == variance
    print(f"{'t':>6}{'mean':>10}{'var':>10}{'exact':>10}")
    for t, m, v, e in zip(res.times, res.mean[:, 0], res.var[:, 0], exact):
        print(f"{t:>6.1f}{m:>10.3f}{v:>10.3f}{e:>10.3f}")
    if args.out:
        write_ensemble(res, args.out)


if __name__ == "__main__":
    main()
