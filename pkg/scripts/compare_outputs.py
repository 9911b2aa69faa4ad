"""Co-simulate full, reduced and linear filters on shared records for the
spin chain (N=2, 3) and a three-block QND model; print one line per case.

    python scripts/compare_outputs.py --T 5 --dt 1e-3 --out compare.json
"""
import argparse
import json
import time

import numpy as np

from qfreduce.experiments import run_compare_experiment
from qfreduce.models import build_qnd, build_spin_chain, default_qnd_spec, random_chain_spec
from qfreduce.sde import SimConfig


def cases(seed: int) -> dict:
    rng = np.random.default_rng(seed)
    return {
        "chain2": build_spin_chain(random_chain_spec(2, rng, gamma=0.5, alpha=1.0)),
        "chain3": build_spin_chain(random_chain_spec(3, rng, gamma=0.5, alpha=1.0)),
        "qnd3": build_qnd(default_qnd_spec(3, 2, seed)),
    }


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--T", type=float, default=5.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scheme", choices=["euler", "positivity_preserving"], default="euler")
    p.add_argument("--out", help="write all reports as JSON")
    args = p.parse_args()
    cfg = SimConfig(T=args.T, dt=args.dt, seed=args.seed, scheme=args.scheme)
    reports = {}
    for name, model in cases(args.seed).items():
        t0 = time.perf_counter()
        rep = run_compare_experiment(model, cfg)
        secs = time.perf_counter() - t0
        reports[name] = rep.to_dict()
        print(f"{name:7s} n={model.n:3d} m={rep.m:2d} blocks={rep.blocks} "
              f"output {max(rep.max_output_defect):.2e} linear {max(rep.max_linear_defect):.2e} "
              f"{'PASS' if rep.passed else 'FAIL'} ({secs:.1f}s)")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(reports, fh, indent=1)


if __name__ == "__main__":
    main()
