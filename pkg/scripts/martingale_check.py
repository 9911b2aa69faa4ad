"""Reference-measure check that the unnormalized trace has mean one.

    python scripts/martingale_check.py --paths 1000 --T 2
"""
import argparse

import numpy as np

from qfreduce.linops import SM, SX, SZ, QuantumModel, random_density
from qfreduce.sde import SimConfig, reference_measure_batch

MODELS = {
    "diffusive": QuantumModel(0.5 * SX, D=(0.5 * SZ,), O=(SZ,)),
    "counting": QuantumModel(SX, C=(SM,), O=(SZ,)),
}


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--paths", type=int, default=1000)
    p.add_argument("--T", type=float, default=2.0)
    p.add_argument("--dt", type=float, default=1e-3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rho0 = random_density(2, np.random.default_rng(1))
    for name, model in MODELS.items():
        curve = reference_measure_batch(model, rho0, SimConfig(T=args.T, dt=args.dt, seed=args.seed,
                                                               measure="reference"), args.paths)
        z = np.abs(curve.mean_trace[1:] - 1) / curve.stderr[1:]
        print(f"{name:9s} final mean {curve.mean_trace[-1]:.4f} +- {curve.stderr[-1]:.4f}, "
              f"worst z {z.max():.2f}, points beyond 3 sigma {int(np.sum(z > 3))}")


if __name__ == "__main__":
    main()
