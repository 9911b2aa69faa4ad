"""Command line: reduce, simulate, compare, stability, demo.

Exit codes: 0 ok, 1 other tool error, 2 parse error, 3 Wedderburn failure,
4 containment failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import ContainmentError, DecompositionError, ParseError, ReductionToolError
from .experiments import reduce_pipeline, run_compare_experiment, run_stability_experiment
from .io import (linear_filter_to_dict, load_model, model_to_dict, reduced_to_dict, save_json,
                 write_trajectory_csv)
from .linops import random_density, superop_matrix
from .models import build_qnd, build_spin_chain, default_qnd_spec, random_chain_spec
from .sde import SimConfig, generate_truth

EXIT_PARSE, EXIT_WEDDERBURN, EXIT_CONTAINMENT = 2, 3, 4


def _sim_config(args: argparse.Namespace, default_scheme: str) -> SimConfig:
    return SimConfig(T=args.T, dt=args.dt, seed=args.seed, scheme=args.scheme or default_scheme,
                     store_states=getattr(args, "store_states", False))


def _dump(obj: dict, out: str | None) -> None:
    text = json.dumps(obj, indent=1)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def cmd_reduce(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    red = reduce_pipeline(model, args.algebra, linear=args.linear, seed=args.seed)
    s = red.summary()
    print(f"kappa={s['kappa']} alg_dim={s['alg_dim']} m={s['m']} blocks={s['blocks']}")
    F, lind = red.factors, red.reduced.operator_set().lindblad
    if np.allclose(superop_matrix(lambda X: lind(F.pinch(X)), F.m), 0, atol=1e-12):
        print("reduced Lindbladian is zero")
    out = args.out or str(Path(args.model).with_suffix("")) + ".reduced.json"
    save_json(reduced_to_dict(red.reduced, {"kappa": s["kappa"], "alg_dim": s["alg_dim"]}), out)
    print(f"wrote {out}")
    if args.linear:
        lout = str(Path(out).with_suffix("")) + ".linear.json"
        save_json(linear_filter_to_dict(red.linear), lout)
        print(f"wrote {lout}")
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    cfg = _sim_config(args, "positivity_preserving")
    rho0 = random_density(model.n, np.random.default_rng(args.seed))
    traj, rec = generate_truth(model, rho0, cfg)
    out = args.out or str(Path(args.model).with_suffix("")) + ".trajectory.csv"
    write_trajectory_csv(out, traj, rec)
    if cfg.store_states:
        np.save(str(Path(out).with_suffix("")) + ".states.npy", traj.states)
    print(f"wrote {out} ({len(traj.times)} rows, {int(rec.dN.sum())} jumps)")
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    cfg = _sim_config(args, "euler")
    rep = run_compare_experiment(model, cfg, args.algebra, tol=args.tol)
    _dump(rep.to_dict(timings=args.timings), args.out)
    print(f"compare: {'PASS' if rep.passed else 'FAIL'} max output defect "
          f"{max(rep.max_output_defect, default=0.0):.3e}", file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_stability(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    cfg = _sim_config(args, "positivity_preserving")
    rep = run_stability_experiment(model, cfg, runs=args.runs, algebra=args.algebra)
    _dump(rep.to_dict(curves=args.curves), args.out)
    print(f"stability: {'PASS' if rep.passed else 'FAIL'} min difference "
          f"{min(rep.min_difference):.3e}", file=sys.stderr)
    return 0 if rep.passed else 1


def cmd_demo(args: argparse.Namespace) -> int:
    if args.kind == "qnd":
        model = build_qnd(default_qnd_spec(args.K, args.block_dim, args.seed))
    else:
        rng = np.random.default_rng(args.seed)
        spec = random_chain_spec(args.N, rng, gamma=args.gamma, alpha=args.alpha)
        model = build_spin_chain(spec)
    out = args.out or f"{args.kind}.json"
    save_json(model_to_dict(model), out)
    print(f"wrote {out} (n={model.n})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qfreduce", description="Exact reduction of quantum filters")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def sim_flags(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--T", type=float, default=5.0)
        sp.add_argument("--dt", type=float, default=1e-3)
        sp.add_argument("--scheme", choices=["euler", "positivity_preserving"], default=None)

    r = sub.add_parser("reduce", help="compute the reduced model")
    r.add_argument("model")
    r.add_argument("--out")
    r.add_argument("--linear", action="store_true", help="also write the minimal linear filter")
    r.add_argument("--algebra", choices=["auto", "chain"], default="auto")
    r.add_argument("--seed", type=int, default=0)
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("simulate", help="simulate a truth trajectory and its record")
    s.add_argument("model")
    sim_flags(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--store-states", action="store_true")
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("compare", help="full vs reduced vs linear filter on shared records")
    c.add_argument("model")
    sim_flags(c)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--algebra", choices=["auto", "chain"], default="auto")
    c.add_argument("--tol", type=float, default=1e-8)
    c.add_argument("--timings", action="store_true", help="include runtimes (not reproducible)")
    c.add_argument("--out")
    c.set_defaults(func=cmd_compare)

    st = sub.add_parser("stability", help="fidelity of mis-initialized filters")
    st.add_argument("model")
    sim_flags(st)
    st.add_argument("--seed", type=int, default=0)
    st.add_argument("--runs", type=int, default=10)
    st.add_argument("--algebra", choices=["auto", "chain"], default="chain")
    st.add_argument("--curves", action="store_true", help="include fidelity curves")
    st.add_argument("--out")
    st.set_defaults(func=cmd_stability)

    d = sub.add_parser("demo", help="write an example model file")
    d.add_argument("kind", choices=["qnd", "chain"])
    d.add_argument("--N", type=int, default=3)
    d.add_argument("--gamma", type=float, default=0.5)
    d.add_argument("--alpha", type=float, default=1.0)
    d.add_argument("--K", type=int, default=3)
    d.add_argument("--block-dim", type=int, default=2)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--out")
    d.set_defaults(func=cmd_demo)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except DecompositionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_WEDDERBURN
    except ContainmentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTAINMENT
    except ReductionToolError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
