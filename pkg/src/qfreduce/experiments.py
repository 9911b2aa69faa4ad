"""Reduction pipeline and the two packaged experiments: output comparison on
shared records, and fidelity stability of mis-initialized filters."""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .algebra import StarAlgebra, generate_algebra, wedderburn_decompose
from .condexp import CondExpFactors, build_factors
from .errors import ContainmentError
from .linops import OperatorSubspace, QuantumModel, fidelity, random_density
from .models import chain_wedderburn
from .observability import LinearFilter, build_linear_filter, observable_space
from .reduction import (CONTAINMENT_TOL, InvarianceReport, ReducedModel, invariance_check,
                        reduce_model)
from .sde import (SimConfig, generate_truth, run_filter, run_linear_filter, run_reduced_filter,
                  run_zakai)


class PreconditionError(ContainmentError):
    pass


@dataclass
class Reduction:
    model: QuantumModel
    factors: CondExpFactors
    reduced: ReducedModel
    nperp: OperatorSubspace | None
    algebra: StarAlgebra | None
    linear: LinearFilter | None = None

    @property
    def kappa(self) -> int | None:
        return None if self.nperp is None else self.nperp.dim

    @property
    def alg_dim(self) -> int:
        return self.factors.wedderburn.algebra_dim

    def summary(self) -> dict:
        return {"kappa": self.kappa, "alg_dim": self.alg_dim, "m": self.reduced.m,
                "blocks": [list(b) for b in self.factors.blocks]}


def reduce_pipeline(model: QuantumModel, algebra: str = "auto", linear: bool = False,
                    seed: int = 0) -> Reduction:
    """observable space -> algebra -> Wedderburn -> factors -> reduced model.

    ``algebra='chain'`` uses the analytic spin-chain block form; containment of
    the observable space then follows from O in A plus invariance of A, which
    is checked instead of computing the observable space.
    """
    if algebra == "auto":
        nperp = observable_space(model)
        A = generate_algebra(nperp)
        W = wedderburn_decompose(A, rng_seed=seed)
        F = build_factors(W)
        red = reduce_model(model, F, nperp)
    elif algebra == "chain":
        N = int(round(np.log2(model.n)))
        if 2 ** N != model.n or N < 2:
            raise ContainmentError(f"dimension {model.n} is not a spin-chain register")
        F = build_factors(chain_wedderburn(N))
        spanning = list(model.O) + model.assumption_operators()
        leak = max(float(np.linalg.norm(F.E(X) - X)) / max(1.0, float(np.linalg.norm(X))) for X in spanning)
        if leak > CONTAINMENT_TOL:
            raise ContainmentError(f"observables are not in the chain algebra (defect {leak:.2e})")
        inv = invariance_check(model, F)
        if not inv.invariant:
            raise ContainmentError(f"chain algebra is not invariant: {inv.defects}")
        nperp, A = None, None
        red = reduce_model(model, F)
    else:
        raise ValueError(f"unknown algebra option {algebra!r}")
    lin = None
    if linear:
        lin = build_linear_filter(model, nperp if nperp is not None else observable_space(model))
    return Reduction(model, F, red, nperp, A, lin)


@dataclass
class CompareReport:
    kappa: int | None
    alg_dim: int
    m: int
    blocks: list
    max_output_defect: list[float]
    max_linear_defect: list[float]
    drift_defect: list[float]
    intensity_defect: list[float]
    reduced_offblock: float
    min_eig_full: float
    runtime_s: dict[str, float]
    tol: float
    linear_tol: float
    scheme: str
    passed: bool = field(default=False)

    def to_dict(self, timings: bool = False) -> dict:
        d = asdict(self)
        if not timings:
            d.pop("runtime_s")  # keeps reports byte-identical across reruns
        return d


def run_compare_experiment(model: QuantumModel, cfg: SimConfig, algebra: str = "auto",
                           tol: float = 1e-8, truth_scheme: str = "positivity_preserving",
                           red: Reduction | None = None, rho0: np.ndarray | None = None,
                           linear_tol: float = 1e-10) -> CompareReport:
    """Full, reduced and linear filters on one shared truth record.

    Output, drift and intensity defects compare the normalized full and
    reduced filters. The linear defect compares the linear filter against the
    full unnormalized recursion, relative to the unnormalized trace.
    """
    t0 = time.perf_counter()
    red = red or reduce_pipeline(model, algebra, linear=True, seed=cfg.seed)
    if red.linear is None:
        red.linear = build_linear_filter(model, red.nperp if red.nperp is not None else observable_space(model))
    t_reduce = time.perf_counter() - t0
    rng = np.random.default_rng(cfg.seed)
    rho0 = random_density(model.n, rng) if rho0 is None else rho0
    truth, rec = generate_truth(model, rho0, replace(cfg, scheme=truth_scheme))
    t1 = time.perf_counter()
    full = run_filter(model, rho0, rec, cfg)
    t2 = time.perf_counter()
    F = red.factors
    small = run_reduced_filter(red.reduced, F.R(rho0), rec, replace(cfg, store_states=True))
    t3 = time.perf_counter()
    lin = red.linear
    lt = run_linear_filter(lin, lin.R(rho0), rec, cfg)
    t4 = time.perf_counter()
    zk = run_zakai(model, rho0, rec, cfg)
    out_def = np.max(np.abs(full.theta - small.theta), axis=1) if full.theta.size else np.zeros(0)
    lin_def = (np.max(np.abs(lt.unnormalized - zk.unnormalized) / zk.norm_trace, axis=1)
               if full.theta.size else np.zeros(0))
    drift = np.max(np.abs(full.drift - small.drift), axis=1) if full.drift.size else np.zeros(0)
    inten = np.max(np.abs(full.intensity - small.intensity), axis=1) if full.intensity.size else np.zeros(0)
    offb = max(F.off_block_norm(s) for s in small.states)
    defects = list(out_def) + list(drift) + list(inten)
    rep = CompareReport(
        red.kappa, red.alg_dim, red.reduced.m, [list(b) for b in F.blocks],
        [float(x) for x in out_def], [float(x) for x in lin_def], [float(x) for x in drift],
        [float(x) for x in inten], float(offb), float(np.min(full.min_eig)),
        {"reduce": t_reduce, "truth": t1 - t0 - t_reduce, "full": t2 - t1, "reduced": t3 - t2, "linear": t4 - t3},
        tol, linear_tol, cfg.scheme)
    rep.passed = bool(all(d <= tol for d in defects) and offb <= tol
                      and all(d <= linear_tol for d in lin_def))
    return rep


@dataclass
class StabilityReport:
    seeds: list[int]
    fidelity_full: list[np.ndarray]
    fidelity_reduced: list[np.ndarray]
    min_difference: list[float]
    invariance: dict[str, float]
    passed: bool

    def to_dict(self, curves: bool = False) -> dict:
        d = {"seeds": self.seeds, "min_difference": self.min_difference,
             "invariance": self.invariance, "passed": self.passed}
        if curves:
            d["fidelity_full"] = [c.tolist() for c in self.fidelity_full]
            d["fidelity_reduced"] = [c.tolist() for c in self.fidelity_reduced]
        return d


def run_stability_experiment(model: QuantumModel, cfg: SimConfig, runs: int = 10, algebra: str = "chain",
                             tol: float = 1e-9, red: Reduction | None = None,
                             same_initial: bool = False) -> StabilityReport:
    """Mis-initialized full and reduced filters on shared truth records; the
    reduced fidelity must never fall below the full one (beyond tol)."""
    red = red or reduce_pipeline(model, algebra, seed=cfg.seed)
    inv: InvarianceReport = invariance_check(model, red.factors)
    if not inv.invariant:
        raise PreconditionError("stability comparison needs an invariant algebra; "
                                f"generator defects {inv.defects}")
    F = red.factors
    scfg = replace(cfg, store_states=True)
    seeds, ff, fr, mins = [], [], [], []
    for k in range(runs):
        seed = cfg.seed + k
        rng = np.random.default_rng(seed)
        rho0 = random_density(model.n, rng)
        rho0e = rho0 if same_initial else random_density(model.n, rng)
        _, rec = generate_truth(model, rho0, replace(scfg, seed=seed))
        a = run_filter(model, rho0, rec, scfg).states
        b = run_filter(model, rho0e, rec, scfg).states
        c = run_reduced_filter(red.reduced, F.R(rho0), rec, scfg).states
        d = run_reduced_filter(red.reduced, F.R(rho0e), rec, scfg).states
        f_full = np.array([fidelity(x, y) for x, y in zip(a, b)])
        f_red = np.array([fidelity(x, y) for x, y in zip(c, d)])
        seeds.append(seed)
        ff.append(f_full)
        fr.append(f_red)
        mins.append(float(np.min(f_red - f_full)))
    return StabilityReport(seeds, ff, fr, mins, inv.defects, bool(min(mins) >= -tol))


def pathwise_defect(red: Reduction, rho0: np.ndarray, cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """Per-step ||rho_red - R(rho)|| and max output gap on a truth record."""
    scfg = replace(cfg, store_states=True)
    _, rec = generate_truth(red.model, rho0, scfg)
    full = run_filter(red.model, rho0, rec, scfg)
    small = run_reduced_filter(red.reduced, red.factors.R(rho0), rec, scfg)
    gap = np.linalg.norm(small.states - red.factors.R(full.states), axis=(1, 2))
    out = np.max(np.abs(full.theta - small.theta), axis=0)
    return gap, out
