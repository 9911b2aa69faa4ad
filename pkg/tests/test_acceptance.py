"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Tolerances are pinned here; run with ``pytest tests/test_acceptance.py -s`` to
see the lines inline (they are also repeated in the terminal summary).
"""
import time
from dataclasses import replace

import numpy as np
import pytest
from scipy.linalg import expm
from scipy.stats import unitary_group

from conftest import report_criterion
from qfreduce.algebra import WedderburnData, generate_algebra, wedderburn_decompose
from qfreduce.condexp import build_factors, cptp_check
from qfreduce.experiments import pathwise_defect, reduce_pipeline, run_compare_experiment, run_stability_experiment
from qfreduce.linops import SM, SX, SZ, QuantumModel, dag, dissipator, random_density, random_operator, superop_matrix
from qfreduce.models import (build_hidden_rotation, build_qnd, build_spin_chain, chain_wedderburn,
                             default_qnd_spec, diagonal_wedderburn, random_chain_spec)
from qfreduce.observability import observable_space
from qfreduce.reduction import invariance_check, kraus_reduce, reduce_model
from qfreduce.sde import SimConfig, generate_truth, reference_measure_batch, run_filter, run_reduced_filter

OUTPUT_TOL = 1e-8
LINEAR_TOL = 1e-10
CASE_SECONDS = 60.0
KRAUS_TOL = 1e-10
DISSIPATOR_TOL = 1e-9
CHOI_TOL = 1e-10
TRACE_TOL = 1e-11
SEMIGROUP_TOL = 1e-8
MARTINGALE_SECONDS = 120.0
STABILITY_TOL = 1e-9
STABILITY_SECONDS = 600.0
QND_STEP_TOL = 1e-12
ROUNDOFF = 1e-14  # probabilities that decay to zero may land at -1e-17
PATHWISE_TOL = 1e-9
NON_INVARIANT_MIN = 1e-3

T_LONG, DT = 5.0, 1e-3


def chain(N, gamma=0.5, alpha=1.0, seed=0):
    return build_spin_chain(random_chain_spec(N, np.random.default_rng(seed), gamma=gamma, alpha=alpha))


def qnd(K=3):
    return build_qnd(default_qnd_spec(K, 2, seed=0))


CASES = {"chain2": lambda: chain(2), "chain3": lambda: chain(3), "qnd3": lambda: qnd(3)}
_compare_cache = {}


def compare(name):
    if name not in _compare_cache:
        t0 = time.perf_counter()
        rep = run_compare_experiment(CASES[name](), SimConfig(T=T_LONG, dt=DT, seed=0, scheme="euler"),
                                     tol=OUTPUT_TOL, linear_tol=LINEAR_TOL)
        _compare_cache[name] = (rep, time.perf_counter() - t0)
    return _compare_cache[name]


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(CASES))
def test_criterion_1_output_equality(name):
    rep, secs = compare(name)
    out = max(rep.max_output_defect + rep.drift_defect + rep.intensity_defect)
    ok = out <= OUTPUT_TOL and secs <= CASE_SECONDS
    report_criterion(1, ok, f"{name} max output defect {out:.2e} (tol {OUTPUT_TOL:g}), {secs:.1f}s (limit {CASE_SECONDS:g}s)")
    assert ok


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(CASES))
def test_criterion_2_linear_filter_equality(name):
    rep, _ = compare(name)
    lin = max(rep.max_linear_defect)
    ok = lin <= LINEAR_TOL
    report_criterion(2, ok, f"{name} linear vs unnormalized defect {lin:.2e} relative (tol {LINEAR_TOL:g})")
    assert ok


def test_criterion_3_structural_numbers():
    found = {}
    for N in (2, 3):
        A = generate_algebra(observable_space(chain(N)))
        found[f"chain{N}"] = (A.dim, wedderburn_decompose(A).blocks)
    K = 3
    model = qnd(K)
    space = observable_space(model)
    qnd_ok = space.dim == K and all(space.contains(P) for P in model.O)
    ok = (found["chain2"] == (8, ((2, 1), (2, 1))) and found["chain3"] == (32, ((4, 1), (4, 1))) and qnd_ok)
    report_criterion(3, ok, f"chain dims/blocks {found}, QND kappa={space.dim} (expected {K})")
    assert ok


KRAUS_ALGEBRAS = {
    "chain2": chain_wedderburn(2),
    "chain3": chain_wedderburn(3),
    "qnd": WedderburnData(np.eye(6, dtype=complex), ((1, 2),) * 3),
    "mixed": WedderburnData(unitary_group.rvs(7, random_state=1), ((2, 2), (1, 3))),
}


@pytest.mark.parametrize("name", sorted(KRAUS_ALGEBRAS))
def test_criterion_4_operator_reduction_identities(name):
    F = build_factors(KRAUS_ALGEBRAS[name])
    rng = np.random.default_rng(4)
    worst = {"sum": 0.0, "K": 0.0, "D": 0.0, "in_algebra": 0.0}
    for _ in range(200):
        C = random_operator(F.n, rng)
        terms = kraus_reduce(F, C)
        worst["sum"] = max(worst["sum"], np.max(np.abs(sum(dag(t.op) @ t.op for t in terms) - F.Jadj(dag(C) @ C))))
        # as maps: compare the full superoperator matrices on block-diagonal inputs
        lhs = superop_matrix(lambda X: F.R(C @ F.J(F.pinch(X)) @ dag(C)), F.m)
        rhs = superop_matrix(lambda X: sum(t.op @ F.pinch(X) @ dag(t.op) for t in terms), F.m)
        worst["K"] = max(worst["K"], np.max(np.abs(lhs - rhs)))
        r = F.pinch(random_operator(F.m, rng))
        worst["D"] = max(worst["D"], np.max(np.abs(F.R(dissipator(C, F.J(r))) - sum(dissipator(t.op, r) for t in terms))))
        A = F.E(C)
        tA = kraus_reduce(F, A)
        single = len(tA) == 1 and (tA[0].l, tA[0].e) == (0, 0)
        worst["in_algebra"] = max(worst["in_algebra"], np.max(np.abs(tA[0].op - F.Jadj(A))) if single else np.inf)
    ok = (worst["sum"] <= KRAUS_TOL and worst["K"] <= KRAUS_TOL and worst["D"] <= DISSIPATOR_TOL
          and worst["in_algebra"] <= KRAUS_TOL)
    report_criterion(4, ok, f"{name} 200 operators: " + ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    assert ok


def test_criterion_5_cptp_suite():
    worst_choi, worst_trace, lines = np.inf, 0.0, []
    for name, W in KRAUS_ALGEBRAS.items():
        F = build_factors(W)
        for label, f, i, o in [("R", F.R, F.n, F.m), ("J", lambda X: F.J(F.pinch(X)), F.m, F.n), ("E", F.E, F.n, F.n)]:
            res = cptp_check(f, i, o)
            worst_choi = min(worst_choi, res["choi_min_eig"])
            worst_trace = max(worst_trace, res["trace_defect"])
    semigroup = 0.0
    for name, model, W in [("chain2", chain(2), chain_wedderburn(2)), ("chain3", chain(3), chain_wedderburn(3)),
                           ("qnd", qnd(3), KRAUS_ALGEBRAS["qnd"])]:
        red = reduce_model(model, build_factors(W))
        m = red.m
        S = expm(superop_matrix(red.operator_set().lindblad, m) * 1e-3)
        res = cptp_check(lambda X: (S @ X.reshape(-1)).reshape(m, m), m, m)
        semigroup = max(semigroup, -res["choi_min_eig"], res["trace_defect"])
        lines.append(f"{name} {res['choi_min_eig']:.1e}")
    ok = worst_choi >= -CHOI_TOL and worst_trace <= TRACE_TOL and semigroup <= SEMIGROUP_TOL
    report_criterion(5, ok, f"factors min Choi eig {worst_choi:.1e}, trace defect {worst_trace:.1e}; "
                            f"reduced semigroup worst defect {semigroup:.1e} (tol {SEMIGROUP_TOL:g})")
    assert ok


# Seed and initial state pinned: with 2000 grid points the 3-sigma band is a
# family-wise test, so a fraction of seeds flags a point even for exact code.
MARTINGALE_MODELS = {
    "diffusive": QuantumModel(0.5 * SX, D=(0.5 * SZ,), O=(SZ,)),
    "counting": QuantumModel(SX, C=(SM,), O=(SZ,)),
}


@pytest.mark.slow
@pytest.mark.parametrize("name", sorted(MARTINGALE_MODELS))
def test_criterion_6_martingale(name):
    rho0 = random_density(2, np.random.default_rng(1))
    t0 = time.perf_counter()
    curve = reference_measure_batch(MARTINGALE_MODELS[name], rho0,
                                    SimConfig(T=2.0, dt=DT, seed=0, measure="reference"), 1000)
    secs = time.perf_counter() - t0
    dev = np.abs(curve.mean_trace - 1.0)
    within = dev <= 3 * curve.stderr
    ratio = np.max(dev[1:] / curve.stderr[1:])
    ok = bool(np.all(within)) and secs <= MARTINGALE_SECONDS
    report_criterion(6, ok, f"{name} M=1000 worst |mean-1|/stderr {ratio:.2f} (limit 3), {secs:.1f}s")
    assert ok


@pytest.mark.slow
def test_criterion_7_fidelity_stability():
    t0 = time.perf_counter()
    results = {}
    for label, gamma, alpha in (("diffusive", 0.5, 0.0), ("counting", 0.0, 4.0)):
        model = chain(4, gamma=gamma, alpha=alpha, seed=7)
        rep = run_stability_experiment(model, SimConfig(T=T_LONG, dt=DT, seed=0, scheme="positivity_preserving"),
                                       runs=10, algebra="chain", tol=STABILITY_TOL)
        results[label] = min(rep.min_difference)
    secs = time.perf_counter() - t0
    ok = all(v >= -STABILITY_TOL for v in results.values()) and secs <= STABILITY_SECONDS
    report_criterion(7, ok, "N=4 min_t [F_red - F_full] " + ", ".join(f"{k} {v:.2e}" for k, v in results.items())
                     + f" (tol -{STABILITY_TOL:g}), {secs:.0f}s")
    assert ok


def classical_step(p, d, c, dY, dN, dt):
    """Explicit block-probability update for scalar homodyne d and counting c."""
    dp = np.zeros_like(p)
    for j in range(d.shape[0]):
        m = 2 * d[j] @ p
        dp += p * (2 * d[j] - m) * (dY[j] - m * dt)
    for j in range(c.shape[0]):
        lam = np.abs(c[j]) ** 2 @ p
        dp += p * (np.abs(c[j]) ** 2 / lam - 1) * (dN[j] - lam * dt)
    return p + dp


def test_criterion_8_qnd_classical_filter():
    spec = default_qnd_spec(3, 2, seed=0)
    model = build_qnd(spec)
    F = build_factors(KRAUS_ALGEBRAS["qnd"])
    red = reduce_model(model, F, observable_space(model))
    rho0 = random_density(6, np.random.default_rng(8))
    cfg = SimConfig(T=T_LONG, dt=DT, seed=3, scheme="euler", store_states=True)
    _, rec = generate_truth(model, rho0, replace(cfg, scheme="positivity_preserving"))
    traj = run_reduced_filter(red, F.R(rho0), rec, cfg)
    P = np.einsum("tii->ti", traj.states)
    offdiag = np.max(np.abs(traj.states - P[:, :, None] * np.eye(3)))
    d, c = np.real(np.array(spec.d)), np.array(spec.c)
    step_err = max(np.max(np.abs(classical_step(P[i].real, d, c, rec.dY[:, i], rec.dN[:, i], DT) - P[i + 1].real))
                   for i in range(cfg.steps))
    probs = P.real
    prob_ok = (np.min(probs) >= -ROUNDOFF and np.max(np.abs(probs.sum(axis=1) - 1)) <= 1e-12
               and np.max(np.abs(P.imag)) <= ROUNDOFF)
    ok = step_err <= QND_STEP_TOL and offdiag <= ROUNDOFF and prob_ok
    report_criterion(8, ok, f"QND per-step defect {step_err:.1e} (tol {QND_STEP_TOL:g}), off-diagonal {offdiag:.1e}, "
                            f"min p {np.min(probs):.2e}, {int(rec.dN.sum())} jumps")
    assert ok


@pytest.mark.slow
def test_criterion_9_invariance():
    model = chain(3)
    red = reduce_pipeline(model, "chain")
    rho0 = random_density(8, np.random.default_rng(9))
    gaps = {}
    for scheme in ("euler", "positivity_preserving"):
        gap, _ = pathwise_defect(red, rho0, SimConfig(T=T_LONG, dt=DT, seed=1, scheme=scheme))
        gaps[scheme] = float(np.max(gap))
    # non-invariant: diagonal algebra against a hidden rotation
    hidden = build_hidden_rotation()
    W = diagonal_wedderburn(4)
    inv = invariance_check(hidden, W)
    F = build_factors(W)
    small_model = reduce_model(hidden, F, observable_space(hidden))
    cfg = SimConfig(T=T_LONG, dt=DT, seed=2, scheme="euler", store_states=True)
    rho0h = random_density(4, np.random.default_rng(10))
    _, rec = generate_truth(hidden, rho0h, replace(cfg, scheme="positivity_preserving"))
    full = run_filter(hidden, rho0h, rec, cfg)
    small = run_reduced_filter(small_model, F.R(rho0h), rec, cfg)
    state_gap = float(np.max(np.linalg.norm(small.states - F.R(full.states), axis=(1, 2))))
    out_gap = float(np.max(np.abs(full.theta - small.theta)))
    ok = (max(gaps.values()) <= PATHWISE_TOL and not inv.invariant and state_gap > NON_INVARIANT_MIN
          and out_gap <= OUTPUT_TOL)
    report_criterion(9, ok, f"chain N=3 pathwise {max(gaps.values()):.1e} (tol {PATHWISE_TOL:g}); "
                            f"non-invariant diagonal algebra state defect {state_gap:.2e} (> {NON_INVARIANT_MIN:g}), "
                            f"outputs {out_gap:.1e} (tol {OUTPUT_TOL:g})")
    assert ok
