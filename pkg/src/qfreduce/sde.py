"""Jump-diffusion integration: truth simulation, normalized filters (full and
reduced), the linear filter, the unnormalized Zakai recursion and reference
measure ensembles.

Every normalized step is built from the maps L, G_D, K_C and scalar
coefficients of the form tr(X rho) with X in the observable space. That
structure is what lets full and reduced runs agree to roundoff on shared
records.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegeneracyError, DimensionError, IntegrationError
from .linops import (OperatorSet, QuantumModel, dag, k_map, min_eig, validate_state)
from .observability import LinearFilter
from .reduction import ReducedModel

SCHEMES = ("euler", "positivity_preserving")
MEASURES = ("physical", "reference")
JUMP_PROB_WARN = 0.1
DEGENERACY_TOL = 1e-12


@dataclass(frozen=True)
class SimConfig:
    T: float = 1.0
    dt: float = 1e-3
    seed: int = 0
    scheme: str = "euler"
    store_states: bool = False
    measure: str = "physical"
    # Euler does not preserve positivity; on the spin chains the minimum
    # eigenvalue dips to about -0.08 at dt=1e-3 without shrinking much with dt,
    # so only gross blow-ups abort an Euler run
    euler_psd_tol: float = 0.1
    psd_tol: float = 1e-9

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ConfigError("dt must be positive")
        if self.T < self.dt:
            raise ConfigError("T must be at least dt")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}")
        if self.measure not in MEASURES:
            raise ConfigError(f"measure must be one of {MEASURES}")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.dt))

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(self.steps + 1)


@dataclass(frozen=True)
class NoiseRecord:
    times: np.ndarray
    dY: np.ndarray  # (p, steps)
    dN: np.ndarray  # (q, steps), 0/1

    def __post_init__(self) -> None:
        steps = len(self.times) - 1
        if self.dY.ndim != 2 or self.dN.ndim != 2 or self.dY.shape[1] != steps or self.dN.shape[1] != steps:
            raise DimensionError("record arrays do not match the time grid")
        if np.any((self.dN != 0) & (self.dN != 1)):
            raise ValueError("jump indicators must be 0 or 1")

    @property
    def p(self) -> int:
        return self.dY.shape[0]

    @property
    def q(self) -> int:
        return self.dN.shape[0]


@dataclass
class Trajectory:
    times: np.ndarray
    theta: np.ndarray  # (r, steps+1)
    norm_trace: np.ndarray  # (steps+1,)
    states: np.ndarray | None = None
    unnormalized: np.ndarray | None = None  # tr(O tau) or <zeta, v> for linear runs
    drift: np.ndarray | None = None  # (p, steps+1): tr G_D(rho)
    intensity: np.ndarray | None = None  # (q, steps+1): tr K_C(rho)
    min_eig: np.ndarray | None = None
    jump_warning: bool = field(default=False)


# ---------------------------------------------------------------------------
# single steps


def _herm(X: np.ndarray) -> np.ndarray:
    return 0.5 * (X + dag(X))


def _rates(ops: OperatorSet, rho: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    g = np.array([np.trace(ops.g(j, rho)).real for j in range(ops.p)])
    k = np.array([np.trace(ops.k(j, rho)).real for j in range(ops.q)])
    return g, k


def _jump(ops: OperatorSet, j: int, rho: np.ndarray) -> np.ndarray:
    K = ops.k(j, rho)
    kt = np.trace(K).real
    if not kt > 0:
        raise IntegrationError(f"jump recorded on channel {j} where the intensity is {kt:.3e}")
    return K / kt


def euler_step(ops: OperatorSet, rho: np.ndarray, dY: np.ndarray, dN: np.ndarray, dt: float) -> np.ndarray:
    """Euler-Maruyama step of the normalized jump-diffusion master equation,
    then trace renormalization."""
    g, k = _rates(ops, rho)
    new = rho + ops.lindblad(rho) * dt
    for j in range(ops.p):
        new = new + (ops.g(j, rho) - g[j] * rho) * (dY[j] - g[j] * dt)
    for j in range(ops.q):
        K = ops.k(j, rho)
        if dN[j]:
            if not k[j] > 0:
                raise IntegrationError(f"jump recorded on channel {j} where the intensity is {k[j]:.3e}")
            new = new + (K / k[j] - rho) * (1.0 - k[j] * dt)
        else:
            new = new - (K - k[j] * rho) * dt
    new = _herm(new)
    return new / np.trace(new).real


def kraus_step(ops: OperatorSet, rho: np.ndarray, dY: np.ndarray, dN: np.ndarray, dt: float) -> np.ndarray:
    """Positivity-preserving step: M rho M^* plus unmonitored sandwiches,
    renormalized, followed by exact jump replacement (channel order)."""
    n = ops.n
    M = np.eye(n, dtype=complex) - 1j * ops.heff * dt
    for j in range(ops.p):
        M = M + ops.homodyne[j] * dY[j]
    new = M @ rho @ dag(M)
    for A in ops.unmonitored:
        new = new + k_map(A, rho) * dt
    new = _herm(new)
    new = new / np.trace(new).real
    for j in range(ops.q):
        if dN[j]:
            new = _herm(_jump(ops, j, new))
    return new


def zakai_step(ops: OperatorSet, tau: np.ndarray, dY: np.ndarray, dN: np.ndarray, dt: float) -> np.ndarray:
    """Euler step of the linear (unnormalized) equation; ``tau`` may be a stack
    of shape (M, n, n) with dY (M, p) and dN (M, q)."""
    new = tau + ops.generator_q(tau) * dt
    dY = np.asarray(dY)
    dN = np.asarray(dN)
    for j in range(ops.p):
        new = new + ops.g(j, tau) * dY[..., j, None, None]
    for j in range(ops.q):
        new = new + (ops.k(j, tau) - tau) * dN[..., j, None, None]
    return new


_STEPS = {"euler": euler_step, "positivity_preserving": kraus_step}


# ---------------------------------------------------------------------------
# runs


class _Recorder:
    def __init__(self, O: Sequence[np.ndarray], ops: OperatorSet, steps: int, cfg: SimConfig, normalized: bool):
        self.O = np.array(O) if len(O) else np.zeros((0, ops.n, ops.n), dtype=complex)
        self.ops = ops
        self.cfg = cfg
        self.normalized = normalized
        r = self.O.shape[0]
        self.theta = np.zeros((r, steps + 1))
        self.raw = np.zeros((r, steps + 1))
        self.trace = np.zeros(steps + 1)
        self.drift = np.zeros((ops.p, steps + 1))
        self.intensity = np.zeros((ops.q, steps + 1))
        self.lam = np.zeros(steps + 1)
        self.states = np.zeros((steps + 1, ops.n, ops.n), dtype=complex) if cfg.store_states else None

    def record(self, i: int, rho: np.ndarray) -> None:
        tr = np.trace(rho).real
        raw = np.einsum("kab,ba->k", self.O, rho).real
        self.raw[:, i] = raw
        self.trace[i] = tr
        self.theta[:, i] = raw / tr
        g, k = _rates(self.ops, rho)
        self.drift[:, i] = g / tr
        self.intensity[:, i] = k / tr
        self.lam[i] = min_eig(rho) / tr
        if self.states is not None:
            self.states[i] = rho
        if self.normalized:
            tol = self.cfg.euler_psd_tol if self.cfg.scheme == "euler" else self.cfg.psd_tol
            if self.lam[i] < -tol or not np.isfinite(self.lam[i]):
                hint = "reduce dt" + (" or use the positivity_preserving scheme" if self.cfg.scheme == "euler" else "")
                raise IntegrationError(f"state left the state space at step {i} "
                                       f"(min eigenvalue {self.lam[i]:.3e}); {hint}")

    def trajectory(self, times: np.ndarray, jump_warning: bool = False) -> Trajectory:
        return Trajectory(times, self.theta, self.trace, self.states, self.raw, self.drift,
                          self.intensity, self.lam, jump_warning)


def _warn_jump_prob(k: np.ndarray, dt: float, already: bool) -> bool:
    if not already and k.size and np.max(k) * dt > JUMP_PROB_WARN:
        warnings.warn(f"per-step jump probability {np.max(k) * dt:.3f} exceeds {JUMP_PROB_WARN}; "
                      "reduce dt", RuntimeWarning, stacklevel=3)
        return True
    return already


def _initial(rho0, n: int) -> np.ndarray:
    rho = np.asarray(getattr(rho0, "rho", rho0), dtype=complex)
    if rho.shape != (n, n):
        raise DimensionError(f"initial state has shape {rho.shape}, expected {(n, n)}")
    validate_state(rho, normalized=True)
    return rho


def generate_truth(model: QuantumModel, rho0, cfg: SimConfig) -> tuple[Trajectory, NoiseRecord]:
    """Simulate the conditional state under the physical measure and record
    the measurement increments."""
    if cfg.measure != "physical":
        raise ConfigError("truth simulation needs the physical measure")
    ops = model.operator_set()
    rho = _initial(rho0, ops.n)
    steps = cfg.steps
    rng = np.random.default_rng(cfg.seed)
    step = _STEPS[cfg.scheme]
    dY = np.zeros((ops.p, steps))
    dN = np.zeros((ops.q, steps), dtype=np.int8)
    rec = _Recorder(model.O, ops, steps, cfg, normalized=True)
    rec.record(0, rho)
    warned = False
    for i in range(steps):
        g, k = _rates(ops, rho)
        warned = _warn_jump_prob(k, cfg.dt, warned)
        dW = rng.normal(0.0, np.sqrt(cfg.dt), ops.p)
        u = rng.random(ops.q)
        dY[:, i] = g * cfg.dt + dW
        dN[:, i] = u < k * cfg.dt
        rho = step(ops, rho, dY[:, i], dN[:, i], cfg.dt)
        rec.record(i + 1, rho)
    times = cfg.times
    return rec.trajectory(times, warned), NoiseRecord(times, dY, dN)


def _run_normalized(ops: OperatorSet, O: Sequence[np.ndarray], rho0: np.ndarray,
                    rec: NoiseRecord, cfg: SimConfig) -> Trajectory:
    if rec.p != ops.p or rec.q != ops.q:
        raise DimensionError(f"record has {rec.p} homodyne / {rec.q} counting channels, "
                             f"model has {ops.p} / {ops.q}")
    steps = len(rec.times) - 1
    step = _STEPS[cfg.scheme]
    dt = float(rec.times[1] - rec.times[0]) if steps else cfg.dt
    out = _Recorder(O, ops, steps, cfg, normalized=True)
    rho = rho0
    out.record(0, rho)
    for i in range(steps):
        rho = step(ops, rho, rec.dY[:, i], rec.dN[:, i], dt)
        out.record(i + 1, rho)
    return out.trajectory(rec.times)


def run_filter(model: QuantumModel, rho0e, rec: NoiseRecord, cfg: SimConfig) -> Trajectory:
    ops = model.operator_set()
    return _run_normalized(ops, model.O, _initial(rho0e, ops.n), rec, cfg)


def run_reduced_filter(red: ReducedModel, rho0_red, rec: NoiseRecord, cfg: SimConfig) -> Trajectory:
    ops = red.operator_set()
    rho = _initial(rho0_red, ops.n)
    if red.factors.off_block_norm(rho) > 1e-10:
        raise DimensionError("reduced initial state is not block diagonal")
    return _run_normalized(ops, red.O, rho, rec, cfg)


def run_zakai(model: QuantumModel, tau0, rec: NoiseRecord, cfg: SimConfig) -> Trajectory:
    """Unnormalized linear recursion driven by a given record (never renormalized)."""
    ops = model.operator_set()
    tau = np.asarray(getattr(tau0, "rho", tau0), dtype=complex)
    steps = len(rec.times) - 1
    dt = float(rec.times[1] - rec.times[0]) if steps else cfg.dt
    out = _Recorder(model.O, ops, steps, cfg, normalized=False)
    out.record(0, tau)
    for i in range(steps):
        tau = zakai_step(ops, tau, rec.dY[:, i], rec.dN[:, i], dt)
        out.record(i + 1, tau)
    return out.trajectory(rec.times)


def linear_filter_step(lin: LinearFilter, v: np.ndarray, dY: np.ndarray, dN: np.ndarray, dt: float) -> np.ndarray:
    new = v + lin.Q @ v * dt
    for j, G in enumerate(lin.G):
        new = new + G @ v * dY[j]
    for j, K in enumerate(lin.K):
        if dN[j]:
            new = new + K @ v - v
    return new


def run_linear_filter(lin: LinearFilter, v0: np.ndarray, rec: NoiseRecord, cfg: SimConfig) -> Trajectory:
    """v += Q v dt + sum G v dY + sum (K - 1) v dN; outputs <zeta, v>/<e, v>."""
    if rec.p != len(lin.G) or rec.q != len(lin.K):
        raise DimensionError("record channels do not match the linear filter")
    v = np.asarray(v0, dtype=complex)
    if v.shape != (lin.kappa,):
        raise DimensionError(f"initial vector has shape {v.shape}, expected {(lin.kappa,)}")
    steps = len(rec.times) - 1
    dt = float(rec.times[1] - rec.times[0]) if steps else cfg.dt
    r = lin.zeta.shape[0]
    theta = np.zeros((r, steps + 1))
    raw = np.zeros((r, steps + 1))
    norm = np.zeros(steps + 1)
    states = np.zeros((steps + 1, lin.kappa), dtype=complex) if cfg.store_states else None
    for i in range(steps + 1):
        if i:
            v = linear_filter_step(lin, v, rec.dY[:, i - 1], rec.dN[:, i - 1], dt)
        z, e = lin.outputs(v)
        if e.real < DEGENERACY_TOL:
            raise DegeneracyError(f"<e, v> = {e.real:.3e} fell below {DEGENERACY_TOL} at step {i}")
        raw[:, i] = z.real
        norm[i] = e.real
        theta[:, i] = z.real / e.real
        if states is not None:
            states[i] = v
    return Trajectory(rec.times, theta, norm, states, raw)


@dataclass(frozen=True)
class MartingaleCurve:
    times: np.ndarray
    mean_trace: np.ndarray
    stderr: np.ndarray


def reference_measure_batch(model: QuantumModel, rho0, cfg: SimConfig, M: int) -> MartingaleCurve:
    """M independent linear-equation paths driven by standard Brownian
    increments and rate-1 Bernoulli-thinned counts."""
    if M < 2:
        raise ConfigError("need at least two paths")
    ops = model.operator_set()
    rho = _initial(rho0, ops.n)
    steps = cfg.steps
    dt = cfg.dt
    # one stream per path, derived from (seed, path index)
    streams = [np.random.default_rng(s) for s in np.random.SeedSequence(cfg.seed).spawn(M)]
    dW = np.empty((steps, M, ops.p))
    dN = np.empty((steps, M, ops.q))
    for m_, g in enumerate(streams):
        dW[:, m_, :] = g.normal(0.0, np.sqrt(dt), (steps, ops.p))
        dN[:, m_, :] = g.random((steps, ops.q)) < dt
    tau = np.broadcast_to(rho, (M, ops.n, ops.n)).copy()
    mean = np.zeros(steps + 1)
    se = np.zeros(steps + 1)
    tr = np.trace(tau, axis1=1, axis2=2).real
    mean[0], se[0] = tr.mean(), tr.std(ddof=1) / np.sqrt(M)
    for i in range(steps):
        tau = zakai_step(ops, tau, dW[i], dN[i], dt)
        tr = np.trace(tau, axis1=1, axis2=2).real
        mean[i + 1] = tr.mean()
        se[i + 1] = tr.std(ddof=1) / np.sqrt(M)
    return MartingaleCurve(cfg.times, mean, se)
