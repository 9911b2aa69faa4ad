"""Model families: quantum non-demolition (block) measurements and the
measured Ising spin chain, plus the chain's analytic change of basis."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import block_diag

from .algebra import WedderburnData
from .errors import ConfigError, DimensionError
from .linops import I2, SM, SX, SZ, QuantumModel, dag, site_op

# 4x4 permutation |00>,|01>,|10>,|11> -> |00>,|11>,|10>,|01>
PERM4 = 0.5 * (np.eye(4) + np.kron(SX, I2) + np.kron(I2, SZ) - np.kron(SX, SZ))


@dataclass(frozen=True)
class QndSpec:
    """Block dimensions and per-block channel data.

    ``d[j][k]`` and ``c[j][k]`` are the scalars of homodyne/counting channel j on
    block k. The optional block operators give the generalized (non-scalar) case:
    ``H_blocks[k]``, ``L_blocks[j][k]``, ``D_blocks[j][k]``, ``C_blocks[j][k]``.
    """

    dims: tuple[int, ...]
    d: tuple[tuple[complex, ...], ...] = ()
    c: tuple[tuple[complex, ...], ...] = ()
    H_blocks: tuple[np.ndarray, ...] | None = None
    L_blocks: tuple[tuple[np.ndarray, ...], ...] = ()
    D_blocks: tuple[tuple[np.ndarray, ...], ...] = ()
    C_blocks: tuple[tuple[np.ndarray, ...], ...] = ()


def _blockwise(dims: Sequence[int], parts: Sequence[np.ndarray], what: str) -> np.ndarray:
    if len(parts) != len(dims):
        raise DimensionError(f"{what}: {len(parts)} blocks given, {len(dims)} expected")
    mats = []
    for dk, X in zip(dims, parts):
        X = np.atleast_2d(np.asarray(X, dtype=complex))
        if X.shape != (dk, dk):
            raise DimensionError(f"{what}: block of shape {X.shape}, expected {(dk, dk)}")
        mats.append(X)
    return block_diag(*mats)


def _scalar_blocks(dims: Sequence[int], vals: Sequence[complex], what: str) -> np.ndarray:
    if len(vals) != len(dims):
        raise DimensionError(f"{what}: {len(vals)} scalars for {len(dims)} blocks")
    return block_diag(*[v * np.eye(dk, dtype=complex) for dk, v in zip(dims, vals)])


def build_qnd(spec: QndSpec) -> QuantumModel:
    dims = tuple(int(x) for x in spec.dims)
    if not dims or min(dims) < 1:
        raise DimensionError("block dimensions must be positive")
    n = sum(dims)
    H = (_blockwise(dims, spec.H_blocks, "H") if spec.H_blocks is not None
         else np.zeros((n, n), dtype=complex))
    L = [_blockwise(dims, blk, "L") for blk in spec.L_blocks]
    D = [_scalar_blocks(dims, v, "d") for v in spec.d]
    D += [_blockwise(dims, blk, "D") for blk in spec.D_blocks]
    C = [_scalar_blocks(dims, v, "c") for v in spec.c]
    C += [_blockwise(dims, blk, "C") for blk in spec.C_blocks]
    O = []
    o = 0
    for dk in dims:
        P = np.zeros((n, n), dtype=complex)
        P[o:o + dk, o:o + dk] = np.eye(dk)
        O.append(P)
        o += dk
    return QuantumModel(H, tuple(L), tuple(D), tuple(C), tuple(O))


@dataclass(frozen=True)
class ChainSpec:
    """Ising chain: couplings delta (N-1), fields mu (N), homodyne gamma (N),
    counting alpha (N). Zero-strength channels are dropped."""

    N: int
    delta: tuple[float, ...]
    mu: tuple[float, ...]
    gamma: tuple[float, ...] = field(default=())
    alpha: tuple[float, ...] = field(default=())

    def __post_init__(self) -> None:
        N = self.N
        if N < 2:
            raise ConfigError("spin chain needs N >= 2")
        gamma = tuple(self.gamma) or (0.0,) * N
        alpha = tuple(self.alpha) or (0.0,) * N
        object.__setattr__(self, "gamma", gamma)
        object.__setattr__(self, "alpha", alpha)
        if len(self.delta) != N - 1 or len(self.mu) != N or len(gamma) != N or len(alpha) != N:
            raise DimensionError("chain parameter lists have wrong lengths")


def build_spin_chain(spec: ChainSpec) -> QuantumModel:
    N = spec.N
    n = 2 ** N
    H = np.zeros((n, n), dtype=complex)
    for j in range(1, N):
        H += spec.delta[j - 1] * site_op(SX, j, N) @ site_op(SX, j + 1, N)
    for j in range(1, N + 1):
        H += spec.mu[j - 1] * site_op(SZ, j, N)
    D = tuple(g * site_op(SZ, j, N) for j, g in enumerate(spec.gamma, start=1) if g != 0)
    C = tuple(a * site_op(SM, j, N) for j, a in enumerate(spec.alpha, start=1) if a != 0)
    O = []
    for k in range(n):
        P = np.zeros((n, n), dtype=complex)
        P[k, k] = 1.0
        O.append(P)
    return QuantumModel(H, (), D, C, tuple(O))


def random_chain_spec(N: int, rng: np.random.Generator, gamma: float = 0.0, alpha: float = 0.0,
                      delta_mean: float = 2.0, mu_mean: float = 1.0, spread: float = 0.2) -> ChainSpec:
    delta = tuple(rng.normal(delta_mean, spread, N - 1))
    mu = tuple(rng.normal(mu_mean, spread, N))
    return ChainSpec(N, delta, mu, (gamma,) * N, (alpha,) * N)


def chain_unitary(N: int) -> np.ndarray:
    """U_N = (P (x) 1)(1 (x) U_{N-1}), U_1 = 1: conjugation maps sigma_z^(j) to
    sigma_z^(j) sigma_z^(j+1) and sigma_x^(j) sigma_x^(j+1) to sigma_x^(j+1)."""
    if N < 1:
        raise ConfigError("N must be >= 1")
    U = np.eye(2, dtype=complex)
    for k in range(2, N + 1):
        U = np.kron(PERM4, np.eye(2 ** (k - 2))) @ np.kron(I2, U)
    return U


def chain_wedderburn(N: int) -> WedderburnData:
    """Analytic block form of alg{sigma_z^(j), sigma_x^(j) sigma_x^(j+1)}: two
    full blocks of size 2^(N-1), selected by the first qubit after U_N."""
    h = 2 ** (N - 1)
    return WedderburnData(dag(chain_unitary(N)), ((h, 1), (h, 1)))


def chain_generators(N: int) -> list[np.ndarray]:
    gens = [site_op(SZ, j, N) for j in range(1, N + 1)]
    gens += [site_op(SX, j, N) @ site_op(SX, j + 1, N) for j in range(1, N)]
    return gens


def chain_reduced_hamiltonians(spec: ChainSpec) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form block Hamiltonians on N-1 qubits; they differ only in the sign
    of the mu_1 term."""
    N = spec.N
    M = N - 1

    def z(j: int) -> np.ndarray:
        return site_op(SZ, j, M)

    base = sum(spec.delta[j - 1] * site_op(SX, j, M) for j in range(1, N))
    for j in range(2, N):
        base = base + spec.mu[j - 1] * z(j - 1) @ z(j)
    base = base + spec.mu[N - 1] * z(M)
    return base + spec.mu[0] * z(1), base - spec.mu[0] * z(1)



def build_hidden_rotation(omega: float = 1.0, gamma: float = 0.5) -> QuantumModel:
    """Two qubits: the first is monitored (homodyne sigma_z) and observed, the
    second rotates under omega sigma_x and never reaches the observables.

    The diagonal algebra contains the observable space here but is not
    invariant, which makes this a test bed for the non-invariant case.
    """
    H = omega * site_op(SX, 2, 2)
    D = (gamma * site_op(SZ, 1, 2),)
    P0 = np.kron(np.diag([1.0, 0.0]), I2).astype(complex)
    return QuantumModel(H, (), D, (), (P0, np.eye(4, dtype=complex) - P0))


def diagonal_wedderburn(n: int) -> WedderburnData:
    """Block form of the diagonal algebra: n one-dimensional blocks."""
    return WedderburnData(np.eye(n, dtype=complex), ((1, 1),) * n)


def default_qnd_spec(K: int = 3, block_dim: int = 2, seed: int = 0) -> QndSpec:
    """K blocks with random Hermitian block Hamiltonians, one homodyne and one
    counting channel with distinct per-block scalars."""
    rng = np.random.default_rng(seed)
    Hb = []
    for _ in range(K):
        X = rng.standard_normal((block_dim, block_dim)) + 1j * rng.standard_normal((block_dim, block_dim))
        Hb.append(0.5 * (X + dag(X)))
    d = tuple(float(x) for x in np.linspace(-1.0, 1.0, K))
    c = tuple(float(x) for x in np.linspace(0.5, 1.5, K))
    return QndSpec(tuple([block_dim] * K), (d,), (c,), tuple(Hb))
