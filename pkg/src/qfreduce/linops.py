"""Dense operator utilities: Hilbert-Schmidt geometry, the measured-system
superoperators and their adjoints, operator subspaces and state metrics.

Matrices are plain complex ``numpy`` arrays. Families of matrices are stored as
stacked arrays of shape ``(k, n, n)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, DimensionError, StateError

I2 = np.eye(2, dtype=complex)
SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)
# lowering convention: |0> -> |1>, so SM^* SM = |0><0|
SM = np.array([[0, 0], [1, 0]], dtype=complex)

HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-9
RANK_TOL = 1e-9


def dag(X: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(X, -1, -2))


def hs_inner(A: np.ndarray, B: np.ndarray) -> complex:
    """tr(A^* B)."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise DimensionError(f"shape mismatch {A.shape} vs {B.shape}")
    return complex(np.vdot(A, B))


def hs_norm(A: np.ndarray) -> float:
    return float(np.linalg.norm(A))


def is_hermitian(X: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    return hs_norm(X - dag(X)) <= tol * max(1.0, hs_norm(X))


def kron_all(ops: Iterable[np.ndarray]) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for op in ops:
        out = np.kron(out, op)
    return out


def site_op(op: np.ndarray, site: int, N: int) -> np.ndarray:
    """Embed a single-qubit operator on ``site`` (1-based) of an N-qubit register."""
    return kron_all(op if k == site else I2 for k in range(1, N + 1))


# ---------------------------------------------------------------------------
# elementary superoperators


def k_map(C: np.ndarray, X: np.ndarray) -> np.ndarray:
    return C @ X @ dag(C)


def k_map_adj(C: np.ndarray, X: np.ndarray) -> np.ndarray:
    return dag(C) @ X @ C


def g_map(D: np.ndarray, X: np.ndarray) -> np.ndarray:
    return D @ X + X @ dag(D)


def g_map_adj(D: np.ndarray, X: np.ndarray) -> np.ndarray:
    return dag(D) @ X + X @ D


def dissipator(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    AdA = dag(A) @ A
    return A @ X @ dag(A) - 0.5 * (AdA @ X + X @ AdA)


def dissipator_adj(A: np.ndarray, X: np.ndarray) -> np.ndarray:
    AdA = dag(A) @ A
    return dag(A) @ X @ A - 0.5 * (AdA @ X + X @ AdA)


@dataclass(frozen=True)
class OperatorSet:
    """Operators that drive a filter: Hamiltonian, unmonitored noises,
    one operator per homodyne channel and a Kraus group per counting channel.

    Both full and reduced models are integrated through this one interface, so
    the counting channels allow several Kraus operators each.
    """

    H: np.ndarray
    unmonitored: tuple[np.ndarray, ...]
    homodyne: tuple[np.ndarray, ...]
    counting: tuple[tuple[np.ndarray, ...], ...]
    _heff: np.ndarray = field(init=False, repr=False, compare=False)
    _kraus: np.ndarray = field(init=False, repr=False, compare=False)
    _cdc: tuple[np.ndarray, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        n = self.H.shape[0]
        all_ops = list(self.unmonitored) + list(self.homodyne)
        all_ops += [c for grp in self.counting for c in grp]
        s = np.zeros((n, n), dtype=complex)
        for A in all_ops:
            s += dag(A) @ A
        object.__setattr__(self, "_heff", self.H - 0.5j * s)
        kraus = np.array(all_ops) if all_ops else np.zeros((0, n, n), dtype=complex)
        object.__setattr__(self, "_kraus", kraus)
        cdc = []
        for grp in self.counting:
            t = np.zeros((n, n), dtype=complex)
            for c in grp:
                t += dag(c) @ c
            cdc.append(t)
        object.__setattr__(self, "_cdc", tuple(cdc))

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def p(self) -> int:
        return len(self.homodyne)

    @property
    def q(self) -> int:
        return len(self.counting)

    @property
    def heff(self) -> np.ndarray:
        """H - i/2 sum A^*A over every noise operator."""
        return self._heff

    def counting_intensity_op(self, j: int) -> np.ndarray:
        """sum of C^*C over the Kraus group of counting channel j."""
        return self._cdc[j]

    def lindblad(self, X: np.ndarray) -> np.ndarray:
        Y = -1j * (self._heff @ X - X @ dag(self._heff))
        for A in self._kraus:
            Y = Y + A @ X @ dag(A)
        return Y

    def lindblad_adj(self, X: np.ndarray) -> np.ndarray:
        Y = 1j * (dag(self._heff) @ X - X @ self._heff)
        for A in self._kraus:
            Y = Y + dag(A) @ X @ A
        return Y

    def g(self, j: int, X: np.ndarray) -> np.ndarray:
        return g_map(self.homodyne[j], X)

    def g_adj(self, j: int, X: np.ndarray) -> np.ndarray:
        return g_map_adj(self.homodyne[j], X)

    def k(self, j: int, X: np.ndarray) -> np.ndarray:
        return sum((k_map(c, X) for c in self.counting[j]), np.zeros_like(X))

    def k_adj(self, j: int, X: np.ndarray) -> np.ndarray:
        return sum((k_map_adj(c, X) for c in self.counting[j]), np.zeros_like(X))

    def generator_q(self, X: np.ndarray) -> np.ndarray:
        """Drift of the linear equation: L + sum_j (1 - K_Cj). One identity per
        counting channel compensates its rate-1 reference process."""
        Y = self.lindblad(X)
        for j in range(self.q):
            Y = Y + X - self.k(j, X)
        return Y

    def generator_q_adj(self, X: np.ndarray) -> np.ndarray:
        Y = self.lindblad_adj(X)
        for j in range(self.q):
            Y = Y + X - self.k_adj(j, X)
        return Y

    def adjoint_generators(self) -> list[tuple[str, Callable[[np.ndarray], np.ndarray]]]:
        """Named adjoint generators whose joint invariant subspaces matter."""
        gens: list[tuple[str, Callable[[np.ndarray], np.ndarray]]] = [("lindblad", self.lindblad_adj)]
        gens += [(f"G_D({j})", (lambda X, j=j: self.g_adj(j, X))) for j in range(self.p)]
        gens += [(f"K_C({j})", (lambda X, j=j: self.k_adj(j, X))) for j in range(self.q)]
        return gens

    def forward_generators(self) -> list[tuple[str, Callable[[np.ndarray], np.ndarray]]]:
        gens: list[tuple[str, Callable[[np.ndarray], np.ndarray]]] = [("lindblad", self.lindblad)]
        gens += [(f"G_D({j})", (lambda X, j=j: self.g(j, X))) for j in range(self.p)]
        gens += [(f"K_C({j})", (lambda X, j=j: self.k(j, X))) for j in range(self.q)]
        return gens


@dataclass(frozen=True)
class QuantumModel:
    """Measured open system: H, unmonitored noises L, homodyne D, counting C,
    tracked observables O."""

    H: np.ndarray
    L: tuple[np.ndarray, ...] = ()
    D: tuple[np.ndarray, ...] = ()
    C: tuple[np.ndarray, ...] = ()
    O: tuple[np.ndarray, ...] = ()

    def __post_init__(self) -> None:
        H = np.asarray(self.H, dtype=complex)
        if H.ndim != 2 or H.shape[0] != H.shape[1]:
            raise DimensionError("H must be square")
        n = H.shape[0]
        object.__setattr__(self, "H", H)
        for name in ("L", "D", "C", "O"):
            ops = tuple(np.asarray(X, dtype=complex) for X in getattr(self, name))
            for X in ops:
                if X.shape != (n, n):
                    raise DimensionError(f"{name} operator has shape {X.shape}, expected {(n, n)}")
            object.__setattr__(self, name, ops)
        if not is_hermitian(H):
            raise ConfigError("H is not Hermitian")

    @property
    def n(self) -> int:
        return self.H.shape[0]

    @property
    def r(self) -> int:
        return len(self.O)

    def operator_set(self) -> OperatorSet:
        return OperatorSet(self.H, self.L, self.D, tuple((c,) for c in self.C))

    def assumption_operators(self) -> list[np.ndarray]:
        """Operators the tracked observables must span: 1, D+D^*, C^*C."""
        ops = [np.eye(self.n, dtype=complex)]
        ops += [D + dag(D) for D in self.D]
        ops += [dag(C) @ C for C in self.C]
        return ops

    def assumptions_hold(self, tol: float = RANK_TOL) -> bool:
        span = orthonormalize_family(self.O, tol)
        return all(span.residual(X) <= 1e-8 * max(1.0, hs_norm(X)) for X in self.assumption_operators())


def apply_superop(model: QuantumModel | OperatorSet, kind: str, X: np.ndarray,
                  adjoint: bool = False, j: int | None = None,
                  op: np.ndarray | None = None) -> np.ndarray:
    """Apply a named superoperator (or its HS adjoint) to X.

    kind is one of ``lindblad``, ``generator_Q``, ``G_D``, ``K_C`` (these two
    take channel index ``j``) and ``D_of`` (dissipator of ``op``).
    """
    ops = model.operator_set() if isinstance(model, QuantumModel) else model
    X = np.asarray(X, dtype=complex)
    if X.shape != (ops.n, ops.n):
        raise DimensionError(f"X has shape {X.shape}, expected {(ops.n, ops.n)}")
    if kind == "lindblad":
        return ops.lindblad_adj(X) if adjoint else ops.lindblad(X)
    if kind == "generator_Q":
        return ops.generator_q_adj(X) if adjoint else ops.generator_q(X)
    if kind in ("G_D", "K_C"):
        count = ops.p if kind == "G_D" else ops.q
        if j is None or not 0 <= j < count:
            raise IndexError(f"{kind} channel index {j} out of range (have {count})")
        if kind == "G_D":
            return ops.g_adj(j, X) if adjoint else ops.g(j, X)
        return ops.k_adj(j, X) if adjoint else ops.k(j, X)
    if kind == "D_of":
        if op is None or np.shape(op) != X.shape:
            raise DimensionError("D_of needs an operator of matching shape")
        return dissipator_adj(op, X) if adjoint else dissipator(op, X)
    raise ValueError(f"unknown superoperator kind {kind!r}")


# ---------------------------------------------------------------------------
# operator subspaces


@dataclass(frozen=True)
class OperatorSubspace:
    """HS-orthonormal basis, stored as an array of shape (dim, n, n)."""

    n: int
    basis: np.ndarray

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def coords(self, X: np.ndarray) -> np.ndarray:
        """<E_k, X> for every basis element (works on stacked X too)."""
        return np.einsum("kab,...ab->...k", self.basis.conj(), X)

    def embed(self, x: np.ndarray) -> np.ndarray:
        return np.einsum("k,kab->ab", x, self.basis)

    def project(self, X: np.ndarray) -> np.ndarray:
        return np.einsum("...k,kab->...ab", self.coords(X), self.basis)

    def residual(self, X: np.ndarray) -> float:
        return hs_norm(X - self.project(X))

    def contains(self, X: np.ndarray, tol: float = 1e-9) -> bool:
        return self.residual(X) <= tol * max(1.0, hs_norm(X))

    def gram_defect(self) -> float:
        M = self.basis.reshape(self.dim, -1)
        return float(np.max(np.abs(M.conj() @ M.T - np.eye(self.dim)))) if self.dim else 0.0


def _as_stack(S: Sequence[np.ndarray] | np.ndarray, n: int | None = None) -> np.ndarray:
    arrs = [np.asarray(X, dtype=complex) for X in S]
    if not arrs:
        return np.zeros((0, n or 0, n or 0), dtype=complex)
    shape = arrs[0].shape
    for X in arrs:
        if X.shape != shape:
            raise DimensionError("family members differ in shape")
    return np.array(arrs)


def orthonormalize_family(S: Sequence[np.ndarray] | np.ndarray, tol: float = RANK_TOL) -> OperatorSubspace:
    """Orthonormal basis of span(S) with SVD rank cutoff ``tol * s_max``."""
    if tol <= 0:
        raise ConfigError("tol must be positive")
    stack = _as_stack(S)
    if stack.shape[0] == 0:
        n = stack.shape[1] if stack.ndim == 3 else 0
        return OperatorSubspace(n, stack)
    k, n, _ = stack.shape
    M = stack.reshape(k, n * n).T
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return OperatorSubspace(n, np.zeros((0, n, n), dtype=complex))
    r = int(np.sum(s > tol * s[0]))
    return OperatorSubspace(n, U[:, :r].T.reshape(r, n, n).copy())


def extend_basis(space: OperatorSubspace, candidates: np.ndarray, tol: float = RANK_TOL) -> OperatorSubspace:
    """Add the part of ``candidates`` outside ``space``.

    Cutoff is ``tol * max(1, largest candidate norm)``; normalizing each
    candidate separately would blow roundoff-sized images up to unit noise.
    """
    if candidates.shape[0] == 0:
        return space
    n = space.n
    scale = max(1.0, float(np.max(np.linalg.norm(candidates.reshape(candidates.shape[0], -1), axis=1))))
    cand = candidates
    # classical Gram-Schmidt twice against the existing basis
    for _ in range(2):
        if space.dim:
            cand = cand - space.project(cand)
    M = cand.reshape(cand.shape[0], n * n).T
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    r = int(np.sum(s > tol * scale))
    if r == 0:
        return space
    new = U[:, :r].T.reshape(r, n, n)
    if space.dim:
        new = new - space.project(new)
        new = orthonormalize_family(new, tol).basis
    return OperatorSubspace(n, np.concatenate([space.basis, new]))


# ---------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class DensityState:
    rho: np.ndarray
    normalized: bool = True

    def __post_init__(self) -> None:
        rho = np.asarray(self.rho, dtype=complex)
        object.__setattr__(self, "rho", rho)
        validate_state(rho, normalized=self.normalized)


def min_eig(rho: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(0.5 * (rho + dag(rho)))[0])


def validate_state(rho: np.ndarray, normalized: bool = True, tol: float = PSD_TOL) -> None:
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DimensionError("state must be a square matrix")
    if hs_norm(rho - dag(rho)) > tol * max(1.0, hs_norm(rho)):
        raise StateError("state is not Hermitian")
    lam = min_eig(rho)
    if lam < -tol:
        raise StateError(f"state has negative eigenvalue {lam:.3e}")
    if normalized and abs(np.trace(rho).real - 1) > tol:
        raise StateError(f"state trace {np.trace(rho).real!r} is not 1")


def _as_rho(x: DensityState | np.ndarray) -> np.ndarray:
    return x.rho if isinstance(x, DensityState) else np.asarray(x, dtype=complex)


def _psd_sqrt(rho: np.ndarray, tol: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (rho + dag(rho)))
    if w[0] < -tol:
        raise StateError(f"state has negative eigenvalue {w[0]:.3e}")
    # eigenvalues below the numerical-rank floor are roundoff; their square
    # roots would inject O(1e-8) noise
    w = np.where(w > len(w) * np.finfo(float).eps * max(w[-1], 0.0), w, 0.0)
    return (V * np.sqrt(w)) @ dag(V)


def fidelity(rho: DensityState | np.ndarray, sigma: DensityState | np.ndarray, tol: float = PSD_TOL) -> float:
    """tr sqrt(sqrt(rho) sigma sqrt(rho)), clipped to [0, 1].

    Evaluated as the trace norm of sqrt(rho) sqrt(sigma): square roots of the
    near-zero eigenvalues of sqrt(rho) sigma sqrt(rho) would amplify roundoff
    to O(1e-8) for nearly pure states.
    """
    a = _as_rho(rho)
    b = _as_rho(sigma)
    if a.shape != b.shape:
        raise DimensionError("fidelity of states with different shapes")
    s = np.linalg.svd(_psd_sqrt(a, tol) @ _psd_sqrt(b, tol), compute_uv=False)
    return float(min(1.0, np.sum(s)))


def random_density(n: int, rng: np.random.Generator) -> np.ndarray:
    """Full-rank random state from a complex Ginibre matrix."""
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    rho = G @ dag(G)
    return rho / np.trace(rho).real


def random_operator(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)


def random_hermitian(n: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    X = random_operator(n, rng, scale)
    return 0.5 * (X + dag(X))


def superop_matrix(f: Callable[[np.ndarray], np.ndarray], n_in: int, n_out: int | None = None) -> np.ndarray:
    """Matrix of a linear map in the row-major vec convention."""
    n_out = n_in if n_out is None else n_out
    M = np.zeros((n_out * n_out, n_in * n_in), dtype=complex)
    for idx in range(n_in * n_in):
        E = np.zeros(n_in * n_in, dtype=complex)
        E[idx] = 1.0
        M[:, idx] = np.asarray(f(E.reshape(n_in, n_in))).reshape(-1)
    return M
