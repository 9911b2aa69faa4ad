"""Finite-dimensional *-algebras of operators: generation from a subspace,
commutant, center, and a numerical Wedderburn block decomposition."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import DecompositionError
from .linops import RANK_TOL, OperatorSubspace, dag, orthonormalize_family
from .observability import krylov_closure

CLUSTER_TOL = 1e-6
BLOCK_FORM_TOL = 1e-8
MAX_RESAMPLES = 10


@dataclass(frozen=True)
class StarAlgebra:
    basis: OperatorSubspace
    unital: bool = True

    @property
    def n(self) -> int:
        return self.basis.n

    @property
    def dim(self) -> int:
        return self.basis.dim


def generate_algebra(seed: OperatorSubspace | Sequence[np.ndarray], tol: float = RANK_TOL) -> StarAlgebra:
    """Smallest unital *-algebra containing ``seed``.

    The algebra is the span of all words in the seed elements and their
    adjoints, i.e. the closure of {1} under left multiplication by them.
    """
    mats = seed.basis if isinstance(seed, OperatorSubspace) else np.array(seed, dtype=complex)
    n = mats.shape[1]
    gens = orthonormalize_family(np.concatenate([mats, dag(mats)]), tol).basis
    start = np.concatenate([np.eye(n, dtype=complex)[None], gens])
    maps = [(lambda X, g=g: g @ X) for g in gens]
    return StarAlgebra(krylov_closure(start, maps, tol), unital=True)


def _null_space_hermitian(gram: np.ndarray, tol: float) -> np.ndarray:
    w, V = np.linalg.eigh(gram)
    # orthonormal inputs keep the Gram scale O(1); an all-zero Gram means everything commutes
    scale = max(w[-1], 1.0)
    return V[:, w <= tol * scale]


def commutant(A: StarAlgebra, tol: float = RANK_TOL) -> StarAlgebra:
    """{X : XB = BX for all B in A}, via the null space of the stacked
    commutator maps (accumulated as a Gram matrix)."""
    n = A.n
    eye = np.eye(n, dtype=complex)
    gram = np.zeros((n * n, n * n), dtype=complex)
    for B in A.basis.basis:
        # row-major vec: vec(XB - BX) = (1 (x) B^T - B (x) 1) vec(X)
        M = np.kron(eye, B.T) - np.kron(B, eye)
        gram += dag(M) @ M
    null = _null_space_hermitian(gram, tol)
    mats = null.T.reshape(-1, n, n)
    return StarAlgebra(orthonormalize_family(mats, tol), unital=True)


def center(A: StarAlgebra, tol: float = RANK_TOL) -> OperatorSubspace:
    """A intersected with its commutant, computed in A's own coordinates."""
    basis = A.basis.basis
    d = basis.shape[0]
    gram = np.zeros((d, d), dtype=complex)
    for Bj in basis:
        M = (basis @ Bj - Bj @ basis).reshape(d, -1)  # row i: [B_i, B_j]
        gram += M.conj() @ M.T
    null = _null_space_hermitian(gram, tol)
    mats = np.einsum("ik,iab->kab", null, basis)
    return orthonormalize_family(mats, tol)


@dataclass(frozen=True)
class WedderburnData:
    """Unitary U and blocks (d_F, d_G) with A = U (+_k B(C^{d_F}) (x) 1_{d_G}) U^*."""

    U: np.ndarray
    blocks: tuple[tuple[int, int], ...]

    @property
    def n(self) -> int:
        return self.U.shape[0]

    @property
    def m(self) -> int:
        return sum(dF for dF, _ in self.blocks)

    @property
    def offsets(self) -> tuple[int, ...]:
        out, o = [], 0
        for dF, dG in self.blocks:
            out.append(o)
            o += dF * dG
        return tuple(out)

    @property
    def reduced_offsets(self) -> tuple[int, ...]:
        out, o = [], 0
        for dF, _ in self.blocks:
            out.append(o)
            o += dF
        return tuple(out)

    def V(self, k: int) -> np.ndarray:
        """Isometry from block k's F (x) G space into the full space."""
        dF, dG = self.blocks[k]
        o = self.offsets[k]
        return self.U[:, o:o + dF * dG]

    @property
    def algebra_dim(self) -> int:
        return sum(dF * dF for dF, _ in self.blocks)


def block_algebra_basis(W: WedderburnData) -> Iterator[np.ndarray]:
    """Orthonormal basis of the algebra described by W, generated lazily."""
    for k, (dF, dG) in enumerate(W.blocks):
        V = W.V(k)
        eG = np.eye(dG) / np.sqrt(dG)
        for a in range(dF):
            for b in range(dF):
                E = np.zeros((dF, dF), dtype=complex)
                E[a, b] = 1.0
                yield V @ np.kron(E, eG) @ dag(V)


def algebra_from_wedderburn(W: WedderburnData) -> StarAlgebra:
    basis = np.array(list(block_algebra_basis(W)))
    return StarAlgebra(OperatorSubspace(W.n, basis), unital=True)


def block_form_projection(M: np.ndarray, W: WedderburnData) -> np.ndarray:
    """Nearest matrix (in U-coordinates) of the form +_k X_k (x) 1."""
    out = np.zeros_like(M)
    for k, (dF, dG) in enumerate(W.blocks):
        o = W.offsets[k]
        s = dF * dG
        Y = M[o:o + s, o:o + s].reshape(dF, dG, dF, dG)
        XF = np.einsum("aibi->ab", Y) / dG
        out[o:o + s, o:o + s] = np.kron(XF, np.eye(dG))
    return out


def verify_block_form(A: StarAlgebra, W: WedderburnData) -> float:
    U = W.U
    res = 0.0
    for B in A.basis.basis:
        M = dag(U) @ B @ U
        res = max(res, float(np.linalg.norm(M - block_form_projection(M, W))))
    return res


def _clusters(w: np.ndarray, rel_tol: float) -> list[np.ndarray]:
    """Group sorted eigenvalues whose gaps are below rel_tol * spread."""
    spread = max(w[-1] - w[0], 1e-300)
    groups, cur = [], [0]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > rel_tol * spread:
            groups.append(np.array(cur))
            cur = []
        cur.append(i)
    groups.append(np.array(cur))
    return groups


def _herm_combo(basis: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    X = np.einsum("i,iab->ab", rng.standard_normal(basis.shape[0]), basis)
    return 0.5 * (X + dag(X))


def _decompose_block(Vc: np.ndarray, A: StarAlgebra, rng: np.random.Generator,
                     cluster_tol: float, tol: float) -> tuple[np.ndarray, int, int] | None:
    """Local unitary for one central block, or None if the random draw was bad."""
    nk = Vc.shape[1]
    local = orthonormalize_family(dag(Vc) @ A.basis.basis @ Vc, tol).basis
    dA = local.shape[0]
    dF = int(round(np.sqrt(dA)))
    if dF * dF != dA or nk % dF:
        return None
    dG = nk // dF
    if dF == 1:
        return Vc, 1, dG
    a = _herm_combo(local, rng)
    w, Va = np.linalg.eigh(a)
    groups = _clusters(w, cluster_tol)
    if len(groups) != dF or any(len(g) != dG for g in groups):
        return None
    g = np.einsum("i,iab->ab", rng.standard_normal(dA) + 1j * rng.standard_normal(dA), local)
    F1 = Va[:, groups[0]]
    cols = [F1]
    for grp in groups[1:]:
        Qi = Va[:, grp]
        S = Qi @ (dag(Qi) @ g @ F1)
        u, s, vh = np.linalg.svd(S, full_matrices=False)
        if s[-1] < 1e-8 * max(1.0, s[0]) or s[-1] < (1 - 1e-6) * s[0]:
            return None
        cols.append(u @ vh)
    return Vc @ np.hstack(cols), dF, dG


def wedderburn_decompose(A: StarAlgebra, tol: float = RANK_TOL, rng_seed: int = 0,
                         cluster_tol: float = CLUSTER_TOL) -> WedderburnData:
    n = A.n
    rng = np.random.default_rng(rng_seed)
    Z = center(A, tol).basis
    K = Z.shape[0]
    ref = np.arange(n, dtype=float)
    best = np.inf
    for _ in range(MAX_RESAMPLES):
        z = _herm_combo(Z, rng)
        w, V = np.linalg.eigh(z)
        groups = _clusters(w, cluster_tol) if K > 1 else [np.arange(n)]
        if len(groups) != K:
            continue
        parts = []
        for grp in groups:
            Vc = V[:, grp]
            got = _decompose_block(Vc, A, rng, cluster_tol, tol)
            if got is None:
                break
            Uk, dF, dG = got
            weight = float(np.sum(ref[:, None] * np.abs(Vc) ** 2))
            parts.append(((-dF, -dG, weight), Uk, (dF, dG)))
        else:
            parts.sort(key=lambda p: p[0])
            W = WedderburnData(np.hstack([p[1] for p in parts]), tuple(p[2] for p in parts))
            res = verify_block_form(A, W)
            if res <= BLOCK_FORM_TOL:
                return W
            best = min(best, res)
    raise DecompositionError(f"Wedderburn decomposition failed after {MAX_RESAMPLES} draws "
                             f"(best block-form residual {best:.2e})")
