"""Operator-level reduction onto the compressed algebra: reduced Hamiltonian,
Kraus sets for jump/noise operators, the assembled reduced model, and the
algebra invariance diagnostic."""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import islice
from typing import Iterator

import numpy as np

from .algebra import StarAlgebra, WedderburnData, block_algebra_basis
from .condexp import CondExpFactors, build_factors
from .errors import ContainmentError
from .linops import OperatorSet, OperatorSubspace, QuantumModel, dag, hs_norm

PRUNE_TOL = 1e-12
INVARIANCE_TOL = 1e-9
CONTAINMENT_TOL = 1e-8


@dataclass(frozen=True)
class KrausTerm:
    """One reduced operator with its Schmidt label l and block-diagonal index e."""

    l: int
    e: int
    op: np.ndarray


def g_factor_basis(dg_row: int, dg_col: int, diagonal_pair: bool) -> list[np.ndarray]:
    """Orthonormal basis of dg_row x dg_col matrices.

    For a diagonal block pair the normalized identity comes first, followed by a
    traceless completion; otherwise plain matrix units.
    """
    if not diagonal_pair:
        out = []
        for a in range(dg_row):
            for b in range(dg_col):
                E = np.zeros((dg_row, dg_col), dtype=complex)
                E[a, b] = 1.0
                out.append(E)
        return out
    d = dg_row
    out = [np.eye(d, dtype=complex) / np.sqrt(d)]
    for a in range(d):
        for b in range(d):
            if a != b:
                E = np.zeros((d, d), dtype=complex)
                E[a, b] = 1.0
                out.append(E)
    for l in range(1, d):
        h = np.zeros((d, d), dtype=complex)
        h[np.arange(l), np.arange(l)] = 1.0
        h[l, l] = -l
        out.append(h / np.sqrt(l * (l + 1)))
    return out


def block_diagonal_range(e: int, K: int) -> range:
    """Column blocks k with k - e a valid row block."""
    return range(max(0, e), min(K, K + e))


def kraus_reduce(F: CondExpFactors, C: np.ndarray, prune: float = PRUNE_TOL) -> list[KrausTerm]:
    """Reduced Kraus set of X -> C X C^*: R(C J(r) C^*) = sum_t t.op r t.op^*."""
    W = F.wedderburn
    K = len(W.blocks)
    rofs = W.reduced_offsets
    comps: dict[tuple[int, int], list[np.ndarray]] = {}
    for j, (dFj, dGj) in enumerate(W.blocks):
        for k, (dFk, dGk) in enumerate(W.blocks):
            X = (dag(F.V(j)) @ C @ F.V(k)).reshape(dFj, dGj, dFk, dGk)
            basis = g_factor_basis(dGj, dGk, j == k)
            comps[(j, k)] = [np.einsum("mn,ambn->ab", G.conj(), X) / np.sqrt(dGk) for G in basis]
    lmax = max(len(v) for v in comps.values())
    out = []
    for e in range(-K + 1, K):
        ops = []
        for l in range(lmax):
            op = np.zeros((F.m, F.m), dtype=complex)
            for k in block_diagonal_range(e, K):
                j = k - e
                parts = comps[(j, k)]
                if l < len(parts):
                    dFj, dFk = W.blocks[j][0], W.blocks[k][0]
                    op[rofs[j]:rofs[j] + dFj, rofs[k]:rofs[k] + dFk] = parts[l]
            ops.append(op)
        # the principal term J*(C) keeps its slot; the rest of this diagonal is
        # remixed unitarily into the fewest operators giving the same map
        first = 0
        if e == 0:
            first = 1
            if hs_norm(ops[0]) >= prune:
                out.append(KrausTerm(0, 0, ops[0]))
        out.extend(KrausTerm(l, e, op) for l, op in enumerate(_minimal_kraus(ops[first:], prune), start=first))
    out.sort(key=lambda t: (t.e != 0 or t.l != 0, t.e, t.l))
    return out


def _minimal_kraus(ops: list[np.ndarray], prune: float) -> list[np.ndarray]:
    if not ops:
        return []
    m = ops[0].shape[0]
    M = np.array(ops).reshape(len(ops), -1)
    _, s, vh = np.linalg.svd(M, full_matrices=False)
    keep = s >= prune
    return list((s[keep, None] * vh[keep]).reshape(-1, m, m))


@dataclass(frozen=True)
class ReducedModel:
    factors: CondExpFactors
    H: np.ndarray
    L: tuple[tuple[KrausTerm, ...], ...]
    D: tuple[np.ndarray, ...]
    D_extra: tuple[tuple[KrausTerm, ...], ...]
    C: tuple[tuple[KrausTerm, ...], ...]
    O: tuple[np.ndarray, ...]
    _ops: OperatorSet | None = field(default=None, init=False, repr=False, compare=False)

    @property
    def m(self) -> int:
        return self.H.shape[0]

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        return self.factors.blocks

    @property
    def d_max(self) -> int:
        return max(dG * dG for _, dG in self.blocks)

    @property
    def r(self) -> int:
        return len(self.O)

    def operator_set(self) -> OperatorSet:
        if self._ops is None:
            unmon = tuple(t.op for grp in self.L for t in grp)
            unmon += tuple(t.op for grp in self.D_extra for t in grp)
            counting = tuple(tuple(t.op for t in grp) for grp in self.C)
            object.__setattr__(self, "_ops", OperatorSet(self.H, unmon, self.D, counting))
        return self._ops


def containment_defect(F: CondExpFactors, space: OperatorSubspace) -> float:
    """max ||E(X) - X|| over an orthonormal basis of ``space``."""
    if space.dim == 0:
        return 0.0
    return max(hs_norm(F.E(X) - X) for X in space.basis)


def reduce_model(model: QuantumModel, F: CondExpFactors, nperp: OperatorSubspace | None = None) -> ReducedModel:
    if nperp is not None:
        d = containment_defect(F, nperp)
        if d > CONTAINMENT_TOL:
            raise ContainmentError(f"algebra does not contain the observable space (defect {d:.2e})")
    H = F.Jadj(model.H)
    H = 0.5 * (H + dag(H))
    L = tuple(tuple(kraus_reduce(F, X)) for X in model.L)
    D = tuple(F.Jadj(X) for X in model.D)
    D_extra = tuple(tuple(t for t in kraus_reduce(F, X) if (t.l, t.e) != (0, 0)) for X in model.D)
    C = tuple(tuple(kraus_reduce(F, X)) for X in model.C)
    O = tuple(F.Jadj(X) for X in model.O)
    return ReducedModel(F, H, L, D, D_extra, C, O)


@dataclass(frozen=True)
class InvarianceReport:
    invariant: bool
    defects: dict[str, float]


def _algebra_parts(A: StarAlgebra | CondExpFactors | WedderburnData):
    if isinstance(A, WedderburnData):
        A = build_factors(A)
    if isinstance(A, CondExpFactors):
        return (lambda: block_algebra_basis(A.wedderburn)), A.E
    return (lambda: iter(A.basis.basis)), A.basis.project


def invariance_check(model: QuantumModel, A: StarAlgebra | CondExpFactors | WedderburnData,
                     tol: float = INVARIANCE_TOL, chunk: int = 256) -> InvarianceReport:
    """Per generator S in {L, G_D, K_C}: ||E S - E S E|| = ||(1 - E) S^* E||
    (Frobenius norm over an orthonormal algebra basis), relative to
    max(1, ||S^* E||)."""
    basis_iter, E = _algebra_parts(A)
    gens = model.operator_set().adjoint_generators()
    leak = np.zeros(len(gens))
    size = np.zeros(len(gens))
    it = basis_iter()
    while True:
        B = list(islice(it, chunk))
        if not B:
            break
        B = np.array(B)
        for i, (_, g) in enumerate(gens):
            Y = g(B)
            leak[i] += np.linalg.norm(Y - E(Y)) ** 2
            size[i] += np.linalg.norm(Y) ** 2
    defects = {name: float(np.sqrt(leak[i]) / max(1.0, np.sqrt(size[i]))) for i, (name, _) in enumerate(gens)}
    return InvarianceReport(all(v <= tol for v in defects.values()), defects)


def iter_reduced_operators(red: ReducedModel) -> Iterator[tuple[str, int, int | None, int | None, np.ndarray]]:
    """(kind, channel, l, e, op) for serialization."""
    for j, grp in enumerate(red.L):
        for t in grp:
            yield "L", j, t.l, t.e, t.op
    for j, D in enumerate(red.D):
        yield "D", j, None, None, D
    for j, grp in enumerate(red.D_extra):
        for t in grp:
            yield "D_extra", j, t.l, t.e, t.op
    for j, grp in enumerate(red.C):
        for t in grp:
            yield "C", j, t.l, t.e, t.op
