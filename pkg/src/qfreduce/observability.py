"""Observable operator subspace and the minimal linear filter living on it."""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NotClosedError
from .linops import (RANK_TOL, OperatorSet, OperatorSubspace, QuantumModel, extend_basis,
                     hs_norm, orthonormalize_family)

log = logging.getLogger(__name__)

Generator = Callable[[np.ndarray], np.ndarray]


def augmented_observables(model: QuantumModel, tol: float = RANK_TOL) -> tuple[list[np.ndarray], bool]:
    """Observables plus whichever of 1, D+D^*, C^*C they fail to span."""
    obs = list(model.O)
    span = orthonormalize_family(obs, tol) if obs else OperatorSubspace(model.n, np.zeros((0, model.n, model.n), complex))
    added = False
    for X in model.assumption_operators():
        if span.dim == 0 or not span.contains(X, 1e-8):
            obs.append(X)
            span = orthonormalize_family(obs, tol)
            added = True
    return obs, added


def krylov_closure(start: Sequence[np.ndarray] | np.ndarray, gens: Sequence[Generator],
                   tol: float = RANK_TOL) -> OperatorSubspace:
    """Smallest subspace containing ``start`` and invariant under every map in ``gens``.

    Breadth-first: each sweep applies every generator to every basis element;
    stops after a sweep that adds nothing.
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    space = orthonormalize_family(start, tol)
    frontier = space.basis
    while frontier.shape[0]:
        before = space.dim
        for g in gens:
            space = extend_basis(space, g(frontier), tol)
        # only the new directions need mapping next time; older ones were
        # already pushed through every generator
        frontier = space.basis[before:]
    return space


def observable_space(model: QuantumModel, tol: float = RANK_TOL, repair: bool = True,
                     order: Sequence[int] | None = None) -> OperatorSubspace:
    """Observable space: closure of span{O} under the adjoint generators.

    ``order`` permutes the generator list (used to test order independence).
    """
    if tol <= 0:
        raise ConfigError("tol must be positive")
    obs = list(model.O)
    if repair:
        obs, added = augmented_observables(model, tol)
        if added:
            log.warning("observables do not span 1, D+D*, C*C; augmenting them")
    if not obs:
        return OperatorSubspace(model.n, np.zeros((0, model.n, model.n), complex))
    gens = [g for _, g in model.operator_set().adjoint_generators()]
    if order is not None:
        gens = [gens[i] for i in order]
    return krylov_closure(obs, gens, tol)


def invariance_defects(space: OperatorSubspace, gens: Sequence[tuple[str, Generator]]) -> dict[str, float]:
    """Per generator: max over basis elements of the part mapped outside the space,
    relative to the generator's size on the basis."""
    out = {}
    for name, g in gens:
        if space.dim == 0:
            out[name] = 0.0
            continue
        img = g(space.basis)
        scale = max(1.0, max(hs_norm(Y) for Y in img))
        out[name] = max(space.residual(Y) for Y in img) / scale
    return out


@dataclass(frozen=True)
class LinearFilter:
    """Zakai recursion compressed to the observable space, in the coordinates
    x_k = <E_k, X> of its orthonormal basis."""

    space: OperatorSubspace
    Q: np.ndarray
    G: tuple[np.ndarray, ...]
    K: tuple[np.ndarray, ...]
    zeta: np.ndarray  # (r, kappa)
    e_vec: np.ndarray

    @property
    def kappa(self) -> int:
        return self.space.dim

    def R(self, X: np.ndarray) -> np.ndarray:
        return self.space.coords(X)

    def J(self, x: np.ndarray) -> np.ndarray:
        return self.space.embed(x)

    def outputs(self, v: np.ndarray) -> tuple[np.ndarray, complex]:
        """(unnormalized <zeta_j, v>, <e, v>)."""
        return self.zeta.conj() @ v, np.vdot(self.e_vec, v)


def _compress(space: OperatorSubspace, f: Generator) -> np.ndarray:
    # column b holds coordinates of f(E_b)
    return space.coords(f(space.basis)).T


def build_linear_filter(model: QuantumModel, Nperp: OperatorSubspace, tol: float = 1e-9) -> LinearFilter:
    ops: OperatorSet = model.operator_set()
    defects = invariance_defects(Nperp, ops.adjoint_generators())
    bad = {k: v for k, v in defects.items() if v > tol}
    if bad:
        name, val = max(bad.items(), key=lambda kv: kv[1])
        raise NotClosedError(f"subspace not closed under adjoint of {name} (defect {val:.2e})")
    Q = _compress(Nperp, ops.generator_q)
    G = tuple(_compress(Nperp, lambda X, j=j: ops.g(j, X)) for j in range(ops.p))
    K = tuple(_compress(Nperp, lambda X, j=j: ops.k(j, X)) for j in range(ops.q))
    zeta = np.array([Nperp.coords(O) for O in model.O]).reshape(len(model.O), Nperp.dim)
    e_vec = Nperp.coords(np.eye(model.n, dtype=complex))
    return LinearFilter(Nperp, Q, G, K, zeta, e_vec)
