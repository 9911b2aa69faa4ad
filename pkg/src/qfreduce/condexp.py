"""Orthogonal conditional expectation onto a *-algebra, split into its
compression R, injection J and the dual J^*.

The reduced space is the direct sum of the F-factors, stored as one m x m
matrix with block offsets; off-block entries are structurally zero.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .algebra import WedderburnData
from .errors import DimensionError, DomainError
from .linops import dag

J_DOMAIN_TOL = 1e-10


@dataclass(frozen=True)
class CondExpFactors:
    wedderburn: WedderburnData

    @property
    def n(self) -> int:
        return self.wedderburn.n

    @property
    def m(self) -> int:
        return self.wedderburn.m

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        return self.wedderburn.blocks

    def V(self, k: int) -> np.ndarray:
        return self.wedderburn.V(k)

    def W(self, k: int) -> np.ndarray:
        """Isometry from block k's F-factor into the reduced space."""
        dF, _ = self.blocks[k]
        o = self.wedderburn.reduced_offsets[k]
        out = np.zeros((self.m, dF), dtype=complex)
        out[o:o + dF, :] = np.eye(dF)
        return out

    def _slices(self):
        W = self.wedderburn
        for k, (dF, dG) in enumerate(W.blocks):
            o, ro = W.offsets[k], W.reduced_offsets[k]
            yield k, dF, dG, slice(o, o + dF * dG), slice(ro, ro + dF)

    def _partial_traces(self, X: np.ndarray, weight_by_dg: bool) -> np.ndarray:
        if X.shape[-2:] != (self.n, self.n):
            raise DimensionError(f"expected {self.n}x{self.n} input, got {X.shape}")
        U = self.wedderburn.U
        M = dag(U) @ X @ U
        out = np.zeros(X.shape[:-2] + (self.m, self.m), dtype=complex)
        for _, dF, dG, full, red in self._slices():
            Y = M[..., full, full].reshape(X.shape[:-2] + (dF, dG, dF, dG))
            t = np.einsum("...aibi->...ab", Y)
            out[..., red, red] = t / dG if weight_by_dg else t
        return out

    def R(self, X: np.ndarray) -> np.ndarray:
        """+_k tr_G(V_k^* X V_k)."""
        return self._partial_traces(np.asarray(X, dtype=complex), weight_by_dg=False)

    def Jadj(self, X: np.ndarray) -> np.ndarray:
        """+_k tr_G(V_k^* X V_k)/d_G; unital, and a homomorphism on the algebra."""
        return self._partial_traces(np.asarray(X, dtype=complex), weight_by_dg=True)

    def off_block_norm(self, Xr: np.ndarray) -> float:
        mask = np.ones((self.m, self.m), dtype=bool)
        for *_, red in self._slices():
            mask[red, red] = False
        return float(np.linalg.norm(Xr[..., mask]))

    def J(self, Xr: np.ndarray, check: bool = True) -> np.ndarray:
        """U (+_k X_k (x) 1_G/d_G) U^*."""
        Xr = np.asarray(Xr, dtype=complex)
        if Xr.shape[-2:] != (self.m, self.m):
            raise DimensionError(f"expected {self.m}x{self.m} input, got {Xr.shape}")
        if check and self.off_block_norm(Xr) > J_DOMAIN_TOL:
            raise DomainError("J applied to a matrix with off-block entries")
        M = np.zeros(Xr.shape[:-2] + (self.n, self.n), dtype=complex)
        for _, dF, dG, full, red in self._slices():
            blk = Xr[..., red, red]
            M[..., full, full] = np.einsum("...ab,ij->...aibj", blk, np.eye(dG) / dG).reshape(
                Xr.shape[:-2] + (dF * dG, dF * dG))
        U = self.wedderburn.U
        return U @ M @ dag(U)

    def E(self, X: np.ndarray) -> np.ndarray:
        return self.J(self.R(X), check=False)

    def pinch(self, Xr: np.ndarray) -> np.ndarray:
        """Zero the off-block part of a reduced-space matrix."""
        out = np.zeros_like(Xr)
        for *_, red in self._slices():
            out[..., red, red] = Xr[..., red, red]
        return out


def build_factors(W: WedderburnData) -> CondExpFactors:
    return CondExpFactors(W)


def apply_factor(F: CondExpFactors, which: str, X: np.ndarray) -> np.ndarray:
    if which == "R":
        return F.R(X)
    if which == "J":
        return F.J(X)
    if which in ("Jadj", "J*"):
        return F.Jadj(X)
    if which == "E":
        return F.E(X)
    raise ValueError(f"unknown factor {which!r}")


def choi_matrix(f: Callable[[np.ndarray], np.ndarray], in_dim: int, out_dim: int) -> np.ndarray:
    """sum_ab E_ab (x) f(E_ab), built one matrix unit at a time."""
    choi = np.zeros((in_dim * out_dim, in_dim * out_dim), dtype=complex)
    for a in range(in_dim):
        for b in range(in_dim):
            E = np.zeros((in_dim, in_dim), dtype=complex)
            E[a, b] = 1.0
            Y = np.asarray(f(E))
            if Y.shape != (out_dim, out_dim):
                raise DimensionError(f"map output has shape {Y.shape}, expected {(out_dim, out_dim)}")
            choi[a * out_dim:(a + 1) * out_dim, b * out_dim:(b + 1) * out_dim] = Y
    return choi


def cptp_check(f: Callable[[np.ndarray], np.ndarray], in_dim: int, out_dim: int) -> dict[str, float]:
    choi = choi_matrix(f, in_dim, out_dim)
    lam = float(np.linalg.eigvalsh(0.5 * (choi + dag(choi)))[0])
    defect = 0.0
    for a in range(in_dim):
        for b in range(in_dim):
            blk = choi[a * out_dim:(a + 1) * out_dim, b * out_dim:(b + 1) * out_dim]
            defect = max(defect, abs(np.trace(blk) - (1.0 if a == b else 0.0)))
    return {"choi_min_eig": lam, "trace_defect": float(defect)}
