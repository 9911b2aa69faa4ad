import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import block_diag
from scipy.stats import unitary_group

from conftest import chain_model
from qfreduce.algebra import (StarAlgebra, WedderburnData, algebra_from_wedderburn, center,
                              commutant, generate_algebra, verify_block_form, wedderburn_decompose)
from qfreduce.errors import DecompositionError
from qfreduce.linops import I2, SX, SZ, OperatorSubspace, orthonormalize_family, random_operator
from qfreduce.observability import observable_space


def same_span(A: OperatorSubspace, B: OperatorSubspace, tol: float = 1e-8) -> bool:
    return A.dim == B.dim and all(A.contains(X, tol) for X in B.basis)


def random_block_algebra(rng, blocks):
    """Basis of U (+ B(C^dF) (x) 1_dG) U^* for a random unitary U."""
    n = sum(f * g for f, g in blocks)
    U = unitary_group.rvs(n, random_state=rng.integers(1 << 31))
    mats = []
    for _ in range(3 * sum(f * f for f, _ in blocks)):
        parts = [np.kron(random_operator(f, rng), np.eye(g)) for f, g in blocks]
        mats.append(U @ block_diag(*parts) @ U.conj().T)
    return StarAlgebra(orthonormalize_family(mats)), U


def test_generate_examples():
    assert generate_algebra([SZ]).dim == 2
    assert generate_algebra([SX, SZ]).dim == 4


def test_algebra_is_closed_and_unital():
    A = generate_algebra([np.kron(SX, I2), np.kron(SZ, SZ)])
    B = A.basis
    assert B.contains(np.eye(4))
    for X in B.basis:
        assert B.contains(X.conj().T)
        for Y in B.basis:
            assert B.contains(X @ Y, 1e-9)


def test_commutant_examples():
    full = generate_algebra([SX, SZ])
    scalars = generate_algebra([np.eye(2)])
    diag = generate_algebra([SZ])
    assert commutant(full).dim == 1
    assert commutant(scalars).dim == 4
    assert same_span(commutant(diag).basis, diag.basis)


def test_wedderburn_examples():
    assert wedderburn_decompose(generate_algebra([SX, SZ])).blocks == ((2, 1),)
    assert wedderburn_decompose(generate_algebra([np.eye(2)])).blocks == ((1, 2),)


def test_chain_n2_wedderburn():
    A = generate_algebra(observable_space(chain_model(2)))
    assert A.dim == 8
    W = wedderburn_decompose(A)
    assert W.blocks == ((2, 1), (2, 1))
    assert verify_block_form(A, W) <= 1e-8


def test_verify_block_form_examples():
    rng = np.random.default_rng(5)
    A = generate_algebra([np.kron(SX, I2), np.kron(SZ, I2)])  # B(C^2) (x) 1
    W = wedderburn_decompose(A)
    assert W.blocks == ((2, 2),)
    assert verify_block_form(A, W) <= 1e-12
    bad = WedderburnData(unitary_group.rvs(4, random_state=3), W.blocks)
    assert verify_block_form(A, bad) > 1e-2
    # d_G = 1: residual is the plain block-diagonality defect
    D = generate_algebra([np.diag([1.0, 1.0, -1.0]).astype(complex), block_diag(SX, [[1.0]])])
    WD = wedderburn_decompose(D)
    assert all(g == 1 for _, g in WD.blocks)
    X = random_operator(3, rng)
    Xa = D.basis.project(X)
    M = WD.U.conj().T @ Xa @ WD.U
    mask = np.zeros((3, 3), bool)
    o = 0
    for f, g in WD.blocks:
        mask[o:o + f, o:o + f] = True
        o += f
    assert np.linalg.norm(M[~mask]) <= 1e-10


def test_decomposition_error_reports_residual(monkeypatch):
    import qfreduce.algebra as alg
    A = generate_algebra([SX, SZ])
    monkeypatch.setattr(alg, "BLOCK_FORM_TOL", -1.0)
    with pytest.raises(DecompositionError, match="residual"):
        alg.wedderburn_decompose(A)


def test_deterministic_given_seed():
    A = generate_algebra(observable_space(chain_model(2)))
    W1, W2 = wedderburn_decompose(A, rng_seed=4), wedderburn_decompose(A, rng_seed=4)
    assert np.array_equal(W1.U, W2.U) and W1.blocks == W2.blocks


@given(st.integers(0, 10_000),
       st.sampled_from([((2, 1),), ((1, 2), (1, 1)), ((2, 1), (1, 2)), ((2, 2), (1, 1)), ((1, 1), (1, 1), (1, 1))]))
def test_random_block_algebras(seed, blocks):
    rng = np.random.default_rng(seed)
    A, _ = random_block_algebra(rng, blocks)
    assert A.dim == sum(f * f for f, _ in blocks)
    W = wedderburn_decompose(A, rng_seed=seed)
    assert sorted(W.blocks) == sorted(blocks)
    assert np.allclose(W.U @ W.U.conj().T, np.eye(A.n), atol=1e-10)
    assert sum(f * g for f, g in W.blocks) == A.n
    assert verify_block_form(A, W) <= 1e-8
    assert W.algebra_dim == A.dim
    assert center(A).dim == len(W.blocks)
    assert same_span(algebra_from_wedderburn(W).basis, A.basis)
    assert same_span(commutant(commutant(A)).basis, A.basis)


def test_block_ordering():
    rng = np.random.default_rng(1)
    A, _ = random_block_algebra(rng, ((1, 1), (2, 1), (1, 2)))
    W = wedderburn_decompose(A)
    assert W.blocks == ((2, 1), (1, 2), (1, 1))
