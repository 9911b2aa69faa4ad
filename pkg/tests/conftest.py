import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from qfreduce.linops import SM, SX, SZ, QuantumModel, random_hermitian, random_operator
from qfreduce.models import ChainSpec, build_spin_chain

settings.register_profile("default", max_examples=25, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_model(n: int, rng: np.random.Generator, nL: int = 1, nD: int = 1, nC: int = 1, nO: int = 1) -> QuantumModel:
    """Generic model with random operators of each kind."""
    H = random_hermitian(n, rng)
    L = tuple(random_operator(n, rng, 0.5) for _ in range(nL))
    D = tuple(random_operator(n, rng, 0.5) for _ in range(nD))
    C = tuple(random_operator(n, rng, 0.5) for _ in range(nC))
    O = tuple(random_hermitian(n, rng) for _ in range(nO))
    return QuantumModel(H, L, D, C, O)


def chain_model(N: int, gamma: float = 0.5, alpha: float = 1.0) -> QuantumModel:
    spec = ChainSpec(N, tuple(np.linspace(1.8, 2.2, N - 1)), tuple(np.linspace(0.9, 1.1, N)),
                     (gamma,) * N, (alpha,) * N)
    return build_spin_chain(spec)


def qubit_models():
    """Small named qubit models used across modules."""
    return {
        "dephasing": QuantumModel(np.zeros((2, 2), complex), (), (SZ,), (), (SZ,)),
        "decay": QuantumModel(SX, (), (), (SM,), (SZ,)),
    }


ACCEPTANCE_LINES: list[str] = []


def report_criterion(k: int, ok: bool, detail: str) -> None:
    """Record and print one acceptance line; the summary hook repeats them."""
    line = f"{'PASS' if ok else 'FAIL'} criterion {k}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
