import functools

import numpy as np
import pytest

from ergokit.model import ChainConfig, build_hamiltonian
from ergokit.numerics import eigh_symmetric

ACCEPTANCE = {}


@functools.lru_cache(maxsize=None)
def spectrum(n, j_ratio, hx=1.05, hz=0.5, j1=1.0, vectors=True):
    cfg = ChainConfig(n, j1, j_ratio, hx, hz)
    return eigh_symmetric(build_hamiltonian(cfg).matrix, vectors=vectors)


@functools.lru_cache(maxsize=None)
def levels(n, j_ratio, hx=1.05, hz=0.5):
    return spectrum(n, j_ratio, hx, hz, vectors=False).eigenvalues


@pytest.fixture
def record():
    """Store a one-line verdict for the acceptance summary."""

    def _record(key, ok, detail):
        ACCEPTANCE[key] = (bool(ok), detail)
        return ok

    return _record


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{key:>4} {'PASS' if ok else 'FAIL'}  {detail}")
