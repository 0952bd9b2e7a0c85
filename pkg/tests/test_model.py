import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ergokit.errors import DimensionOverflow, EvenSites, ZeroMatrix
from ergokit.model import (
    ChainConfig,
    build_h0,
    build_hamiltonian,
    extrapolate_alpha,
    fit_alpha,
    off_diagonal_weight,
    off_diagonal_weight_exact,
    pauli_string,
    site_operator,
    to_h0_basis,
)
from ergokit.numerics import kron_all


def dense_reference(cfg):
    """Hamiltonian assembled term by term from Kronecker products."""
    n = cfg.n_sites
    h = np.zeros((2**n, 2**n), dtype=complex)
    for i, j in enumerate(cfg.bond_couplings(), start=1):
        h -= j * pauli_string({i: "z", i + 1: "z"}, n)
    for i in range(1, n + 1):
        h -= cfg.hx * site_operator("x", i, n) + cfg.hz * site_operator("z", i, n)
    return h


configs = st.builds(
    ChainConfig,
    n_sites=st.sampled_from([3, 5, 7]),
    j1=st.floats(-2, 2),
    j_ratio=st.floats(0.1, 10),
    hx=st.floats(-2, 2),
    hz=st.floats(-2, 2),
)


@given(configs)
@settings(max_examples=30, deadline=None)
def test_matches_kron_assembly(cfg):
    h = build_hamiltonian(cfg).matrix
    assert np.max(np.abs(h - dense_reference(cfg))) < 1e-12


@given(configs)
@settings(max_examples=30, deadline=None)
def test_symmetric_and_traceless(cfg):
    h = build_hamiltonian(cfg).matrix
    assert np.array_equal(h, h.T)
    assert abs(np.trace(h)) < 1e-9


def test_diagonal_entries_n3():
    h = build_hamiltonian(ChainConfig(3, 1.0, 1.0, 0.0, 0.0)).matrix
    assert np.count_nonzero(h - np.diag(np.diag(h))) == 0
    for idx, bits in enumerate(itertools.product([0, 1], repeat=3)):
        s = [1 - 2 * b for b in bits]
        assert h[idx, idx] == -(s[0] * s[1] + s[1] * s[2])
    assert h[0, 0] == -2


def test_transverse_only_spectrum():
    h = build_hamiltonian(ChainConfig(3, 0.0, 1.0, 1.0, 0.0)).matrix
    assert np.allclose(np.linalg.eigvalsh(h), [-3, -1, -1, -1, 1, 1, 1, 3])


def test_bond_layout():
    cfg = ChainConfig(7, 1.5, 2.0)
    assert np.array_equal(cfg.bond_couplings(), [1.5, 1.5, 1.5, 3.0, 3.0, 3.0])
    assert cfg.j2 == 3.0


def test_config_errors():
    with pytest.raises(EvenSites):
        ChainConfig(4)
    with pytest.raises(DimensionOverflow):
        ChainConfig(15)


def test_h0():
    cfg = ChainConfig(3, 1.0, 2.0)
    d = np.diag(build_h0(cfg).matrix)
    for idx, bits in enumerate(itertools.product([0, 1], repeat=3)):
        s = [1 - 2 * b for b in bits]
        assert d[idx] == -2 * s[1] * s[2]
    assert not np.any(build_h0(ChainConfig(5, j_ratio=0.0)).matrix)


def test_h0_share_shrinks():
    ratios = []
    for jr in (1, 10, 100):
        cfg = ChainConfig(7, j_ratio=jr)
        h = build_hamiltonian(cfg).matrix
        ratios.append(np.linalg.norm(h - build_h0(cfg).matrix) / np.linalg.norm(h))
    assert ratios[0] > ratios[1] > ratios[2]


def test_to_h0_basis():
    cfg = ChainConfig(5, j_ratio=3.0)
    h0 = build_h0(cfg)
    m = to_h0_basis(h0)
    assert np.all(np.diff(np.abs(np.diag(m))) >= 0)
    h = build_hamiltonian(ChainConfig(5, j_ratio=1.0))
    assert np.array_equal(np.sort(to_h0_basis(h).ravel()), np.sort(h.matrix.ravel()))


def test_woff_limits_and_identity():
    cfg = ChainConfig(5, hx=0.0)
    assert off_diagonal_weight(build_hamiltonian(cfg)) == 0.0
    cfg = ChainConfig(5, 0.0, 1.0, 1.0, 0.0)
    assert off_diagonal_weight(build_hamiltonian(cfg)) == 1.0
    with pytest.raises(ZeroMatrix):
        off_diagonal_weight(build_hamiltonian(ChainConfig(3, 0.0, 1.0, 0.0, 0.0)))


@given(configs, st.floats(0.1, 50))
@settings(max_examples=25, deadline=None)
def test_woff_scale_invariance_and_closed_form(cfg, c):
    if cfg.hx == cfg.hz == 0 and not np.any(cfg.bond_couplings()):
        return
    h = build_hamiltonian(cfg)
    w = off_diagonal_weight(h)
    scaled = type(h)(h.matrix * c, cfg)
    assert abs(off_diagonal_weight(scaled) - w) < 1e-12
    assert abs(w - off_diagonal_weight_exact(cfg)) < 1e-12
    m = to_h0_basis(h)
    nm = m / np.linalg.norm(m)
    assert abs(w + np.sum(np.diag(nm) ** 2) - 1) < 1e-12


def test_fit_alpha_synthetic():
    cfgs = [ChainConfig(5, j_ratio=j) for j in (1, 2, 4, 8, 16)]
    fit = fit_alpha(cfgs, [j**-2.0 for j in (1, 2, 4, 8, 16)])
    assert np.isclose(fit.extras["alpha"], 2.0)
    with pytest.raises(ValueError):
        fit_alpha(cfgs[:4])
    with pytest.raises(ValueError):
        fit_alpha(cfgs[:4] + [ChainConfig(5, j_ratio=3, hx=0.3)])


def test_extrapolation():
    intercept, _ = extrapolate_alpha([5, 7, 9], [2.0 - 1 / 5, 2.0 - 1 / 7, 2.0 - 1 / 9])
    assert np.isclose(intercept, 2.0)


def test_reflection_symmetry():
    # reversing the sites and swapping J1 <-> J2 leaves H invariant
    n = 5
    a = ChainConfig(n, 1.0, 3.0, 0.7, 0.2)
    b = ChainConfig(n, 3.0, 1.0 / 3.0, 0.7, 0.2)
    ha = build_hamiltonian(a).matrix
    hb = build_hamiltonian(b).matrix
    idx = np.arange(2**n)
    rev = np.array([int(format(i, f"0{n}b")[::-1], 2) for i in idx])
    assert np.allclose(ha[np.ix_(rev, rev)], hb, atol=1e-12)


def test_chiral_symmetry():
    e = np.linalg.eigvalsh(build_hamiltonian(ChainConfig(7, 1.0, 1.0, 1.05, 0.0)).matrix)
    assert np.allclose(np.sort(-e), e, atol=1e-9)


def test_kron_all_matches_site_operator():
    z2 = kron_all([np.eye(2), np.diag([1, -1]), np.eye(2)])
    assert np.array_equal(site_operator("z", 2, 3), z2)
