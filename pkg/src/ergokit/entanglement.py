"""Bipartite von Neumann entanglement of eigenstates and quenched states."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import CutOutOfRange, DimensionMismatch, NotDensityMatrix, NotNormalized
from .model import build_hamiltonian

# eigenvalues of a density matrix above -CLAMP are treated as zero
CLAMP = 1e-10


@dataclass(frozen=True)
class StateVector:
    amplitudes: np.ndarray
    n_sites: int

    def __post_init__(self):
        if len(self.amplitudes) != 2**self.n_sites:
            raise DimensionMismatch(
                f"{len(self.amplitudes)} amplitudes for {self.n_sites} sites"
            )


@dataclass(frozen=True)
class EntanglementScan:
    energies: np.ndarray
    entropies: np.ndarray
    cut: int


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    meta: dict = None


def _sites(dim):
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


def make_state(amplitudes, n_sites=None, tol=1e-12):
    a = np.asarray(amplitudes, dtype=complex)
    n = _sites(len(a)) if n_sites is None else n_sites
    norm = float(np.vdot(a, a).real)
    if abs(norm - 1.0) > tol:
        raise NotNormalized(f"state norm squared is {norm:.15g}")
    return StateVector(a, n)


def named_state(kind, n):
    """Computational-basis product state: ``all_down``, ``all_up`` or ``neel``.

    The Neel state starts with an up spin on site 1.
    """
    d = 2**n
    if kind == "all_up":
        index = 0
    elif kind == "all_down":
        index = d - 1
    elif kind == "neel":
        # down spins (bit 1) on even sites
        index = int("".join("1" if s % 2 == 0 else "0" for s in range(1, n + 1)), 2)
    else:
        raise ValueError(f"unknown state {kind!r}")
    a = np.zeros(d, dtype=complex)
    a[index] = 1.0
    return StateVector(a, n)


def _check_cut(cut, n):
    if not 1 <= cut <= n - 1:
        raise CutOutOfRange(f"cut {cut} outside 1..{n - 1}")


def _amplitudes(psi):
    a = np.asarray(getattr(psi, "amplitudes", psi))
    return a, getattr(psi, "n_sites", None) or _sites(len(a))


def reduced_density_matrix(psi, cut):
    """Reduced state of sites ``1..cut`` after tracing out ``cut+1..N``."""
    a, n = _amplitudes(psi)
    _check_cut(cut, n)
    m = a.reshape(2**cut, 2 ** (n - cut))
    return m @ m.conj().T


def von_neumann_entropy(rho, tol=1e-10):
    """``-sum p ln p`` over the eigenvalues of a density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NotDensityMatrix("density matrix must be square")
    scale = max(1.0, float(np.max(np.abs(rho))))
    if np.max(np.abs(rho - rho.conj().T)) > tol * scale:
        raise NotDensityMatrix("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise NotDensityMatrix(f"trace is {np.trace(rho).real:.12g}")
    p = np.linalg.eigvalsh(rho)
    if p.min() < -CLAMP:
        raise NotDensityMatrix(f"negative eigenvalue {p.min():.3g}")
    return _entropy_of(p)


def _entropy_of(p):
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def entanglement_entropy(psi, cut):
    """Entropy of a pure state across ``cut`` from its Schmidt coefficients."""
    a, n = _amplitudes(psi)
    _check_cut(cut, n)
    s = np.linalg.svd(a.reshape(2**cut, 2 ** (n - cut)), compute_uv=False)
    return _entropy_of(s**2)


def eigenstate_entanglement_scan(spec, cut=3):
    n = _sites(spec.dim)
    _check_cut(cut, n)
    v = spec.eigenvectors
    ent = np.array([entanglement_entropy(v[:, k], cut) for k in range(spec.dim)])
    return EntanglementScan(np.asarray(spec.eigenvalues), ent, cut)


def evolve_state(psi, spec, t):
    a, n = _amplitudes(psi)
    v = spec.eigenvectors
    return StateVector(v @ (np.exp(-1j * spec.eigenvalues * t) * (v.conj().T @ a)), n)


def quench_entropy_series(psi0, spec, cut, t_grid):
    """S(t) across ``cut`` for ``|psi(t)> = exp(-iHt) |psi0>``."""
    a, n = _amplitudes(psi0)
    norm = float(np.vdot(a, a).real)
    if abs(norm - 1.0) > 1e-12:
        raise NotNormalized(f"initial state norm squared is {norm:.15g}")
    _check_cut(cut, n)
    v = spec.eigenvectors
    c0 = v.conj().T @ a
    t = np.asarray(t_grid, dtype=float)
    vals = np.array(
        [entanglement_entropy(v @ (np.exp(-1j * spec.eigenvalues * x) * c0), cut) for x in t]
    )
    return TimeSeries(t, vals, {"cut": cut, "n_sites": n})


def ground_state(cfg):
    """Lowest eigenpair of the full Hamiltonian by dense diagonalization."""
    h = build_hamiltonian(cfg).matrix
    w, v = eigh(h, subset_by_index=[0, 0])
    return float(w[0]), StateVector(v[:, 0].astype(complex), cfg.n_sites)
