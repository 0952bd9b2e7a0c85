"""Inhomogeneous transverse-field Ising chain and off-diagonal-weight diagnostics.

Basis convention: the computational state |s1 s2 ... sN> with s = +1 for up has
index ``sum((1 - s_i) / 2 * 2**(N - i))``, so site 1 is the most significant bit.
Spin operators are Pauli matrices with eigenvalues +-1.
"""

from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionOverflow, EvenSites, SiteOutOfRange, ZeroMatrix
from .numerics import FitResult, kron_all, loglog_slope, polyfit

MAX_SITES = 13

PAULI = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class ChainConfig:
    """Model parameters; ``j2 = j1 * j_ratio``.

    The first ``(N-1)/2`` bonds carry ``j1``, the remaining ones ``j2``.
    """

    n_sites: int = 7
    j1: float = 1.0
    j_ratio: float = 1.0
    hx: float = 1.05
    hz: float = 0.5

    def __post_init__(self):
        n = self.n_sites
        if int(n) != n or n < 3:
            raise ValueError(f"n_sites must be an integer >= 3, got {n}")
        if n % 2 == 0:
            raise EvenSites(f"n_sites must be odd, got {n}")
        if n > MAX_SITES:
            raise DimensionOverflow(f"n_sites={n} exceeds the dense limit {MAX_SITES}")
        if self.j_ratio < 0:
            raise ValueError("j_ratio must be nonnegative")

    @property
    def j2(self):
        return self.j1 * self.j_ratio

    @property
    def dim(self):
        return 2**self.n_sites

    def bond_couplings(self):
        """Coupling of bond (i, i+1) for i = 1 .. N-1."""
        half = (self.n_sites - 1) // 2
        return np.array([self.j1] * half + [self.j2] * half, dtype=float)

    def with_ratio(self, j_ratio):
        return replace(self, j_ratio=float(j_ratio))


@dataclass(frozen=True)
class HamiltonianMatrix:
    matrix: np.ndarray
    config: ChainConfig

    @property
    def dim(self):
        return self.matrix.shape[0]


def spin_table(n):
    """(2**n, n) array of +-1 spin values, column i holding site i+1."""
    idx = np.arange(2**n)
    bits = (idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1
    return 1 - 2 * bits


def _diagonal(n, couplings, hz):
    s = spin_table(n)
    zz = (s[:, :-1] * s[:, 1:]) @ couplings
    return -zz - hz * s.sum(axis=1)


def build_hamiltonian(cfg):
    """Dense real-symmetric Hamiltonian with open boundaries."""
    n = cfg.n_sites
    d = cfg.dim
    h = np.zeros((d, d))
    idx = np.arange(d)
    h[idx, idx] = _diagonal(n, cfg.bond_couplings(), cfg.hz)
    if cfg.hx != 0:
        for i in range(n):
            h[idx, idx ^ (1 << (n - 1 - i))] = -cfg.hx
    return HamiltonianMatrix(h, cfg)


def build_h0(cfg):
    """Diagonal principal term: the J2 bonds of the right half only."""
    n = cfg.n_sites
    half = (n - 1) // 2
    couplings = np.array([0.0] * half + [cfg.j2] * half)
    return HamiltonianMatrix(np.diag(_diagonal(n, couplings, 0.0)), cfg)


def h0_order(cfg):
    """Basis permutation sorting |H0 diagonal| ascending, ties by index."""
    e0 = np.abs(np.diag(build_h0(cfg).matrix))
    return np.lexsort((np.arange(len(e0)), e0))


def to_h0_basis(h):
    p = h0_order(h.config)
    return h.matrix[np.ix_(p, p)]


def off_diagonal_weight(h):
    """Fraction of the squared Frobenius norm sitting off the diagonal."""
    m = to_h0_basis(h)
    total = float(np.sum(np.abs(m) ** 2))
    if total == 0.0:
        raise ZeroMatrix("off-diagonal weight of a zero matrix is undefined")
    diag = float(np.sum(np.abs(np.diag(m)) ** 2))
    return (total - diag) / total


def off_diagonal_weight_exact(cfg):
    """Closed form of the off-diagonal weight, valid for any configuration.

    Every Pauli string in the Hamiltonian is HS-orthogonal to the others,
    so ``||H||_F^2 = D (N hx^2 + N hz^2 + sum J_b^2)`` and only the
    transverse field contributes off the diagonal.
    """
    n = cfg.n_sites
    off = n * cfg.hx**2
    total = off + n * cfg.hz**2 + float(np.sum(cfg.bond_couplings() ** 2))
    if total == 0.0:
        raise ZeroMatrix("zero Hamiltonian")
    return off / total


def fit_alpha(cfgs, weights=None):
    """Power-law exponent alpha in ``W_off ~ J_r**-alpha``.

    Parameters
    ----------
    cfgs : list of ChainConfig
        At least five configurations sharing everything except ``j_ratio``.
    weights : array_like, optional
        Precomputed W_off values; computed from ``cfgs`` when omitted.

    Returns
    -------
    FitResult
        ``coefficients`` are those of the log-log line; ``extras['alpha']``
        is the negated slope.
    """
    if len(cfgs) < 5:
        raise ValueError("need at least five grid points")
    ref = cfgs[0]
    for c in cfgs[1:]:
        if (c.n_sites, c.j1, c.hx, c.hz) != (ref.n_sites, ref.j1, ref.hx, ref.hz):
            raise ValueError("configurations differ in more than j_ratio")
    jr = np.array([c.j_ratio for c in cfgs], dtype=float)
    if weights is None:
        weights = [off_diagonal_weight(build_hamiltonian(c)) for c in cfgs]
    fit = loglog_slope(jr, np.asarray(weights, dtype=float))
    return FitResult(fit.coefficients, fit.residual, {"alpha": -float(fit.coefficients[1])})


def extrapolate_alpha(sizes, alphas):
    """Linear fit of alpha against 1/N; returns (intercept at 1/N -> 0, FitResult)."""
    inv = 1.0 / np.asarray(sizes, dtype=float)
    fit = polyfit(inv, np.asarray(alphas, dtype=float), 1)
    return float(fit.coefficients[0]), fit


def site_operator(kind, site, n):
    """Pauli ``kind`` ('x', 'y', 'z') acting on 1-based ``site`` of an n-site chain."""
    if not 1 <= site <= n:
        raise SiteOutOfRange(f"site {site} outside 1..{n}")
    return kron_all([PAULI[kind] if k == site else PAULI["i"] for k in range(1, n + 1)])


def sigma_z_diag(site, n):
    """Diagonal of sigma^z on 1-based ``site`` as a real vector."""
    return spin_table(n)[:, site - 1].astype(float)


def pauli_string(spec, n):
    """Operator from a mapping {site: kind}, e.g. ``{1: 'x', 2: 'z'}``."""
    return kron_all([PAULI[spec.get(k, "i")] for k in range(1, n + 1)])
