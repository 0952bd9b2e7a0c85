"""Heisenberg evolution, out-of-time-order correlators and commutator checks."""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, SiteOutOfRange, WindowTooSmall
from .model import ChainConfig, build_hamiltonian, pauli_string, sigma_z_diag
from .numerics import FitResult, is_hermitian, loglog_slope

# C values below this are treated as round-off when fitting
OTOC_FLOOR = 1e-24


@dataclass(frozen=True)
class OperatorMatrix:
    matrix: np.ndarray
    label: str = ""

    @property
    def dim(self):
        return self.matrix.shape[0]

    def is_hermitian(self, rtol=1e-10):
        return is_hermitian(self.matrix, rtol)


@dataclass(frozen=True)
class OtocSeries:
    """C(d, t) samples for the pair of sites (i, j), ``d = |i - j|``."""

    d: int
    times: np.ndarray
    values: np.ndarray
    config: ChainConfig = None
    sites: tuple = (1, 1)


def _n_sites(dim):
    n = int(round(math.log2(dim)))
    if 2**n != dim:
        raise DimensionMismatch(f"dimension {dim} is not a power of two")
    return n


def _matrix(op):
    return np.asarray(getattr(op, "matrix", op))


def evolve_operator(op, spec, t):
    """``O(t) = exp(iHt) O exp(-iHt)`` from the eigendecomposition ``spec``."""
    m = _matrix(op)
    v = spec.eigenvectors
    if m.shape != (spec.dim, spec.dim):
        raise DimensionMismatch(f"operator shape {m.shape} vs dimension {spec.dim}")
    ph = np.exp(1j * spec.eigenvalues * t)
    mt = v @ ((ph[:, None] * (v.T @ m @ v)) * ph.conj()[None, :]) @ v.T
    return OperatorMatrix(mt, getattr(op, "label", ""))


class _OtocKernel:
    """Precomputed pieces for C(t) between sigma^z_i and sigma^z_j(t).

    ``C = ||[W(t), V]||_F^2 / (2D)`` with ``W = sigma^z_j``, ``V = sigma^z_i``.
    For operators squaring to one this equals ``1 - Re tr(W V W V) / D``
    without the cancellation between two numbers close to one, so values down
    to about 1e-28 stay meaningful.
    """

    def __init__(self, spec, i, j):
        d = spec.dim
        n = _n_sites(d)
        for s in (i, j):
            if not 1 <= s <= n:
                raise SiteOutOfRange(f"site {s} outside 1..{n}")
        self.spec = spec
        self.v = spec.eigenvectors
        zj = sigma_z_diag(j, n)
        self.w_eig = (self.v.T * zj) @ self.v
        zi = sigma_z_diag(i, n)
        # entries where sigma^z_i differs between row and column
        self.mask = zi[:, None] != zi[None, :]
        self.dim = d

    def __call__(self, t):
        ph = np.exp(1j * self.spec.eigenvalues * t)
        wt = self.v @ ((ph[:, None] * self.w_eig) * ph.conj()[None, :]) @ self.v.T
        off = np.abs(wt[self.mask]) ** 2
        return 2.0 * float(off.sum()) / self.dim


def otoc(spec, i, j, t):
    """Infinite-temperature OTOC of sigma^z on 1-based sites i and j."""
    return _OtocKernel(spec, i, j)(t)


def otoc_series(spec, i, j, t_grid, config=None):
    kern = _OtocKernel(spec, i, j)
    t = np.asarray(t_grid, dtype=float)
    vals = np.array([kern(x) for x in t])
    return OtocSeries(abs(i - j), t, vals, config, (i, j))


def saturation_value(series, decades=1.0):
    """Mean and standard deviation of C over the last ``decades`` of the grid."""
    t = np.asarray(series.times)
    sel = t >= t.max() / 10**decades
    vals = np.asarray(series.values)[sel]
    return float(vals.mean()), float(vals.std())


def growth_power(d):
    """Leading exponent 2(2d+1) of the early-time OTOC."""
    return 2 * (2 * d + 1)


def fit_kappa(series, c_sat=1.0, rel=1e-3, floor=OTOC_FLOOR, min_points=10, d=None,
              next_tol=0.01):
    """Single-parameter fit of ``C = kappa * t**p / (p/2)!`` with ``p = 2(2d+1)``.

    Candidate samples satisfy ``floor < C < rel * c_sat``. The size of the
    next-order term is estimated from ``log C - p log t ~ c + a t**2`` and the
    window is trimmed to ``|a| t**2 < next_tol``; if that leaves fewer than
    ``min_points`` samples, the ``min_points`` earliest candidates are used and
    the result is flagged. kappa minimizes the squared log-residuals.

    Returns
    -------
    FitResult
        ``coefficients = [kappa]``. ``extras`` carries the free log-log slope
        over the window, the next-order coefficient ``a``, its relative size
        at the window's upper edge and the flag ``next_order_ok``.
    """
    d = series.d if d is None else d
    p = growth_power(d)
    m = p // 2
    t = np.asarray(series.times, dtype=float)
    c = np.asarray(series.values, dtype=float)
    sel = (t > 0) & (c > floor) & (c < rel * c_sat)
    if sel.sum() < min_points:
        raise WindowTooSmall(f"{int(sel.sum())} usable points, need {min_points}")
    t, c = t[sel], c[sel]
    y = np.log(c) - p * np.log(t)
    a = float(np.linalg.lstsq(np.column_stack([np.ones_like(t), t**2]), y, rcond=None)[0][1])
    keep = np.abs(a) * t**2 < next_tol
    if keep.sum() < min_points:
        keep = np.zeros(len(t), dtype=bool)
        keep[np.argsort(t)[:min_points]] = True
    t, c, y = t[keep], c[keep], y[keep]
    kappa = float(np.exp(np.mean(y) + math.lgamma(m + 1)))
    model = kappa * t**p / math.factorial(m)
    slope = float(loglog_slope(t, c).coefficients[1]) if np.ptp(t) > 0 else float("nan")
    next_ratio = abs(a) * float(t.max()) ** 2
    extras = {
        "power": p,
        "slope": slope,
        "window": (float(t.min()), float(t.max())),
        "points": int(len(t)),
        "next_order_coefficient": a,
        "next_order_ratio": next_ratio,
        "next_order_ok": bool(next_ratio < next_tol),
    }
    return FitResult(np.array([kappa]), float(np.sqrt(np.mean((c - model) ** 2))), extras)


def fit_kappa_scaling(j_ratios, kappas, power=4):
    """Fit ``kappa = b * J_r**power`` in log space; returns FitResult with ``[b]``.

    ``extras['free_power']`` is the exponent of an unconstrained power law.
    """
    jr = np.asarray(j_ratios, dtype=float)
    k = np.asarray(kappas, dtype=float)
    b = float(np.exp(np.mean(np.log(k) - power * np.log(jr))))
    extras = {"power": power}
    if len(jr) >= 2 and np.ptp(jr) > 0:
        free = loglog_slope(jr, k)
        extras["free_power"] = float(free.coefficients[1])
        extras["free_prefactor"] = float(10 ** free.coefficients[0])
    resid = k - b * jr**power
    return FitResult(np.array([b]), float(np.sqrt(np.mean(resid**2))), extras)


def commutator(a, b):
    return a @ b - b @ a


def leading_kappa(cfg, i, j, max_order=None):
    """Exact leading-order OTOC coefficient from nested commutators.

    Returns ``(order, kappa)`` where ``order`` is the first ``m`` with
    ``[ad_H^m sigma^z_j, sigma^z_i] != 0`` and kappa matches the
    single-factorial form ``C ~ kappa t**(2m) / m!``.
    """
    n = cfg.n_sites
    h = build_hamiltonian(cfg).matrix
    w = np.diag(sigma_z_diag(j, n)).astype(complex)
    zi = sigma_z_diag(i, n)
    mask = zi[:, None] != zi[None, :]
    d = 2**n
    max_order = 2 * n + 1 if max_order is None else max_order
    a = w
    for m in range(1, max_order + 1):
        a = commutator(h, a)
        off = float(np.sum(np.abs(a[mask]) ** 2))
        scale = float(np.sum(np.abs(a) ** 2))
        if off > 1e-20 * max(scale, 1.0):
            return m, 2.0 * off / d / math.factorial(m)
    return None, 0.0


@dataclass
class BchReport:
    """Maximum entrywise deviation of each nested commutator from its closed form."""

    deviations: dict = field(default_factory=dict)
    tol: float = 1e-12

    @property
    def passed(self):
        return all(v < self.tol for v in self.deviations.values())

    def lines(self):
        out = []
        for k in sorted(self.deviations):
            v = self.deviations[k]
            out.append(f"order {k}: max deviation {v:.3e} {'ok' if v < self.tol else 'FAIL'}")
        return out


def bch_closed_forms(cfg):
    """Closed forms of ad_H^k(sigma^z_1), k = 1, 2, 3, for the three-site chain."""
    n = cfg.n_sites
    hx, hz, j1 = cfg.hx, cfg.hz, cfg.j1

    def p(spec):
        return pauli_string(spec, n)

    one = 2j * hx * p({1: "y"})
    two = 4 * hx**2 * p({1: "z"}) - 4 * hx * hz * p({1: "x"}) - 4 * j1 * hx * p({1: "x", 2: "z"})
    three = (
        8j * hx * (j1**2 + hx**2 + hz**2) * p({1: "y"})
        - 8j * j1 * hx**2 * p({1: "x", 2: "y"})
        + 16j * j1 * hx * hz * p({1: "y", 2: "z"})
    )
    return {1: one, 2: two, 3: three}


def verify_bch_commutators(cfg, tol=1e-12):
    """Compare numerically nested commutators of sigma^z_1 with their closed forms."""
    if cfg.n_sites != 3:
        raise ValueError("the closed forms are written for three sites")
    h = build_hamiltonian(cfg).matrix.astype(complex)
    a = pauli_string({1: "z"}, 3)
    forms = bch_closed_forms(cfg)
    report = BchReport(tol=tol)
    for k in (1, 2, 3):
        a = commutator(h, a)
        report.deviations[k] = float(np.max(np.abs(a - forms[k])))
    return report
