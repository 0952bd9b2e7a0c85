"""Dense linear-algebra kernels and fitting helpers shared by the other modules."""

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    IllConditioned,
    NoConvergence,
    NonPositiveInput,
    NonSymmetric,
)

# condition-number cap on the normal equations of a least-squares fit
NORMAL_COND_LIMIT = 1e12


def make_rng(seed=None):
    """Return a PCG64-backed generator; passes an existing Generator through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(seed))


def kron(a, b):
    """Kronecker product of two 2-D arrays.

    ``result[i*b.rows + k, j*b.cols + l] == a[i, j] * b[k, l]``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError("kron expects two matrices")
    return np.kron(a, b)


def kron_all(factors):
    out = np.ones((1, 1))
    for f in factors:
        out = np.kron(out, f)
    return out


def max_abs(m):
    return float(np.max(np.abs(m))) if np.size(m) else 0.0


def is_hermitian(m, rtol=1e-12):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        return False
    scale = max_abs(m)
    if scale == 0.0:
        return True
    return max_abs(m - m.conj().T) < rtol * scale


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and the matching orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return len(self.eigenvalues)

    def to_eigenbasis(self, op):
        """Matrix elements ``V^† op V``."""
        v = self.eigenvectors
        return v.conj().T @ op @ v

    def from_eigenbasis(self, op):
        v = self.eigenvectors
        return v @ op @ v.conj().T


def _check_symmetric(m):
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise NonSymmetric(f"expected a square matrix, got shape {m.shape}")
    if np.iscomplexobj(m):
        if max_abs(m.imag) >= 1e-12:
            raise NonSymmetric("matrix has non-negligible imaginary part")
        m = m.real
    m = np.ascontiguousarray(m, dtype=float)
    scale = max_abs(m)
    if scale > 0 and max_abs(m - m.T) >= 1e-12 * scale:
        raise NonSymmetric("matrix is not symmetric")
    return m


def householder_tridiagonalize(a):
    """Reduce a real symmetric matrix to tridiagonal form.

    Returns ``(d, e, q)`` with ``q.T @ a @ q`` tridiagonal, diagonal ``d`` and
    sub-diagonal ``e`` (``len(e) == n - 1``).
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    q = np.eye(n)
    for k in range(n - 2):
        x = a[k + 1:, k]
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            continue
        if x[0] > 0:
            alpha = -alpha
        v = x.copy()
        v[0] -= alpha
        vnorm = np.linalg.norm(v)
        if vnorm == 0.0:
            continue
        v /= vnorm
        # two-sided reflection on the trailing block
        sub = a[k + 1:, k:]
        sub -= 2.0 * np.outer(v, v @ sub)
        sub = a[k:, k + 1:]
        sub -= 2.0 * np.outer(sub @ v, v)
        q[:, k + 1:] -= 2.0 * np.outer(q[:, k + 1:] @ v, v)
    d = np.diag(a).copy()
    e = np.diag(a, -1).copy()
    return d, e, q


def tridiagonal_ql(d, e, z=None, max_iter=60):
    """Implicit-shift QL iteration on a symmetric tridiagonal matrix.

    ``z`` holds the accumulated transform (identity if omitted); its columns
    become the eigenvectors. Output is sorted ascending.
    """
    d = np.array(d, dtype=float)
    n = len(d)
    e = np.append(np.array(e, dtype=float), 0.0)
    z = np.eye(n) if z is None else np.array(z, dtype=float)
    for l in range(n):
        it = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= np.finfo(float).eps * dd:
                    break
                m += 1
            if m == l:
                break
            if it == max_iter:
                raise NoConvergence(f"QL iteration stalled at index {l}")
            it += 1
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = np.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + np.copysign(r, g))
            s = c = 1.0
            p = 0.0
            i = m - 1
            while i >= l:
                f = s * e[i]
                b = c * e[i]
                r = np.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                zi = z[:, i].copy()
                z[:, i] = c * zi - s * z[:, i + 1]
                z[:, i + 1] = s * zi + c * z[:, i + 1]
                i -= 1
            else:
                d[l] -= p
                e[l] = g
                e[m] = 0.0
                continue
            if r == 0.0 and i >= l:
                continue
    order = np.argsort(d, kind="stable")
    return d[order], z[:, order]


def eigh_symmetric(m, method="lapack", vectors=True):
    """Full eigendecomposition of a real-symmetric matrix.

    Parameters
    ----------
    m : array_like
        Square matrix; a complex input is accepted only if its imaginary part
        is below 1e-12.
    method : {"lapack", "householder"}
        ``"lapack"`` calls the LAPACK driver through numpy. ``"householder"``
        runs the in-package tridiagonalization followed by implicit QL; it is
        slow in pure Python and meant for small matrices and cross-checks.
    vectors : bool
        If False, only eigenvalues are computed and ``eigenvectors`` is None.

    Returns
    -------
    Spectrum
    """
    a = _check_symmetric(m)
    if method == "lapack":
        try:
            if vectors:
                w, v = np.linalg.eigh(a)
            else:
                w, v = np.linalg.eigvalsh(a), None
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(str(exc)) from exc
        return Spectrum(w, v)
    if method == "householder":
        d, e, q = householder_tridiagonalize(a)
        w, v = tridiagonal_ql(d, e, q)
        return Spectrum(w, v if vectors else None)
    raise ValueError(f"unknown method {method!r}")


@dataclass(frozen=True)
class FitResult:
    """Polynomial least-squares fit, coefficients lowest degree first."""

    coefficients: np.ndarray
    residual: float
    extras: dict = field(default_factory=dict, compare=False)

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.coefficients)


def polyfit(xs, ys, degree):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise ValueError("xs and ys must be 1-D and of equal length")
    if len(xs) < degree + 1:
        raise ValueError(f"need at least {degree + 1} points for degree {degree}")
    if degree > 0 and np.all(xs == xs[0]):
        raise ValueError("xs are all equal")
    vander = np.polynomial.polynomial.polyvander(xs, degree)
    cond = np.linalg.cond(vander)
    if not np.isfinite(cond) or cond**2 > NORMAL_COND_LIMIT:
        raise IllConditioned(
            f"normal-equation condition {cond**2:.3g} exceeds {NORMAL_COND_LIMIT:g}; rescale xs"
        )
    coef, *_ = np.linalg.lstsq(vander, ys, rcond=None)
    resid = ys - vander @ coef
    return FitResult(coef, float(np.sqrt(np.mean(resid**2))))


def loglog_slope(xs, ys):
    """Straight-line fit of log10(ys) against log10(xs).

    ``coefficients[1]`` is the power-law exponent.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise NonPositiveInput("log-log fit needs strictly positive data")
    if len(xs) < 2:
        raise ValueError("need at least two points")
    return polyfit(np.log10(xs), np.log10(ys), 1)


def haar_unitary(dim, seed=None):
    """Haar-random unitary via QR of a complex Ginibre matrix with phase fix."""
    rng = make_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def haar_qubit_unitary(seed=None):
    return haar_unitary(2, seed)
