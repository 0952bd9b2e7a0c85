"""Operator-space Krylov machinery: Arnoldi basis, complexity, IPR and spread.

The recursion runs in the energy eigenbasis of H, where the Liouvillian
``L(O) = [H, O]`` is diagonal: ``L(O)_ab = (E_a - E_b) O_ab``. Entries with
equal gaps form invariant blocks. Inside each block the Krylov space of the
seed is spanned by the seed's own component, so every new vector is projected
onto those directions. This removes the round-off leakage into directions the
exact recursion never reaches, which otherwise inflates K past its true value.
"""

import os
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateSpectrumWarning,
    DimensionMismatch,
    NotNormalized,
    SequenceTooShort,
    ZeroOperator,
)
from .model import sigma_z_diag
from .numerics import eigh_symmetric, haar_qubit_unitary, kron_all, make_rng

KRYV_MAGIC = b"KRYV"
KRYV_VERSION = 1
KRYV_HEADER = struct.Struct("<4sIII")

# relative tolerance for treating two energy gaps as equal
GAP_RTOL = 1e-9


@dataclass(frozen=True)
class HsVector:
    """Operator viewed as a vector with ``<A|B> = tr(A^dag B) / D``."""

    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.matrix) ** 2) / self.dim))

    def normalized(self):
        nrm = self.norm
        if nrm == 0.0:
            raise ZeroOperator("cannot normalize the zero operator")
        return HsVector(self.matrix / nrm)


def _as_matrix(o):
    return np.asarray(getattr(o, "matrix", o))


def hs_inner(a, b):
    a = _as_matrix(a)
    b = _as_matrix(b)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes {a.shape} and {b.shape} differ")
    return complex(np.vdot(a, b) / a.shape[0])


def hs_norm(a):
    return float(np.sqrt(hs_inner(a, a).real))


def liouvillian(h, o):
    hm = _as_matrix(h)
    om = _as_matrix(o)
    if hm.shape != om.shape:
        raise DimensionMismatch(f"shapes {hm.shape} and {om.shape} differ")
    return HsVector(hm @ om - om @ hm)


def gap_groups(energies, rtol=GAP_RTOL):
    """Label the D*D pairs (a, b) by their gap ``E_a - E_b``.

    Gaps closer than ``rtol * max(1, max|E|)`` share a label. Returns the
    flattened gaps, the label per pair and the number of labels.
    """
    e = np.asarray(energies, dtype=float)
    w = (e[:, None] - e[None, :]).ravel()
    scale = max(1.0, float(np.max(np.abs(e)))) if len(e) else 1.0
    order = np.argsort(w, kind="stable")
    ws = w[order]
    starts = np.concatenate([[0], np.nonzero(np.diff(ws) > rtol * scale)[0] + 1])
    sizes = np.diff(np.append(starts, len(w)))
    gid = np.empty(len(w), dtype=np.int64)
    gid[order] = np.repeat(np.arange(len(starts)), sizes)
    return w, gid, len(starts)


def _group_sum(gid, values, ngroups):
    return np.bincount(gid, values.real, minlength=ngroups) + 1j * np.bincount(
        gid, values.imag, minlength=ngroups
    )


@dataclass
class KrylovDecomposition:
    """Orthonormal Krylov basis and Arnoldi coefficients.

    ``coords[n]`` holds basis vector n flattened in the energy eigenbasis,
    i.e. ``V^T W_n V`` with ``V = eigenvectors``; ``basis_vector`` maps it back
    to the computational basis. ``b[0]`` is the norm of the seed.
    """

    b: np.ndarray
    coords: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gaps: np.ndarray = field(repr=False, default=None)
    groups: np.ndarray = field(repr=False, default=None)
    n_groups: int = 0
    reason: str = ""

    @property
    def dim(self):
        return len(self.b)

    @property
    def hilbert_dim(self):
        return len(self.eigenvalues)

    def basis_vector(self, n):
        d = self.hilbert_dim
        v = self.eigenvectors
        return HsVector(v @ np.asarray(self.coords[n]).reshape(d, d) @ v.T)

    @property
    def basis(self):
        return [self.basis_vector(n) for n in range(self.dim)]

    def gram_defect(self):
        """``max |<W_i|W_j> - delta_ij|`` over the whole basis."""
        d = self.hilbert_dim
        c = np.asarray(self.coords)
        g = (c.conj() @ c.T) / d
        return float(np.max(np.abs(g - np.eye(len(c)))))

    def liouvillian_element(self, m, n):
        """``<W_m | L(W_n)>``."""
        d = self.hilbert_dim
        return complex(np.vdot(self.coords[m], self.gaps * self.coords[n]) / d)


def krylov_bound(dim):
    """Upper bound ``D^2 - D + 1`` on the Krylov dimension."""
    return dim * dim - dim + 1


def memory_estimate(dim, k=None):
    """Bytes needed to hold ``k`` basis vectors plus working arrays."""
    k = krylov_bound(dim) if k is None else k
    return int((k + 8) * dim * dim * 16)


def write_kryv_header(fh, dim, k):
    fh.write(KRYV_HEADER.pack(KRYV_MAGIC, KRYV_VERSION, dim, k))


def open_kryv(path, dim=None, k=None, mode="r"):
    """Memory-map a scratch file of basis vectors.

    Layout: ``b"KRYV"``, then little-endian u32 version, D and K, then K
    contiguous records of D*D complex128 values. Records hold the basis in
    the energy eigenbasis of the Hamiltonian that produced them.

    With ``mode="w+"`` a new file sized for ``k`` records is created.
    """
    if mode == "w+":
        with open(path, "wb") as fh:
            write_kryv_header(fh, dim, k)
            fh.truncate(KRYV_HEADER.size + k * dim * dim * 16)
        return np.memmap(path, dtype="<c16", mode="r+", offset=KRYV_HEADER.size,
                         shape=(k, dim * dim))
    with open(path, "rb") as fh:
        magic, version, dim, k = KRYV_HEADER.unpack(fh.read(KRYV_HEADER.size))
    if magic != KRYV_MAGIC:
        raise ValueError(f"{path} is not a KRYV file")
    if version != KRYV_VERSION:
        raise ValueError(f"unsupported KRYV version {version}")
    return np.memmap(path, dtype="<c16", mode=mode, offset=KRYV_HEADER.size,
                     shape=(k, dim * dim))


def _finish_kryv(path, dim, k):
    with open(path, "r+b") as fh:
        write_kryv_header(fh, dim, k)
        fh.truncate(KRYV_HEADER.size + k * dim * dim * 16)


def arnoldi(h, o, tol=1e-10, max_k=None, spec=None, scratch=None):
    """Krylov basis of ``o`` under the Liouvillian of ``h``.

    Parameters
    ----------
    h : HamiltonianMatrix or ndarray
        Real-symmetric Hamiltonian.
    o : HsVector or ndarray
        Seed operator (computational basis).
    tol : float
        Stop once ``b_n <= tol * b_0``.
    max_k : int, optional
        Cap on the basis size; defaults to ``D^2 - D + 1``.
    spec : Spectrum, optional
        Eigendecomposition of ``h``; computed if omitted.
    scratch : path, optional
        Stream basis vectors to a KRYV file instead of RAM.

    Returns
    -------
    KrylovDecomposition
    """
    hm = _as_matrix(h)
    om = _as_matrix(o).astype(complex)
    if hm.shape != om.shape:
        raise DimensionMismatch(f"shapes {hm.shape} and {om.shape} differ")
    if spec is None:
        spec = eigh_symmetric(hm)
    d = spec.dim
    v = spec.eigenvectors
    seed = (v.T @ om @ v).ravel()
    b0 = float(np.sqrt(np.vdot(seed, seed).real / d))
    if b0 == 0.0:
        raise ZeroOperator("seed operator has zero norm")
    w, gid, ngroups = gap_groups(spec.eigenvalues)
    gnorm = np.sqrt(np.bincount(gid, np.abs(seed) ** 2, minlength=ngroups))
    live = gnorm > 0
    safe = np.where(live, gnorm, 1.0)
    u = np.where(live[gid], seed / safe[gid], 0.0)
    uc = u.conj()

    def project(x):
        return _group_sum(gid, uc * x, ngroups)[gid] * u

    cap = krylov_bound(d) if max_k is None else int(max_k)
    cap = max(1, min(cap, int(live.sum())))
    if scratch is not None:
        basis = open_kryv(scratch, d, cap, mode="w+")
    else:
        basis = np.zeros((cap, d * d), dtype=complex)
    basis[0] = seed / b0
    bs = [b0]
    k = 1
    reason = "exhausted"
    while k < cap:
        x = project(w * basis[k - 1])
        for _ in range(2):
            c = np.conj(basis[:k] @ x.conj()) / d
            x = project(x - c @ basis[:k])
        bn = float(np.sqrt(np.vdot(x, x).real / d))
        if bn <= tol * b0:
            reason = "tolerance"
            break
        bs.append(bn)
        basis[k] = x / bn
        k += 1
    else:
        reason = "max_k" if max_k is not None and k == max_k else "exhausted"
    if scratch is not None:
        basis.flush()
        del basis
        _finish_kryv(scratch, d, k)
        coords = open_kryv(scratch)
    else:
        coords = basis[:k].copy()
    return KrylovDecomposition(
        np.array(bs), coords, spec.eigenvalues, v, w, gid, ngroups, reason
    )


def evolved_coords(dec, t):
    """Normalized seed evolved to time ``t``, flattened in the eigenbasis."""
    return np.asarray(dec.coords[0]) * np.exp(1j * dec.gaps * t)


def krylov_amplitudes(o_t, dec):
    """``phi_n = <W_n | O(t)>`` for an operator given in the computational basis.

    Returns the amplitudes and the completeness defect ``1 - sum |phi_n|^2``
    (relative to the HS norm of ``o_t``).
    """
    m = _as_matrix(o_t)
    d = dec.hilbert_dim
    if m.shape != (d, d):
        raise DimensionMismatch(f"operator shape {m.shape} vs dimension {d}")
    v = dec.eigenvectors
    x = (v.T @ m @ v).ravel()
    phis = np.conj(np.asarray(dec.coords) @ x.conj()) / d
    nrm = np.vdot(x, x).real / d
    return phis, float(1.0 - np.sum(np.abs(phis) ** 2) / nrm)


def amplitudes_at(dec, times):
    """Amplitudes of the evolved normalized seed; array of shape (len(times), K)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    d = dec.hilbert_dim
    basis = np.asarray(dec.coords)
    out = np.empty((len(times), dec.dim), dtype=complex)
    for i, t in enumerate(times):
        x = evolved_coords(dec, t)
        out[i] = np.conj(basis @ x.conj()) / d
    return out


def _check_norm(phis, tol=1e-6):
    total = float(np.sum(np.abs(phis) ** 2))
    if abs(total - 1.0) > tol:
        raise NotNormalized(f"sum |phi|^2 = {total:.12g}")
    return total


def krylov_complexity(phis):
    phis = np.asarray(phis)
    _check_norm(phis)
    return float(np.sum(np.arange(len(phis)) * np.abs(phis) ** 2))


def spread_measure(phis, k_max=None):
    """``1 / (K sum |phi_n|^4)``, between 1/K and 1."""
    phis = np.asarray(phis)
    _check_norm(phis)
    k = len(phis) if k_max is None else int(k_max)
    return float(1.0 / (k * np.sum(np.abs(phis) ** 4)))


@dataclass(frozen=True)
class ComplexityCurve:
    times: np.ndarray
    kc: np.ndarray
    final_amplitudes: np.ndarray
    defects: np.ndarray

    @property
    def max_defect(self):
        return float(np.max(np.abs(self.defects)))


def complexity_curve(dec, times):
    """K_C(t) with the completeness defect at every sample."""
    times = np.asarray(times, dtype=float)
    idx = np.arange(dec.dim)
    kc = np.empty(len(times))
    defects = np.empty(len(times))
    last = None
    for i, t in enumerate(times):
        phis = amplitudes_at(dec, [t])[0]
        p2 = np.abs(phis) ** 2
        defects[i] = 1.0 - p2.sum()
        kc[i] = float(idx @ p2)
        last = phis
    return ComplexityCurve(times, kc, last, defects)


def ipr(o, spec):
    """Diagonal weight of an operator in the energy eigenbasis.

    The operator is HS-normalized first; the sum of squared diagonal elements
    is divided by D so that the normalized identity gives one.
    """
    m = _as_matrix(o)
    if m.shape != (spec.dim, spec.dim):
        raise DimensionMismatch(f"operator shape {m.shape} vs dimension {spec.dim}")
    nrm = hs_norm(m)
    if nrm == 0.0:
        raise ZeroOperator("IPR of the zero operator")
    v = spec.eigenvectors
    diag = np.einsum("ia,ij,ja->a", v.conj(), m / nrm, v)
    return float(np.sum(np.abs(diag) ** 2) / spec.dim)


@dataclass(frozen=True)
class TimeAverage:
    value: float
    weights: np.ndarray
    degenerate_groups: int


def time_averaged_complexity(o, spec, dec):
    """Infinite-time average of K_C from energy-eigenbasis matrix elements.

    Phases of pairs with different gaps average out; pairs sharing a gap
    (always the diagonal, plus any exact gap coincidences) add coherently,
    which keeps ``sum_n |phi_bar_n|^2 = 1`` exact.
    """
    m = _as_matrix(o)
    d = spec.dim
    v = spec.eigenvectors
    x = (v.T @ m @ v).ravel()
    x = x / np.sqrt(np.vdot(x, x).real / d)
    w, gid, ngroups = gap_groups(spec.eigenvalues)
    sizes = np.bincount(gid, minlength=ngroups)
    zero = gid[0]  # the (0, 0) pair has zero gap
    extra = int(np.sum(sizes > 1)) - 1
    if extra > 0 or sizes[zero] > d:
        warnings.warn(
            f"{extra} gap groups beyond the diagonal share a gap; summed coherently",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    basis = np.asarray(dec.coords)
    weights = np.empty(dec.dim)
    for n in range(dec.dim):
        s = _group_sum(gid, basis[n].conj() * x, ngroups) / d
        weights[n] = float(np.sum(np.abs(s) ** 2))
    value = float(np.arange(dec.dim) @ weights)
    return TimeAverage(value, weights, max(extra, 0))


@dataclass(frozen=True)
class Dispersion:
    sigma: float
    inverse: float
    n0: int
    w: int
    scaled: bool


def bn_dispersion(b, n0=100, w=400, auto_scale=True):
    """Spread of ``b_n`` about a centered moving average.

    The local average is ``(1 / 2w) sum_{m=n-w}^{n+w-1} b_m`` and the variance
    is averaged over ``max(n0, w) <= n <= len(b) - w``. When the sequence is
    shorter than 1000 and ``auto_scale`` is set, ``n0 = 10`` and ``w = 40``.
    """
    b = np.asarray(b, dtype=float)
    scaled = False
    if auto_scale and len(b) < 1000 and (n0, w) == (100, 400):
        n0, w = 10, 40
        scaled = True
    if len(b) <= n0 + 2 * w:
        raise SequenceTooShort(f"need more than {n0 + 2 * w} coefficients, got {len(b)}")
    c = np.concatenate([[0.0], np.cumsum(b)])
    n = np.arange(max(n0, w), len(b) - w + 1)
    local = (c[n + w] - c[n - w]) / (2 * w)
    var = float(np.mean((b[n] - local) ** 2))
    sigma = float(np.sqrt(var))
    return Dispersion(sigma, float(np.inf) if sigma == 0 else 1.0 / sigma, n0, w, scaled)


def seed_operator(kind, n):
    """HS-normalized sigma^z sums: ``"O1"`` on sites 1 and N, ``"O2"`` on 1 and (N-1)/2."""
    other = {"O1": n, "O2": (n - 1) // 2}[kind]
    diag = sigma_z_diag(1, n) + sigma_z_diag(other, n)
    return HsVector(np.diag(diag).astype(complex)).normalized()


def random_product_operator(n, seed=None):
    """Tensor product of ``n`` independent Haar qubit unitaries, HS-normalized."""
    rng = make_rng(seed)
    u = kron_all([haar_qubit_unitary(rng) for _ in range(n)])
    return HsVector(u).normalized()


def scratch_path(directory, tag):
    return os.path.join(directory, f"{tag}.kryv")
