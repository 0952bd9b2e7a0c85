"""Level statistics: unfolding, spacing ratio, spectral form factor, Thouless time."""

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateSpectrum,
    DegenerateSpectrumWarning,
    EmptyGrid,
    NoIntersection,
    NonPositiveTime,
)
from .numerics import FitResult, Spectrum, polyfit

__all__ = [
    "Spectrum",
    "UnfoldedSpectrum",
    "SffCurve",
    "unfold",
    "r_statistic",
    "sff",
    "sff_goe",
    "thouless_time",
    "g_metric",
    "moving_average",
]

# default relative tolerance of the sustained-overlap rule
THOULESS_THETA = 0.3


@dataclass(frozen=True)
class UnfoldedSpectrum:
    """Unfolded levels with unit mean spacing.

    ``fit`` is the cumulative-count polynomial in the rescaled variable
    ``x = 2 (E - E_min) / (E_max - E_min) - 1``; ``bounds`` holds (E_min, E_max).
    """

    epsilons: np.ndarray
    fit: FitResult
    bounds: tuple = (0.0, 1.0)

    def __len__(self):
        return len(self.epsilons)


@dataclass(frozen=True)
class SffCurve:
    """Smoothed form factor on a time grid in units of the Heisenberg time.

    ``envelope`` is the Gaussian estimate of the disconnected (filter-only)
    contribution, used to keep the Thouless search away from the early dip.
    """

    times: np.ndarray
    values: np.ndarray
    window: int
    raw: np.ndarray = None
    envelope: np.ndarray = None
    eta: float = 0.5

    def __len__(self):
        return len(self.times)


def _rescale(e):
    lo, hi = float(e[0]), float(e[-1])
    if hi == lo:
        return np.zeros_like(e), (lo, hi)
    return 2.0 * (e - lo) / (hi - lo) - 1.0, (lo, hi)


def unfold(eigs, degree=10):
    """Map levels through a smooth fit of their cumulative count.

    The polynomial is fitted in a variable rescaled to [-1, 1]; the mapped
    levels are sorted (removing polynomial wiggle) and divided by their mean
    spacing so that it equals one.
    """
    e = np.sort(np.asarray(eigs, dtype=float))
    if len(e) < degree + 2:
        raise ValueError(f"need at least {degree + 2} levels for degree {degree}")
    x, bounds = _rescale(e)
    counts = np.arange(1, len(e) + 1, dtype=float)
    fit = polyfit(x, counts, degree)
    eps = np.sort(fit(x))
    spacing = np.mean(np.diff(eps))
    return UnfoldedSpectrum(eps / spacing, fit, bounds)


def r_statistic(eigs):
    """Mean ratio of consecutive level spacings, min over max.

    Zero spacings make a ratio undefined; such pairs are dropped and a
    :class:`DegenerateSpectrumWarning` reports how many were removed.
    """
    e = np.sort(np.asarray(eigs, dtype=float))
    if len(np.unique(e)) < 3:
        raise DegenerateSpectrum("need at least three distinct levels")
    s = np.diff(e)
    a, b = s[1:], s[:-1]
    bad = (a == 0) | (b == 0)
    if np.any(bad):
        warnings.warn(
            f"dropped {int(bad.sum())} spacing pairs with a zero spacing",
            DegenerateSpectrumWarning,
            stacklevel=2,
        )
    a, b = a[~bad], b[~bad]
    if len(a) == 0:
        raise DegenerateSpectrum("no spacing pair without a zero spacing")
    return float(np.mean(np.minimum(a, b) / np.maximum(a, b)))


def moving_average(x, window):
    """Centered moving average whose window shrinks symmetrically at the edges."""
    x = np.asarray(x, dtype=float)
    if window < 1 or window % 2 == 0:
        raise ValueError("window must be a positive odd count")
    n = len(x)
    half = window // 2
    c = np.concatenate([[0.0], np.cumsum(x)])
    i = np.arange(n)
    r = np.minimum(np.minimum(i, n - 1 - i), half)
    out = (c[i + r + 1] - c[i - r]) / (2 * r + 1)
    if window == 1:
        out = x.copy()
    return out


def _filter(eps, eta):
    m = eps.mean()
    var = eps.var()
    if var == 0.0:
        return np.ones_like(eps)
    return np.exp(-((eps - m) ** 2) / (2.0 * eta**2 * var))


def sff(unfolded, t_grid, eta=0.5, window=51, chunk=2048):
    """Gaussian-filtered spectral form factor.

    Parameters
    ----------
    unfolded : UnfoldedSpectrum or array_like
        Unfolded levels.
    t_grid : array_like
        Ascending positive times in units of the Heisenberg time.
    eta : float
        Filter width relative to the standard deviation of the levels.
    window : int
        Odd width of the centered moving average, in samples.

    Returns
    -------
    SffCurve
        Normalized by the sum of squared filter weights, so the late-time
        plateau sits at one.
    """
    eps = np.asarray(getattr(unfolded, "epsilons", unfolded), dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if t.size == 0:
        raise EmptyGrid("empty time grid")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be positive and strictly ascending")
    rho = _filter(eps, eta)
    z = float(np.sum(rho**2))
    raw = np.empty(len(t))
    for k in range(0, len(t), chunk):
        tt = t[k:k + chunk]
        amp = np.exp(-2j * np.pi * np.outer(tt, eps)) @ rho
        raw[k:k + chunk] = amp.real**2 + amp.imag**2
    raw /= z
    # disconnected part of a smooth Gaussian-weighted density
    w = rho / rho.sum()
    width = np.sqrt(np.sum(w * (eps - np.sum(w * eps)) ** 2))
    env = rho.sum() ** 2 / z * np.exp(-((2 * np.pi * width * t) ** 2))
    return SffCurve(t, moving_average(raw, window), window, raw, env, eta)


def sff_goe(t):
    """Random-matrix (orthogonal ensemble) form factor, ``2t - t ln(1 + 2t)``.

    The expression holds for ``t <= 1``.
    """
    t = np.asarray(t, dtype=float)
    return 2.0 * t - t * np.log1p(2.0 * t)


def thouless_time(curve, theta=THOULESS_THETA, run=None, t_max=1.0, skip=None):
    """Start of the first sustained overlap with the random-matrix ramp.

    The overlap condition is ``|SFF - GOE| / GOE < theta`` for ``run``
    consecutive samples (default: the smoothing window). The search starts
    after ``skip`` warm-up samples (default ``window - 1``, the stretch where
    the averaging window has not yet slid past its own width) and, when the
    curve carries a filter envelope, after the filter's own decay has dropped
    below ``theta * GOE / 10``. It ends at ``t_max``.
    """
    run = curve.window if run is None else int(run)
    skip = curve.window - 1 if skip is None else int(skip)
    t = np.asarray(curve.times)
    s = np.asarray(curve.values)
    g = sff_goe(t)
    ok = np.abs(s - g) < theta * g
    start = skip
    if curve.envelope is not None:
        below = np.nonzero(curve.envelope < theta * g / 10.0)[0]
        start = max(start, int(below[0]) if len(below) else len(t))
    ok[:start] = False
    ok[t > t_max] = False
    count = 0
    for i, flag in enumerate(ok):
        count = count + 1 if flag else 0
        if count >= run:
            return float(t[i - run + 1])
    raise NoIntersection(f"no sustained overlap (theta={theta}, run={run}) before t={t_max}")


def g_metric(t_th):
    """``log10(t_H / t_Th)`` with the Heisenberg time equal to one."""
    if t_th <= 0:
        raise NonPositiveTime("Thouless time must be positive")
    return float(-np.log10(t_th))
