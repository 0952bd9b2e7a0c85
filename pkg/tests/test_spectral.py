import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import levels
from ergokit.errors import (
    DegenerateSpectrum,
    DegenerateSpectrumWarning,
    EmptyGrid,
    NoIntersection,
    NonPositiveTime,
)
from ergokit.spectral import (
    SffCurve,
    g_metric,
    moving_average,
    r_statistic,
    sff,
    sff_goe,
    thouless_time,
    unfold,
)


def test_unfold_uniform():
    u = unfold(np.arange(100.0))
    assert abs(np.mean(np.diff(u.epsilons)) - 1) < 1e-12
    assert np.allclose(u.epsilons - u.epsilons[0], np.arange(100), atol=1e-6)


def test_unfold_gaussian_levels(rng):
    u = unfold(np.sort(rng.standard_normal(2000)))
    assert abs(np.mean(np.diff(u.epsilons)) - 1) < 1e-6
    assert np.all(np.diff(u.epsilons) >= 0)


@given(st.floats(0.01, 100), st.floats(-1000, 1000))
@settings(max_examples=20, deadline=None)
def test_unfold_affine_invariance(a, b):
    e = np.sort(np.random.default_rng(1).standard_normal(300))
    u1 = unfold(e).epsilons
    u2 = unfold(a * e + b).epsilons
    assert np.max(np.abs((u1 - u1[0]) - (u2 - u2[0]))) < 1e-6


def test_unfold_hamiltonian_levels():
    u = unfold(levels(9, 1.0))
    assert abs(np.mean(np.diff(u.epsilons)) - 1) < 1e-6


def test_r_uniform_and_affine(rng):
    assert r_statistic(np.arange(50.0)) == 1.0
    e = np.sort(rng.standard_normal(500))
    assert abs(r_statistic(e) - r_statistic(3.5 * e - 7)) < 1e-12


def test_r_poisson(rng):
    e = np.cumsum(rng.exponential(size=100_000))
    assert abs(r_statistic(e) - 0.386) < 0.005


def test_r_degenerate():
    e = np.array([0.0, 1.0, 1.0, 2.5, 3.0, 4.2])
    with pytest.warns(DegenerateSpectrumWarning):
        r = r_statistic(e)
    assert 0 < r <= 1
    with pytest.raises(DegenerateSpectrum):
        r_statistic([1.0, 1.0, 2.0])


def test_r_ergodic_vs_constrained():
    assert r_statistic(levels(9, 1.05)) > r_statistic(levels(9, 5.0))


def test_sff_single_level():
    c = sff(np.array([0.3]), np.linspace(0.1, 5, 30), window=5)
    assert np.allclose(c.values, 1.0)


def test_sff_window_one_is_raw(rng):
    u = unfold(np.sort(rng.standard_normal(400)))
    c = sff(u, np.linspace(0.01, 3, 500), window=1)
    assert np.array_equal(c.values, c.raw)
    assert np.all(c.raw >= 0)


def test_sff_plateau_near_one():
    u = unfold(levels(9, 1.05))
    c = sff(u, np.linspace(1e-6, 100, 20_000))
    tail = c.values[-len(c) // 20:]
    assert abs(tail.mean() - 1) < 0.2


def test_sff_errors():
    with pytest.raises(EmptyGrid):
        sff(np.arange(20.0), [])


def test_moving_average_edges():
    x = np.arange(10.0)
    assert np.allclose(moving_average(x, 3), x)
    y = np.array([0, 0, 9, 0, 0.0])
    assert np.allclose(moving_average(y, 5), [0, 3, 9 / 5, 3, 0])


def test_sff_goe_values():
    assert sff_goe(1e-12) < 1e-11
    assert np.isclose(sff_goe(0.5), 1 - 0.5 * np.log(2))
    assert np.isclose(sff_goe(1.0), 2 - np.log(3))
    assert np.isclose(sff_goe(0.5), 0.6534, atol=1e-4)


def test_thouless_on_exact_goe():
    t = np.linspace(1e-3, 1, 1000)
    curve = SffCurve(t, sff_goe(t), window=1)
    assert thouless_time(curve) == t[0]


def test_thouless_no_intersection():
    t = np.linspace(1e-3, 2, 1000)
    with pytest.raises(NoIntersection):
        thouless_time(SffCurve(t, 5 + 0 * t, window=11))


def _synthetic_sff(eps, t):
    return thouless_time(sff(unfold(eps), t, window=51))


def test_thouless_goe_before_poisson():
    rng = np.random.default_rng(5)
    t = np.linspace(1e-6, 2, 2000)
    goe, poi = [], []
    for _ in range(20):
        a = rng.standard_normal((400, 400))
        goe.append(_synthetic_sff(np.linalg.eigvalsh(a + a.T), t))
        try:
            poi.append(_synthetic_sff(np.sort(rng.uniform(0, 400, 400)), t))
        except NoIntersection:
            poi.append(1.0)
    assert np.mean(goe) < np.mean(poi)


def test_g_metric():
    assert g_metric(1.0) == 0.0
    assert np.isclose(g_metric(0.1), 1.0)
    with pytest.raises(NonPositiveTime):
        g_metric(0.0)


def test_no_warnings_on_clean_spectrum(rng):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        r_statistic(np.sort(rng.standard_normal(100)))
