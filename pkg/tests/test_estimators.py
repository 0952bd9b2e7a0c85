import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from conftest import levels
from ergokit.estimators import PowerLawFit, SpectralFormFactor, SpectralUnfolder
from ergokit.spectral import r_statistic, sff, unfold


def test_unfolder_matches_function():
    e = levels(7, 1.05)
    est = SpectralUnfolder().fit(e)
    eps = est.transform(e)
    ref = unfold(e).epsilons
    assert np.max(np.abs((eps - eps[0]) - (ref - ref[0]))) < 1e-9
    assert abs(np.mean(np.diff(eps)) - 1) < 1e-6
    assert est.r_ == r_statistic(e)
    assert np.allclose(SpectralUnfolder().fit_transform(e[:, None]), eps)


def test_unfolder_params_and_errors():
    est = SpectralUnfolder(degree=6)
    assert est.get_params() == {"degree": 6}
    assert clone(est).degree == 6
    with pytest.raises(NotFittedError):
        est.transform(np.arange(10.0))
    with pytest.raises(ValueError):
        est.fit(np.ones((10, 2)))


def test_form_factor():
    eps = unfold(levels(7, 1.05)).epsilons
    t = np.linspace(1e-3, 5, 2000)
    est = SpectralFormFactor(t_grid=t, window=11).fit(eps)
    assert np.allclose(est.curve_.values, sff(eps, t, window=11).values)
    assert np.allclose(est.transform(eps), est.curve_.values)
    assert np.isnan(est.t_thouless_) or 0 < est.t_thouless_ <= 1
    with pytest.raises(NotFittedError):
        SpectralFormFactor().transform(eps)


def test_power_law_fit():
    x = np.array([5.0, 10, 20, 40, 80])
    y = 3.0 * x**-1.8
    est = PowerLawFit().fit(x[:, None], y)
    assert np.isclose(est.alpha_, 1.8)
    assert np.isclose(10**est.intercept_, 3.0)
    assert np.allclose(est.predict(x), y)
    assert est.score(x[:, None], y) > 0.999999
    with pytest.raises(NotFittedError):
        PowerLawFit().predict(x)
