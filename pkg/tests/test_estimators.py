import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from orlihom.estimators import PeriodicHomogenizer, StochasticHomogenizer, check_sigma_rows
from orlihom.integrand import ExponentWindow, IntegrandSpec, NonconvexSpec, PowerRadial


def test_check_sigma_rows():
    X = check_sigma_rows([[1.0, 2.0, 3.0, 4.0]], 2)
    assert X.shape == (1, 2, 2)
    assert np.array_equal(X[0], [[1.0, 2.0], [3.0, 4.0]])
    with pytest.raises(ValueError):
        check_sigma_rows([[1.0, 2.0, 3.0]], 2)
    with pytest.raises(ValueError):
        check_sigma_rows([[np.nan]], 1)


def test_periodic_fit_predict(two_phase_1d):
    est = PeriodicHomogenizer(two_phase_1d, n=32).fit()
    pred = est.predict([[1.0], [2.0], [0.0]])
    assert pred == pytest.approx([1.6, 6.4, 0.0], rel=1e-8)
    assert est.validation_.passed
    assert est.sample([[1.0]])[0].report.converged


def test_params_and_clone(two_phase_1d):
    est = PeriodicHomogenizer(two_phase_1d, n=8, tol_g=1e-9)
    params = est.get_params()
    assert params["n"] == 8 and params["tol_g"] == 1e-9 and params["integrand"] is two_phase_1d
    other = clone(est).set_params(n=16)
    assert other.n == 16 and est.n == 8
    with pytest.raises(NotFittedError):
        est.predict([[1.0]])


def test_fit_records_feature_count(double_phase_2d):
    est = PeriodicHomogenizer(double_phase_2d, n=4).fit(np.ones((3, 2)))
    assert est.n_features_in_ == 2


def test_fit_rejects_invalid_integrand():
    bad = IntegrandSpec(PowerRadial(1.0, 2.0), ExponentWindow(3.0, 3.0), 1.0, 1.0)
    with pytest.raises(ValueError):
        PeriodicHomogenizer(bad).fit()
    with pytest.raises(TypeError):
        PeriodicHomogenizer("quadratic").fit()


def test_stochastic_estimator(random_quadratic_1d):
    est = StochasticHomogenizer(random_quadratic_1d, t_list=(2, 4), seeds=(0, 1, 2)).fit()
    (e,) = est.estimate([[1.0]])
    assert est.predict([[1.0]])[0] == e.point_estimate
    assert not e.upper_bound
    nc = StochasticHomogenizer(NonconvexSpec(random_quadratic_1d, 0.0), t_list=(2, 4), seeds=(0, 1, 2)).fit()
    assert nc.predict([[1.0]])[0] == e.point_estimate
