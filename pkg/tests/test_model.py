import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from tomosel.estimator import ConfigurationError
from tomosel.model import RadonModelSelection
from tomosel.phantoms import exact_radon


def _observe(phantom, X, sigma, seed):
    rng = np.random.default_rng(seed)
    clean = np.array([float(exact_radon(phantom, row[:-1], row[-1])) for row in X])
    return clean + np.sqrt(sigma) * rng.standard_normal(len(X))


@pytest.fixture(scope="module")
def data(phantom):
    X = RadonModelSelection().sampling_design()
    return X, _observe(phantom, X, 0.05, 3)


def test_params_round_trip():
    est = RadonModelSelection(m=6, q=30, delta=0.05)
    assert est.get_params()["m"] == 6
    c = clone(est)
    assert c.get_params() == est.get_params()
    c.set_params(delta=0.02)
    assert c.delta == 0.02


def test_fit_predict(phantom, data):
    X, y = data
    est = RadonModelSelection(sigma=0.05).fit(X, y)
    assert est.selected_ in [w.source for w in est.family_.weights]
    assert est.sigma_hat_ == 0.05
    pts = np.array([[0.2, 0.1], [-0.4, -0.2], [0.95, 0.0]])
    pred = est.predict(pts)
    assert pred.shape == (3,) and np.isrealobj(pred)
    raster = est.reconstruct(32)
    assert raster.shape == (32, 32)


def test_estimated_sigma(data):
    X, y = data
    est = RadonModelSelection().fit(X, y)
    assert 0 < est.sigma_hat_ < 0.2


def test_noiseless_fit_selects_oracle(phantom):
    from tomosel.phantoms import theta_oracle

    est = RadonModelSelection(sigma=0.0)
    X = est.sampling_design()
    est.fit(X, _observe(phantom, X, 0.0, 0))
    theta = theta_oracle(phantom, est.design_.indices)
    er = np.sum(np.abs(est.family_.matrix * est.theta_hat_ - theta) ** 2, axis=1)
    assert er[est.family_.weights.index(est.weights_)] == er.min()


def test_input_validation(data):
    X, y = data
    with pytest.raises(ValueError):
        RadonModelSelection().fit(X[:-1], y[:-1])
    Xb = X.copy()
    Xb[5, -1] += 0.1
    with pytest.raises(ValueError, match="row 5"):
        RadonModelSelection().fit(Xb, y)
    yb = y.copy()
    yb[0] = np.nan
    with pytest.raises(ValueError):
        RadonModelSelection().fit(X, yb)
    with pytest.raises(ConfigurationError):
        RadonModelSelection(delta=0.2).fit(X, y)
    with pytest.raises(ConfigurationError):
        RadonModelSelection(q=20).sampling_design()


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        RadonModelSelection().predict([[0.0, 0.0]])


def test_predict_checks_points(data):
    X, y = data
    est = RadonModelSelection(sigma=0.05).fit(X, y)
    with pytest.raises(ValueError):
        est.predict([[0.0, 0.0, 0.0]])
