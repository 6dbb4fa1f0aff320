import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from stcontrol import SpaceTimeControl
from stcontrol.problems import example1


def test_params_and_clone():
    est = SpaceTimeControl(varrho=0.05, n=3)
    assert est.get_params()["varrho"] == 0.05
    c = clone(est)
    assert c.get_params() == est.get_params()
    est.set_params(n=5)
    assert est.n == 5


def test_not_fitted():
    with pytest.raises(NotFittedError):
        SpaceTimeControl().predict([[0.5, 0.5, 0.5]])
    with pytest.raises(NotFittedError):
        SpaceTimeControl().errors()


def test_fit_predict_example1():
    est = SpaceTimeControl(n=8).fit("example1")
    pts = np.array([[0.5, 0.5, 0.5], [0.25, 0.75, 0.9]])
    exact = example1().exact.u(pts)
    assert np.allclose(est.predict(pts), exact, rtol=0.2)
    out = est.transform(pts)
    assert out.shape == (2, 3)
    assert est.score() == -est.objective_
    assert est.errors()["err_u_Y"] < 2.2
    assert est.solve_report_.converged


def test_fit_callable_and_dim_checks():
    with pytest.raises(ValueError):
        SpaceTimeControl().fit(lambda p: np.ones(len(p)))
    est = SpaceTimeControl(dim=2, n=4, varrho=0.1, method="direct").fit(lambda p: np.ones(len(p)))
    assert est.mesh_.dim == 2
    with pytest.raises(ValueError):
        est.predict([[0.5, 0.5, 0.5]])
    with pytest.raises(ValueError):
        SpaceTimeControl(dim=4).fit(example1())
    with pytest.raises(TypeError):
        SpaceTimeControl().fit(3.0)


@pytest.mark.parametrize("kw", [dict(varrho=-1.0), dict(regularization="h1"), dict(n=0),
                                dict(method="lsqr"), dict(precond="amg")])
def test_invalid_params(kw):
    with pytest.raises(ValueError):
        SpaceTimeControl(**kw).fit("example1")
