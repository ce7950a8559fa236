import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.estimator_checks import parametrize_with_checks

from jsrec import JointSparseRegressor, ProblemSpec, SolverConfig, generate, solve


@parametrize_with_checks([JointSparseRegressor(max_iter=5000, tol=1e-8)])
@pytest.mark.filterwarnings("ignore::sklearn.exceptions.ConvergenceWarning")
def test_sklearn_compatible(estimator, check):
    check(estimator)


@pytest.fixture(scope="module")
def inst():
    return generate(ProblemSpec(m=20, N=60, omega=8, sparsity=5, seed=3))


def test_matches_solver(inst):
    est = JointSparseRegressor().fit(inst.A, inst.u)
    res = solve(inst.A, inst.u, SolverConfig())
    np.testing.assert_array_equal(est.signal_, res.x)
    np.testing.assert_array_equal(est.coef_, res.x.T)
    np.testing.assert_allclose(est.predict(inst.A), inst.A @ res.x)
    assert est.n_iter_ == res.iterations and est.tau_ == res.tau
    np.testing.assert_array_equal(est.support_, np.flatnonzero(np.any(res.x != 0, axis=1)))


def test_single_target(inst):
    y = inst.u[:, 0]
    est = JointSparseRegressor(mu=2.0).fit(inst.A, y)
    assert est.coef_.shape == (60,) and est.predict(inst.A).shape == (20,)
    np.testing.assert_array_equal(est.coef_, solve(inst.A, y, SolverConfig(mu=2.0)).x[:, 0])


def test_warm_start(inst):
    est = JointSparseRegressor(warm_start=True).fit(inst.A, inst.u)
    first = est.n_iter_
    est.fit(inst.A, inst.u)
    assert est.n_iter_ < first


def test_convergence_warning(inst):
    with pytest.warns(ConvergenceWarning):
        JointSparseRegressor(max_iter=2).fit(inst.A, inst.u)


def test_params_round_trip():
    est = JointSparseRegressor(mu=3.0, tau=0.1, record="full")
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert c.set_params(mu=5.0).mu == 5.0
