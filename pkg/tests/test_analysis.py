import numpy as np
import pytest
from sklearn.base import clone

from trigreach.koopman import (EDMDc, LiftedModel, MonomialBasis, error_bound, fit_edmdc,
                               one_step_residuals, predict, propagate_residuals,
                               propagated_error)
from trigreach.sysmodel import Trajectory


def _linear_data(M=200, seed=0):
    rng = np.random.default_rng(seed)
    A = np.eye(3) + 0.05 * rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 1))
    X = rng.uniform(0, 5, size=(M, 3))
    U = rng.uniform(-1, 1, size=M)
    return A, B, X, U, X @ A.T + U[:, None] @ B.T


def test_error_bound_formula():
    assert error_bound(0.01, 3, 0.999) == pytest.approx(30.0)
    with pytest.raises(ValueError):
        error_bound(0.01, 3, 1.0)


def test_exact_model_has_zero_residuals():
    A, B, X, U, Xn = _linear_data()
    m = LiftedModel(A, B, MonomialBasis(1))
    rep = one_step_residuals(m, X, U, Xn, disjoint=True)
    assert rep.epsilon <= 1e-9
    assert rep.sigma is None and rep.bound_holds() is None
    assert rep.disjoint_from_training is True


def test_empty_test_set_rejected():
    m = LiftedModel(np.eye(3), np.zeros(3), MonomialBasis(1))
    with pytest.raises(ValueError, match="empty"):
        one_step_residuals(m, np.empty((0, 3)), np.empty(0), np.empty((0, 3)))


def test_disjointness_is_flagged_when_not_asserted():
    A, B, X, U, Xn = _linear_data()
    rep = one_step_residuals(LiftedModel(A, B, MonomialBasis(1)), X, U, Xn)
    assert rep.disjoint_from_training is None and rep.notes


def test_propagate_matches_explicit_sum():
    rng = np.random.default_rng(1)
    A = rng.normal(size=(4, 4)) / 3
    r = rng.normal(size=(12, 4))
    out = propagate_residuals(A, r)
    for k in range(1, 13):
        R = sum(np.linalg.matrix_power(A, i) @ r[k - 1 - i] for i in range(k))
        assert out[k - 1] == pytest.approx(np.linalg.norm(R), rel=1e-12)


def test_propagated_error_exact_model_is_zero():
    A, B, _, _, _ = _linear_data()
    m = LiftedModel(A, B, MonomialBasis(1))
    tr = predict(m, (1, 2, 3), np.linspace(-1, 1, 30))
    rep = propagated_error(m, tr)
    assert np.max(rep.propagated_norms) <= 1e-9


def test_propagated_error_equals_open_loop_gap():
    rng = np.random.default_rng(2)
    states = rng.uniform(1, 2, size=(21, 3))
    u = rng.uniform(-1, 1, size=20)
    tr = Trajectory(0.1, states, u)
    m = LiftedModel(0.9 * np.eye(10), 0.01 * np.ones(10), MonomialBasis(3), gamma=0.95)
    rep = propagated_error(m, tr)
    psi = np.prod(states[0] ** m.basis.exponents, axis=1)
    for k in range(20):
        psi = m.A @ psi + m.B[:, 0] * u[k]
        target = np.prod(states[k + 1] ** m.basis.exponents, axis=1)
        assert rep.propagated_norms[k] == pytest.approx(np.linalg.norm(target - psi))
    assert rep.bound_holds() is True
    assert rep.to_dict()["sigma"] == pytest.approx(rep.epsilon * 10 / 0.05)


def test_propagated_error_needs_two_states():
    m = LiftedModel(np.eye(3), np.zeros(3), MonomialBasis(1))
    with pytest.raises(ValueError):
        propagated_error(m, Trajectory(0.1, [[1, 2, 3]], []))


def test_edmdc_estimator_api():
    A, B, X, U, Xn = _linear_data()
    est = EDMDc(degree=1, gamma=None)
    assert est.get_params() == {"degree": 1, "dt": 0.1, "gamma": None, "rcond": 1e-10}
    est.fit(np.column_stack([X, U]), Xn)
    np.testing.assert_allclose(est.A_, A, atol=1e-10)
    np.testing.assert_allclose(est.predict(np.column_stack([X, U])), Xn, atol=1e-9)
    assert est.score(np.column_stack([X, U]), Xn) == pytest.approx(1.0)
    tr = est.simulate((1, 2, 3), [0.5, -0.5])
    assert len(tr) == 3
    est2 = clone(est).set_params(gamma=0.9)
    est2.fit(np.column_stack([X, U]), Xn)
    assert est2.model_.gamma == 0.9
    assert est2.ls_model_.gamma is None


def test_edmdc_estimator_validation():
    with pytest.raises(ValueError):
        EDMDc().fit(np.ones((50, 3)), np.ones((50, 3)))
    with pytest.raises(Exception):
        EDMDc().predict(np.ones((2, 4)))


def test_fit_vs_estimator_agree():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 5, size=(300, 3))
    U = rng.uniform(-1, 1, size=300)
    Xn = X + 0.1 * np.column_stack([np.sin(X[:, 1]), U, X[:, 1] - X[:, 0]])
    m = fit_edmdc(X, U, Xn, MonomialBasis(3))
    est = EDMDc(degree=3).fit(np.column_stack([X, U]), Xn)
    np.testing.assert_array_equal(est.A_, m.A)
