"""scikit-learn compatible EDMDc regressor."""

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_states
from ..sysmodel import DEFAULT_DT
from .basis import MonomialBasis, lift, recover
from .model import DEFAULT_RCOND, fit_edmdc, predict


class EDMDc(RegressorMixin, BaseEstimator):
    """Extended DMD with control on homogeneous monomial observables.

    ``fit(X, y)`` takes ``X`` with columns ``[x1, x2, x3, u]`` and ``y`` holding
    the successor states ``x+``. ``predict`` returns one-step predictions in
    original coordinates.

    Parameters
    ----------
    degree : int
        Odd monomial degree of the lift.
    dt : float
        Sampling interval of the data.
    gamma : float or None
        If set, ``A`` is projected so that its spectral radius is at most
        ``gamma`` after the least-squares fit.
    rcond : float
        Relative singular-value cutoff of the pseudoinverse.

    Attributes
    ----------
    model_ : LiftedModel
        Fitted (possibly stabilized) model.
    ls_model_ : LiftedModel
        Raw least-squares model before projection.
    A_, B_ : ndarray
    n_features_in_ : int
    """

    def __init__(self, degree=3, dt=DEFAULT_DT, gamma=None, rcond=DEFAULT_RCOND):
        self.degree = degree
        self.dt = dt
        self.gamma = gamma
        self.rcond = rcond

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] < 4:
            raise ValueError(f"X must have columns [x1, x2, x3, u...], got shape {X.shape}")
        y = check_states(y, name="y")
        basis = MonomialBasis(self.degree)
        self.ls_model_ = fit_edmdc(X[:, :3], X[:, 3:], y, basis, self.dt, self.rcond)
        self.model_ = (self.ls_model_ if self.gamma is None
                       else self.ls_model_.stabilized(self.gamma))
        self.A_, self.B_ = self.model_.A, self.model_.B
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise ValueError(f"X must have {self.n_features_in_} columns")
        basis = self.model_.basis
        psi_next = lift(X[:, :3], basis) @ self.A_.T + X[:, 3:] @ self.B_.T
        return recover(psi_next, basis)

    def simulate(self, x0, inputs):
        """Open-loop multi-step prediction as a :class:`Trajectory`."""
        check_is_fitted(self, "model_")
        return predict(self.model_, x0, inputs)
