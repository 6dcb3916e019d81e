"""Homogeneous monomial observables and their exact inverse."""

import itertools
import numbers
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_odd_degree, check_states


def basis_size(d, n=3):
    """Number of monomials of total degree exactly ``d`` in ``n`` variables.

    For ``n = 3`` this is ``(d + 1)(d + 2) / 2``. Any positive degree is
    counted here; only odd degrees can be used for lifting (see
    :class:`MonomialBasis`).
    """
    if not isinstance(d, numbers.Integral) or d < 1:
        raise ValueError(f"degree must be a positive integer, got {d!r}")
    if n == 3:
        return (d + 1) * (d + 2) // 2
    return len(_exponents(int(d), n))


def _exponents(d, n):
    exps = [e for e in itertools.product(range(d, -1, -1), repeat=n) if sum(e) == d]
    # product() over descending ranges already yields graded-lex order
    return exps


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials ``x1**d1 * x2**d2 * x3**d3`` with ``d1 + d2 + d3 = degree``.

    Exponent triples are in graded-lexicographic order, so the pure powers
    of ``x1``, ``x2`` and ``x3`` are the first, ``degree + 1``-th and last entries.
    """

    degree: int
    n: int = 3

    def __post_init__(self):
        check_odd_degree(self.degree)
        if self.n != 3:
            raise ValueError("only the 3-D reachability state is supported")

    @cached_property
    def exponents(self):
        return np.array(_exponents(self.degree, self.n), dtype=int)

    @property
    def size(self):
        return basis_size(self.degree, self.n)

    @cached_property
    def pure_indices(self):
        """Row index of ``x_i**degree`` for each coordinate ``i``."""
        idx = []
        for i in range(self.n):
            target = np.zeros(self.n, dtype=int)
            target[i] = self.degree
            idx.append(int(np.flatnonzero((self.exponents == target).all(axis=1))[0]))
        return np.array(idx)

    def feature_names(self, names=("x1", "x2", "x3")):
        out = []
        for e in self.exponents:
            parts = [f"{v}^{p}" if p > 1 else v for v, p in zip(names, e) if p > 0]
            out.append("*".join(parts))
        return out


def lift(x, basis: MonomialBasis):
    """Evaluate every monomial of ``basis`` at ``x``.

    ``x`` may be a single state (returns shape ``(N,)``) or an array of states
    of shape ``(M, 3)`` (returns ``(M, N)``).
    """
    single = np.ndim(x) == 1
    X = check_states(x, basis.n)
    out = np.prod(X[:, None, :] ** basis.exponents[None, :, :], axis=2)
    return out[0] if single else out


def recover(psi, basis: MonomialBasis):
    """Invert :func:`lift` from the pure-power components (odd-degree roots)."""
    psi = np.asarray(psi, dtype=float)
    single = psi.ndim == 1
    P = np.atleast_2d(psi)
    if P.shape[1] != basis.size:
        raise ValueError(f"lifted vector must have length {basis.size}, got {P.shape[1]}")
    pure = P[:, basis.pure_indices]
    d = basis.degree
    if d == 1:
        X = pure.copy()
    elif d == 3:
        X = np.cbrt(pure)
    else:
        X = np.sign(pure) * np.abs(pure) ** (1.0 / d)
        # one Newton step on y**d = p to remove the pow() rounding error
        nz = X != 0
        Xn = X[nz]
        X[nz] = Xn - (Xn ** d - pure[nz]) / (d * Xn ** (d - 1))
    return X[0] if single else X


class MonomialFeatures(TransformerMixin, BaseEstimator):
    """Lift 3-D states onto the odd-degree homogeneous monomial basis.

    Parameters
    ----------
    degree : int
        Odd total degree ``d``. The output has ``(d + 1)(d + 2) / 2`` columns.

    Attributes
    ----------
    basis_ : MonomialBasis
    n_features_in_ : int
    n_features_out_ : int
    """

    def __init__(self, degree=3):
        self.degree = degree

    def fit(self, X, y=None):
        X = check_states(X)
        self.basis_ = MonomialBasis(self.degree)
        self.n_features_in_ = X.shape[1]
        self.n_features_out_ = self.basis_.size
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        return lift(check_states(X), self.basis_)

    def inverse_transform(self, X):
        check_is_fitted(self, "basis_")
        return recover(np.atleast_2d(X), self.basis_)

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "basis_")
        names = ("x1", "x2", "x3") if input_features is None else tuple(input_features)
        return np.array(self.basis_.feature_names(names), dtype=object)
