"""Input validation helpers shared across the package."""

import numbers

import numpy as np


def check_positive(name, value, *, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ValueError(f"{name} must be > 0, got {value!r}")
    if not strict and value < 0:
        raise ValueError(f"{name} must be >= 0, got {value!r}")
    return float(value)


def check_odd_degree(d):
    if not isinstance(d, numbers.Integral) or d < 1:
        raise ValueError(f"degree must be a positive integer, got {d!r}")
    if d % 2 == 0:
        raise ValueError(
            f"degree must be odd (sign of h(x)**d must match sign of h(x)), got {d}")
    return int(d)


def check_states(X, n_states=3, name="X"):
    """Return ``X`` as a finite float array of shape (n_samples, n_states).

    A single state of shape (n_states,) is promoted to one row.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != n_states:
        raise ValueError(f"{name} must have shape (n, {n_states}), got {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def check_inputs(u, name="inputs"):
    u = np.asarray(u, dtype=float)
    if u.ndim == 2 and u.shape[1] == 1:
        u = u[:, 0]
    if u.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {u.shape}")
    if not np.all(np.isfinite(u)):
        raise ValueError(f"{name} contains non-finite values")
    return u


def check_square(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {A.shape}")
    return A
