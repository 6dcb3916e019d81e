"""Nearest gamma-stable matrix via the factorization A = S^-1 C O S.

``C`` orthogonal and ``O`` symmetric PSD with ``||O||_2 <= gamma`` imply that
``C O`` has spectral norm at most ``gamma``, hence every eigenvalue of the
similar matrix ``S^-1 C O S`` has modulus at most ``gamma``. The three factors
are refined by projected gradient descent with a backtracking step size.
"""

import logging
import warnings

import numpy as np
from scipy import linalg

from .._validation import check_square

log = logging.getLogger(__name__)

#: slack allowed on the spectral radius of a returned matrix
RADIUS_TOL = 1e-6


class StabilizationWarning(UserWarning):
    pass


def spectral_radius(A):
    """Largest eigenvalue modulus of a square matrix."""
    A = check_square(A)
    if A.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def _nearest_orthogonal(M):
    U, _, Vt = np.linalg.svd(M)
    return U @ Vt


def _project_psd(M, gamma):
    w, V = np.linalg.eigh(0.5 * (M + M.T))
    return (V * np.clip(w, 0.0, gamma)) @ V.T


def _objective(A, S, C, O):
    return 0.5 * np.linalg.norm(A - np.linalg.solve(S, C @ O @ S)) ** 2


def _block_factors(A, gamma):
    """Exact factors of ``A`` from its real block-diagonal eigendecomposition,
    with every eigenvalue modulus clipped to ``gamma``.

    Returns ``None`` when the eigenvector basis is numerically singular.
    """
    w, V = np.linalg.eig(A)
    if np.iscomplexobj(w):
        try:
            D, P = linalg.cdf2rdf(w, V)
        except ValueError:
            return None
    else:
        D, P = np.diag(w), V.real
    if np.linalg.cond(P) > 1e10:
        return None
    n = A.shape[0]
    C = np.zeros((n, n))
    O = np.zeros((n, n))
    i = 0
    while i < n:
        if i + 1 < n and D[i, i + 1] != 0.0:
            a, b = D[i, i], D[i, i + 1]
            r = np.hypot(a, b)
            C[i:i + 2, i:i + 2] = [[a / r, b / r], [-b / r, a / r]]
            O[i, i] = O[i + 1, i + 1] = min(r, gamma)
            i += 2
        else:
            lam = D[i, i]
            C[i, i] = -1.0 if lam < 0 else 1.0
            O[i, i] = min(abs(lam), gamma)
            i += 1
    return np.linalg.inv(P), C, O


def _polar_factors(A, gamma):
    U, s, Vt = np.linalg.svd(A)
    return np.eye(A.shape[0]), U @ Vt, _project_psd((Vt.T * s) @ Vt, gamma)


def project_stable(A, gamma=0.999, *, max_iter=500, rtol=1e-9, return_info=False):
    """Approximate the nearest matrix to ``A`` with spectral radius <= ``gamma``.

    Parameters
    ----------
    A : array_like, shape (n, n)
        Matrix to stabilize, typically the least-squares Koopman matrix.
    gamma : float in (0, 1]
        Bound on the eigenvalue moduli of the result.
    max_iter : int
        Projected-gradient iterations.
    rtol : float
        Stop when the relative objective decrease falls below this value.
    return_info : bool
        Also return a dict with objective values and the method used.

    Returns
    -------
    ndarray
        ``A`` itself when already gamma-stable. Otherwise the refined
        ``S^-1 C O S``, or ``A * gamma / rho(A)`` if that fallback is closer.
    """
    A = check_square(A)
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    rho = spectral_radius(A)
    if rho <= gamma:
        info = {"method": "identity", "objective": 0.0, "fallback_objective": 0.0,
                "iterations": 0}
        return (A.copy(), info) if return_info else A.copy()

    fallback = A * (gamma / rho)
    f_fallback = 0.5 * np.linalg.norm(A - fallback) ** 2

    factors = _block_factors(A, gamma)
    if factors is None:
        factors = _polar_factors(A, gamma)
    S, C, O = factors
    f = _objective(A, S, C, O)
    step = 1e-3
    it = 0
    for it in range(1, max_iter + 1):
        Si = np.linalg.inv(S)
        M = Si @ C @ O @ S
        E = M - A
        G_O = C.T @ Si.T @ E @ S.T
        G_C = Si.T @ E @ S.T @ O
        G_S = (C @ O).T @ Si.T @ E - Si.T @ E @ M.T
        while step > 1e-16:
            S_new = S - step * G_S
            C_new = _nearest_orthogonal(C - step * G_C)
            O_new = _project_psd(O - step * G_O, gamma)
            try:
                f_new = _objective(A, S_new, C_new, O_new)
            except np.linalg.LinAlgError:
                f_new = np.inf
            if f_new < f:
                break
            step *= 0.5
        else:
            break
        decrease = (f - f_new) / max(f, np.finfo(float).tiny)
        S, C, O, f = S_new, C_new, O_new, f_new
        step *= 2.0
        if decrease < rtol:
            break

    result = np.linalg.solve(S, C @ O @ S)
    method = "factorization"
    if not np.isfinite(f) or f > f_fallback or spectral_radius(result) > gamma + RADIUS_TOL:
        warnings.warn(
            "stable projection did not improve on the scaled initializer; "
            "returning A * gamma / rho(A)", StabilizationWarning, stacklevel=2)
        result, f, method = fallback, f_fallback, "fallback"
    log.debug("project_stable: %s, objective %.3e (fallback %.3e) after %d iterations",
              method, f, f_fallback, it)
    if return_info:
        return result, {"method": method, "objective": float(f),
                        "fallback_objective": float(f_fallback), "iterations": it}
    return result
