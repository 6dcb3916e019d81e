"""One-step and propagated prediction error of a lifted model.

With one-step residuals ``r_k = psi(x_k) - A psi(x_{k-1}) - B u_{k-1}`` the
open-loop error ``R_k = psi(x_k) - A^k psi(x_0) - sum_i A^i B u_{k-1-i}``
satisfies ``R_k = A R_{k-1} + r_k``. For a gamma-stable ``A`` the propagated
error is bounded by ``sigma = eps * N / (1 - gamma)`` where ``eps = max ||r_k||``.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .._validation import check_inputs, check_states
from ..sysmodel import Trajectory
from .basis import lift
from .model import LiftedModel


def error_bound(epsilon, N, gamma):
    """``eps * N / (1 - gamma)``; requires ``gamma < 1``."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"the propagation bound needs gamma in (0, 1), got {gamma}")
    return epsilon * N / (1.0 - gamma)


@dataclass
class ErrorReport:
    residual_norms: np.ndarray
    epsilon: float
    N: int
    gamma: Optional[float] = None
    propagated_norms: Optional[np.ndarray] = None
    disjoint_from_training: Optional[bool] = None
    notes: list = field(default_factory=list)

    @property
    def sigma(self):
        if self.gamma is None or self.gamma >= 1.0:
            return None
        return error_bound(self.epsilon, self.N, self.gamma)

    def bound_holds(self):
        """True when every propagated error is within ``sigma``.

        ``None`` when the bound is undefined (raw model or nothing propagated).
        """
        if self.sigma is None or self.propagated_norms is None:
            return None
        return bool(np.all(self.propagated_norms <= self.sigma))

    def to_dict(self):
        return {
            "epsilon": float(self.epsilon),
            "mean_residual": float(np.mean(self.residual_norms)),
            "N": self.N,
            "gamma": self.gamma,
            "sigma": self.sigma,
            "max_propagated": (None if self.propagated_norms is None
                               else float(np.max(self.propagated_norms))),
            "bound_holds": self.bound_holds(),
            "disjoint_from_training": self.disjoint_from_training,
            "notes": list(self.notes),
        }


def lifted_residuals(model: LiftedModel, X, U, X_next):
    """Residual vectors ``psi(x+) - A psi(x) - B u`` row by row."""
    X = check_states(X)
    X_next = check_states(X_next, name="X_next")
    U = np.zeros((len(X), 0)) if U is None else np.asarray(U, dtype=float).reshape(len(X), -1)
    Psi, Psi_next = lift(X, model.basis), lift(X_next, model.basis)
    return Psi_next - Psi @ model.A.T - U @ model.B.T


def one_step_residuals(model: LiftedModel, X, U, X_next, *, disjoint=None) -> ErrorReport:
    """One-step residual norms on a held-out set; ``epsilon`` is their max.

    ``disjoint`` records the caller's claim that the pairs were not used for
    training; it is copied into the report, not verified.
    """
    if len(np.atleast_2d(X)) == 0:
        raise ValueError("test set is empty")
    r = lifted_residuals(model, X, U, X_next)
    norms = np.linalg.norm(r, axis=1)
    report = ErrorReport(norms, float(norms.max()), model.N, model.gamma,
                         disjoint_from_training=disjoint)
    if disjoint is None:
        report.notes.append("train/test disjointness not asserted by caller")
    return report


def propagate_residuals(A, residuals):
    """Norms of ``R_k = sum_{i<k} A^i r_{k-i}`` for ``k = 1..K``."""
    A = np.asarray(A, dtype=float)
    R = np.zeros(A.shape[0])
    out = np.empty(len(residuals))
    for k, r in enumerate(np.asarray(residuals, dtype=float)):
        R = A @ R + r
        out[k] = np.linalg.norm(R)
    return out


def propagated_error(model: LiftedModel, trajectory: Trajectory) -> ErrorReport:
    """Open-loop propagated error along a measured trajectory.

    The returned report carries the one-step residuals of the same data, so
    ``report.sigma`` is the bound that applies to ``report.propagated_norms``.
    """
    if len(trajectory) < 2:
        raise ValueError("trajectory needs at least two states")
    Psi = lift(trajectory.states, model.basis)
    u = check_inputs(trajectory.inputs)
    psi = Psi[0]
    norms = np.empty(len(u))
    for k, uk in enumerate(u):
        psi = model.step(psi, uk)
        norms[k] = np.linalg.norm(Psi[k + 1] - psi)
    report = one_step_residuals(model, trajectory.states[:-1], u, trajectory.states[1:])
    report.propagated_norms = norms
    return report
