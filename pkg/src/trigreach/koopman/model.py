"""Lifted linear surrogate ``psi+ = A psi + B u`` and its least-squares fit."""

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .._validation import check_inputs, check_positive, check_states
from ..sysmodel import DEFAULT_DT, Trajectory
from .basis import MonomialBasis, lift, recover
from .stable import RADIUS_TOL, project_stable, spectral_radius

DEFAULT_RCOND = 1e-10


class RankDeficiencyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LiftedModel:
    """Discrete-time lifted model at sampling interval ``dt``.

    ``gamma`` is ``None`` for the raw least-squares fit and the stability
    bound for a projected model.
    """

    A: np.ndarray
    B: np.ndarray
    basis: MonomialBasis
    dt: float = DEFAULT_DT
    gamma: Optional[float] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        N = self.basis.size
        if A.shape != (N, N) or B.ndim != 2 or B.shape[0] != N:
            raise ValueError(f"A must be {N}x{N} and B {N}xm, got {A.shape} and {B.shape}")
        check_positive("dt", self.dt)
        if self.gamma is not None and spectral_radius(A) > self.gamma + RADIUS_TOL:
            raise ValueError(
                f"model tagged {self.gamma}-stable but spectral radius is {spectral_radius(A)}")
        A.setflags(write=False)
        B.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)

    def __eq__(self, other):
        if not isinstance(other, LiftedModel):
            return NotImplemented
        return (self.basis == other.basis and self.dt == other.dt
                and self.gamma == other.gamma
                and np.array_equal(self.A, other.A) and np.array_equal(self.B, other.B))

    __hash__ = None

    @property
    def N(self):
        return self.basis.size

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def stability_tag(self):
        return "raw-LS" if self.gamma is None else "gamma-stable"

    @property
    def b(self):
        """Input column for the single-input case."""
        if self.m != 1:
            raise ValueError("model has more than one input")
        return self.B[:, 0]

    def step(self, psi, u=None):
        if self.m == 0:
            return self.A @ psi
        return self.A @ psi + self.B @ np.atleast_1d(u)

    def generator(self):
        """Continuous-time ``(F, G)`` with ``F = (A - I)/dt``, ``G = B/dt``."""
        return (self.A - np.eye(self.N)) / self.dt, self.B / self.dt

    def stabilized(self, gamma=0.999, **kwargs):
        """Copy with ``A`` projected onto the gamma-stable set."""
        A_s, info = project_stable(self.A, gamma, return_info=True, **kwargs)
        return replace(self, A=A_s, gamma=float(gamma),
                       meta={**self.meta, "projection": info})

    def to_dict(self):
        return {
            "d": self.basis.degree,
            "N": self.N,
            "dt": self.dt,
            "gamma": self.gamma,
            "A": self.A.ravel().tolist(),
            "B": self.B.ravel().tolist(),
            "m": self.m,
            "stability_tag": self.stability_tag,
            "basis_order": self.basis.exponents.tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        try:
            basis = MonomialBasis(int(doc["d"]))
            N, m = int(doc["N"]), int(doc.get("m", 1))
            if N != basis.size:
                raise ValueError(f"N={N} does not match degree {basis.degree}")
            if doc["basis_order"] != basis.exponents.tolist():
                raise ValueError("basis_order does not match the graded-lex monomial order")
            A = np.array(doc["A"], dtype=float).reshape(N, N)
            B = np.array(doc["B"], dtype=float).reshape(N, m)
            tag = doc["stability_tag"]
            gamma = doc["gamma"]
            if (tag == "raw-LS") != (gamma is None):
                raise ValueError(f"stability_tag {tag!r} inconsistent with gamma={gamma}")
            return cls(A, B, basis, float(doc["dt"]), gamma)
        except KeyError as exc:
            raise ValueError(f"model document is missing field {exc}") from None

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_edmdc(X, U, X_next, basis: MonomialBasis, dt=DEFAULT_DT, rcond=DEFAULT_RCOND):
    """Least-squares ``[A B]`` minimizing ``sum ||psi(x+) - A psi(x) - B u||^2``.

    ``U=None`` fits an autonomous model (``B`` has zero columns).
    Solved with the pseudoinverse of the stacked regressor ``[psi(x), u]``;
    singular values below ``rcond`` times the largest are discarded, which
    yields the minimum-norm solution (with a warning) for rank-deficient data.
    """
    X = check_states(X)
    X_next = check_states(X_next, name="X_next")
    U = np.zeros((len(X), 0)) if U is None else np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U[:, None]
    if not np.all(np.isfinite(U)):
        raise ValueError("U contains non-finite values")
    M, N, m = len(X), basis.size, U.shape[1]
    if len(U) != M or len(X_next) != M:
        raise ValueError("X, U and X_next must have the same number of rows")
    if M < N + m:
        raise ValueError(f"need at least N + m = {N + m} samples, got {M}")

    Z = np.hstack([lift(X, basis), U])
    Y = lift(X_next, basis)
    Uz, s, Vt = np.linalg.svd(Z, full_matrices=False)
    keep = s > rcond * s[0] if s[0] > 0 else np.zeros_like(s, dtype=bool)
    if not keep.all():
        warnings.warn(
            f"regressor has numerical rank {int(keep.sum())} < {N + m}; "
            "returning the minimum-norm solution", RankDeficiencyWarning, stacklevel=2)
    theta = (Vt[keep].T / s[keep]) @ (Uz[:, keep].T @ Y)
    return LiftedModel(theta[:N].T, theta[N:].T, basis, dt,
                       meta={"n_samples": M, "rank": int(keep.sum())})


def predict(model: LiftedModel, x0, inputs, K=None) -> Trajectory:
    """Open-loop model prediction recovered to original coordinates.

    ``K`` defaults to ``len(inputs)``; when given, only the first ``K``
    inputs are used.
    """
    inputs = check_inputs(inputs)
    K = len(inputs) if K is None else int(K)
    if K < 1 or K > len(inputs):
        raise ValueError(f"K must be in [1, {len(inputs)}], got {K}")
    psi = lift(np.asarray(x0, dtype=float), model.basis)
    lifted = [psi]
    for u in inputs[:K]:
        psi = model.step(psi, u)
        lifted.append(psi)
    states = recover(np.array(lifted), model.basis)
    return Trajectory(model.dt, states, inputs[:K])


def predict_lifted(model: LiftedModel, psi0, inputs):
    """Lifted states ``psi_0 .. psi_K`` under the inputs (no recovery)."""
    psi = np.asarray(psi0, dtype=float)
    out = [psi]
    for u in check_inputs(inputs):
        psi = model.step(psi, u)
        out.append(psi)
    return np.array(out)
