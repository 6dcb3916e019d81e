"""Backward reachable sets of a lifted linear model as a chain of half-spaces.

For ``psi+ = A psi + b u`` with ``u`` in ``[a_min, a_max]`` and target
``{w0 . psi <= c}``, the set of lifted states that some input sequence drives
into the target in exactly ``k`` steps is the half-space

    w_k . psi <= c_k,   w_k = (A^T)^k w0,   c_k = c - sum_{i<k} min_u (w_i . b) u.

The minimizing input at step ``j`` of a ``K``-step plan depends only on the
sign of ``s_{K-1-j} = w_{K-1-j} . b``.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..koopman.basis import MonomialBasis, lift
from ..koopman.model import LiftedModel, predict
from ..sysmodel import InputBounds, Trajectory
from .target import HalfspaceTarget


class NotInBRSError(ValueError):
    """Synthesis requested from a state outside the backward reachable set."""


def _lift_nd(x, basis):
    """``lift`` over any leading shape."""
    x = np.asarray(x, dtype=float)
    psi = lift(x.reshape(-1, basis.n), basis)
    return psi.reshape(x.shape[:-1] + (basis.size,))


def _min_input_term(s, bounds: InputBounds):
    return np.minimum(s * bounds.a_min, s * bounds.a_max)


@dataclass(frozen=True)
class BRSChain:
    """Half-spaces ``w_k . psi <= c_k`` for ``k = 0..K``.

    Attributes
    ----------
    weights : ndarray of shape (K + 1, N)
    offsets : ndarray of shape (K + 1,)
    couplings : ndarray of shape (K,)
        ``s_k = w_k . b``, the input sensitivity of step ``k``.
    """

    weights: np.ndarray
    offsets: np.ndarray
    couplings: np.ndarray
    basis: MonomialBasis
    dt: float
    input_bounds: InputBounds

    def __post_init__(self):
        for name in ("weights", "offsets", "couplings"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        K = len(self.couplings)
        if self.weights.shape != (K + 1, self.basis.size) or self.offsets.shape != (K + 1,):
            raise ValueError("inconsistent chain dimensions")

    @property
    def K(self):
        return len(self.couplings)

    @property
    def t_abs(self):
        return self.K * self.dt

    def halfspace(self, k) -> HalfspaceTarget:
        self._check_k(k)
        return HalfspaceTarget(self.weights[k], self.offsets[k])

    def _check_k(self, k):
        if not 0 <= k <= self.K:
            raise ValueError(f"k must be in [0, {self.K}], got {k}")

    def lifted_values(self, psi):
        """Values of every half-space, shape ``(..., K + 1)``."""
        return np.asarray(psi, dtype=float) @ self.weights.T - self.offsets

    def values(self, x, k=None, within_horizon=False):
        """Signed value of BRS(k) at original-coordinate states.

        ``within_horizon`` takes the minimum over ``0..k``, i.e. the set of
        states that can reach the target in at most ``k`` steps.
        """
        k = self.K if k is None else int(k)
        self._check_k(k)
        vals = self.lifted_values(_lift_nd(x, self.basis))
        if within_horizon:
            return vals[..., :k + 1].min(axis=-1)
        return vals[..., k]

    def contains(self, x, k=None, within_horizon=False):
        return self.values(x, k, within_horizon) <= 0.0

    def first_entry_step(self, x):
        """Smallest ``k`` with ``x`` in BRS(k), or ``None``."""
        vals = self.lifted_values(_lift_nd(x, self.basis))
        hits = np.flatnonzero(vals <= 0.0)
        return int(hits[0]) if hits.size else None

    def bang_bang(self, k):
        """Open-loop inputs for a ``k``-step plan."""
        self._check_k(k)
        b = self.input_bounds
        s = self.couplings[:k][::-1]
        return np.where(s > 0, b.a_min, np.where(s < 0, b.a_max, 0.0))


def brs_halfspace(model: LiftedModel, target: HalfspaceTarget, K,
                  input_bounds: InputBounds = InputBounds()) -> BRSChain:
    """Exact-step BRS chain of a single-input lifted model for ``k = 0..K``."""
    K = int(K)
    if K < 0:
        raise ValueError("K must be non-negative")
    if target.w.shape != (model.N,):
        raise ValueError(f"target has {target.w.size} weights, model has N={model.N}")
    b = model.b
    W = np.empty((K + 1, model.N))
    W[0] = target.w
    for k in range(K):
        W[k + 1] = model.A.T @ W[k]
    s = W[:K] @ b
    offsets = target.c - np.concatenate([[0.0], np.cumsum(_min_input_term(s, input_bounds))])
    return BRSChain(W, offsets, s, model.basis, model.dt, input_bounds)


def optimal_inputs(chain: BRSChain, x0, k=None, within_horizon=False):
    """Bang-bang input sequence steering ``x0`` into the lifted target.

    Exact-step mode plans ``k`` (default ``K``) steps and requires ``x0`` in
    BRS(k). In within-horizon mode the plan uses the smallest ``j <= k`` whose
    BRS contains ``x0``.
    """
    k = chain.K if k is None else int(k)
    if within_horizon:
        vals = chain.lifted_values(_lift_nd(x0, chain.basis))[:k + 1]
        hits = np.flatnonzero(vals <= 0.0)
        if not hits.size:
            raise NotInBRSError(f"{tuple(x0)} cannot reach the target within {k} steps")
        k = int(hits[0])
    elif not chain.contains(x0, k):
        raise NotInBRSError(f"{tuple(x0)} is not in BRS({k})")
    return chain.bang_bang(k)


def synthesize_trajectory(model: LiftedModel, chain: BRSChain, x0, k=None,
                          within_horizon=False) -> Trajectory:
    """Model-predicted trajectory under :func:`optimal_inputs`."""
    u = optimal_inputs(chain, x0, k, within_horizon)
    if len(u) == 0:
        return Trajectory(model.dt, np.atleast_2d(np.asarray(x0, dtype=float)), np.empty(0))
    return predict(model, x0, u)


def terminal_value(model: LiftedModel, target: HalfspaceTarget, x0, inputs):
    """Lifted target value reached by the model from ``x0`` under ``inputs``."""
    psi = _lift_nd(x0, model.basis)
    for u in inputs:
        psi = model.step(psi, u)
    return float(target.value(psi))
