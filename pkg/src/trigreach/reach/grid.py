"""Grid level-set solver for backward reachable sets of 3-D affine dynamics.

Solves ``dV/dtau = min_u grad V . (F x + G u)`` forward in time-to-go ``tau``
from ``V(x, 0) = g(x)`` with a first-order Lax-Friedrichs scheme and explicit
Euler steps under a CFL limit. ``{V <= 0}`` approximates the set of states that
reach ``{g <= 0}`` at ``tau`` (or by ``tau`` in within-horizon mode, which
uses ``min(0, H)`` as the Hamiltonian).
"""

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from ..koopman.model import LiftedModel
from ..sysmodel import InputBounds, StateBounds
from .target import HalfspaceTarget

DEFAULT_NODES = 61
DEFAULT_CFL = 0.5


@dataclass(frozen=True)
class GridSpec:
    """Axis-aligned grid over ``[lo, hi]`` with ``n`` nodes per axis."""

    lo: tuple
    hi: tuple
    n: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        n = (tuple(int(v) for v in self.n) if np.ndim(self.n)
             else (int(self.n),) * len(lo))
        if not len(lo) == len(hi) == len(n):
            raise ValueError("lo, hi and n must have the same length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("each axis needs lo < hi")
        if any(k < 3 for k in n):
            raise ValueError("each axis needs at least 3 nodes")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    @classmethod
    def from_bounds(cls, bounds: StateBounds = StateBounds(), n=DEFAULT_NODES):
        return cls(tuple(bounds.lo), tuple(bounds.hi), n)

    @property
    def ndim(self):
        return len(self.n)

    @property
    def axes(self):
        return [np.linspace(l, h, k) for l, h, k in zip(self.lo, self.hi, self.n)]

    @property
    def spacing(self):
        return np.array([(h - l) / (k - 1) for l, h, k in zip(self.lo, self.hi, self.n)])

    def points(self):
        """Node coordinates, shape ``(*n, ndim)``."""
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)


@dataclass
class ValueGrid:
    grid: GridSpec
    values: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.n:
            raise ValueError(f"values shape {self.values.shape} != grid {self.grid.n}")
        if self.t > 0:
            raise ValueError("ValueGrid time stamps are non-positive")

    def interpolate(self, x):
        """Multilinear interpolation of ``V``; out-of-range queries raise."""
        x = np.asarray(x, dtype=float)
        interp = RegularGridInterpolator(self.grid.axes, self.values, method="linear",
                                         bounds_error=True)
        out = interp(x.reshape(-1, self.grid.ndim))
        return float(out[0]) if x.ndim == 1 else out.reshape(x.shape[:-1])

    def contains(self, x):
        return self.interpolate(x) <= 0.0

    def to_dict(self):
        return {
            "t": self.t,
            "axes": [ax.tolist() for ax in self.grid.axes],
            "shape": list(self.grid.n),
            "values": self.values.ravel().tolist(),
        }

    @classmethod
    def from_dict(cls, doc):
        axes = [np.asarray(a, dtype=float) for a in doc["axes"]]
        spec = GridSpec([a[0] for a in axes], [a[-1] for a in axes], [len(a) for a in axes])
        for a, b in zip(axes, spec.axes):
            if not np.allclose(a, b, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
                raise ValueError("grid axes must be uniformly spaced")
        return cls(spec, np.asarray(doc["values"], dtype=float).reshape(spec.n), float(doc["t"]))

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def _as_generator(dynamics):
    if isinstance(dynamics, LiftedModel):
        if dynamics.basis.degree != 1:
            raise ValueError(
                f"grid solver needs 3-D dynamics, model has N={dynamics.N}; "
                "use brs_halfspace for lifted models")
        F, G = dynamics.generator()
    else:
        F, G = dynamics
    F = np.asarray(F, dtype=float)
    G = np.asarray(G, dtype=float).reshape(len(F), -1)
    if G.shape[1] != 1:
        raise ValueError("grid solver supports a single input")
    return F, G[:, 0]


def _target_function(target, grid: GridSpec):
    if isinstance(target, HalfspaceTarget):
        if target.w.size != grid.ndim:
            raise ValueError("half-space target does not match grid dimension")
        return lambda X: X @ target.w - target.c
    return target


def _one_sided(V, h, axis):
    """Forward and backward differences with linear extrapolation at the edges."""
    d = np.diff(V, axis=axis) / h
    first = np.take(d, [0], axis=axis)
    last = np.take(d, [-1], axis=axis)
    p_plus = np.concatenate([d, last], axis=axis)
    p_minus = np.concatenate([first, d], axis=axis)
    return p_plus, p_minus


def brs_grid(dynamics: Union[LiftedModel, Sequence], target: Union[HalfspaceTarget, Callable],
             t_abs, grid: GridSpec = None, input_bounds: InputBounds = InputBounds(),
             within_horizon=False, cfl=DEFAULT_CFL, time_step=None) -> ValueGrid:
    """Backward reachable set on a grid.

    Parameters
    ----------
    dynamics : LiftedModel or (F, G)
        Degree-1 model (its generator ``(A - I)/dt, B/dt`` is used) or a
        continuous-time pair for ``dx/dt = F x + G u``.
    target : HalfspaceTarget or callable
        Target surface function evaluated on node arrays of shape ``(..., 3)``.
    t_abs : float
        Time-to-go ``|t|``.
    time_step : float, optional
        Requested step; shortened automatically when it violates the CFL limit.

    Returns
    -------
    ValueGrid
        ``V(., -t_abs)``.
    """
    grid = GridSpec.from_bounds() if grid is None else grid
    if grid.ndim > 3:
        raise ValueError(f"grid dimension {grid.ndim} > 3 is infeasible; use brs_halfspace")
    F, G = _as_generator(dynamics)
    if F.shape != (grid.ndim, grid.ndim):
        raise ValueError(f"dynamics dimension {F.shape[0]} != grid dimension {grid.ndim}")
    if t_abs < 0:
        raise ValueError("t_abs must be non-negative")

    X = grid.points()
    V = np.array(_target_function(target, grid)(X), dtype=float)
    if t_abs == 0:
        return ValueGrid(grid, V, 0.0)

    drift = X @ F.T
    u_lo, u_hi = input_bounds.a_min, input_bounds.a_max
    u_abs = max(abs(u_lo), abs(u_hi))
    alpha = np.array([np.abs(drift[..., i]).max() + abs(G[i]) * u_abs
                      for i in range(grid.ndim)])
    h = grid.spacing
    rate = float(np.sum(alpha / h))
    dt_max = cfl / rate if rate > 0 else t_abs
    dt_req = t_abs if time_step is None else float(time_step)
    n_steps = max(1, math.ceil(t_abs / min(dt_req, dt_max) - 1e-12))
    dt = t_abs / n_steps

    for _ in range(n_steps):
        diss = np.zeros_like(V)
        p_avg = []
        for i in range(grid.ndim):
            pp, pm = _one_sided(V, h[i], i)
            p_avg.append(0.5 * (pp + pm))
            diss += 0.5 * alpha[i] * (pp - pm)
        pg = sum(p * g for p, g in zip(p_avg, G))
        ham = sum(p * drift[..., i] for i, p in enumerate(p_avg))
        ham = ham + np.minimum(pg * u_lo, pg * u_hi)
        update = ham + diss
        if within_horizon:
            update = np.minimum(update, 0.0)
        V = V + dt * update
    return ValueGrid(grid, V, -float(t_abs))


def boundary_nodes(inside: np.ndarray):
    """Mask of nodes in ``inside`` with an outside axis neighbour."""
    inside = np.asarray(inside, dtype=bool)
    edge = np.zeros_like(inside)
    for axis in range(inside.ndim):
        n = inside.shape[axis]
        a = np.take(inside, range(n - 1), axis=axis)
        b = np.take(inside, range(1, n), axis=axis)
        differ = a != b
        pad = [(0, 0)] * inside.ndim
        lo, hi = list(pad), list(pad)
        lo[axis], hi[axis] = (0, 1), (1, 0)
        edge |= np.pad(differ, lo) | np.pad(differ, hi)
    return edge & inside
