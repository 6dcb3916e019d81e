"""State, bound and trajectory types for the AV/adversary subsystem.

The reachability state is ``x = (x1, x2, x3)``: AV speed, adversary (the AV's
leader) speed, and the bumper-to-bumper gap between them.
"""

import csv
import io
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Protocol, Sequence

import numpy as np

from ._validation import check_inputs, check_positive

DEFAULT_DT = 0.1


class StateVec(NamedTuple):
    x1: float  # AV speed (m/s)
    x2: float  # adversary speed (m/s)
    x3: float  # gap, adversary rear bumper minus AV front bumper (m)


@dataclass(frozen=True)
class StateBounds:
    """Admissible state box: speeds in [0, v_max], gap in [dd_min, dd_max]."""

    v_max: float = 10.0
    dd_min: float = 0.0
    dd_max: float = 20.0

    def __post_init__(self):
        check_positive("v_max", self.v_max)
        if not self.dd_min < self.dd_max:
            raise ValueError(f"dd_min ({self.dd_min}) must be < dd_max ({self.dd_max})")

    @property
    def lo(self):
        return np.array([0.0, 0.0, self.dd_min])

    @property
    def hi(self):
        return np.array([self.v_max, self.v_max, self.dd_max])

    def clamp(self, x):
        """Clamp ``x`` into the box; returns ``(clamped, was_outside)``."""
        x = np.asarray(x, dtype=float)
        y = np.clip(x, self.lo, self.hi)
        return y, bool(np.any(y != x))


@dataclass(frozen=True)
class InputBounds:
    """Interval of admissible adversary accelerations (m/s^2)."""

    a_min: float = -1.0
    a_max: float = 1.0

    def __post_init__(self):
        if not self.a_min < self.a_max:
            raise ValueError(f"a_min ({self.a_min}) must be < a_max ({self.a_max})")
        if not self.a_min <= 0.0 <= self.a_max:
            raise ValueError("input interval must contain 0 (coasting is always admissible)")


def in_bounds(x, b: StateBounds) -> bool:
    x1, x2, x3 = (float(v) for v in x)
    return (0.0 <= x1 <= b.v_max and 0.0 <= x2 <= b.v_max
            and b.dd_min <= x3 <= b.dd_max)


def clamp_input(u, b: InputBounds) -> float:
    return float(min(max(float(u), b.a_min), b.a_max))


class SimulationTerminated(RuntimeError):
    """Raised by a black-box step when the simulation cannot continue."""

    def __init__(self, reason, state=None):
        super().__init__(reason)
        self.reason = reason
        self.state = state


class BlackBoxSystem(Protocol):
    def step(self, x: StateVec, u: float, dt: float) -> StateVec:
        ...


@dataclass(frozen=True)
class Trajectory:
    """Sampled trajectory: ``len(states) == len(inputs) + 1``.

    ``termination`` names the reason a rollout stopped early (``None`` when
    every input was applied). ``clamped[k]`` flags states that left the
    admissible box and were clamped back into it.
    """

    dt: float
    states: np.ndarray
    inputs: np.ndarray
    termination: Optional[str] = None
    clamped: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        check_positive("dt", self.dt)
        states = np.array(self.states, dtype=float).reshape(-1, 3)
        inputs = np.array(self.inputs, dtype=float).reshape(-1)
        if len(states) != len(inputs) + 1:
            raise ValueError(
                f"trajectory needs len(states) == len(inputs) + 1, "
                f"got {len(states)} states and {len(inputs)} inputs")
        clamped = self.clamped
        if clamped is None:
            clamped = np.zeros(len(states), dtype=bool)
        clamped = np.array(clamped, dtype=bool)
        for arr in (states, inputs, clamped):
            arr.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "clamped", clamped)

    def __len__(self):
        return len(self.states)

    @property
    def times(self):
        return self.dt * np.arange(len(self.states))

    @property
    def n_steps(self):
        return len(self.inputs)

    def state(self, k) -> StateVec:
        return StateVec(*self.states[k])

    def prefix(self, j):
        """First ``j`` steps (``j + 1`` states)."""
        return Trajectory(self.dt, self.states[:j + 1], self.inputs[:j],
                          clamped=self.clamped[:j + 1])

    def __eq__(self, other):
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.dt == other.dt and self.termination == other.termination
                and np.array_equal(self.states, other.states)
                and np.array_equal(self.inputs, other.inputs))

    __hash__ = None


class LinearSystem:
    """Discrete linear plant ``x+ = A x + B u`` (``dt`` must match ``self.dt``)."""

    def __init__(self, A, B=None, dt=DEFAULT_DT):
        self.A = np.asarray(A, dtype=float)
        n = self.A.shape[0]
        self.B = np.zeros(n) if B is None else np.asarray(B, dtype=float).reshape(n)
        self.dt = dt

    def step(self, x, u, dt):
        if not np.isclose(dt, self.dt):
            raise ValueError(f"LinearSystem was discretized at dt={self.dt}, got {dt}")
        return StateVec(*(self.A @ np.asarray(x, dtype=float) + self.B * float(u)))


def rollout(sys: BlackBoxSystem, x0, inputs: Sequence[float], dt=DEFAULT_DT,
            bounds: Optional[StateBounds] = None) -> Trajectory:
    """Apply ``inputs`` to ``sys`` from ``x0``.

    When ``bounds`` is given, excursions outside the box are clamped and
    flagged rather than rejected. A :class:`SimulationTerminated` raised by the
    system truncates the trajectory and is reported as ``termination``.
    """
    check_positive("dt", dt)
    inputs = check_inputs(inputs)
    if len(inputs) == 0:
        raise ValueError("inputs must be nonempty")
    x = StateVec(*(float(v) for v in x0))
    states, flags, applied = [x], [False], []
    termination = None
    for u in inputs:
        try:
            nxt = sys.step(x, float(u), dt)
        except SimulationTerminated as exc:
            termination = exc.reason
            break
        flag = False
        if bounds is not None:
            arr, flag = bounds.clamp(nxt)
            nxt = StateVec(*arr)
        x = StateVec(*(float(v) for v in nxt))
        states.append(x)
        flags.append(flag)
        applied.append(float(u))
    return Trajectory(dt, np.array(states), np.array(applied), termination, np.array(flags))


TRAJECTORY_HEADER = ["t", "x1", "x2", "x3", "u"]


def trajectory_to_csv(traj: Trajectory) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRAJECTORY_HEADER)
    for k, (t, s) in enumerate(zip(traj.times, traj.states)):
        u = repr(float(traj.inputs[k])) if k < traj.n_steps else ""
        w.writerow([repr(float(t)), *(repr(float(v)) for v in s), u])
    return buf.getvalue()


def write_trajectory_csv(traj: Trajectory, path):
    with open(path, "w", newline="") as fh:
        fh.write(trajectory_to_csv(traj))


def read_trajectory_csv(path) -> Trajectory:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != TRAJECTORY_HEADER:
        raise ValueError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
    body = rows[1:]
    if len(body) < 1:
        raise ValueError(f"{path}: trajectory has no states")
    t = np.array([float(r[0]) for r in body])
    states = np.array([[float(v) for v in r[1:4]] for r in body])
    if body[-1][4] != "":
        raise ValueError(f"{path}: final row must have an empty input")
    inputs = np.array([float(r[4]) for r in body[:-1]])
    dt = float(t[1] - t[0]) if len(t) > 1 else DEFAULT_DT
    return Trajectory(dt, states, inputs)
