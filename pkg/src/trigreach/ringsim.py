"""Single-lane ring road with IDM human drivers and one backdoored AV.

Vehicles are indexed in driving order: the leader of vehicle ``i`` is vehicle
``(i + 1) % n``. Positions are front-bumper coordinates on ``[0, track_length)``.
The adversary is the human-driven vehicle directly ahead of the AV; when an
adversary policy is active its acceleration is supplied externally instead of
by IDM.
"""

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from ._validation import check_positive
from .trigger import TriggerSpec, g0_value
from .sysmodel import (DEFAULT_DT, InputBounds, SimulationTerminated, StateBounds,
                       StateVec, Trajectory, clamp_input)


class CollisionError(ValueError):
    """Car-following query with a non-positive gap."""


class UnrealizableStateError(ValueError):
    """A reachability state cannot be embedded on the ring."""


@dataclass(frozen=True)
class RingConfig:
    track_length: float = 230.0
    n_vehicles: int = 21
    vehicle_length: float = 5.0
    dt: float = DEFAULT_DT
    av_index: int = 0
    adversary_index: int = 1

    def __post_init__(self):
        if self.n_vehicles < 2:
            raise ValueError("need at least two vehicles")
        check_positive("track_length", self.track_length)
        check_positive("vehicle_length", self.vehicle_length)
        check_positive("dt", self.dt)
        if self.n_vehicles * self.vehicle_length >= self.track_length:
            raise ValueError("vehicles do not fit on the track")
        if not 0 <= self.av_index < self.n_vehicles:
            raise ValueError("av_index out of range")
        if self.adversary_index != (self.av_index + 1) % self.n_vehicles:
            raise ValueError("adversary must be the vehicle directly ahead of the AV")

    @property
    def free_space(self):
        return self.track_length - self.n_vehicles * self.vehicle_length


@dataclass(frozen=True)
class IDMParams:
    v0: float = 10.0
    T: float = 1.0
    a: float = 1.0
    b: float = 1.5
    delta: float = 4.0
    s0: float = 2.0

    def __post_init__(self):
        for name in ("v0", "T", "a", "b", "delta", "s0"):
            check_positive(name, getattr(self, name))
        if self.delta < 1:
            raise ValueError("delta must be >= 1")


@dataclass(frozen=True)
class AVParams:
    """Nominal AV behaviour: IDM with a stretched headway and bounded command.

    The braking limit equals the IDM comfortable deceleration; with -1 the AV
    runs into the stop-and-go waves that form on the ring.
    """

    headway_factor: float = 1.2
    a_min: float = -1.5
    a_max: float = 1.0

    def nominal_idm(self, idm: IDMParams) -> IDMParams:
        return IDMParams(idm.v0, idm.T * self.headway_factor, idm.a, idm.b, idm.delta, idm.s0)


@dataclass(frozen=True)
class BackdoorConfig:
    """Hidden behaviour of the AV: on ``g0(obs) <= 0`` apply ``a_adv`` for ``t_adv``."""

    trigger: TriggerSpec = field(default_factory=TriggerSpec)
    enabled: bool = True

    @property
    def a_adv(self):
        return self.trigger.a_adv

    @property
    def t_adv(self):
        return self.trigger.t_adv


@dataclass(frozen=True)
class RingState:
    positions: np.ndarray
    speeds: np.ndarray
    collided: bool = False

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        spd = np.array(self.speeds, dtype=float)
        if pos.shape != spd.shape or pos.ndim != 1:
            raise ValueError("positions and speeds must be 1-D arrays of equal length")
        if np.any(spd < 0):
            raise ValueError("speeds must be non-negative")
        pos.setflags(write=False)
        spd.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "speeds", spd)

    def __eq__(self, other):
        if not isinstance(other, RingState):
            return NotImplemented
        return (self.collided == other.collided
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.speeds, other.speeds))

    __hash__ = None


def idm_accel(v, v_lead, gap, p: IDMParams):
    """Intelligent driver model acceleration (scalar or elementwise)."""
    gap = np.asarray(gap, dtype=float)
    if np.any(gap <= 0):
        raise CollisionError("IDM needs a positive gap")
    v = np.asarray(v, dtype=float)
    dv = v - np.asarray(v_lead, dtype=float)
    s_star = p.s0 + v * p.T + v * dv / (2.0 * math.sqrt(p.a * p.b))
    acc = p.a * (1.0 - (v / p.v0) ** p.delta - (s_star / gap) ** 2)
    return float(acc) if acc.ndim == 0 else acc


def equilibrium_speed(gap, p: IDMParams):
    """Speed at which IDM holds ``gap`` with zero acceleration."""
    if gap <= p.s0:
        return 0.0
    f = lambda v: 1.0 - (v / p.v0) ** p.delta - ((p.s0 + v * p.T) / gap) ** 2
    return float(brentq(f, 0.0, p.v0))


def gaps(s: RingState, cfg: RingConfig):
    """Bumper-to-bumper gap from each vehicle to its leader."""
    ahead = np.roll(s.positions, -1)
    return np.mod(ahead - s.positions, cfg.track_length) - cfg.vehicle_length


def detect_collision(s: RingState, cfg: RingConfig) -> bool:
    return bool(np.any(gaps(s, cfg) <= 0.0))


def observe(s: RingState, cfg: RingConfig) -> StateVec:
    """Reachability state ``(v_AV, v_adversary, gap)`` of a ring state."""
    g = gaps(s, cfg)[cfg.av_index]
    return StateVec(float(s.speeds[cfg.av_index]), float(s.speeds[cfg.adversary_index]),
                    float(g))


def uniform_state(cfg: RingConfig, idm: IDMParams, speed=None) -> RingState:
    """Evenly spaced fleet at the IDM equilibrium speed of that spacing."""
    gap = cfg.free_space / cfg.n_vehicles
    v = equilibrium_speed(gap, idm) if speed is None else float(speed)
    pos = np.arange(cfg.n_vehicles) * (gap + cfg.vehicle_length)
    return RingState(pos, np.full(cfg.n_vehicles, v))


def realize_state(x, cfg: RingConfig, idm: IDMParams) -> RingState:
    """Embed ``(x1, x2, x3)`` on the ring.

    The AV and the adversary get speeds ``x1``, ``x2`` and gap ``x3``; the other
    vehicles share the remaining free space evenly and drive at the IDM
    equilibrium speed of their spacing.
    """
    x1, x2, x3 = (float(v) for v in x)
    if x1 < 0 or x2 < 0:
        raise UnrealizableStateError(f"negative speed in {x}")
    if x3 <= 0:
        raise UnrealizableStateError(f"gap {x3} is not positive")
    n = cfg.n_vehicles
    rest = (cfg.free_space - x3) / (n - 1)
    if rest <= 0:
        raise UnrealizableStateError(
            f"gap {x3} m leaves no room for the other {n - 2} vehicles")
    gap_list = np.full(n, rest)
    gap_list[cfg.av_index] = x3
    # gap_list[i] is the gap ahead of vehicle i
    pos = np.empty(n)
    speeds = np.full(n, equilibrium_speed(rest, idm))
    p = 0.0
    for j in range(n):
        i = (cfg.av_index + j) % n
        pos[i] = p
        p += gap_list[i] + cfg.vehicle_length
    speeds[cfg.av_index] = x1
    speeds[cfg.adversary_index] = x2
    return RingState(np.mod(pos, cfg.track_length), speeds)


def is_realizable(x, cfg: RingConfig, idm: IDMParams) -> bool:
    try:
        realize_state(x, cfg, idm)
    except UnrealizableStateError:
        return False
    return True


def step_ring(s: RingState, av_accel, adversary_accel, cfg: RingConfig, idm: IDMParams,
              adversary_bounds: InputBounds = InputBounds()) -> RingState:
    """One semi-implicit Euler step of the whole fleet.

    ``adversary_accel=None`` lets the adversary drive like the other humans.
    A collided state is returned unchanged.
    """
    if s.collided:
        return s
    g = gaps(s, cfg)
    lead_v = np.roll(s.speeds, -1)
    acc = idm_accel(s.speeds, lead_v, np.maximum(g, 1e-9), idm)
    acc[cfg.av_index] = float(av_accel)
    if adversary_accel is not None:
        acc[cfg.adversary_index] = clamp_input(adversary_accel, adversary_bounds)
    speeds = np.maximum(s.speeds + acc * cfg.dt, 0.0)
    pos = np.mod(s.positions + speeds * cfg.dt, cfg.track_length)
    return RingState(pos, speeds)


def freeze(s: RingState) -> RingState:
    """Post-collision state: everything stops where it is."""
    return RingState(s.positions, np.zeros_like(s.speeds), collided=True)


def nominal_av_accel(obs, nominal: IDMParams, av: AVParams = AVParams()):
    x1, x2, x3 = obs
    if x3 <= 0:
        return av.a_min
    a = idm_accel(x1, x2, x3, av.nominal_idm(nominal))
    return float(min(max(a, av.a_min), av.a_max))


class BackdooredController:
    """AV controller whose hidden trigger latches a malicious acceleration.

    Once ``g0(obs) <= 0`` is observed, ``a_adv`` is returned for exactly
    ``ceil(t_adv / dt)`` consecutive calls, whatever the later observations.
    """

    def __init__(self, bd: Optional[BackdoorConfig], nominal: IDMParams,
                 dt=DEFAULT_DT, av: AVParams = AVParams()):
        self.bd = bd
        self.nominal = nominal
        self.dt = dt
        self.av = av
        self.reset()

    def reset(self):
        self.latch_remaining = 0
        self.trigger_count = 0

    @property
    def latch_steps(self):
        return int(math.ceil(self.bd.t_adv / self.dt - 1e-9))

    @property
    def malicious(self):
        return self.latch_remaining > 0

    def triggered_by(self, obs):
        return (self.bd is not None and self.bd.enabled
                and g0_value(obs, self.bd.trigger) <= 0.0)

    def act(self, obs):
        if self.latch_remaining == 0 and self.triggered_by(obs):
            self.latch_remaining = self.latch_steps
            self.trigger_count += 1
        if self.latch_remaining > 0:
            self.latch_remaining -= 1
            return float(self.bd.a_adv)
        return nominal_av_accel(obs, self.nominal, self.av)


def av_controller(observation, bd: Optional[BackdoorConfig], nominal: IDMParams,
                  av: AVParams = AVParams()):
    """Single decision of a freshly reset backdoored controller."""
    return BackdooredController(bd, nominal, av=av).act(observation)


AdversaryPolicy = Callable[[int, StateVec], Optional[float]]


def replay_policy(inputs: Sequence[float], after: Optional[float] = None) -> AdversaryPolicy:
    """Adversary that plays ``inputs`` step by step, then ``after``
    (``None`` hands the vehicle back to IDM)."""
    inputs = [float(u) for u in inputs]

    def policy(k, obs):
        return inputs[k] if k < len(inputs) else after
    return policy


@dataclass
class Episode:
    states: List[RingState]
    trajectory: Trajectory
    termination: str
    trigger_steps: List[int] = field(default_factory=list)
    collision_step: Optional[int] = None

    @property
    def collided(self):
        return self.collision_step is not None


def run_episode(cfg: RingConfig, idm: IDMParams, bd: Optional[BackdoorConfig], horizon,
                adversary_policy: Optional[AdversaryPolicy] = None,
                initial: Optional[RingState] = None, av: AVParams = AVParams(),
                adversary_bounds: InputBounds = InputBounds(),
                stop: Optional[Callable[[int, "BackdooredController"], bool]] = None) -> Episode:
    """Step the ring for ``horizon`` seconds or until a collision.

    The recorded 3-D trajectory holds the observation before every step and the
    adversary acceleration actually applied (its IDM output when no policy
    acts). ``stop(k, controller)`` may end the episode early.
    """
    check_positive("horizon", horizon)
    n_steps = int(round(horizon / cfg.dt))
    if n_steps < 1:
        raise ValueError("horizon shorter than one time step")
    s = uniform_state(cfg, idm) if initial is None else initial
    ctrl = BackdooredController(bd, idm, cfg.dt, av)
    states, obs_list, applied = [s], [observe(s, cfg)], []
    triggers, collision_step, termination = [], None, "horizon"
    for k in range(n_steps):
        obs = obs_list[-1]
        before = ctrl.trigger_count
        a_av = ctrl.act(obs)
        if ctrl.trigger_count > before:
            triggers.append(k)
        u = None if adversary_policy is None else adversary_policy(k, obs)
        if u is None:
            g = gaps(s, cfg)[cfg.adversary_index]
            u_applied = idm_accel(s.speeds[cfg.adversary_index],
                                  s.speeds[(cfg.adversary_index + 1) % cfg.n_vehicles],
                                  max(g, 1e-9), idm)
        else:
            u_applied = clamp_input(u, adversary_bounds)
        s = step_ring(s, a_av, u, cfg, idm, adversary_bounds)
        applied.append(u_applied)
        if detect_collision(s, cfg):
            s = freeze(s)
            collision_step = k + 1
            termination = "collision"
        states.append(s)
        obs_list.append(observe(s, cfg))
        if collision_step is not None:
            break
        if stop is not None and stop(k + 1, ctrl):
            termination = "stopped"
            break
    traj = Trajectory(cfg.dt, np.array(obs_list), np.array(applied), termination)
    return Episode(states, traj, termination, triggers, collision_step)


class RingBlackBox:
    """The ring as a black-box step function on the 3-D reachability state.

    Consecutive calls continue the internal fleet state when the queried state
    equals the previous output; any other query re-embeds it on the ring.
    Collisions raise :class:`SimulationTerminated`.
    """

    def __init__(self, cfg: RingConfig = RingConfig(), idm: IDMParams = IDMParams(),
                 bd: Optional[BackdoorConfig] = None, av: AVParams = AVParams(),
                 adversary_bounds: InputBounds = InputBounds()):
        self.cfg, self.idm, self.bd, self.av = cfg, idm, bd, av
        self.adversary_bounds = adversary_bounds
        self._state = None
        self._last = None
        self.controller = BackdooredController(bd, idm, cfg.dt, av)

    def reset(self, x):
        self._state = realize_state(x, self.cfg, self.idm)
        self._last = observe(self._state, self.cfg)
        self.controller.reset()

    def step(self, x, u, dt):
        if not np.isclose(dt, self.cfg.dt):
            raise ValueError(f"ring runs at dt={self.cfg.dt}, got {dt}")
        x = StateVec(*(float(v) for v in x))
        if self._last is None or x != self._last:
            self.reset(x)
        a_av = self.controller.act(self._last)
        nxt = step_ring(self._state, a_av, u, self.cfg, self.idm, self.adversary_bounds)
        if detect_collision(nxt, self.cfg):
            self._state = freeze(nxt)
            raise SimulationTerminated("collision", observe(nxt, self.cfg))
        self._state = nxt
        self._last = observe(nxt, self.cfg)
        return self._last


@dataclass
class Dataset:
    X: np.ndarray
    U: np.ndarray
    X_next: np.ndarray

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float).reshape(-1, 3)
        self.U = np.asarray(self.U, dtype=float).reshape(-1)
        self.X_next = np.asarray(self.X_next, dtype=float).reshape(-1, 3)
        if not len(self.X) == len(self.U) == len(self.X_next):
            raise ValueError("dataset columns have different lengths")

    def __len__(self):
        return len(self.X)

    def split(self, n_train):
        return (Dataset(self.X[:n_train], self.U[:n_train], self.X_next[:n_train]),
                Dataset(self.X[n_train:], self.U[n_train:], self.X_next[n_train:]))

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (np.array_equal(self.X, other.X) and np.array_equal(self.U, other.U)
                and np.array_equal(self.X_next, other.X_next))

    __hash__ = None


DATASET_HEADER = ["x1", "x2", "x3", "u", "x1p", "x2p", "x3p"]


def write_dataset_csv(ds: Dataset, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DATASET_HEADER)
        for x, u, xp in zip(ds.X, ds.U, ds.X_next):
            w.writerow([repr(float(v)) for v in (*x, u, *xp)])


def read_dataset_csv(path) -> Dataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != DATASET_HEADER:
        raise ValueError(f"{path}: expected header {','.join(DATASET_HEADER)}")
    data = np.array([[float(v) for v in r] for r in rows[1:]], dtype=float).reshape(-1, 7)
    return Dataset(data[:, :3], data[:, 3], data[:, 4:])


def vehicles_to_csv(states: Sequence[RingState], dt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "vehicle_id", "pos", "speed"])
    for k, s in enumerate(states):
        t = repr(float(k * dt))
        for i, (p, v) in enumerate(zip(s.positions, s.speeds)):
            w.writerow([t, i, repr(float(p)), repr(float(v))])
    return buf.getvalue()


def collect_dataset(cfg: RingConfig, idm: IDMParams, bd: Optional[BackdoorConfig],
                    n_samples, excitation: InputBounds = InputBounds(), seed=0,
                    state_box: StateBounds = StateBounds(), episode_steps=100,
                    av: AVParams = AVParams()) -> Dataset:
    """Exactly ``n_samples`` transitions ``(x, u, x+)`` under random excitation.

    Each episode starts from a uniformly drawn realizable state in
    ``state_box`` and the adversary applies i.i.d. uniform accelerations from
    ``excitation``. A transition that ends in a collision, or during which the
    backdoor is active, is dropped and a new episode begins.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    X, U, Xn = [], [], []
    while len(X) < n_samples:
        x0 = rng.uniform(state_box.lo, state_box.hi)
        if not is_realizable(x0, cfg, idm):
            continue
        s = realize_state(x0, cfg, idm)
        ctrl = BackdooredController(bd, idm, cfg.dt, av)
        for _ in range(episode_steps):
            obs = observe(s, cfg)
            a_av = ctrl.act(obs)
            u = float(rng.uniform(excitation.a_min, excitation.a_max))
            if ctrl.malicious or ctrl.trigger_count:
                break
            nxt = step_ring(s, a_av, u, cfg, idm, excitation)
            if detect_collision(nxt, cfg):
                break
            X.append(obs)
            U.append(u)
            Xn.append(observe(nxt, cfg))
            s = nxt
            if len(X) >= n_samples:
                break
    return Dataset(np.array(X), np.array(U), np.array(Xn))
