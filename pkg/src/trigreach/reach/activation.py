"""Closed-loop check that synthesized adversary inputs fire the backdoor."""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .. import ringsim as rs
from ..koopman.model import LiftedModel
from ..sysmodel import InputBounds, StateBounds, Trajectory
from .chain import brs_halfspace, optimal_inputs, synthesize_trajectory
from .target import TriggerSpec, g0_value, lifted_target


@dataclass(frozen=True)
class SimConfig:
    """Everything the ring needs to replay an adversary plan.

    ``follow_through`` is the adversary acceleration once its planned inputs
    are exhausted (hard braking by default, so that the AV's latched
    acceleration closes the gap).
    """

    ring: rs.RingConfig = field(default_factory=rs.RingConfig)
    idm: rs.IDMParams = field(default_factory=rs.IDMParams)
    backdoor: rs.BackdoorConfig = field(default_factory=rs.BackdoorConfig)
    av: rs.AVParams = field(default_factory=rs.AVParams)
    adversary_bounds: InputBounds = field(default_factory=InputBounds)
    follow_through: Optional[float] = -1.0
    post_trigger_time: float = 1.0


@dataclass
class ActivationResult:
    trigger_reached: bool
    steps_to_trigger: Optional[int]
    collision: bool
    collision_time: Optional[float]
    trajectory: Trajectory
    states: list = field(repr=False, default_factory=list)

    def to_dict(self):
        return {
            "trigger_reached": self.trigger_reached,
            "steps_to_trigger": self.steps_to_trigger,
            "collision": self.collision,
            "collision_time": self.collision_time,
        }


def validate_activation(sim: SimConfig, x0, inputs: Sequence[float]) -> ActivationResult:
    """Replay ``inputs`` from ``x0`` on the ring with the backdoored AV.

    The trigger counts as reached when the AV's trigger fires within
    ``len(inputs)`` steps (step 0 included). After a trigger the run continues
    for ``t_adv + post_trigger_time`` seconds to observe a collision;
    ``collision_time`` is measured from the trigger.
    """
    initial = rs.realize_state(x0, sim.ring, sim.idm)
    K = len(inputs)
    dt = sim.ring.dt
    tail = int(math.ceil((sim.backdoor.t_adv + sim.post_trigger_time) / dt - 1e-9))
    n_steps = K + tail

    def stop(k, ctrl):
        return ctrl.trigger_count == 0 and k > K

    ep = rs.run_episode(sim.ring, sim.idm, sim.backdoor, n_steps * dt,
                        rs.replay_policy(inputs, sim.follow_through), initial, sim.av,
                        sim.adversary_bounds, stop=stop)
    first = ep.trigger_steps[0] if ep.trigger_steps else None
    reached = first is not None and first <= K
    collision_time = None
    if reached and ep.collided:
        collision_time = (ep.collision_step - first) * dt
    return ActivationResult(reached, first if reached else None,
                            bool(reached and ep.collided), collision_time,
                            ep.trajectory, ep.states)


@dataclass
class ActivationReport:
    t_abs: float
    n_samples: int
    n_activated: int
    mean_steps_to_trigger: Optional[float]
    n_collisions: int
    n_collisions_in_window: int
    terminal_deviation: np.ndarray
    within_horizon: bool = False
    terminal_tolerance: float = 0.5
    results: List[ActivationResult] = field(default_factory=list, repr=False)
    samples: Optional[np.ndarray] = field(default=None, repr=False)
    predicted: List[Trajectory] = field(default_factory=list, repr=False)

    @property
    def rate(self):
        return self.n_activated / self.n_samples if self.n_samples else 0.0

    @property
    def collision_rate(self):
        """Fraction of activated runs that collide within ``t_adv + 1`` s of the trigger."""
        return self.n_collisions_in_window / self.n_activated if self.n_activated else 0.0

    def to_dict(self):
        # runs that ended before the planned horizon have NaN deviation and
        # count as outside the tolerance
        dev = self.terminal_deviation
        finite = dev[np.all(np.isfinite(dev), axis=1)] if len(dev) else dev
        return {
            "t_abs": self.t_abs,
            "n_samples": self.n_samples,
            "n_activated": self.n_activated,
            "rate": self.rate,
            "mean_steps_to_trigger": self.mean_steps_to_trigger,
            "n_collisions": self.n_collisions,
            "n_collisions_in_window": self.n_collisions_in_window,
            "within_horizon": self.within_horizon,
            "max_terminal_deviation": (finite.max(axis=0).tolist() if len(finite)
                                       else None),
            "terminal_tolerance": self.terminal_tolerance,
            "frac_terminal_within_tolerance": (
                float(np.mean(np.all(dev <= self.terminal_tolerance, axis=1)))
                if len(dev) else None),
        }


class NoSamplesError(RuntimeError):
    """No realizable state inside the BRS was found."""


def sample_brs(chain, spec: TriggerSpec, n, rng, sim: SimConfig,
               box: StateBounds = StateBounds(), within_horizon=False, max_draws=2_000_000,
               batch=20_000):
    """Uniform rejection samples from ``BRS \\ G0`` intersected with the realizable set."""
    out, drawn = [], 0
    while len(out) < n and drawn < max_draws:
        X = rng.uniform(box.lo, box.hi, size=(batch, 3))
        drawn += batch
        keep = chain.contains(X, within_horizon=within_horizon) & (g0_value(X, spec) > 0)
        for x in X[keep]:
            if rs.is_realizable(x, sim.ring, sim.idm):
                out.append(x)
                if len(out) == n:
                    break
    if not out:
        raise NoSamplesError("no realizable BRS state found in the sampling box")
    return np.array(out)


def run_activation_experiment(model: LiftedModel, sim: SimConfig, horizons, n_samples=200,
                              seed=0, box: StateBounds = StateBounds(),
                              within_horizon=False,
                              terminal_tolerance=0.5) -> List[ActivationReport]:
    """Sample BRS states per horizon, synthesize inputs, replay them on the ring."""
    spec = sim.backdoor.trigger
    target = lifted_target(spec, model.basis)
    rng = np.random.default_rng(seed)
    reports = []
    window = spec.t_adv + sim.post_trigger_time + 1e-9
    for t_abs in horizons:
        K = int(round(t_abs / model.dt))
        chain = brs_halfspace(model, target, K, sim.adversary_bounds)
        X0 = sample_brs(chain, spec, n_samples, rng, sim, box, within_horizon)
        results, predicted, dev = [], [], []
        for x0 in X0:
            u = optimal_inputs(chain, x0, within_horizon=within_horizon)
            pred = synthesize_trajectory(model, chain, x0, within_horizon=within_horizon)
            res = validate_activation(sim, x0, u)
            results.append(res)
            predicted.append(pred)
            k = len(u)
            sim_states = res.trajectory.states
            if k < len(sim_states):
                dev.append(np.abs(pred.states[-1] - sim_states[k]))
            else:
                dev.append(np.full(3, np.nan))
        activated = [r for r in results if r.trigger_reached]
        steps = [r.steps_to_trigger for r in activated]
        reports.append(ActivationReport(
            t_abs=float(t_abs), n_samples=len(X0), n_activated=len(activated),
            mean_steps_to_trigger=float(np.mean(steps)) if steps else None,
            n_collisions=sum(r.collision for r in activated),
            n_collisions_in_window=sum(r.collision and r.collision_time <= window
                                       for r in activated),
            terminal_deviation=np.array(dev), within_horizon=within_horizon,
            terminal_tolerance=terminal_tolerance,
            results=results, samples=X0, predicted=predicted))
    return reports
