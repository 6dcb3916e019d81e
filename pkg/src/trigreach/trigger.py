"""Backdoor trigger set in original coordinates."""

from dataclasses import dataclass

import numpy as np

from ._validation import check_positive


@dataclass(frozen=True)
class TriggerSpec:
    """Backdoor trigger: malicious acceleration ``a_adv`` held for ``t_adv`` seconds."""

    t_adv: float = 1.0
    a_adv: float = 0.5

    def __post_init__(self):
        check_positive("t_adv", self.t_adv)

    @property
    def linear_coefficients(self):
        """Coefficients of ``h(x) = t x2 + x3 - t x1`` on ``(x1, x2, x3)``."""
        t = self.t_adv
        return np.array([-t, t, 1.0])

    @property
    def offset(self):
        """``c = a_adv * t_adv**2`` so that ``g0 = h(x) - c``."""
        return self.a_adv * self.t_adv ** 2


def g0_value(x, spec: TriggerSpec):
    """Trigger surface ``x2 t + x3 - (x1 t + a_adv t^2)``; ``<= 0`` inside the set.

    Works on one state or on an array of states (last axis of length 3).
    """
    x = np.asarray(x, dtype=float)
    t = spec.t_adv
    val = x[..., 1] * t + x[..., 2] - (x[..., 0] * t + spec.a_adv * t * t)
    return float(val) if np.ndim(val) == 0 else val
