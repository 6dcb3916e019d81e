"""Trigger sets in original and lifted coordinates."""

from dataclasses import dataclass
from math import factorial

import numpy as np

from ..koopman.basis import MonomialBasis, lift
from ..trigger import TriggerSpec, g0_value


@dataclass(frozen=True)
class HalfspaceTarget:
    """Set ``{psi : w . psi - c <= 0}`` in lifted coordinates."""

    w: np.ndarray
    c: float

    def __post_init__(self):
        w = np.array(self.w, dtype=float).reshape(-1)
        if not np.any(w != 0):
            raise ValueError("half-space normal w must be nonzero")
        w.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "c", float(self.c))

    def value(self, psi):
        return np.asarray(psi, dtype=float) @ self.w - self.c

    def contains(self, psi):
        return self.value(psi) <= 0.0

    def __eq__(self, other):
        if not isinstance(other, HalfspaceTarget):
            return NotImplemented
        return self.c == other.c and np.array_equal(self.w, other.w)

    __hash__ = None


def _multinomial(exponents):
    d = int(sum(exponents))
    out = factorial(d)
    for e in exponents:
        out //= factorial(int(e))
    return out


def lifted_target(spec: TriggerSpec, basis: MonomialBasis) -> HalfspaceTarget:
    """Expand ``h(x)**d - c**d`` over the degree-``d`` monomial basis.

    For odd ``d`` the map ``s -> s**d`` is strictly increasing, so the lifted
    half-space and the original trigger set contain exactly the same states.
    """
    a = spec.linear_coefficients
    w = np.array([_multinomial(e) * np.prod(a ** e) for e in basis.exponents])
    return HalfspaceTarget(w, spec.offset ** basis.degree)


def lifted_target_value(x, target: HalfspaceTarget, basis: MonomialBasis):
    """``g_psi(lift(x))`` evaluated on original-coordinate states."""
    return target.value(lift(np.asarray(x, dtype=float), basis))
