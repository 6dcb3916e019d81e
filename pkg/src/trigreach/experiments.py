"""Reference experiments: the 3-state linear example and ring rollouts."""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .koopman import (MonomialBasis, fit_edmdc, lifted_residuals, propagate_residuals,
                      spectral_radius)
from .koopman.analysis import error_bound

#: Slowly rotating 3-state system with one mildly unstable mode.
NUMERICAL_A = np.array([
    [1.0030, 0.0000, 0.0000],
    [0.0008, 0.9950, 0.0998],
    [0.0059, -0.0998, 0.9950],
])


@dataclass
class SeedResult:
    seed: int
    propagated: dict
    one_step: dict
    epsilon: float
    sigma: float
    stable_moduli: np.ndarray
    ls_moduli: np.ndarray

    @property
    def bound_holds(self):
        return bool(np.all(self.propagated["stable"] <= self.sigma))


@dataclass
class NumericalResult:
    gamma: float
    seeds: List[SeedResult] = field(default_factory=list)

    def curve(self, kind, name):
        """Per-seed curves stacked as ``(n_seeds, K)``."""
        return np.array([getattr(s, kind)[name] for s in self.seeds])

    def mean_std(self, kind, name):
        c = self.curve(kind, name)
        return c.mean(axis=0), c.std(axis=0)

    @property
    def bound_holds(self):
        return all(s.bound_holds for s in self.seeds)

    def one_step_ratio(self):
        """Mean stable one-step error over mean LS one-step error."""
        return float(self.curve("one_step", "stable").mean()
                     / self.curve("one_step", "ls").mean())

    def to_dict(self):
        ls, st = self.mean_std("propagated", "ls")[0], self.mean_std("propagated", "stable")[0]
        checkpoints = [k for k in (100, 200, 300, 400, 500) if k <= len(ls)]
        return {
            "gamma": self.gamma,
            "n_seeds": len(self.seeds),
            "bound_holds": self.bound_holds,
            "sigma_min": float(min(s.sigma for s in self.seeds)),
            "max_stable_propagated": float(self.curve("propagated", "stable").max()),
            "one_step_ratio": self.one_step_ratio(),
            "stable_moduli": [s.stable_moduli.tolist() for s in self.seeds],
            "mean_propagated_at": {str(k): {"ls": float(ls[k - 1]), "stable": float(st[k - 1])}
                                   for k in checkpoints},
        }


def _unit_ball(rng, n, dim=3):
    x = rng.normal(size=(n, dim))
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    return x * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)


def numerical_example(seeds=range(10), n_samples=1000, n_train=500, noise=0.01,
                      gamma=0.999, A=NUMERICAL_A) -> NumericalResult:
    """Fit raw and gamma-stable models to noisy snapshots of ``x+ = A x``.

    Each seed draws ``n_samples`` states uniformly in the unit ball, applies
    ``A`` plus Gaussian process noise of standard deviation ``noise``, fits on
    the first ``n_train`` pairs and evaluates on the rest. Propagated errors
    accumulate the ordered test residuals through each model's ``A``.
    """
    basis = MonomialBasis(1)
    out = NumericalResult(gamma)
    for seed in seeds:
        rng = np.random.default_rng(seed)
        X = _unit_ball(rng, n_samples, len(A))
        Y = X @ A.T + noise * rng.normal(size=X.shape)
        Xtr, Ytr, Xte, Yte = X[:n_train], Y[:n_train], X[n_train:], Y[n_train:]
        models = {"ls": fit_edmdc(Xtr, None, Ytr, basis)}
        if spectral_radius(models["ls"].A) > gamma:
            models["stable"] = models["ls"].stabilized(gamma)
        else:
            models["stable"] = models["ls"]
        prop, one = {}, {}
        for name, m in models.items():
            r = lifted_residuals(m, Xte, None, Yte)
            prop[name] = propagate_residuals(m.A, r)
            one[name] = np.linalg.norm(r, axis=1)
        eps = float(one["stable"].max())
        out.seeds.append(SeedResult(
            seed, prop, one, eps, error_bound(eps, basis.size, gamma),
            np.sort(np.abs(np.linalg.eigvals(models["stable"].A)))[::-1],
            np.sort(np.abs(np.linalg.eigvals(models["ls"].A)))[::-1]))
    return out


def curves_csv(result: NumericalResult, kind) -> str:
    """``k,ls_mean,ls_std,stable_mean,stable_std`` rows."""
    ls_m, ls_s = result.mean_std(kind, "ls")
    st_m, st_s = result.mean_std(kind, "stable")
    lines = ["k,ls_mean,ls_std,stable_mean,stable_std"]
    for k in range(len(ls_m)):
        lines.append(",".join([str(k + 1)] + [repr(float(v)) for v in
                                               (ls_m[k], ls_s[k], st_m[k], st_s[k])]))
    return "\n".join(lines) + "\n"
