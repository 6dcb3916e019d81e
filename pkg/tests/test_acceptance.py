"""Acceptance suite: one printed PASS/FAIL line per criterion.

Thresholds are the contract values; a criterion that is not met stays red.
"""

import time
import warnings

import numpy as np
import pytest
from scipy.linalg import expm

from trigreach.experiments import numerical_example
from trigreach.koopman import (LiftedModel, MonomialBasis, StabilizationWarning, fit_edmdc,
                               lift, project_stable, propagated_error, recover,
                               spectral_radius)
from trigreach.koopman.stable import RADIUS_TOL
from trigreach.reach import (GridSpec, TriggerSpec, brs_grid, brs_halfspace, g0_value,
                             lifted_target, lifted_target_value, run_activation_experiment)
from trigreach.reach.activation import SimConfig
from trigreach.ringsim import RingBlackBox, collect_dataset, is_realizable
from trigreach.sysmodel import StateBounds, rollout

from test_model import induced_lift_matrix

BOX = StateBounds()
HORIZONS = [0.5, 1.0, 5.0, 10.0]


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\n[acceptance {n}] {'PASS' if ok else 'FAIL'}: {detail}")
        assert ok, detail
    return emit


@pytest.fixture(scope="module")
def numerical():
    t0 = time.perf_counter()
    res = numerical_example(range(10), n_samples=1000, n_train=500, gamma=0.999)
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def ring_model():
    sim = SimConfig()
    ds = collect_dataset(sim.ring, sim.idm, sim.backdoor, 10_000, seed=0, state_box=BOX)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilizationWarning)
        model = fit_edmdc(ds.X, ds.U, ds.X_next, MonomialBasis(3), sim.ring.dt).stabilized(0.999)
    return sim, model


@pytest.fixture(scope="module")
def activation(ring_model):
    sim, model = ring_model
    t0 = time.perf_counter()
    reports = run_activation_experiment(model, sim, HORIZONS, n_samples=200, seed=0, box=BOX)
    return reports, time.perf_counter() - t0


def test_criterion_1_numerical_example(numerical, verdict):
    res, elapsed = numerical
    ls, st = res.mean_std("propagated", "ls")[0], res.mean_std("propagated", "stable")[0]
    margin = ls - st
    late = margin[199:]
    growing = bool(np.all(late > 0) and late[-1] > late[0])
    moduli = np.concatenate([s.stable_moduli for s in res.seeds])
    moduli_ok = bool(np.all((moduli > 0.97) & (moduli < 1.0)))
    ok = res.bound_holds and growing and moduli_ok and elapsed < 60
    verdict(1, ok, f"bound holds={res.bound_holds} (sigma_min="
            f"{min(s.sigma for s in res.seeds):.1f}, max ||R_k||={res.curve('propagated', 'stable').max():.3f}); "
            f"LS-minus-stable margin at k=200 {margin[199]:.3f}, k=500 {margin[-1]:.3f}, "
            f"positive for all k>=200: {bool(np.all(late > 0))}; stable moduli in "
            f"[{moduli.min():.4f}, {moduli.max():.4f}]; {elapsed:.1f} s")


def test_criterion_2_one_step_parity(numerical, verdict):
    res, _ = numerical
    r = res.one_step_ratio()
    verdict(2, max(r, 1 / r) < 2.0, f"mean one-step error stable/LS = {r:.4f}")


def test_criterion_3_error_bound(ring_model, verdict):
    sim, model = ring_model
    rng = np.random.default_rng(2024)
    violations, worst, n = 0, 0.0, 0
    while n < 100:
        x0 = rng.uniform(BOX.lo, BOX.hi)
        if not is_realizable(x0, sim.ring, sim.idm):
            continue
        tr = rollout(RingBlackBox(sim.ring, sim.idm, None), x0, rng.uniform(-1, 1, 100),
                     sim.ring.dt)
        if len(tr) < 2:
            continue
        n += 1
        rep = propagated_error(model, tr)
        ratio = rep.propagated_norms.max() / rep.sigma
        worst = max(worst, ratio)
        violations += int(ratio > 1.0)
    verdict(3, violations == 0, f"{violations} violations in {n} ring rollouts of the "
            f"d=3 gamma-stable model; worst max_k ||R_k|| / sigma = {worst:.4f}")


def _zoh(F, G, dt):
    n = len(F)
    blk = np.zeros((n + 1, n + 1))
    blk[:n, :n], blk[:n, n] = F * dt, G * dt
    E = expm(blk)
    return E[:n, :n], E[:n, n]


def test_criterion_4_grid_vs_chain(verdict):
    F = np.array([[-0.5, 0.5, 0.2], [0.0, 0.0, 0.0], [-1.0, 1.0, 0.0]])
    G = np.array([0.0, 1.0, 0.0])
    target = lifted_target(TriggerSpec(), MonomialBasis(1))
    grid = GridSpec.from_bounds(BOX, 61)
    X = grid.points().reshape(-1, 3)
    h = grid.spacing.max()
    dt = 1e-3
    Ad, Bd = _zoh(F, G, dt)
    exact = LiftedModel(Ad, Bd, MonomialBasis(1), dt=dt)
    t0 = time.perf_counter()
    lines, ok = [], True
    for tau in (0.5, 1.0):
        vg = brs_grid((F, G), target, tau, grid)
        K = int(round(tau / dt))
        chain = brs_halfspace(exact, target, K)
        w, c = chain.weights[K], chain.offsets[K]
        truth = X @ w <= c
        dist = np.abs(X @ w - c) / np.linalg.norm(w)
        mismatch = (vg.values.ravel() <= 0) != truth
        agree = 1 - mismatch.mean()
        far = int(np.sum(mismatch & (dist > h)))
        ok &= agree >= 0.98 and far == 0
        lines.append(f"|t|={tau}: agreement {agree:.4%}, {far} disagreements beyond one spacing")
    elapsed = time.perf_counter() - t0
    verdict(4, ok and elapsed < 300, "; ".join(lines) + f"; {elapsed:.1f} s")


def test_criterion_5_target_equivalence(verdict):
    rng = np.random.default_rng(5)
    X = rng.uniform(BOX.lo, BOX.hi, size=(100_000, 3))
    spec = TriggerSpec()
    g = g0_value(X, spec)
    band = np.abs(g) <= 1e-9
    parts, ok = [], True
    for d in (1, 3, 5):
        b = MonomialBasis(d)
        gl = lifted_target_value(X, lifted_target(spec, b), b)
        bad = int(np.sum(((g <= 0) != (gl <= 0)) & ~band))
        rel = np.max(np.abs(recover(lift(X, b), b) - X) / np.maximum(np.abs(X), 1e-300))
        ok &= bad == 0 and rel <= 1e-9
        parts.append(f"d={d}: {bad} sign violations, recover(lift) rel err {rel:.1e}")
    verdict(5, ok, "; ".join(parts))


def test_criterion_6_activation(activation, verdict):
    reports, elapsed = activation
    parts, ok = [], elapsed < 600
    for r in reports:
        d = r.to_dict()
        within = d["frac_terminal_within_tolerance"]
        ok &= r.rate >= 0.9 and within == 1.0
        parts.append(f"|t|={r.t_abs:g}s rate {r.rate:.3f} ({r.n_activated}/{r.n_samples}), "
                     f"terminal within 0.5: {within:.3f}")
    verdict(6, ok, "; ".join(parts) + f"; {elapsed:.1f} s")


def test_criterion_7_collision_follow_through(activation, verdict):
    reports, _ = activation
    n_act = sum(r.n_activated for r in reports)
    n_col = sum(r.n_collisions_in_window for r in reports)
    frac = n_col / n_act if n_act else 0.0
    verdict(7, n_act > 0 and frac >= 0.9,
            f"{n_col}/{n_act} activated runs collide within t_adv + 1 s ({frac:.3f})")


def test_criterion_8_identifiability(verdict):
    rng = np.random.default_rng(8)
    A = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    B = rng.normal(size=(3, 1))
    M = 10 * (3 + 1)
    X = rng.uniform(0, 10, size=(M, 3))
    U = rng.uniform(-1, 1, size=M)
    m1 = fit_edmdc(X, U, X @ A.T + U[:, None] @ B.T, MonomialBasis(1))
    e1 = max(np.linalg.norm(m1.A - A) / np.linalg.norm(A),
             np.linalg.norm(m1.B - B) / np.linalg.norm(B))
    b3 = MonomialBasis(3)
    T = np.eye(3) + 0.1 * rng.normal(size=(3, 3))
    A3 = induced_lift_matrix(T, b3)
    M3 = 10 * (b3.size + 1)
    X3 = rng.uniform(0, 10, size=(M3, 3))
    m3 = fit_edmdc(X3, rng.uniform(-1, 1, M3), X3 @ T.T, b3)
    e3 = np.linalg.norm(np.hstack([m3.A - A3, m3.B])) / np.linalg.norm(A3)
    verdict(8, e1 <= 1e-6 and e3 <= 1e-6,
            f"relative Frobenius error d=1 (with input) {e1:.1e}, d=3 induced lift {e3:.1e}")


def test_criterion_9_stabilization(verdict):
    rng = np.random.default_rng(9)
    gamma = 0.999
    worst, changed, n_stable = -np.inf, 0, 0
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", StabilizationWarning)
        for i in range(1000):
            A = rng.normal(size=(10, 10)) * rng.uniform(0.05, 0.6)
            out = project_stable(A, gamma)
            worst = max(worst, spectral_radius(out) - gamma)
            if spectral_radius(A) <= gamma:
                n_stable += 1
                changed += int(not np.array_equal(out, A))
    verdict(9, worst <= RADIUS_TOL and changed == 0 and n_stable > 0,
            f"max rho - gamma = {worst:.2e} over 1000 matrices; {changed} of {n_stable} "
            "already-stable inputs modified")
