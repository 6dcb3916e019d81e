import numpy as np
import pytest

from trigreach.koopman import LiftedModel, MonomialBasis, fit_edmdc
from trigreach.reach import (ActivationReport, NoSamplesError, SimConfig, TriggerSpec,
                             brs_halfspace, lifted_target, run_activation_experiment,
                             sample_brs, validate_activation)
from trigreach.ringsim import collect_dataset
from trigreach.sysmodel import StateBounds

SIM = SimConfig()


def test_safe_state_never_triggers():
    res = validate_activation(SIM, (4.0, 4.0, 15.0), [0.0] * 10)
    assert not res.trigger_reached and not res.collision
    assert res.steps_to_trigger is None and res.collision_time is None


def test_trigger_state_collides_in_window():
    res = validate_activation(SIM, (4.0, 2.0, 2.2), [-1.0] * 3)
    assert res.trigger_reached and res.steps_to_trigger == 0
    assert res.collision and 0 < res.collision_time <= 2.0
    assert res.to_dict()["collision"] is True


def test_late_trigger_does_not_count():
    # with an empty plan only the initial observation can fire the trigger,
    # and an untriggered run stops right after the plan
    res = validate_activation(SIM, (5.0, 4.0, 3.0), [])
    assert not res.trigger_reached
    assert len(res.trajectory) == 2


def test_follow_through_none_hands_back_to_idm():
    sim = SimConfig(follow_through=None)
    res = validate_activation(sim, (4.0, 2.0, 2.2), [])
    assert res.trigger_reached
    assert len(res.trajectory.inputs) >= 1


def test_sample_brs_excludes_trigger_set():
    model = LiftedModel(np.eye(3), [0.0, 1.0, 0.0], MonomialBasis(1), dt=0.1)
    spec = TriggerSpec()
    chain = brs_halfspace(model, lifted_target(spec, model.basis), 5)
    X = sample_brs(chain, spec, 50, np.random.default_rng(0), SIM)
    assert len(X) == 50
    assert np.all(chain.contains(X))
    h = X @ spec.linear_coefficients - spec.offset
    assert np.all(h > 0)


def test_sample_brs_empty():
    model = LiftedModel(np.eye(3), [0.0, 1.0, 0.0], MonomialBasis(1), dt=0.1)
    chain = brs_halfspace(model, lifted_target(TriggerSpec(), model.basis), 5)
    with pytest.raises(NoSamplesError):
        sample_brs(chain, TriggerSpec(), 5, np.random.default_rng(0), SIM,
                   box=StateBounds(v_max=1.0, dd_min=15.0, dd_max=20.0), max_draws=20_000)


def test_experiment_report():
    ds = collect_dataset(SIM.ring, SIM.idm, SIM.backdoor, 3000, seed=0)
    model = fit_edmdc(ds.X, ds.U, ds.X_next, MonomialBasis(1))
    reports = run_activation_experiment(model, SIM, [0.5, 1.0], n_samples=10, seed=1)
    assert [r.t_abs for r in reports] == [0.5, 1.0]
    for r in reports:
        assert r.n_samples == 10 and len(r.results) == 10
        assert 0 <= r.rate <= 1 and r.n_collisions_in_window <= r.n_activated
        doc = r.to_dict()
        assert doc["terminal_tolerance"] == 0.5
        assert r.terminal_deviation.shape == (10, 3)
    again = run_activation_experiment(model, SIM, [0.5], n_samples=10, seed=1)
    np.testing.assert_array_equal(again[0].samples, reports[0].samples)


def test_report_counts_nan_as_failure():
    dev = np.array([[0.1, 0.1, 0.1], [np.nan, np.nan, np.nan]])
    r = ActivationReport(1.0, 2, 1, 3.0, 1, 1, dev)
    doc = r.to_dict()
    assert doc["frac_terminal_within_tolerance"] == 0.5
    assert doc["max_terminal_deviation"] == [0.1, 0.1, 0.1]
    assert r.rate == 0.5 and r.collision_rate == 1.0
