import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from trigreach.sysmodel import (InputBounds, LinearSystem, SimulationTerminated, StateBounds,
                                StateVec, Trajectory, clamp_input, in_bounds,
                                read_trajectory_csv, rollout, trajectory_to_csv,
                                write_trajectory_csv)


def test_in_bounds_examples():
    b = StateBounds()
    assert in_bounds((0, 0, b.dd_min), b)
    assert not in_bounds((b.v_max + 1, 0, b.dd_min), b)
    assert in_bounds((4, 2, 2.2), StateBounds(10, 0, 20))
    assert not in_bounds((4, 2, 20.5), b)


def test_bounds_invariants():
    with pytest.raises(ValueError):
        StateBounds(v_max=0)
    with pytest.raises(ValueError):
        StateBounds(dd_min=5, dd_max=5)
    with pytest.raises(ValueError):
        InputBounds(1, -1)
    with pytest.raises(ValueError):
        InputBounds(0.5, 1.0)


def test_clamp_input_examples():
    b = InputBounds(-1, 1)
    assert clamp_input(0, b) == 0
    assert clamp_input(-5, b) == -1
    assert clamp_input(-0.07, b) == -0.07


@given(st.floats(-1e6, 1e6))
def test_clamp_input_in_range(u):
    b = InputBounds(-1.5, 0.75)
    v = clamp_input(u, b)
    assert b.a_min <= v <= b.a_max
    if b.a_min <= u <= b.a_max:
        assert v == u


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(0.1, np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        Trajectory(0.0, np.zeros((2, 3)), np.zeros(1))
    tr = Trajectory(0.1, np.zeros((2, 3)), [0.5])
    assert tr.n_steps == 1 and len(tr) == 2
    with pytest.raises(ValueError):
        tr.states[0, 0] = 1.0


def test_rollout_identity_dynamics():
    sys = LinearSystem(np.eye(3))
    tr = rollout(sys, (1.0, 2.0, 3.0), [0.0])
    np.testing.assert_array_equal(tr.states, [[1, 2, 3], [1, 2, 3]])
    assert tr.termination is None


def test_rollout_double_integrator_by_hand():
    # gap/closing-speed double integrator: x3+ = x3 + dt (x2 - x1), x2+ = x2 + dt u
    dt = 0.1
    A = np.array([[1, 0, 0], [0, 1, 0], [-dt, dt, 1]])
    sys = LinearSystem(A, [0, dt, 0], dt)
    tr = rollout(sys, (4.0, 2.0, 2.2), [-1.0, 0.5], dt)
    np.testing.assert_allclose(tr.states[1], [4.0, 1.9, 2.0])
    np.testing.assert_allclose(tr.states[2], [4.0, 1.95, 2.2 - 0.2 - 0.21])


def test_rollout_rejects_empty_inputs_and_bad_dt():
    sys = LinearSystem(np.eye(3))
    with pytest.raises(ValueError):
        rollout(sys, (0, 0, 0), [])
    with pytest.raises(ValueError):
        rollout(sys, (0, 0, 0), [0.0], dt=0.0)


class _Crash:
    def step(self, x, u, dt):
        if x[2] < 1.0:
            raise SimulationTerminated("collision", x)
        return StateVec(x[0], x[1], x[2] - 1.0)


def test_rollout_truncates_on_termination():
    tr = rollout(_Crash(), (0, 0, 2.5), [0.0] * 5)
    assert tr.termination == "collision"
    assert len(tr) == 3


def test_rollout_clamps_and_flags():
    sys = LinearSystem(np.eye(3) * 2.0)
    tr = rollout(sys, (4.0, 1.0, 15.0), [0.0, 0.0], bounds=StateBounds())
    assert tr.clamped.tolist() == [False, True, True]
    np.testing.assert_array_equal(tr.states[1], [8, 2, 20])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=2, max_size=12), st.data())
def test_rollout_prefix_consistency(u, data):
    j = data.draw(st.integers(1, len(u)))
    rng = np.random.default_rng(0)
    sys = LinearSystem(np.eye(3) + 0.05 * rng.normal(size=(3, 3)), rng.normal(size=3))
    full = rollout(sys, (1.0, 2.0, 3.0), u)
    assert full.prefix(j) == rollout(sys, (1.0, 2.0, 3.0), u[:j])


def test_rollout_reproducible():
    sys = LinearSystem(np.diag([0.9, 1.0, 1.1]))
    a = rollout(sys, (1, 2, 3), np.zeros(20))
    b = rollout(sys, (1, 2, 3), np.zeros(20))
    assert a == b


def test_trajectory_csv_round_trip(tmp_path):
    tr = Trajectory(0.1, [[1, 2, 3], [1.5, 2.25, 3.125], [1 / 3, 0, 7]], [0.25, -1 / 7])
    text = trajectory_to_csv(tr)
    lines = text.splitlines()
    assert lines[0] == "t,x1,x2,x3,u"
    assert lines[-1].endswith(",")
    assert text.endswith("\n")
    path = tmp_path / "traj.csv"
    write_trajectory_csv(tr, path)
    back = read_trajectory_csv(path)
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.inputs, tr.inputs)


def test_trajectory_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError):
        read_trajectory_csv(path)
