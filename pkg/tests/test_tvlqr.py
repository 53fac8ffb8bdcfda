from __future__ import annotations

import numpy as np
import pytest

from vortexperch.mppi import ControlSequence
from vortexperch.tvlqr import (GainSchedule, LinearizationError, LinearizationKnot, Nominal,
                               VehiclePropagator, feedback_command, linearize_fd,
                               riccati_backward, simulate_closed_loop, synthesize)
from vortexperch.validate import discretize, linear_plant, lqr_pipeline_error
from vortexperch.vehicle import (QUASI_STEADY, FluidConfig, SimulationDiverged, Vehicle,
                                 VehicleGeometry, VehicleState)

QS = Vehicle(fluid=FluidConfig(model=QUASI_STEADY))
LAUNCH = VehicleState(xdot=7.0)


def knots_for(A, B, n):
    return [LinearizationKnot(0.1 * k, A, B, np.zeros(A.shape[0]), np.zeros(B.shape[1]))
            for k in range(n)]


def test_linear_plant_is_recovered():
    A0, B0 = linear_plant(3)
    Ad, Bd = discretize(A0, B0, 0.05)
    prop = lambda k, x, u: Ad @ x + Bd @ u
    rng = np.random.default_rng(0)
    lin = linearize_fd(prop, [0.0, 0.05], rng.normal(size=(2, 6)), rng.normal(size=(2, 2)))
    for kn in lin:
        np.testing.assert_allclose(kn.A, Ad, atol=1e-6)
        np.testing.assert_allclose(kn.B, Bd, atol=1e-6)


def test_central_difference_error_is_second_order():
    prop = lambda k, x, u: np.array([np.sin(x[0]) + np.exp(u[0]), x[0] * x[0]])
    x0, u0 = np.array([0.7, 0.0]), np.array([0.3])
    exact_a = np.cos(0.7)
    errs = [abs(linearize_fd(prop, [0.0], [x0], [u0], eps=h)[0].A[0, 0] - exact_a)
            for h in (1e-2, 5e-3)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.05)


def test_free_fall_jacobian_is_a_double_integrator():
    v = Vehicle(VehicleGeometry(rho=1e-300), FluidConfig(model=QUASI_STEADY))
    seq = ControlSequence.zeros(0.2)
    prop = VehiclePropagator(v, VehicleState(xdot=2.0, zdot=1.0), seq)
    lin = linearize_fd(prop, prop.times, prop.states, prop.controls, eps=1e-4)
    h = seq.knot_dt
    expected = np.eye(6)
    expected[:3, 3:] = h * np.eye(3)
    for kn in lin:
        np.testing.assert_allclose(kn.A, expected, atol=1e-8)
        np.testing.assert_allclose(kn.B, 0.0, atol=1e-8)


def test_divergent_knot_raises():
    def prop(k, x, u):
        raise SimulationDiverged("boom")
    with pytest.raises(LinearizationError):
        linearize_fd(prop, [0.0], [np.zeros(2)], [np.zeros(1)])


def test_one_step_recursion_gives_half_identity():
    I = np.eye(2)
    sched = riccati_backward(knots_for(I, I, 1), I, I, I)
    np.testing.assert_allclose(sched.gains[0], 0.5 * I, atol=1e-15)


def test_zero_weights_give_zero_gains():
    A0, B0 = linear_plant(1)
    Z = np.zeros((6, 6))
    sched = riccati_backward(knots_for(A0, B0, 5), Z, np.eye(2), Z)
    assert np.all(sched.gains == 0.0)


def test_long_horizon_matches_algebraic_riccati():
    assert lqr_pipeline_error() <= 1e-6


def test_bad_weights_rejected():
    I = np.eye(2)
    with pytest.raises(ValueError):
        riccati_backward(knots_for(I, I, 2), I, np.zeros((2, 2)), I)
    with pytest.raises(ValueError):
        riccati_backward([], I, I, I)


def qs_nominal(horizon=0.5):
    seq = ControlSequence(0.05, np.tile([-0.05, -0.2], (int(round(horizon / 0.05)), 1)))
    traj = QS.run(LAUNCH, seq.per_step(QS.dt))
    return Nominal(seq, traj)


def test_feedback_is_nominal_on_the_nominal():
    nom = qs_nominal()
    gains = synthesize(QS, LAUNCH, nom.sequence, eps=1e-4)
    t = 0.15
    state = VehicleState.from_array(nom.trajectory.states[int(round(t / QS.dt))])
    cmd, outside = feedback_command(state, t, nom, gains, QS)
    np.testing.assert_allclose([cmd.elevator_cmd, cmd.sweep_cmd], nom.sequence.at(t), atol=1e-15)
    assert not outside
    zero = GainSchedule(gains.times, np.zeros_like(gains.gains), gains.Q, gains.R, gains.Qf)
    off = VehicleState(x=1.0, z=-0.3, theta=0.2, xdot=5.0)
    cmd, _ = feedback_command(off, t, nom, zero, QS)
    np.testing.assert_allclose([cmd.elevator_cmd, cmd.sweep_cmd], nom.sequence.at(t))


def test_altitude_error_calls_for_nose_down_elevator():
    nom = qs_nominal()
    gains = synthesize(QS, LAUNCH, nom.sequence, eps=1e-4)
    high = LAUNCH.with_rigid(LAUNCH.rigid + [0.0, 0.05, 0, 0, 0, 0])
    cmd, _ = feedback_command(high, 0.0, nom, gains, QS)
    # positive elevator is trailing edge down, which pitches the nose down
    assert cmd.elevator_cmd > nom.sequence.at(0.0)[0]


def test_gain_schedule_lookup():
    nom = qs_nominal(0.3)
    gains = synthesize(QS, LAUNCH, nom.sequence, eps=1e-4)
    assert gains.gains.shape == (6, 2, 6)
    K, outside = gains.gain_at(0.12)
    np.testing.assert_array_equal(K, gains.gains[2])
    assert not outside and gains.gain_at(1.0)[1]
    fixed = synthesize(QS, LAUNCH, nom.sequence, channels=(True, False), eps=1e-4)
    assert fixed.gains.shape == (6, 1, 6)


def test_closed_loop_tracks_better_than_open_loop_on_quasi_steady():
    nom = qs_nominal(1.0)
    gains = synthesize(QS, LAUNCH, nom.sequence, eps=1e-4)
    Q = gains.Q

    def err(tr):
        d = tr.states[:, :6] - nom.trajectory.states[:, :6]
        return float(np.mean(np.einsum("ij,jk,ik->i", d, Q, d)))

    for start in (VehicleState(xdot=6.8), VehicleState(xdot=7.2), VehicleState(xdot=7.0, zdot=0.2)):
        ol = simulate_closed_loop(QS, start, nom, None).trajectory
        cl = simulate_closed_loop(QS, start, nom, gains).trajectory
        assert err(cl) < err(ol)
