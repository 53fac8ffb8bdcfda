from __future__ import annotations

import math

import numpy as np
import pytest

from vortexperch.vehicle import (QUASI_STEADY, ControlInput, FluidConfig, SimulationDiverged,
                                 Vehicle, VehicleGeometry, VehicleState, assemble_slices,
                                 clamp_sweep, quasi_steady_contribution)

LAUNCH = VehicleState(xdot=7.0)


def test_geometry_defaults_and_validation():
    g = VehicleGeometry()
    assert g.mass == 0.200 and g.span == 0.70
    assert g.sweep_rate_limit == pytest.approx((g.sweep_max - g.sweep_min) / 0.2)
    with pytest.raises(ValueError):
        VehicleGeometry(rho=-1.0)
    with pytest.raises(ValueError):
        VehicleGeometry(sweep_min=1.0, sweep_max=0.0)
    with pytest.raises(ValueError):
        FluidConfig(dt=0.0)


def test_unswept_slices_match_the_geometry():
    g = VehicleGeometry()
    sections, widths, flagged = assemble_slices(g, VehicleState())
    assert not flagged
    for sec, row in zip(sections, g.slice_table()):
        np.testing.assert_allclose(sec.position, [row[4], row[5]], atol=1e-15)
        assert sec.chord == row[3]
    assert sum(widths[:-1]) == pytest.approx(2 * g.semispan_wing)


def test_sixty_degree_aft_sweep_doubles_chord_and_shifts_aft():
    g = VehicleGeometry()
    lam = -math.radians(60.0)
    swept, widths, _ = assemble_slices(g, VehicleState(sweep_left=lam, sweep_right=lam))
    table = g.slice_table()
    for sec, row in zip(swept[:-1], table[:-1]):
        assert sec.chord == pytest.approx(2.0 * g.chord, rel=1e-12)
        assert sec.position[0] - row[4] == pytest.approx(row[1] * math.sin(lam), rel=1e-12)
    # the tail does not sweep
    np.testing.assert_allclose(swept[-1].position, [table[-1, 4], table[-1, 5]])


def test_sweep_clamp_flags():
    g = VehicleGeometry()
    assert clamp_sweep(g, 2.0) == (g.sweep_max, True)
    assert clamp_sweep(g, 0.1) == (0.1, False)


def test_parasite_drag_scaling_and_direction():
    g = VehicleGeometry()
    f0, m0 = quasi_steady_contribution(VehicleState(), g)
    assert np.all(f0 == 0.0) and m0 == 0.0
    v = np.array([3.0, -1.5])
    f1, _ = quasi_steady_contribution(VehicleState(xdot=v[0], zdot=v[1]), g)
    f2, _ = quasi_steady_contribution(VehicleState(xdot=2 * v[0], zdot=2 * v[1]), g)
    assert np.linalg.norm(f2) == pytest.approx(4.0 * np.linalg.norm(f1), rel=1e-12)
    cos = float(f1 @ v) / (np.linalg.norm(f1) * np.linalg.norm(v))
    assert math.acos(max(-1.0, min(1.0, -cos))) <= 1e-7


def test_rest_without_gravity():
    v = Vehicle(VehicleGeometry(gravity=0.0))
    traj = v.run(VehicleState(), np.zeros((20, 2)))
    np.testing.assert_array_equal(traj.states, 0.0)
    assert np.all(traj.wake_counts[-1] >= 0) and np.all(traj.loads == 0.0)


def test_rate_limits_hold_every_step():
    v = Vehicle()
    traj = v.run(LAUNCH, np.tile([0.5, -1.5], (40, 1)))
    lim = v.geometry.sweep_rate_limit * v.dt
    assert np.all(np.abs(np.diff(traj.states[:, 6])) <= lim + 1e-15)
    elim = v.geometry.elevator_rate_limit * v.dt
    assert np.all(np.abs(np.diff(traj.states[:, 8])) <= elim + 1e-15)
    assert np.all(traj.states[:, 8] <= v.geometry.elevator_max)


def test_ballistic_flight_without_air():
    g = VehicleGeometry(rho=1e-300)
    v = Vehicle(g, FluidConfig(model=QUASI_STEADY))
    n, dt = 200, v.dt
    traj = v.run(VehicleState(xdot=2.0, zdot=3.0), np.zeros((n, 2)))
    t = traj.times
    np.testing.assert_allclose(traj.states[:, 0], 2.0 * t, rtol=1e-12)
    z_exact = 3.0 * t - 0.5 * g.gravity * t**2
    # semi-implicit Euler lags the closed form by g dt t / 2
    assert np.max(np.abs(traj.states[:, 1] - z_exact)) <= 0.5 * g.gravity * dt * t[-1] + 1e-12
    np.testing.assert_allclose(traj.states[:, 4], 3.0 - g.gravity * t, atol=1e-12)


def test_pitch_up_decelerates_monotonically():
    v = Vehicle()
    traj = v.run(LAUNCH, np.tile([-0.3, 0.0], (100, 1)))
    speed = np.hypot(traj.states[:, 3], traj.states[:, 4])
    assert traj.states[-1, 2] > 0.1
    assert np.all(np.diff(speed) < 0)


def test_zero_horizon_keeps_only_the_initial_state():
    traj = Vehicle().run(LAUNCH, np.zeros((0, 2)))
    assert len(traj) == 1
    np.testing.assert_array_equal(traj.states[0], LAUNCH.as_array())


def test_runs_are_bitwise_repeatable():
    v = Vehicle()
    u = np.column_stack([np.linspace(0, -0.3, 120), np.linspace(0, -0.8, 120)])
    a = v.run(LAUNCH, u)
    b = v.run(LAUNCH, u)
    assert a.states.tobytes() == b.states.tobytes()
    assert a.loads.tobytes() == b.loads.tobytes()


def test_slice_circulation_is_conserved():
    v = Vehicle()
    fluid = v.initial_fluid()
    state = LAUNCH
    for k in range(150):
        state, fluid, _ = v.step(state, fluid, ControlInput(-0.2, -0.6 if k > 50 else 0.0))
    for i in range(fluid.n_slices):
        scale = float(np.sum(np.abs(fluid.strengths[i, :fluid.counts[i]])))
        assert abs(fluid.total_circulation(i)) <= 1e-9 * scale


def test_snapshots_and_wake_growth():
    traj = Vehicle().run(LAUNCH, np.zeros((30, 2)), snapshot_stride=10)
    assert [s for s, _ in traj.snapshots] == [0, 10, 20, 30]
    assert np.all(traj.wake_counts[-1] > 0)


def test_quasi_steady_model_sheds_nothing():
    traj = Vehicle(fluid=FluidConfig(model=QUASI_STEADY)).run(LAUNCH, np.zeros((30, 2)))
    assert np.all(traj.wake_counts == 0)


def test_divergence_keeps_the_partial_log():
    v = Vehicle(VehicleGeometry(inertia_yy=1e-9))
    with pytest.raises(SimulationDiverged) as info:
        v.run(LAUNCH, np.tile([0.5, 0.5], (300, 1)))
    partial = info.value.trajectory
    assert partial is not None and 1 <= len(partial) < 301
    assert np.all(np.isfinite(partial.states))
