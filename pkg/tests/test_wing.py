from __future__ import annotations

import math

import numpy as np
import pytest

from vortexperch.kernel import KernelConfig, VortexParticle, induced_velocity_regularized
from vortexperch.plate import PlateRun
from vortexperch.wake import Wake
from vortexperch.wing import (FluidDensity, WingSection, assemble_system, geometry_update,
                              integrate_loads, pressure_distribution, shed_edge_particles,
                              solve_bound_strengths, thin_airfoil_circulation)

CHORD = 0.1
KERNEL = KernelConfig(0.01 * CHORD)


def plate_in_stream(alpha: float, n: int = 16, shed_le: bool = True) -> WingSection:
    # nose along +x rotated by pi - alpha: the stream along +x meets it at alpha
    return WingSection(CHORD, n, theta=math.pi - alpha, shed_leading_edge=shed_le)


def solve_first_step(section, ambient, dt=0.005):
    shed = shed_edge_particles(section, None, dt, ambient, kernel=KERNEL)
    system = assemble_system(section, None, shed, ambient, KERNEL)
    return system, solve_bound_strengths(system)


def test_layout_counts_and_stations():
    s = WingSection(CHORD, 16)
    assert len(s.bound_positions) == 16 and len(s.control_points) == 17
    assert np.all(np.diff(s.bound_positions) > 0)
    assert 0.0 <= s.bound_positions[0] and s.bound_positions[-1] <= CHORD
    assert s.panel_lengths.sum() == pytest.approx(CHORD, rel=1e-15)
    # control points sit between bound vortices plus one at each edge
    assert s.control_points[0] == 0.0 and s.control_points[-1] == pytest.approx(CHORD)


def test_identity_pose_places_points_on_the_body_line():
    s = geometry_update(WingSection(CHORD, 8), ((0.3, -0.2), 0.0), ((0.0, 0.0), 0.0))
    expected = np.column_stack([0.3 - s.control_points, np.full(9, -0.2)])
    np.testing.assert_allclose(s.control_world, expected, atol=1e-15)


def test_normal_rotates_with_incidence():
    a = WingSection(CHORD, 8, theta=0.0)
    b = WingSection(CHORD, 8, theta=math.pi / 2)
    rot = np.array([[0.0, -1.0], [1.0, 0.0]])
    np.testing.assert_allclose(b.normal, rot @ a.normal, atol=1e-15)


def test_pure_pitch_about_midchord():
    omega = 3.0
    s = WingSection(CHORD, 8, ref_fraction=0.5, omega=omega)
    v_le, v_te = s.control_surface_velocity[0], s.control_surface_velocity[-1]
    np.testing.assert_allclose(v_le, -v_te, atol=1e-15)
    assert np.linalg.norm(v_le) == pytest.approx(omega * CHORD / 2, rel=1e-14)


def test_quiescent_system_is_zero():
    s = WingSection(CHORD, 16)
    system, sol = solve_first_step(s, (0.0, 0.0))
    assert np.all(system.rhs == 0.0)
    assert np.all(sol.bound_strengths == 0.0)
    assert sol.new_le_strength == 0.0 and sol.new_te_strength == 0.0


def test_influence_coefficient_is_unit_kernel_dot_normal():
    s = plate_in_stream(math.radians(10.0))
    system, _ = solve_first_step(s, (5.0, 0.0))
    i = 5
    shed_te = system.shed_positions[1]
    # last column belongs to the trailing-edge particle (finite-core kernel)
    v = induced_velocity_regularized(VortexParticle(1.0, tuple(shed_te)), s.control_world[i], KERNEL)
    assert system.matrix[i, -1] == pytest.approx(float(v @ s.normal), rel=1e-12)


def test_solution_satisfies_the_boundary_rows():
    s = plate_in_stream(math.radians(10.0))
    system, sol = solve_first_step(s, (5.0, 0.0))
    x = np.concatenate([sol.bound_strengths, [sol.new_le_strength, sol.new_te_strength]])
    r = system.matrix @ x - system.rhs
    assert np.max(np.abs(r)) / max(1.0, np.max(np.abs(system.rhs))) <= 1e-10
    assert sol.residual <= 1e-10


def test_strengths_are_linear_in_stream_speed():
    s = plate_in_stream(math.radians(8.0))
    dt = 0.005
    shed = shed_edge_particles(s, None, dt, (5.0, 0.0), kernel=KERNEL)
    one = solve_bound_strengths(assemble_system(s, None, shed, (5.0, 0.0), KERNEL))
    two = solve_bound_strengths(assemble_system(s, None, shed, (10.0, 0.0), KERNEL))
    np.testing.assert_allclose(two.bound_strengths, 2 * one.bound_strengths, rtol=1e-12)
    assert two.new_te_strength == pytest.approx(2 * one.new_te_strength, rel=1e-12)


def test_placement_fraction_of_previous_particle():
    s = plate_in_stream(0.0)
    te = s.trailing_edge
    prev = np.array([s.leading_edge - 0.006 * s.tangent, te + 0.03 * s.tangent])
    out = shed_edge_particles(s, prev, 0.005, (5.0, 0.0), kernel=KERNEL)
    np.testing.assert_allclose(out[1], te + 0.01 * s.tangent, atol=1e-15)


def test_mirror_symmetric_placement_at_zero_incidence():
    s = WingSection(CHORD, 16, ref_fraction=0.5)
    d = 0.006
    prev = np.array([s.leading_edge - d * s.tangent, s.trailing_edge + d * s.tangent])
    out = shed_edge_particles(s, prev, 0.005, kernel=KERNEL)
    mid = s.position
    np.testing.assert_allclose(out[0] - mid, -(out[1] - mid), atol=1e-15)


def test_trailing_edge_shedding_spacing_in_a_uniform_stream():
    # at zero incidence nothing is shed with strength, so particles ride the stream:
    # consecutive particles end up U dt apart and the newest is shed f U dt / (1 - f) aft
    run = PlateRun(0.0, speed=5.0, chord=CHORD, dt=0.005, shed_leading_edge=False)
    res = run.run(40)
    p = res.wake.positions
    u_dt = 5.0 * 0.005
    assert np.linalg.norm(p[-2] - p[-3]) == pytest.approx(u_dt, rel=1e-9)
    f = run.fraction
    # the recorded wake has already been convected by one step
    assert p[-1, 0] - CHORD == pytest.approx(f * u_dt / (1 - f) + u_dt, rel=1e-6)


def test_steady_circulation_and_kutta_joukowski():
    alpha, u = math.radians(5.0), 5.0
    run = PlateRun(alpha, speed=u, chord=CHORD, n_bound=20, dt=0.001, shed_leading_edge=False)
    res = run.run(400)
    gamma = res.bound_circulation[-1]
    assert gamma == pytest.approx(thin_airfoil_circulation(CHORD, u, alpha), rel=0.15)
    lift = res.lift_coefficient[-1] * 0.5 * run.rho * u**2 * CHORD
    assert lift == pytest.approx(run.rho * u * gamma, rel=0.10)


def test_impulsive_start_pressure_dominated_by_rate_term():
    # at the default 5 ms step the two terms are comparable; the rate term
    # takes over as the start becomes more abrupt
    s = plate_in_stream(math.radians(45.0))
    dt, rho = 5e-4, 1.225
    system, sol = solve_first_step(s, (5.0, 0.0), dt)
    wake = Wake(system.shed_positions, [sol.new_le_strength, sol.new_te_strength])
    dp, cum = pressure_distribution(s, sol, wake, FluidDensity(rho), dt, None, 0.0, (5.0, 0.0),
                                    KERNEL)
    rate = rho * cum / dt
    assert np.linalg.norm(rate) > 5.0 * np.linalg.norm(dp - rate)


def test_quiescent_pressure_is_zero():
    s = WingSection(CHORD, 16)
    _, sol = solve_first_step(s, (0.0, 0.0))
    dp, _ = pressure_distribution(s, sol, None, 1.225, 0.005, kernel=KERNEL)
    assert np.all(dp == 0.0)


def test_load_integration():
    s = WingSection(CHORD, 16)
    f, m = integrate_loads(s, np.zeros(16))
    assert np.all(f == 0.0) and m == 0.0
    mid = WingSection(CHORD, 16, ref_fraction=0.5)
    f, m = integrate_loads(mid, np.full(16, 3.0), span=0.5)
    np.testing.assert_allclose(f, 3.0 * CHORD * 0.5 * mid.normal, rtol=1e-14)
    assert abs(m) <= 1e-15
    a = 40.0
    f, m = integrate_loads(s, a * s.bound_positions)
    assert m == pytest.approx(a * CHORD**3 / 3.0, rel=1e-2)


def test_invalid_section_and_step():
    with pytest.raises(ValueError):
        WingSection(-1.0)
    with pytest.raises(ValueError):
        WingSection(CHORD, 1)
    with pytest.raises(ValueError):
        shed_edge_particles(WingSection(CHORD), None, 0.0)
    with pytest.raises(ValueError):
        FluidDensity(-1.0)
