from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vortexperch.kernel import (KernelConfig, SingularityError, VortexParticle,
                                induced_velocity_regularized, induced_velocity_singular,
                                regularized_peak_radius, total_induced_velocity)

TWO_PI = 2.0 * math.pi


def test_singular_kernel_directions():
    v = VortexParticle(TWO_PI, (0.0, 0.0))
    np.testing.assert_allclose(induced_velocity_singular(v, (1.0, 0.0)), [0.0, -1.0], atol=1e-15)
    np.testing.assert_allclose(induced_velocity_singular(v, (0.0, 1.0)), [1.0, 0.0], atol=1e-15)


def test_zero_strength_induces_nothing():
    v = VortexParticle(0.0, (0.3, -0.2))
    assert np.all(induced_velocity_singular(v, (1.0, 2.0)) == 0.0)


def test_singular_kernel_rejects_own_position():
    with pytest.raises(SingularityError):
        induced_velocity_singular(VortexParticle(1.0, (0.5, 0.5)), (0.5, 0.5))


def test_regularized_kernel_values():
    v = VortexParticle(TWO_PI, (0.0, 0.0))
    assert np.all(induced_velocity_regularized(v, (0.0, 0.0), KernelConfig(0.1)) == 0.0)
    np.testing.assert_allclose(induced_velocity_regularized(v, (1.0, 0.0), KernelConfig(1.0)),
                               [0.0, -1.0 / math.sqrt(2.0)], atol=1e-15)
    far = induced_velocity_regularized(v, (1.0, 0.0), KernelConfig(0.01))
    np.testing.assert_allclose(far, [0.0, -1.0], rtol=1e-6, atol=1e-12)


def test_regularized_speed_peaks_at_core_radius():
    rc = 0.05
    v = VortexParticle(1.0, (0.0, 0.0))
    r = np.linspace(0.2 * rc, 5 * rc, 2001)
    speed = [np.linalg.norm(induced_velocity_regularized(v, (x, 0.0), KernelConfig(rc))) for x in r]
    assert r[int(np.argmax(speed))] == pytest.approx(regularized_peak_radius(rc), rel=2e-3)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        KernelConfig(0.0)
    with pytest.raises(ValueError):
        VortexParticle(math.nan, (0.0, 0.0))


def test_empty_sources_give_zero():
    out = total_induced_velocity([], np.ones((3, 2)), KernelConfig(0.01))
    assert out.shape == (3, 2) and np.all(out == 0.0)


def test_opposite_pair_adds_constructively():
    cfg = KernelConfig(1e-3)
    a = VortexParticle(1.0, (0.0, 1.0))
    b = VortexParticle(-1.0, (0.0, -1.0))
    one = total_induced_velocity([a], [(0.0, 0.0)], cfg)
    both = total_induced_velocity([a, b], [(0.0, 0.0)], cfg)
    np.testing.assert_allclose(both, 2.0 * one, rtol=1e-14)


def test_bound_source_on_target_raises():
    with pytest.raises(SingularityError):
        total_induced_velocity([VortexParticle(1.0, (0.0, 0.0), is_bound=True)], [(0.0, 0.0)],
                               KernelConfig(0.01))


def test_superposition_matches_pairwise_oracle():
    rng = np.random.default_rng(7)
    cfg = KernelConfig(0.02)
    sources = [VortexParticle(float(g), tuple(p)) for g, p in
               zip(rng.normal(size=100), rng.uniform(-1, 1, (100, 2)))]
    targets = rng.uniform(-1, 1, (50, 2))
    fast = total_induced_velocity(sources, targets, cfg)
    slow = np.array([sum(induced_velocity_regularized(s, t, cfg) for s in sources) for t in targets])
    np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-12 * np.abs(slow).max())


@settings(max_examples=50, deadline=None)
@given(st.floats(-10, 10), st.floats(0.05, 5.0), st.floats(0, 2 * math.pi))
def test_velocity_is_perpendicular_to_separation(gamma, r, angle):
    d = np.array([r * math.cos(angle), r * math.sin(angle)])
    v = induced_velocity_regularized(VortexParticle(gamma, (0.0, 0.0)), d, KernelConfig(0.1))
    assert abs(float(v @ d)) <= 1e-12 * (1.0 + abs(gamma))
