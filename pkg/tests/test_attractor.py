"""Attractor iteration, envelope sweeps, circle maps and polygon arcs."""

import math

import numpy as np
import pytest

from relaydyn.attractor import (extract_circle_map, iterate_attractor,
                                on_plus_image_manifold, polygon_arcs, sweep,
                                visit_window)
from relaydyn.errors import (CentroidOnCurve, InsufficientSamples,
                             LeftNeighborhood)
from relaydyn.oscillator import collision_point, surface_alpha
from relaydyn.reduced import map_F_branch, oscillator_context

ZETA, EPS = -0.1, 0.1


def rotation_samples(omega, n=300, r=1.0, phase=0.3):
    phi = phase + omega * np.arange(n)
    return np.stack([r * np.cos(phi), r * np.sin(phi)], axis=-1)


def test_circle_map_recovers_pure_rotation():
    omega = 2.0 * math.pi * (math.sqrt(5.0) - 1.0) / 2.0
    desc = extract_circle_map(rotation_samples(omega))
    assert desc.monotone
    assert desc.locking_period is None
    gaps = np.mod(desc.pairs[:, 1] - desc.pairs[:, 0], 2.0 * math.pi)
    target = math.fmod(omega, 2.0 * math.pi)
    # the sample mean sits O(1/n) off the true center, tilting each angle
    np.testing.assert_allclose(gaps, target, rtol=0, atol=2e-2)
    assert abs(float(gaps.mean()) - target) < 1e-4


def test_circle_map_detects_locking():
    # full cycles only: the centroid is then exactly the rotation center
    omega = 2.0 * math.pi * 3.0 / 7.0
    desc = extract_circle_map(rotation_samples(omega, n=294))
    assert desc.locking_period == 7
    assert desc.monotone
    gaps = np.mod(desc.pairs[:, 1] - desc.pairs[:, 0], 2.0 * math.pi)
    np.testing.assert_allclose(gaps, omega % (2.0 * math.pi), rtol=0, atol=1e-10)


def test_circle_map_rejects_centroid_on_curve():
    samples = rotation_samples(2.39996, n=299)
    samples = np.vstack([samples, samples.mean(axis=0)])
    with pytest.raises(CentroidOnCurve):
        extract_circle_map(samples)


def test_circle_map_needs_enough_samples():
    with pytest.raises(InsufficientSamples):
        extract_circle_map(rotation_samples(2.4, n=150))


def test_non_invertible_angle_dynamics_flagged():
    # fold the angle back and forth: strict circular order is violated
    rng = np.random.default_rng(1)
    phi = rng.uniform(0.0, 2.0 * math.pi, size=400)
    nxt = np.mod(phi + 1.5 * np.sin(phi), 2.0 * math.pi)
    pts = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    desc = extract_circle_map(pts)
    # the raw samples are in random order, so the induced map is the
    # consecutive-pair graph; with folding it cannot stay monotone
    assert not desc.monotone or desc.locking_period is not None


@pytest.fixture(scope="module")
def fig_ctx():
    # polygon regime: tau = 4.25, alpha = -0.44 between SPC and ICC
    y_ref = collision_point(ZETA, 4.25)
    return oscillator_context(ZETA, -0.44, 4.25, EPS, y_ref)


def test_iterate_attractor_polygon_regime(fig_ctx):
    run = iterate_attractor(fig_ctx, fig_ctx.y_ref + np.array([1e-3, 0.0]))
    assert run.points.shape == (360, 2)
    assert run.visited_plus and run.visited_minus
    assert np.all(run.width > 1e-3)
    np.testing.assert_array_equal(run.final, run.points[-1])


def test_iterate_attractor_reports_escape(fig_ctx):
    with pytest.raises(LeftNeighborhood):
        iterate_attractor(fig_ctx, fig_ctx.y_ref + np.array([1e-3, 0.0]),
                          radius=1e-6)


def test_polygon_arcs_on_corner_attractor(fig_ctx):
    run = iterate_attractor(fig_ctx, fig_ctx.y_ref + np.array([1e-3, 0.0]),
                            n_total=600)
    desc = polygon_arcs(run.points, fig_ctx)
    assert desc.monotone
    assert desc.locking_period is None
    assert desc.corner_indices
    assert desc.arc_ids is not None and desc.arc_ids.size == 560
    assert 1 < desc.arc_count < 60
    # arc ids partition the angle-sorted samples into contiguous runs
    changes = np.flatnonzero(np.diff(desc.arc_ids) != 0).size
    assert changes == desc.arc_count - 1


def test_polygon_arcs_rejects_point_attractor(fig_ctx):
    pts = np.tile(fig_ctx.y_ref, (300, 1))
    with pytest.raises(InsufficientSamples):
        polygon_arcs(pts, fig_ctx)


def test_on_plus_image_manifold(fig_ctx):
    y = fig_ctx.y_ref - 5e-3 * fig_ctx.dh_eff(fig_ctx.y_ref)
    w = map_F_branch(fig_ctx, y, +1)
    assert on_plus_image_manifold(fig_ctx, w)
    assert not on_plus_image_manifold(fig_ctx, w + np.array([1e-3, 1e-3]))


def test_sweep_envelopes_and_visit_window():
    alphas = np.linspace(-0.47, -0.42, 26)
    records = sweep(ZETA, 4.2, EPS, alphas)
    assert len(records) == 26
    assert not any(r.escaped for r in records)
    spc = surface_alpha(ZETA, 4.2, EPS)[0]
    for r in records:
        width = float(r.width[0])
        if r.alpha < spc - 1e-3:
            assert width < 1e-6  # point attractor below the collision
        if r.alpha > spc + 5e-3:
            assert width > 1e-4  # polygon regime has finite extent
    window = visit_window(records)
    assert window is not None
    lo, hi = window
    assert lo <= spc + 5e-3
    assert -0.445 < hi < -0.42  # D+ detachment near the ICC


def test_sweep_direction_hysteresis_is_negligible():
    # warm starts must not trap the orbit in a direction-dependent state.
    # Stop short of the torus birth near alpha = -0.4306: there the linear
    # decay rate vanishes and no fixed transient length settles the orbit.
    # Finite-orbit envelopes carry O(1/n) phase-sampling error, hence 5e-4.
    alphas = np.linspace(-0.47, -0.435, 15)
    up = sweep(ZETA, 4.2, EPS, alphas, n_transient=100, n_total=1600)
    down = sweep(ZETA, 4.2, EPS, alphas[::-1], n_transient=100, n_total=1600)
    for ru, rd in zip(up, reversed(down)):
        assert ru.alpha == rd.alpha
        assert np.max(np.abs(ru.env_min - rd.env_min)) < 5e-4
        assert np.max(np.abs(ru.env_max - rd.env_max)) < 5e-4


def test_sweep_records_escape_without_raising():
    # far above the polygon window the orbit leaves the corner neighborhood
    records = sweep(ZETA, 4.2, EPS, [-0.1], radius=0.05)
    assert len(records) == 1
    assert records[0].escaped
    assert np.isnan(records[0].env_min).all()
    assert visit_window(records) is None
