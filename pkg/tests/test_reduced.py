"""Reduced half-return map: crossing times, branches, Jacobians, lifting."""

import math

import numpy as np
import pytest

from relaydyn.errors import NoRootInBracket
from relaydyn.oscillator import collision_orbit, collision_context, surface_alpha
from relaydyn.reduced import (DomainTag, branch_of, classify, crossing_time,
                              jacobian_F, jacobian_F_branch, map_F,
                              map_F_branch, oscillator_context,
                              reconstruct_history, theta)
from relaydyn.relay import evolve, oscillator_system

ZETA, TAU, EPS = -0.1, 4.2, 0.1


@pytest.fixture(scope="module")
def ctx():
    alpha = surface_alpha(ZETA, TAU, EPS)[0]
    return collision_context(collision_orbit(ZETA, TAU, alpha))


def scan_crossing_oracle(ctx, y, branch, n=20001):
    """Crossing offset by dense scan plus interval halving; no Newton."""
    u = branch * ctx.sign

    def g(t):
        return ctx.h_eff(ctx.flow.apply(y, u, t)) - ctx.epsilon

    ts = np.linspace(-ctx.delta, ctx.delta, n)
    vals = np.array([g(t) for t in ts])
    hits = np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)
    assert hits.size >= 1
    lo, hi = ts[hits[0]], ts[hits[0] + 1]
    flo = vals[hits[0]]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if flo * g(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def test_crossing_time_matches_scan_oracle(ctx):
    rng = np.random.default_rng(5)
    for _ in range(25):
        y = ctx.y_ref + rng.normal(scale=5e-3, size=2)
        b = branch_of(ctx, y)
        t = crossing_time(ctx, y, b)
        assert abs(t - scan_crossing_oracle(ctx, y, b)) < 1e-10
        # the defining equation itself
        z = ctx.flow.apply(y, b * ctx.sign, t)
        assert abs(ctx.h_eff(z) - ctx.epsilon) < 1e-12


def test_crossing_time_fails_cleanly_far_from_threshold(ctx):
    # near the focus the signal stays inside the band for the whole bracket
    with pytest.raises(NoRootInBracket):
        crossing_time(ctx, np.array([1.0, 0.0]), 1)


def test_corner_is_fixed_point(ctx):
    y = ctx.y_ref
    assert np.linalg.norm(map_F(ctx, y) - y) < 1e-12
    assert branch_of(ctx, y) == -1  # the threshold counts as crossed
    assert classify(ctx, y, tol=1e-12) is DomainTag.BOUNDARY


def test_branch_selection_rule(ctx):
    c = np.array([ctx.dh_eff(ctx.y_ref)]).ravel()
    inside = ctx.y_ref - 1e-4 * c
    outside = ctx.y_ref + 1e-4 * c
    assert branch_of(ctx, inside) == 1
    assert branch_of(ctx, outside) == -1
    assert classify(ctx, inside) is DomainTag.PLUS
    assert classify(ctx, outside) is DomainTag.MINUS


def test_plus_branch_jacobian_is_rank_one(ctx):
    y = ctx.y_ref - 1e-3 * ctx.dh_eff(ctx.y_ref)
    J = jacobian_F_branch(ctx, y, +1)
    assert abs(np.linalg.det(J)) < 1e-10
    assert np.linalg.matrix_rank(J, tol=1e-8) == 1


def central_diff_jacobian(fn, y, h=1e-6):
    J = np.empty((2, 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        J[:, j] = (fn(y + e) - fn(y - e)) / (2.0 * h)
    return J


def test_branch_jacobians_match_central_differences(ctx):
    rng = np.random.default_rng(9)
    for branch in (-1, +1):
        for _ in range(8):
            y = ctx.y_ref + rng.normal(scale=4e-3, size=2)
            J = jacobian_F_branch(ctx, y, branch)
            fd = central_diff_jacobian(lambda z: map_F_branch(ctx, z, branch), y)
            rel = np.max(np.abs(J - fd)) / max(np.max(np.abs(J)), 1.0)
            assert rel < 1e-7
    y = ctx.y_ref + np.array([1e-3, -2e-3])
    np.testing.assert_allclose(jacobian_F(ctx, y),
                               jacobian_F_branch(ctx, y, branch_of(ctx, y)))


def test_branches_coincide_across_line_for_vertical_threshold():
    # alpha = 0: the input jump is parallel to the threshold line, so the
    # rank-one corrections match and the map is C^1 across the line; for
    # any other alpha the one-sided linearizations genuinely disagree there
    from relaydyn.oscillator import collision_point
    y_ref = collision_point(ZETA, TAU)
    eps = float(y_ref[0])  # on-surface eps at alpha = 0 is h(y*) = x*
    ctx0 = oscillator_context(ZETA, 0.0, TAU, eps, y_ref)
    rng = np.random.default_rng(13)
    for _ in range(10):
        y = np.array([eps, y_ref[1] + rng.normal(scale=4e-3)])  # on the line
        fp = map_F_branch(ctx0, y, +1)
        fm = map_F_branch(ctx0, y, -1)
        assert np.max(np.abs(fp - fm)) < 1e-10
        jp = jacobian_F_branch(ctx0, y, +1)
        jm = jacobian_F_branch(ctx0, y, -1)
        assert np.max(np.abs(jp - jm)) < 1e-10
    alpha = surface_alpha(ZETA, TAU, EPS)[0]
    ctx = collision_context(collision_orbit(ZETA, TAU, alpha))
    gap = np.max(np.abs(jacobian_F_branch(ctx, ctx.y_ref, +1)
                        - jacobian_F_branch(ctx, ctx.y_ref, -1)))
    assert gap > 1e-2  # a genuine corner away from alpha = 0


def test_mirror_conjugacy(ctx):
    rng = np.random.default_rng(17)
    mir = ctx.mirrored()
    for _ in range(10):
        y = ctx.y_ref + rng.normal(scale=4e-3, size=2)
        np.testing.assert_allclose(map_F(mir, -y), -map_F(ctx, y),
                                   rtol=0, atol=1e-12)


def test_theta_lands_on_phase_section(ctx):
    rng = np.random.default_rng(21)
    y_sec = ctx.flow.apply(ctx.y_ref, ctx.sign, ctx.delta)
    f_ref = ctx.flow.velocity(ctx.y_ref, ctx.sign)
    for _ in range(10):
        y = ctx.y_ref + rng.normal(scale=3e-3, size=2)
        th = theta(ctx, y)
        assert 0.0 <= th <= 2.0 * ctx.delta
        z = ctx.flow.apply(y, ctx.sign, th)
        assert abs(f_ref @ (z - y_sec)) < 1e-11
    assert theta(ctx, ctx.y_ref) == pytest.approx(ctx.delta, abs=1e-12)


def test_reconstruct_history_lifts_map_points(ctx):
    # the lifted state must evolve into switch points -F(y), F(F(y)), ...
    alpha = surface_alpha(ZETA, TAU, EPS)[0]
    system = oscillator_system(ZETA, alpha, TAU, ctx.epsilon)
    y0 = ctx.y_ref + np.array([-1.5e-3, 2e-3])
    state = reconstruct_history(ctx, y0)
    assert state.u == ctx.sign
    # the single label change sits exactly at the lifted switch point
    np.testing.assert_allclose(state.history(-theta(ctx, y0)), y0, atol=1e-12)
    _, traj = evolve(system, state, 3.2 * TAU)
    pts = traj.switch_points()
    assert pts.shape[0] >= 3
    expected, sign = y0.copy(), 1
    for k in range(3):
        expected = map_F(ctx, expected)
        sign = -sign
        np.testing.assert_allclose(pts[k], sign * expected, rtol=0, atol=1e-8)


def test_context_validation():
    with pytest.raises(ValueError):
        oscillator_context(ZETA, 0.0, TAU, -0.1, np.zeros(2))
    with pytest.raises(ValueError):
        oscillator_context(ZETA, 0.0, TAU, EPS, np.zeros(2), delta=2.0 * TAU)
