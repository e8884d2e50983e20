"""Collision surface, corner stability, and the bifurcation map."""

import math

import numpy as np
import pytest
from scipy.linalg import expm

from relaydyn.errors import NegativeEpsilon, SingularSurface
from relaydyn.oscillator import (bifurcation_map, collision_epsilon,
                                 collision_orbit, collision_point, find_nsc,
                                 stability_at_collision, surface_alpha)

ZETA, EPS = -0.1, 0.1

# frozen landmark values, pinned by the matrix-exponential oracle below and
# by the bisection-based locator probes
Y_STAR_42 = np.array([0.8671183934591682, 1.4690050479176497])
SPC_42 = -0.4745828278048784
SPC_425 = -0.46643946113202234
NSC = (4.1304261916526945, -0.48779391649198917)
LAMBDA_PLUS_NSC = -0.11706204327661995
NS_ANGLE = 1.2336786518012657


def corner_oracle(zeta, tau):
    """Corner point via generic linear algebra: expm, quadrature-free drift."""
    omsq = 1.0 + zeta * zeta
    M = np.array([[0.0, 1.0], [-omsq, -2.0 * zeta]])
    b = np.array([0.0, omsq])
    A = expm(M * tau)
    v = np.linalg.solve(M, (A - np.eye(2)) @ b)
    return np.linalg.solve(np.eye(2) + A, -v)


def test_collision_point_matches_expm_oracle():
    for tau in (1.1, 2.5, 3.6, 4.2, 5.5):
        np.testing.assert_allclose(collision_point(ZETA, tau),
                                   corner_oracle(ZETA, tau), rtol=0, atol=1e-12)
    np.testing.assert_allclose(collision_point(ZETA, 4.2), Y_STAR_42,
                               rtol=0, atol=1e-13)


def test_collision_point_solves_fixed_point_equation():
    from relaydyn.flows import AffineOscillatorFlow
    flow = AffineOscillatorFlow(ZETA)
    for tau in (3.3, 4.2, 5.8):
        y = collision_point(ZETA, tau)
        np.testing.assert_allclose(flow.apply(y, 1, tau), -y, rtol=0, atol=1e-12)


def test_collision_epsilon_sign_rule():
    # corner on the +eps line beyond tau = pi, on the -eps line below
    y = collision_point(ZETA, 4.2)
    h = float(math.cos(-0.4) * y[0] + math.sin(-0.4) * y[1])
    assert collision_epsilon(ZETA, 4.2, -0.4) == pytest.approx(h, abs=1e-14)
    assert collision_epsilon(ZETA, 4.2, -0.4) == pytest.approx(
        0.22661141879455537, abs=1e-14)
    y = collision_point(ZETA, 2.5)
    h = float(math.cos(1.0) * y[0] + math.sin(1.0) * y[1])
    assert collision_epsilon(ZETA, 2.5, 1.0) == pytest.approx(-h, abs=1e-14)
    with pytest.raises(NegativeEpsilon):
        collision_epsilon(ZETA, 2.5, -0.3)
    with pytest.raises(SingularSurface):
        collision_epsilon(ZETA, math.pi, 0.0)


def test_collision_orbit_transversality_scalars():
    orbit = collision_orbit(ZETA, 4.2, SPC_42)
    assert orbit.q == pytest.approx(orbit.g_plus * orbit.g_minus, rel=1e-14)
    assert orbit.q > 0
    assert orbit.params.epsilon == pytest.approx(EPS, abs=1e-12)


def test_surface_alpha_inverts_collision_epsilon():
    roots = surface_alpha(ZETA, 4.2, EPS)
    assert roots
    for alpha in roots:
        assert collision_epsilon(ZETA, 4.2, alpha) == pytest.approx(EPS, abs=1e-12)
    assert min(roots, key=lambda a: abs(a - SPC_42)) == pytest.approx(
        SPC_42, abs=1e-12)
    assert min(surface_alpha(ZETA, 4.25, EPS),
               key=lambda a: abs(a - SPC_425)) == pytest.approx(SPC_425, abs=1e-12)


def test_find_nsc_location_and_residual():
    tau, alpha = find_nsc(ZETA, EPS)
    assert tau == pytest.approx(NSC[0], abs=1e-9)
    assert alpha == pytest.approx(NSC[1], abs=1e-9)
    stab = stability_at_collision(collision_orbit(ZETA, tau, alpha))
    assert abs(stab.residuals["ns_minus"]) < 1e-9
    ev = stab.eigs_minus[0]
    assert abs(abs(ev) - 1.0) < 1e-9
    assert abs(float(np.angle(ev))) == pytest.approx(NS_ANGLE, abs=1e-9)
    # not a strong resonance: the angle is far from pi, 2pi/3 and pi/2
    for target in (math.pi, 2 * math.pi / 3, math.pi / 2):
        assert abs(NS_ANGLE - target) > 1e-2


def test_stability_at_nsc():
    stab = stability_at_collision(collision_orbit(ZETA, *NSC))
    assert stab.lambda_plus == pytest.approx(LAMBDA_PLUS_NSC, abs=1e-12)
    assert stab.stable_plus
    assert not stab.stable_minus or abs(abs(stab.eigs_minus[0]) - 1) < 1e-9
    assert "ns_minus" in stab.near(tol=1e-6)


def test_stability_spectra_match_numpy_eigendecomposition():
    from relaydyn.reduced import jacobian_F_branch
    from relaydyn.oscillator import collision_context
    orbit = collision_orbit(ZETA, 4.2, SPC_42)
    ctx = collision_context(orbit)
    stab = stability_at_collision(orbit)
    jp = jacobian_F_branch(ctx, orbit.y_star, +1)
    jm = jacobian_F_branch(ctx, orbit.y_star, -1)
    assert stab.lambda_plus == pytest.approx(float(np.trace(jp)), abs=1e-14)
    got = sorted(stab.eigs_minus, key=lambda z: z.imag)
    ref = sorted(np.linalg.eigvals(jm), key=lambda z: z.imag)
    np.testing.assert_allclose(got, ref, rtol=0, atol=1e-12)


def test_bifurcation_map_small_grid():
    bmap = bifurcation_map(ZETA, tau_range=(3.3, 5.2), alpha_range=(-1.1, 0.3),
                           n_tau=18, n_alpha=18)
    pts = bmap.all_points()
    assert pts
    labels = {p.label for p in pts}
    assert "ns_minus" in labels
    for p in pts:
        assert abs(p.residual) < 1e-7
        assert p.epsilon > 0
    # the NS curve passes by the dedicated locator's on-slice point; grid
    # refinement lands on edges, so compare against the nearest curve point
    ns_pts = bmap.points["ns_minus"]
    assert ns_pts
    nearest = min(ns_pts, key=lambda p: abs(p.epsilon - EPS))
    assert abs(nearest.epsilon - EPS) < 0.05
    assert abs(nearest.tau - NSC[0]) < 0.25
    for label, polys in bmap.polylines.items():
        for seg in polys:
            assert seg.ndim == 2 and seg.shape[1] == 2
            steps = np.linalg.norm(np.diff(seg, axis=0), axis=1)
            if steps.size:
                assert float(steps.max()) < 0.6  # chained, not scattered
