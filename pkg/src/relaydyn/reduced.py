"""Reduced half-return map near a colliding symmetric relay orbit.

Consider a relay feedback orbit whose switches alternate every half period
and which brushes the switching threshold exactly at a switch point (a
corner collision).  Near such an orbit the full delayed dynamics collapse
onto a finite-dimensional map between consecutive switch points,

    F(y) = -Y_p^(tau + t(y)) y,

where Y_p is the constant-input flow active after the switch and t(y) is
the (small, possibly negative) time offset at which the path through y
meets the threshold line {h = eps}.  The offset is found along the
pre-switch flow when y starts beyond the line and along the post-switch
flow otherwise, which splits the phase space into two smooth branches:

* branch +1 (domain ``h < eps``): crossing lies ahead, the constraint pins
  the crossing point to the line, and the branch map has rank deficit one;
* branch -1 (domain ``h >= eps``): crossing already happened, the map is a
  local diffeomorphism.

Both branches agree on the line itself, so F is continuous and piecewise
smooth.  The map and its analytic Jacobians are exact up to the flow
backend; :func:`reconstruct_history` lifts a map point back to a full
hybrid state so the event-driven engine can serve as an oracle.

A context with ``sign=-1`` describes the mirrored half-cycle (thresholds
and inputs negated).  For odd fields and linear h the two are conjugate:
``F_mirror(-y) = -F(y)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .errors import (DegenerateDerivative, NoRootInBracket, NoRootInInterval)
from .history import BreakpointHistory, HybridState

__all__ = [
    "CollisionContext",
    "oscillator_context",
    "DomainTag",
    "classify",
    "branch_of",
    "crossing_time",
    "map_F",
    "map_F_branch",
    "jacobian_F",
    "jacobian_F_branch",
    "theta",
    "reconstruct_history",
]


class DomainTag(enum.Enum):
    """Which smooth branch of the reduced map applies at a point."""

    PLUS = "plus"          # h < eps: rank-deficient branch
    MINUS = "minus"        # h > eps: diffeomorphism branch
    BOUNDARY = "boundary"  # on the threshold line, branches agree


@dataclass(frozen=True)
class CollisionContext:
    """Everything the reduced map needs around one corner collision.

    ``delta`` bounds the crossing-time search to (-delta, delta); it must
    be small enough that the path through any admissible point meets the
    threshold exactly once in that window.  ``y_ref`` is the collision
    point itself (used to anchor the phase section of :func:`theta`).
    ``sign`` selects the half-cycle: +1 watches ``h = +eps`` and
    propagates with input +1, -1 watches ``h = -eps`` with input -1.
    """

    flow: object
    h: Callable[[np.ndarray], float]
    dh: Callable[[np.ndarray], np.ndarray]
    tau: float
    epsilon: float
    y_ref: np.ndarray
    delta: float
    sign: int = 1

    def __post_init__(self):
        if self.tau <= 0 or self.epsilon <= 0:
            raise ValueError("delay and hysteresis half-width must be positive")
        if not 0 < self.delta < self.tau:
            raise ValueError("crossing bracket must satisfy 0 < delta < tau")
        if self.sign not in (-1, 1):
            raise ValueError("sign selects the half-cycle, +1 or -1")

    def h_eff(self, y) -> float:
        return self.sign * float(self.h(y))

    def dh_eff(self, y) -> np.ndarray:
        return self.sign * np.asarray(self.dh(y), dtype=float)

    def mirrored(self) -> "CollisionContext":
        """Context of the opposite half-cycle (reflected collision point)."""
        return replace(self, sign=-self.sign, y_ref=-np.asarray(self.y_ref))


def oscillator_context(zeta: float, alpha: float, tau: float, epsilon: float,
                       y_ref, delta: float | None = None) -> CollisionContext:
    """Reduced-map context for the relay oscillator with switching angle alpha."""
    from .flows import AffineOscillatorFlow

    c = np.array([math.cos(alpha), math.sin(alpha)])
    return CollisionContext(
        flow=AffineOscillatorFlow(zeta),
        h=lambda y: float(c @ y),
        dh=lambda y: c,
        tau=tau,
        epsilon=epsilon,
        y_ref=np.asarray(y_ref, dtype=float),
        delta=0.1 * tau if delta is None else delta,
    )


def classify(ctx: CollisionContext, y, tol: float = 0.0) -> DomainTag:
    """Domain of y relative to the watched threshold line."""
    r = ctx.h_eff(y) - ctx.epsilon
    if abs(r) <= tol:
        return DomainTag.BOUNDARY
    return DomainTag.MINUS if r > 0 else DomainTag.PLUS


def branch_of(ctx: CollisionContext, y) -> int:
    """Branch applying at y; the threshold line counts as already crossed."""
    return -1 if ctx.h_eff(y) >= ctx.epsilon else 1


def crossing_time(ctx: CollisionContext, y, branch: int) -> float:
    """Offset t in (-delta, delta) with h = eps along the branch flow from y.

    Newton from t = 0 with the analytic slope; falls back to bisection over
    the full bracket when Newton stalls or leaves it.  Raises
    :class:`NoRootInBracket` when the bracket holds no sign change and
    :class:`DegenerateDerivative` when the signal is tangent at the root.
    """

    y = np.asarray(y, dtype=float)
    flow, eps, delta = ctx.flow, ctx.epsilon, ctx.delta
    u = branch * ctx.sign

    def g(t: float) -> float:
        return ctx.h_eff(flow.apply(y, u, t)) - eps

    def dg(t: float) -> float:
        z = flow.apply(y, u, t)
        return float(ctx.dh_eff(z) @ flow.velocity(z, u))

    t = 0.0
    for _ in range(30):
        r = g(t)
        if abs(r) < 1e-13:
            if -delta < t < delta:
                if abs(dg(t)) < 1e-8:
                    raise DegenerateDerivative(
                        f"threshold met tangentially at offset {t:.6g}")
                return t
            break
        d = dg(t)
        if d == 0.0 or abs(t) > delta:
            break
        t -= r / d

    ga, gb = g(-delta), g(delta)
    if ga == 0.0:
        return -delta
    if gb == 0.0:
        return delta
    if ga * gb > 0.0:
        raise NoRootInBracket(
            f"no threshold crossing within {delta:.4g} of the switch point")
    t = float(brentq(g, -delta, delta, xtol=1e-15, rtol=8.9e-16))
    if abs(dg(t)) < 1e-8:
        raise DegenerateDerivative(f"threshold met tangentially at offset {t:.6g}")
    return t


def map_F_branch(ctx: CollisionContext, y, branch: int) -> np.ndarray:
    """One smooth branch of the half-return map (no domain check)."""
    y = np.asarray(y, dtype=float)
    t = crossing_time(ctx, y, branch)
    return -ctx.flow.apply(y, ctx.sign, ctx.tau + t)


def map_F(ctx: CollisionContext, y) -> np.ndarray:
    """Half-return map between consecutive switch points."""
    return map_F_branch(ctx, y, branch_of(ctx, y))


def jacobian_F_branch(ctx: CollisionContext, y, branch: int) -> np.ndarray:
    """Analytic branch Jacobian.

    Differentiating F = -Y_p^(tau+t(y)) y with the implicit crossing time
    gives

        DF(y) = -Phi_p(tau+t) + f(w, p) (h'(z) Phi_b(t)) / (h'(z) f(z, b)),

    with z the crossing point, w = Y_p^(tau+t) y the (negated) image, Phi
    the flow linearisations and f the vector field.  On branch +1 the two
    Phi factors share the flow and DF collapses to rank one with image
    spanned by f(w, p): the geometric face of that branch's dimension
    deficit.
    """

    y = np.asarray(y, dtype=float)
    flow, tau = ctx.flow, ctx.tau
    p = ctx.sign
    u = branch * ctx.sign
    t = crossing_time(ctx, y, branch)
    z = flow.apply(y, u, t)
    w = flow.apply(y, p, tau + t)
    gz = ctx.dh_eff(z)
    denom = float(gz @ flow.velocity(z, u))
    if abs(denom) < 1e-12:
        raise DegenerateDerivative("threshold crossing is tangent, no linearisation")
    phi_t = flow.jacobian(y, u, t)
    phi_w = flow.jacobian(y, p, tau + t)
    return -phi_w + np.outer(flow.velocity(w, p), gz @ phi_t) / denom


def jacobian_F(ctx: CollisionContext, y) -> np.ndarray:
    """Jacobian of the branch applying at y (discontinuous across the line)."""
    return jacobian_F_branch(ctx, y, branch_of(ctx, y))


def theta(ctx: CollisionContext, y) -> float:
    """Travel time from y to the phase section downstream of the corner.

    The section is the hyperplane through ``Y_p^delta y_ref`` normal to the
    reference velocity f(y_ref, p); it is crossed transversally by every
    path near the collision orbit, giving each map point a well-defined
    phase theta(y) in [0, 2*delta].  Raises :class:`NoRootInInterval` when
    the path does not reach the section in that window.
    """

    y = np.asarray(y, dtype=float)
    flow, delta = ctx.flow, ctx.delta
    p = ctx.sign
    f2 = flow.velocity(np.asarray(ctx.y_ref, dtype=float), p)
    y_sec = flow.apply(np.asarray(ctx.y_ref, dtype=float), p, delta)

    def q(th: float) -> float:
        return float(f2 @ (flow.apply(y, p, th) - y_sec))

    def dq(th: float) -> float:
        z = flow.apply(y, p, th)
        return float(f2 @ flow.velocity(z, p))

    th = delta
    for _ in range(30):
        r = q(th)
        if abs(r) < 1e-13:
            if 0.0 <= th <= 2.0 * delta:
                return th
            break
        d = dq(th)
        if d == 0.0 or not -delta <= th <= 3.0 * delta:
            break
        th -= r / d

    qa, qb = q(0.0), q(2.0 * delta)
    if qa == 0.0:
        return 0.0
    if qb == 0.0:
        return 2.0 * delta
    if qa * qb > 0.0:
        raise NoRootInInterval("path does not reach the phase section in [0, 2*delta]")
    return float(brentq(q, 0.0, 2.0 * delta, xtol=1e-15, rtol=8.9e-16))


def reconstruct_history(ctx: CollisionContext, y, horizon: float | None = None) -> HybridState:
    """Lift a map point to the hybrid state it stands for.

    The history runs the post-switch flow for theta(y) time units (so the
    head sits on the phase section) and the pre-switch flow before that;
    the single label change happens exactly at the switch point y.  The
    returned state evolves under the full delayed dynamics into the switch
    points -F(y), F(F(y)), ... which is the oracle test for the map.
    """

    y = np.asarray(y, dtype=float)
    th = theta(ctx, y)
    big = ctx.tau if horizon is None else float(horizon)
    if big < ctx.tau:
        raise ValueError("history horizon must cover the delay")
    if th >= big:
        raise ValueError("phase offset exceeds the history horizon")
    p = ctx.sign
    anchor = ctx.flow.apply(y, -p, th - big)
    hist = BreakpointHistory(ctx.flow, big, anchor, times=[-th], labels=[-p, p])
    return HybridState(history=hist, u=p)
