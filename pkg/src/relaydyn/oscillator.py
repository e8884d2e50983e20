"""The relay-controlled linear oscillator and its corner-collision surface.

The plant is the second-order system

    x'' + 2*zeta*x' + (1 + zeta^2)(x - u) = 0,

driven by the delayed hysteretic relay with switching functional
h(y) = y1*cos(alpha) + y2*sin(alpha).  For negative damping the open-loop
equilibria are spiraling sources and the relay sustains a symmetric limit
cycle whose switch points satisfy y = -Y_+^tau y, giving the closed form

    y*(tau) = -[I + A(tau)]^{-1} v(tau).

The orbit collides with a switching threshold exactly when eps equals
+h(y*) (tau > pi) or -h(y*) (tau < pi); sweeping (tau, alpha) maps out the
collision surface, and the reduced-map linearisations along it organise
the local bifurcation picture (folds, flips, Neimark-Sacker curve and its
strong resonances) that this module extracts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import NegativeEpsilon, RelayDynError, SingularSurface
from .flows import AffineOscillatorFlow
from .reduced import CollisionContext, jacobian_F_branch, oscillator_context

__all__ = [
    "OscillatorParams",
    "CollisionOrbit",
    "collision_point",
    "collision_epsilon",
    "collision_orbit",
    "collision_context",
    "CollisionStability",
    "stability_at_collision",
    "surface_alpha",
    "find_nsc",
    "CurvePoint",
    "BifurcationMap",
    "bifurcation_map",
    "BIFURCATION_LABELS",
]

# relative smallest singular value below which I + A(tau) counts as singular
_SINGULAR_RTOL = 1e-12


@dataclass(frozen=True)
class OscillatorParams:
    """Parameter quadruple of the relay oscillator."""

    zeta: float
    tau: float
    epsilon: float
    alpha: float

    def __post_init__(self):
        if self.tau <= 0:
            raise ValueError("delay must be positive")
        if self.epsilon <= 0:
            raise ValueError("hysteresis half-width must be positive")

    @property
    def switching_normal(self) -> np.ndarray:
        return np.array([math.cos(self.alpha), math.sin(self.alpha)])


@dataclass(frozen=True)
class CollisionOrbit:
    """Symmetric periodic orbit at the moment of corner collision.

    ``g_plus``/``g_minus`` are the one-sided speeds of the switching signal
    at the corner (threshold gradient dotted with either vector field) and
    ``q`` their product; strict transversality means q > 0.
    """

    y_star: np.ndarray
    params: OscillatorParams
    q: float
    g_plus: float
    g_minus: float

    @property
    def period(self) -> float:
        return 2.0 * self.params.tau


def collision_point(zeta: float, tau: float) -> np.ndarray:
    """Switch point y* of the symmetric orbit, from y = -Y_+^tau y.

    Raises :class:`SingularSurface` when I + A(tau) is numerically
    singular.  For the damped closed form this happens only in the limit
    zeta -> 0 with tau -> pi jointly, but generic flow matrices can hit it
    anywhere, so the guard is a singular-value check rather than a special
    tau value.
    """

    flow = AffineOscillatorFlow(zeta)
    m = np.eye(2) + flow.flow_matrix(tau)
    sv = np.linalg.svd(m, compute_uv=False)
    if sv[-1] <= sv[0] * _SINGULAR_RTOL:
        raise SingularSurface(
            f"I + A(tau) singular at tau={tau:.6g} (cond {sv[0] / max(sv[-1], 1e-300):.2e})")
    return np.linalg.solve(m, -flow.flow_offset(tau))


def collision_epsilon(zeta: float, tau: float, alpha: float) -> float:
    """Hysteresis half-width at which the symmetric orbit collides.

    The corner sits on the +eps line for tau > pi and on the -eps line for
    tau < pi, so eps = +h(y*) respectively -h(y*).  At tau = pi the sign
    rule (and the surface itself) degenerates and the call is refused.
    The tau < pi branch is exercised far less than the canonical
    tau in (pi, 2*pi) window; treat its output as experimental.

    Raises :class:`NegativeEpsilon` when the computed value is not a
    physical half-width (the parameter point lies off the surface).
    """

    if abs(tau - math.pi) < 1e-9:
        raise SingularSurface("collision surface is singular at tau = pi")
    y = collision_point(zeta, tau)
    eps = y[0] * math.cos(alpha) + y[1] * math.sin(alpha)
    if tau < math.pi:
        eps = -eps
    if eps <= 0:
        raise NegativeEpsilon(
            f"no colliding orbit at tau={tau:.6g}, alpha={alpha:.6g} (eps={eps:.3e})")
    return float(eps)


def collision_orbit(zeta: float, tau: float, alpha: float) -> CollisionOrbit:
    """Collision orbit data at a surface point, with transversality scalars."""
    eps = collision_epsilon(zeta, tau, alpha)
    y = collision_point(zeta, tau)
    flow = AffineOscillatorFlow(zeta)
    c = np.array([math.cos(alpha), math.sin(alpha)])
    g_plus = float(c @ flow.velocity(y, +1))
    g_minus = float(c @ flow.velocity(y, -1))
    q = g_plus * g_minus
    if q <= 0:
        raise ValueError(
            f"corner not strictly transversal at tau={tau:.6g}, alpha={alpha:.6g} (q={q:.3e})")
    return CollisionOrbit(y_star=y, params=OscillatorParams(zeta, tau, eps, alpha),
                          q=q, g_plus=g_plus, g_minus=g_minus)


def collision_context(orbit: CollisionOrbit, delta: float | None = None) -> CollisionContext:
    """Reduced-map context anchored at the orbit's switch point."""
    p = orbit.params
    # the corner sits on the -eps line for tau < pi: that is the mirrored cycle
    ctx = oscillator_context(p.zeta, p.alpha, p.tau, p.epsilon, orbit.y_star, delta)
    if p.tau < math.pi:
        ctx = CollisionContext(flow=ctx.flow, h=ctx.h, dh=ctx.dh, tau=ctx.tau,
                               epsilon=ctx.epsilon, y_ref=orbit.y_star,
                               delta=ctx.delta, sign=-1)
    return ctx


@dataclass(frozen=True)
class CollisionStability:
    """Spectra of the two branch linearisations at the corner.

    ``lambda_plus`` is the single nonzero eigenvalue of the rank-one branch
    (equal to its trace); ``eigs_minus`` the pair of the diffeomorphism
    branch.  ``residuals`` holds the bifurcation test functions evaluated
    at the point; a small residual flags proximity to that bifurcation.
    """

    lambda_plus: float
    eigs_minus: tuple[complex, complex]
    residuals: dict[str, float]

    @property
    def stable_plus(self) -> bool:
        return abs(self.lambda_plus) < 1.0

    @property
    def stable_minus(self) -> bool:
        return all(abs(ev) < 1.0 for ev in self.eigs_minus)

    def near(self, tol: float = 1e-3) -> tuple[str, ...]:
        return tuple(k for k, v in self.residuals.items() if abs(v) < tol)


# bifurcation test functions on the collision surface; NS additionally
# requires |trace| < 2 so the unit-determinant pair is actually complex
BIFURCATION_LABELS = ("fold_plus", "flip_plus", "fold_minus", "flip_minus", "ns_minus")


def _branch_jacobians(orbit: CollisionOrbit) -> tuple[np.ndarray, np.ndarray]:
    ctx = collision_context(orbit)
    return (jacobian_F_branch(ctx, orbit.y_star, +1),
            jacobian_F_branch(ctx, orbit.y_star, -1))


def _test_values(orbit: CollisionOrbit) -> dict[str, float]:
    j_plus, j_minus = _branch_jacobians(orbit)
    lam = float(np.trace(j_plus))
    eye = np.eye(2)
    return {
        "fold_plus": lam - 1.0,
        "flip_plus": lam + 1.0,
        "fold_minus": float(np.linalg.det(j_minus - eye)),
        "flip_minus": float(np.linalg.det(j_minus + eye)),
        "ns_minus": float(np.linalg.det(j_minus)) - 1.0,
        "trace_minus": float(np.trace(j_minus)),
    }


def stability_at_collision(orbit: CollisionOrbit) -> CollisionStability:
    """Classify the corner: branch spectra plus bifurcation residuals."""
    j_plus, j_minus = _branch_jacobians(orbit)
    lam = float(np.trace(j_plus))
    ev = np.linalg.eigvals(j_minus)
    vals = _test_values(orbit)
    tr = vals.pop("trace_minus")
    if abs(tr) >= 2.0:
        vals.pop("ns_minus")  # determinant can be 1 with real eigenvalues
    return CollisionStability(lambda_plus=lam, eigs_minus=(complex(ev[0]), complex(ev[1])),
                              residuals=vals)


# ---------------------------------------------------------------------------
# slices of the collision surface and the on-surface NS point


def surface_alpha(zeta: float, tau: float, epsilon: float,
                  bracket: tuple[float, float] = (-math.pi / 2, math.pi / 2),
                  n_scan: int = 361) -> list[float]:
    """Switching angles at which the collision surface meets a given eps.

    Scans alpha over the bracket for sign changes of
    ``collision_epsilon - epsilon`` and refines each, returning all roots
    in increasing order (the fixed-eps slice of the surface may be crossed
    more than once).
    """

    if abs(tau - math.pi) < 1e-9:
        raise SingularSurface("collision surface is singular at tau = pi")
    y = collision_point(zeta, tau)
    s = 1.0 if tau > math.pi else -1.0

    def g(alpha: float) -> float:
        return s * (y[0] * math.cos(alpha) + y[1] * math.sin(alpha)) - epsilon

    grid = np.linspace(bracket[0], bracket[1], n_scan)
    vals = np.array([g(a) for a in grid])
    roots = []
    for i in np.flatnonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0):
        roots.append(float(brentq(g, grid[i], grid[i + 1], xtol=1e-14)))
    for i in np.flatnonzero(vals == 0.0):
        roots.append(float(grid[i]))
    return sorted(roots)


def _slice_alpha_near(zeta: float, tau: float, epsilon: float, hint: float | None) -> float:
    roots = surface_alpha(zeta, tau, epsilon)
    if not roots:
        raise NegativeEpsilon(
            f"eps={epsilon:.4g} slice does not meet the surface at tau={tau:.6g}")
    if hint is None:
        return roots[0]
    return min(roots, key=lambda a: abs(a - hint))


def find_nsc(zeta: float, epsilon: float,
             tau_bracket: tuple[float, float] = (math.pi + 0.2, 5.8),
             alpha_hint: float | None = None,
             n_scan: int = 60) -> tuple[float, float]:
    """Locate the Neimark-Sacker point on a fixed-eps slice of the surface.

    Walks tau along the slice (following the alpha root continuously),
    finds a sign change of det(DF_minus) - 1 and bisects it down to a tau
    interval of 1e-12.  Returns (tau, alpha).
    """

    def ns_value(tau: float, hint: float | None) -> tuple[float, float]:
        alpha = _slice_alpha_near(zeta, tau, epsilon, hint)
        orbit = collision_orbit(zeta, tau, alpha)
        _, j_minus = _branch_jacobians(orbit)
        return float(np.linalg.det(j_minus)) - 1.0, alpha

    taus = np.linspace(tau_bracket[0], tau_bracket[1], n_scan)
    hint = alpha_hint
    prev = None
    for tau in taus:
        try:
            val, hint = ns_value(float(tau), hint)
        except (NegativeEpsilon, SingularSurface, ValueError):
            prev = None
            continue
        if prev is not None and prev[1] * val < 0:
            lo, hi = prev[0], float(tau)
            flo = prev[1]
            while hi - lo > 1e-12:
                mid = 0.5 * (lo + hi)
                fmid, hint = ns_value(mid, hint)
                if flo * fmid <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            tau_ns = 0.5 * (lo + hi)
            _, alpha_ns = ns_value(tau_ns, hint)
            return tau_ns, alpha_ns
        prev = (float(tau), val)
    raise NegativeEpsilon("no Neimark-Sacker point on this slice of the surface")


# ---------------------------------------------------------------------------
# bifurcation map over the collision surface


@dataclass(frozen=True)
class CurvePoint:
    """One refined point of a bifurcation curve on the collision surface."""

    tau: float
    alpha: float
    epsilon: float
    label: str
    residual: float
    tags: tuple[str, ...] = ()


@dataclass
class BifurcationMap:
    """Bifurcation curves of the two branch maps over the (tau, alpha) grid."""

    zeta: float
    tau_grid: np.ndarray
    alpha_grid: np.ndarray
    points: dict[str, list[CurvePoint]] = field(default_factory=dict)
    polylines: dict[str, list[np.ndarray]] = field(default_factory=dict)

    def all_points(self) -> list[CurvePoint]:
        return [p for pts in self.points.values() for p in pts]


_RESONANCES = ((math.pi, "1:2"), (2.0 * math.pi / 3.0, "1:3"), (math.pi / 2.0, "1:4"))


def _grid_values(zeta, taus, alphas):
    """Test-function values over the grid; NaN where the surface is invalid."""
    vals = {k: np.full((taus.size, alphas.size), np.nan) for k in BIFURCATION_LABELS}
    vals["trace_minus"] = np.full((taus.size, alphas.size), np.nan)
    eps = np.full((taus.size, alphas.size), np.nan)
    for i, tau in enumerate(taus):
        for j, alpha in enumerate(alphas):
            try:
                orbit = collision_orbit(zeta, float(tau), float(alpha))
                tv = _test_values(orbit)
            except (RelayDynError, ValueError):
                # invalid surface point or (near-)tangential corner
                continue
            for k in BIFURCATION_LABELS:
                vals[k][i, j] = tv[k]
            vals["trace_minus"][i, j] = tv["trace_minus"]
            eps[i, j] = orbit.params.epsilon
    return vals, eps


def _refine_edge(fun, p0, p1, v0, v1, tol=1e-8, max_iter=80):
    """Bisection along the segment p0-p1 until |fun| < tol at the midpoint."""
    a, b = 0.0, 1.0
    fa = v0
    point = None
    fm = v0
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        point = (p0[0] + m * (p1[0] - p0[0]), p0[1] + m * (p1[1] - p0[1]))
        fm = fun(*point)
        if abs(fm) < tol:
            return point, fm
        if (fa < 0) != (fm < 0):
            b = m
        else:
            a, fa = m, fm
    return point, fm


def _chain_segments(segments: list[tuple[tuple, tuple]], tol: float) -> list[np.ndarray]:
    """Join segments sharing endpoints (within tol) into polylines."""

    def key(p):
        return (round(p[0] / tol), round(p[1] / tol))

    links: dict[tuple, list[int]] = {}
    for idx, (p, q) in enumerate(segments):
        links.setdefault(key(p), []).append(idx)
        links.setdefault(key(q), []).append(idx)

    used = [False] * len(segments)
    polylines = []
    for start in range(len(segments)):
        if used[start]:
            continue
        used[start] = True
        chain = list(segments[start])
        for endpos in (0, -1):
            while True:
                end = chain[endpos]
                nxt = [i for i in links.get(key(end), []) if not used[i]]
                if not nxt:
                    break
                i = nxt[0]
                used[i] = True
                p, q = segments[i]
                other = q if key(p) == key(end) else p
                if endpos == 0:
                    chain.insert(0, other)
                else:
                    chain.append(other)
        polylines.append(np.array(chain))
    return polylines


def bifurcation_map(zeta: float,
                    tau_range: tuple[float, float] = (math.pi + 1e-3, 2 * math.pi),
                    alpha_range: tuple[float, float] = (-1.2, 1.2),
                    n_tau: int = 50, n_alpha: int = 50,
                    residual_tol: float = 1e-8) -> BifurcationMap:
    """Extract the bifurcation curves of both branch maps on the surface.

    Grid-scans the five test functions over (tau, alpha), bisects every
    sign change along grid edges down to ``residual_tol`` and chains the
    refined crossings into polylines.  NS points additionally pass the
    |trace| < 2 guard and carry strong-resonance tags (eigenvalue angle
    within 1e-3 of pi, 2*pi/3 or pi/2); points where the fold and flip
    residuals of the same branch both nearly vanish are tagged as PD-SN
    concurrence candidates.
    """

    taus = np.linspace(tau_range[0], tau_range[1], n_tau)
    alphas = np.linspace(alpha_range[0], alpha_range[1], n_alpha)
    vals, _ = _grid_values(zeta, taus, alphas)

    def make_fun(label):
        def fun(tau, alpha):
            try:
                return _test_values(collision_orbit(zeta, tau, alpha))[label]
            except (RelayDynError, ValueError):
                return math.nan
        return fun

    result = BifurcationMap(zeta=zeta, tau_grid=taus, alpha_grid=alphas)
    for label in BIFURCATION_LABELS:
        fun = make_fun(label)
        grid = vals[label]
        # refined crossing per grid edge, shared between the two adjacent cells
        edge_pts: dict[tuple, tuple] = {}

        def crossing(i0, j0, i1, j1, eid):
            if eid in edge_pts:
                return edge_pts[eid]
            v0, v1 = grid[i0, j0], grid[i1, j1]
            pt = None
            if np.isfinite(v0) and np.isfinite(v1) and np.sign(v0) * np.sign(v1) < 0:
                p0 = (taus[i0], alphas[j0])
                p1 = (taus[i1], alphas[j1])
                pt = _refine_edge(fun, p0, p1, v0, v1, tol=residual_tol)
            edge_pts[eid] = pt
            return pt

        segments = []
        accepted: dict[tuple, CurvePoint] = {}
        for i in range(taus.size - 1):
            for j in range(alphas.size - 1):
                hits = []
                for (i0, j0, i1, j1, eid) in (
                        (i, j, i + 1, j, ("h", i, j)),
                        (i, j + 1, i + 1, j + 1, ("h", i, j + 1)),
                        (i, j, i, j + 1, ("v", i, j)),
                        (i + 1, j, i + 1, j + 1, ("v", i + 1, j))):
                    pt = crossing(i0, j0, i1, j1, eid)
                    if pt is not None:
                        hits.append((eid, pt))
                kept = []
                for eid, (point, res) in hits:
                    cp = _curve_point(zeta, point, label, res, residual_tol)
                    if cp is not None:
                        accepted[eid] = cp
                        kept.append(point)
                if len(kept) >= 2:
                    # ambiguous 4-crossing cells: pair in hit order
                    for a, b in zip(kept[0::2], kept[1::2]):
                        segments.append((a, b))
        result.points[label] = list(accepted.values())
        tol = max(taus[1] - taus[0], alphas[1] - alphas[0]) * 1e-6
        result.polylines[label] = _chain_segments(segments, tol)
    return result


def _curve_point(zeta, point, label, residual, residual_tol) -> CurvePoint | None:
    """Validate and tag one refined crossing; None drops it."""
    tau, alpha = point
    if abs(residual) >= residual_tol * 10:
        return None
    try:
        orbit = collision_orbit(zeta, tau, alpha)
        tv = _test_values(orbit)
    except (RelayDynError, ValueError):
        return None
    tags = []
    if label == "ns_minus":
        tr = tv["trace_minus"]
        if abs(tr) >= 2.0:
            return None
        angle = math.acos(max(-1.0, min(1.0, tr / 2.0)))
        for target, name in _RESONANCES:
            if abs(angle - target) < 1e-3:
                tags.append(name)
    if label in ("fold_minus", "flip_minus") and abs(tv["fold_minus"]) < 1e-4 \
            and abs(tv["flip_minus"]) < 1e-4:
        tags.append("pd-sn")
    return CurvePoint(tau=float(tau), alpha=float(alpha),
                      epsilon=orbit.params.epsilon, label=label,
                      residual=float(residual), tags=tuple(tags))
