"""Brute-force attractor analysis for the reduced half-return map.

Everything here iterates :func:`relaydyn.reduced.map_F` and post-processes
the orbit: parameter sweeps record the min/max envelope of the iterates
(the numerical bifurcation diagram), and single-parameter runs are turned
into polygon descriptions - angles about the attractor mean, the induced
circle map, corner/arc segmentation.

The sampling window follows the convention of keeping iterates 40 through
400: late enough to shed transients at desk scale, long enough to cover
the attractor densely in the quasi-periodic regime.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (CentroidOnCurve, InsufficientSamples, LeftNeighborhood,
                     NoRootInBracket)
from .reduced import CollisionContext, branch_of, map_F, oscillator_context

__all__ = [
    "AttractorRun",
    "SweepRecord",
    "PolygonDescription",
    "iterate_attractor",
    "sweep",
    "visit_window",
    "extract_circle_map",
    "polygon_arcs",
    "on_plus_image_manifold",
]

DEFAULT_RADIUS = 0.5


@dataclass(frozen=True)
class AttractorRun:
    """Iterates of the half-return map after transient removal."""

    points: np.ndarray          # sampled window, orbit order
    env_min: np.ndarray         # per-coordinate envelope over the window
    env_max: np.ndarray
    visited_plus: bool          # some sample in D+ (h < eps)
    visited_minus: bool
    final: np.ndarray           # last iterate, for warm starts

    @property
    def width(self) -> np.ndarray:
        return self.env_max - self.env_min


@dataclass(frozen=True)
class SweepRecord:
    """Envelope data of one parameter value within a sweep."""

    alpha: float
    env_min: np.ndarray
    env_max: np.ndarray
    visited_plus: bool
    visited_minus: bool
    sample: np.ndarray          # last few attractor points
    escaped: bool = False

    @property
    def width(self) -> np.ndarray:
        return self.env_max - self.env_min


def iterate_attractor(ctx: CollisionContext, y0, n_transient: int = 40,
                      n_total: int = 400, radius: float = DEFAULT_RADIUS) -> AttractorRun:
    """Iterate the half-return map and keep the post-transient window.

    Raises :class:`LeftNeighborhood` when an iterate moves further than
    ``radius`` from the reference corner (the local map construction is
    only meaningful nearby; crossing-time failures count as having left).
    """

    if not 0 <= n_transient < n_total:
        raise ValueError("need 0 <= n_transient < n_total")
    y = np.asarray(y0, dtype=float)
    kept = []
    visited_plus = visited_minus = False
    for k in range(n_total):
        try:
            y = map_F(ctx, y)
        except NoRootInBracket as exc:
            raise LeftNeighborhood(
                f"iterate {k} lost the threshold crossing: {exc}") from exc
        if np.linalg.norm(y - ctx.y_ref) > radius:
            raise LeftNeighborhood(f"iterate {k} left the working neighborhood")
        if k >= n_transient:
            kept.append(y)
            if branch_of(ctx, y) > 0:
                visited_plus = True
            else:
                visited_minus = True
    pts = np.asarray(kept)
    return AttractorRun(points=pts, env_min=pts.min(axis=0), env_max=pts.max(axis=0),
                        visited_plus=visited_plus, visited_minus=visited_minus,
                        final=pts[-1])


def sweep(zeta: float, tau: float, epsilon: float, alphas, *,
          warm_start: bool = True, y0=None, n_transient: int = 40,
          n_total: int = 400, keep: int = 32,
          radius: float = DEFAULT_RADIUS) -> list[SweepRecord]:
    """Envelope sweep over switching angles at fixed (zeta, tau, eps).

    With ``warm_start`` each parameter value starts from the previous
    attractor's last iterate, following the hysteresis-free protocol of
    numerical bifurcation diagrams.  A run that leaves the neighborhood is
    retried once from the default seed and recorded with ``escaped`` set
    (NaN envelope) if it escapes again; the sweep itself never raises.
    """

    from .oscillator import collision_point

    alphas = np.asarray(alphas, dtype=float)
    records: list[SweepRecord] = []
    if alphas.size == 0:
        return records
    y_ref = collision_point(zeta, tau)
    default_seed = y_ref + np.array([1e-3, 0.0])
    y = np.asarray(y0, dtype=float) if y0 is not None else default_seed
    for alpha in alphas:
        ctx = oscillator_context(zeta, float(alpha), tau, epsilon, y_ref)
        run = None
        for seed in (y, default_seed):
            try:
                run = iterate_attractor(ctx, seed, n_transient, n_total, radius)
                break
            except LeftNeighborhood:
                continue
        if run is None:
            nan2 = np.full(2, np.nan)
            records.append(SweepRecord(alpha=float(alpha), env_min=nan2, env_max=nan2,
                                       visited_plus=False, visited_minus=False,
                                       sample=np.empty((0, 2)), escaped=True))
            y = default_seed
            continue
        records.append(SweepRecord(alpha=float(alpha), env_min=run.env_min,
                                   env_max=run.env_max, visited_plus=run.visited_plus,
                                   visited_minus=run.visited_minus,
                                   sample=run.points[-keep:]))
        if warm_start:
            y = run.final
    return records


def visit_window(records: list[SweepRecord]) -> tuple[float, float] | None:
    """Parameter range over which the attractor still reaches D+.

    Returns (first, last) alpha with the D+ flag set, or None if the flag
    never fires.  The upper edge estimates where the attractor detaches
    from the threshold (the grazing end of the polygon regime).
    """

    flagged = [r.alpha for r in records if r.visited_plus]
    if not flagged:
        return None
    return min(flagged), max(flagged)


# ---------------------------------------------------------------------------
# circle map and polygon structure


@dataclass(frozen=True)
class PolygonDescription:
    """Geometry of a closed attractor seen from its mean point.

    ``points`` are the attractor samples sorted by angle; ``orbit_next``
    maps each sorted point to the angle of its image, giving the circle
    map pairs.  Arc data is filled by :func:`polygon_arcs` and empty for a
    plain circle-map extraction.
    """

    points: np.ndarray
    centroid: np.ndarray
    angles: np.ndarray                  # sorted, in [-pi, pi)
    pairs: np.ndarray                   # (m, 2) circle-map graph (phi_k, phi_{k+1})
    monotone: bool
    locking_period: int | None
    corner_indices: tuple[int, ...] = ()
    arc_ids: np.ndarray | None = None

    @property
    def arc_count(self) -> int:
        if self.arc_ids is None:
            return 1 if not self.corner_indices else len(self.corner_indices)
        return int(np.unique(self.arc_ids).size)


def _angles_about(samples: np.ndarray, centroid: np.ndarray) -> np.ndarray:
    rel = samples - centroid
    radii = np.hypot(rel[:, 0], rel[:, 1])
    scale = float(np.median(radii))
    if scale <= 0.0 or np.min(radii) < 1e-6 * scale:
        raise CentroidOnCurve("a sample (nearly) coincides with the attractor mean")
    return np.arctan2(rel[:, 1], rel[:, 0])


def _circular_monotone(phi_in: np.ndarray, phi_out: np.ndarray) -> bool:
    """True when the induced map preserves strict circular order."""
    order = np.argsort(phi_in)
    pin = phi_in[order]
    pout = phi_out[order]
    # collapse numerically identical inputs (locked orbits revisit points)
    keep = np.concatenate([[True], np.diff(pin) > 1e-9])
    pout = pout[keep]
    if pout.size < 3:
        return True
    gaps = np.mod(np.diff(np.append(pout, pout[0])), 2.0 * math.pi)
    winding = gaps.sum() / (2.0 * math.pi)
    return bool(np.all(gaps > 0.0) and abs(winding - 1.0) < 1e-9)


def _locking_period(angles_in_orbit_order: np.ndarray, max_period: int = 64,
                    tol: float = 1e-6) -> int | None:
    phi = angles_in_orbit_order
    for q in range(1, max_period + 1):
        if phi.size <= q:
            break
        d = np.mod(phi[q:] - phi[:-q] + math.pi, 2.0 * math.pi) - math.pi
        if np.max(np.abs(d)) < tol:
            return q
    return None


def extract_circle_map(samples: np.ndarray, min_samples: int = 200) -> PolygonDescription:
    """Angle dynamics of a closed attractor about its sample mean.

    ``samples`` must be in orbit order.  Raises
    :class:`InsufficientSamples` below ``min_samples`` points and
    :class:`CentroidOnCurve` when the mean is not strictly inside the
    curve (degenerate angles).
    """

    samples = np.asarray(samples, dtype=float)
    if samples.ndim != 2 or samples.shape[0] < min_samples:
        raise InsufficientSamples(
            f"need at least {min_samples} samples, got {samples.shape[0]}")
    centroid = samples.mean(axis=0)
    phi = _angles_about(samples, centroid)
    pairs = np.stack([phi[:-1], phi[1:]], axis=-1)
    order = np.argsort(phi)
    return PolygonDescription(
        points=samples[order],
        centroid=centroid,
        angles=phi[order],
        pairs=pairs,
        monotone=_circular_monotone(pairs[:, 0], pairs[:, 1]),
        locking_period=_locking_period(phi),
    )


def _turning_corners(points: np.ndarray) -> tuple[int, ...]:
    """Indices whose turning angle exceeds ten times the median."""
    nxt = np.roll(points, -1, axis=0)
    prv = np.roll(points, 1, axis=0)
    sec_in = points - prv
    sec_out = nxt - points
    ang = np.abs(np.arctan2(
        sec_in[:, 0] * sec_out[:, 1] - sec_in[:, 1] * sec_out[:, 0],
        (sec_in * sec_out).sum(axis=1)))
    med = float(np.median(ang))
    if med <= 0.0:
        return ()
    return tuple(int(i) for i in np.flatnonzero(ang > 10.0 * med))


def polygon_arcs(samples: np.ndarray, ctx: CollisionContext,
                 min_samples: int = 200) -> PolygonDescription:
    """Segment a polygon attractor into its smooth arcs.

    Arc identity is the number of map applications since the orbit last
    passed through D+ (each D+ passage projects onto the image of the
    rank-one branch, so points sharing that age lie on a common smooth
    image arc).  Corner candidates from the turning-angle test refine the
    arc boundaries.  A degenerate (point-like) attractor raises
    :class:`InsufficientSamples`.
    """

    samples = np.asarray(samples, dtype=float)
    desc = extract_circle_map(samples, min_samples=min_samples)
    diam = float(np.max(desc.points.max(axis=0) - desc.points.min(axis=0)))
    if diam < 1e-8:
        raise InsufficientSamples("attractor is a point, no polygon to segment")

    # ages along the orbit; unknown until the first D+ passage
    in_plus = np.array([branch_of(ctx, y) > 0 for y in samples])
    ages = np.full(samples.shape[0], -1)
    age = None
    for k in range(samples.shape[0]):
        if in_plus[k]:
            age = 0
        elif age is not None:
            age += 1
        if age is not None:
            ages[k] = age

    order = np.argsort(_angles_about(samples, desc.centroid))
    sorted_ages = ages[order]
    known = sorted_ages >= 0

    if not known.any():
        return desc  # smooth curve regime: single arc, no corners

    # boundaries where the age changes between angle-neighbors (unknown ages
    # inherit their predecessor to avoid spurious cuts)
    filled = sorted_ages.copy()
    for i in range(filled.size):
        if filled[i] < 0:
            filled[i] = filled[i - 1] if i else filled[known.argmax()]
    change = np.flatnonzero(filled != np.roll(filled, 1))
    corners_turn = _turning_corners(desc.points)
    corners = tuple(sorted(set(int(i) for i in change) | set(corners_turn)))
    arc_ids = np.zeros(filled.size, dtype=int)
    current = 0
    for i in range(filled.size):
        if i in corners and i != 0:
            current += 1
        arc_ids[i] = current
    return PolygonDescription(
        points=desc.points, centroid=desc.centroid, angles=desc.angles,
        pairs=desc.pairs, monotone=desc.monotone,
        locking_period=desc.locking_period,
        corner_indices=corners, arc_ids=arc_ids)


def on_plus_image_manifold(ctx: CollisionContext, w, tol: float = 1e-8) -> bool:
    """Does w lie on the image of the rank-one branch?

    That image is the delayed push-forward of the threshold line, so
    pulling w back by tau under the propagation flow (sign included) must
    land on the line.
    """

    z = ctx.flow.apply(-np.asarray(w, dtype=float), ctx.sign, -ctx.tau)
    return abs(ctx.h_eff(z) - ctx.epsilon) <= tol
