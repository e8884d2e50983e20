"""Newton solvers and pseudo-arclength continuation for the reduced map.

Three layers:

* generic plumbing: :func:`newton` on square residual problems with
  forward-difference Jacobians, and :func:`continue_branch`, a
  pseudo-arclength corrector that halves its step on Newton failure and
  grows it again after easy steps;
* the oscillator's algebraic systems: fixed points of the diffeomorphism
  branch (:func:`fixed_point_residual`), their Neimark-Sacker locus
  (:func:`ns_residual`, :func:`continue_ns_curve`);
* closed invariant curves by Fourier collocation (:class:`FourierCurve`,
  :func:`invariant_curve_residual`) and the one-parameter family of
  curves that graze the switching threshold
  (:func:`continue_colliding_family`), whose breakup is detected through
  a spectral error estimate.

The invariant curve is parametrized by angle about a base point,
y(phi) = y0 + r(phi) (cos phi, sin phi), with the angle dynamics stored
as eta(phi) = phi + omega + p(phi) where p is a zero-mean trigonometric
polynomial; keeping p mean-free pins the otherwise redundant split
between the rotation omega and the mean of p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import (BreakupDetected, InitialPointFailed, NoConvergence,
                     NotAMaximum, ParametrizationBreakdown, RelayDynError,
                     SingularJacobian)
from .flows import AffineOscillatorFlow
from .oscillator import collision_point, find_nsc
from .reduced import crossing_time, jacobian_F_branch, oscillator_context

__all__ = [
    "ResidualProblem",
    "fd_jacobian",
    "newton",
    "BranchPoint",
    "Branch",
    "continue_branch",
    "fixed_point_residual",
    "solve_fixed_point",
    "ns_residual",
    "continue_ns_curve",
    "FourierCurve",
    "invariant_curve_residual",
    "collision_closure",
    "solve_colliding_curve",
    "seed_colliding_curve",
    "continue_colliding_family",
    "fourier_error_estimate",
    "curve_radial_mismatch",
]

FD_STEP = 1e-7


@dataclass(frozen=True)
class ResidualProblem:
    """A residual map G together with an optional analytic Jacobian."""

    residual: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray] | None = None

    def jac(self, z: np.ndarray, f0: np.ndarray | None = None) -> np.ndarray:
        if self.jacobian is not None:
            return np.asarray(self.jacobian(z), dtype=float)
        return fd_jacobian(self.residual, z, f0)


def fd_jacobian(fn: Callable, z: np.ndarray, f0: np.ndarray | None = None,
                step: float = FD_STEP) -> np.ndarray:
    """Forward-difference Jacobian of fn at z."""
    z = np.asarray(z, dtype=float)
    if f0 is None:
        f0 = np.asarray(fn(z), dtype=float)
    J = np.empty((f0.size, z.size))
    for j in range(z.size):
        zp = z.copy()
        zp[j] += step
        J[:, j] = (np.asarray(fn(zp), dtype=float) - f0) / step
    return J


def newton(problem: ResidualProblem | Callable, z0, tol: float = 1e-10,
           max_iter: int = 30) -> np.ndarray:
    """Newton iteration for a square residual system.

    Raises :class:`NoConvergence` when the residual max-norm is still above
    tol after max_iter steps and :class:`SingularJacobian` when a linear
    solve fails.
    """

    if not isinstance(problem, ResidualProblem):
        problem = ResidualProblem(problem)
    z = np.asarray(z0, dtype=float).copy()
    for _ in range(max_iter):
        f = np.asarray(problem.residual(z), dtype=float)
        if not np.all(np.isfinite(f)):
            raise NoConvergence("residual is not finite")
        if np.max(np.abs(f)) <= tol:
            return z
        J = problem.jac(z, f)
        try:
            step = np.linalg.solve(J, f)
        except np.linalg.LinAlgError as exc:
            raise SingularJacobian(str(exc)) from exc
        if not np.all(np.isfinite(step)):
            raise SingularJacobian("linear solve produced non-finite step")
        z -= step
    f = np.asarray(problem.residual(z), dtype=float)
    if np.all(np.isfinite(f)) and np.max(np.abs(f)) <= tol:
        return z
    raise NoConvergence(
        f"residual {np.max(np.abs(f)):.3e} above {tol:.1e} after {max_iter} iterations")


# ---------------------------------------------------------------------------
# pseudo-arclength continuation


@dataclass
class BranchPoint:
    """One accepted continuation point: full unknown vector plus metadata."""

    w: np.ndarray
    residual_norm: float
    step: float
    data: dict = field(default_factory=dict)


@dataclass
class Branch:
    """Ordered continuation points and the reason the run stopped."""

    points: list[BranchPoint] = field(default_factory=list)
    termination: str = ""
    message: str = ""

    def values(self, key: str) -> np.ndarray:
        return np.asarray([p.data[key] for p in self.points], dtype=float)

    def __len__(self) -> int:
        return len(self.points)


def _tangent(J: np.ndarray) -> np.ndarray:
    """Unit kernel vector of the (n-1) x n continuation Jacobian."""
    _, _, vt = np.linalg.svd(J)
    return vt[-1]


def continue_branch(residual: Callable, w0, *, ds: float = 1e-2,
                    ds_min: float = 1e-8, ds_max: float = 0.2,
                    max_points: int = 400, tol: float = 1e-10,
                    newton_max_iter: int = 12,
                    direction: np.ndarray | None = None,
                    fix_index: int | None = None,
                    point_data: Callable[[np.ndarray], dict] | None = None,
                    stop: Callable[[BranchPoint], str | None] | None = None) -> Branch:
    """Trace a solution branch of G(w) = 0 with dim G = dim w - 1.

    The seed is first corrected with coordinate ``fix_index`` (default:
    last) frozen; failure raises :class:`InitialPointFailed`.  Each step
    then predicts along the branch tangent and corrects in the hyperplane
    orthogonal to it; Newton failures halve the step (stopping at the
    floor), easy steps double it up to the cap.  ``stop`` inspects every
    accepted point and may end the run by returning a reason string or
    raising a :class:`RelayDynError` (recorded, not propagated).
    """

    w0 = np.asarray(w0, dtype=float).copy()
    n = w0.size
    k = n - 1 if fix_index is None else fix_index

    def seed_residual(w):
        return np.append(residual(w), w[k] - w0[k])

    try:
        w = newton(seed_residual, w0, tol=tol, max_iter=newton_max_iter)
    except RelayDynError as exc:
        raise InitialPointFailed(f"seed correction failed: {exc}") from exc

    branch = Branch()

    def accept(wp, step):
        rn = float(np.max(np.abs(residual(wp))))
        point = BranchPoint(w=wp, residual_norm=rn, step=step,
                            data=point_data(wp) if point_data else {})
        branch.points.append(point)
        if stop is not None:
            reason = stop(point)
            if reason:
                branch.termination = reason
                return False
        return True

    if not accept(w, 0.0):
        return branch

    t = _tangent(fd_jacobian(residual, w))
    if direction is not None:
        if float(np.dot(t, direction)) < 0:
            t = -t
    step = ds
    while len(branch.points) < max_points:
        pred = w + step * t

        def corrector(z):
            return np.append(residual(z), t @ (z - pred))

        try:
            w_new = newton(corrector, pred, tol=tol, max_iter=newton_max_iter)
        except (RelayDynError, np.linalg.LinAlgError) as exc:
            step *= 0.5
            if step < ds_min:
                branch.termination = "step-floor"
                branch.message = str(exc)
                return branch
            continue
        w = w_new
        try:
            if not accept(w, step):
                return branch
        except RelayDynError as exc:
            branch.termination = type(exc).__name__
            branch.message = str(exc)
            return branch
        try:
            t_new = _tangent(fd_jacobian(residual, w))
        except (RelayDynError, np.linalg.LinAlgError) as exc:
            branch.termination = "tangent-failure"
            branch.message = str(exc)
            return branch
        if float(np.dot(t_new, t)) < 0:
            t_new = -t_new
        t = t_new
        step = min(1.5 * step, ds_max)
    branch.termination = branch.termination or "max-points"
    return branch


# ---------------------------------------------------------------------------
# fixed points of the diffeomorphism branch and their Neimark-Sacker locus


def fixed_point_residual(y0, t0: float, tau: float, alpha: float,
                         epsilon: float, zeta: float) -> np.ndarray:
    """Residual of the branch-minus fixed point with crossing offset t0.

    Components: y0 + Y_+^(tau+t0) y0 (the half-return closes with the sign
    flip) and eps - h(Y_-^(t0) y0) (the crossing sits on the threshold).
    """

    y0 = np.asarray(y0, dtype=float)
    flow = AffineOscillatorFlow(zeta)
    c = np.array([math.cos(alpha), math.sin(alpha)])
    res12 = y0 + flow.apply(y0, +1, tau + t0)
    res3 = epsilon - float(c @ flow.apply(y0, -1, t0))
    return np.array([res12[0], res12[1], res3])


def solve_fixed_point(zeta: float, tau: float, alpha: float, epsilon: float,
                      y0_guess=None, t0_guess: float = 0.0,
                      tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Newton solve for the branch-minus fixed point; seeds at the corner."""
    if y0_guess is None:
        y0_guess = collision_point(zeta, tau)
    z0 = np.array([y0_guess[0], y0_guess[1], t0_guess])

    def fn(z):
        return fixed_point_residual(z[:2], z[2], tau, alpha, epsilon, zeta)

    z = newton(fn, z0, tol=tol)
    return z[:2], float(z[2])


def _minus_jacobian(y0, tau, alpha, epsilon, zeta) -> np.ndarray:
    # wide crossing window: along continuation curves the fixed point's
    # crossing offset can grow well past the local-map default of 0.1 tau
    ctx = oscillator_context(zeta, alpha, tau, epsilon,
                             y_ref=np.asarray(y0, float), delta=0.45 * tau)
    return jacobian_F_branch(ctx, np.asarray(y0, float), -1)


def ns_residual(y0, t0: float, tau: float, alpha: float, epsilon: float,
                zeta: float) -> tuple[np.ndarray, float]:
    """Fixed-point residual extended by det(DF_minus) - 1.

    Returns the four residual components and the trace of DF_minus; a
    Neimark-Sacker point additionally needs |trace| < 2, otherwise the
    unit determinant pairs two real reciprocal eigenvalues.
    """

    fp = fixed_point_residual(y0, t0, tau, alpha, epsilon, zeta)
    J = _minus_jacobian(y0, tau, alpha, epsilon, zeta)
    res = np.append(fp, float(np.linalg.det(J)) - 1.0)
    return res, float(np.trace(J))


def continue_ns_curve(zeta: float, epsilon: float, *, seed=None,
                      tau_span: tuple[float, float] = (math.pi + 0.2, 5.5),
                      ds: float = 5e-3, ds_max: float = 5e-2,
                      max_points: int = 400) -> Branch:
    """Neimark-Sacker curve of the branch-minus fixed point in (tau, alpha).

    Unknowns are (y0, t0, tau, alpha) at fixed eps.  The seed defaults to
    the on-surface NS point, where the fixed point is the corner itself
    (t0 = 0); the locus is traced in both delay directions from there and
    returned ordered by increasing tau.  Points with a trace-guard
    violation terminate a direction and are dropped.
    """

    if seed is None:
        tau0, alpha0 = find_nsc(zeta, epsilon)
        y0 = collision_point(zeta, tau0)
        seed = np.array([y0[0], y0[1], 0.0, tau0, alpha0])

    def residual(w):
        return ns_residual(w[:2], w[2], w[3], w[4], epsilon, zeta)[0]

    def point_data(w):
        _, tr = ns_residual(w[:2], w[2], w[3], w[4], epsilon, zeta)
        return {"tau": w[3], "alpha": w[4], "t0": w[2], "trace": tr}

    def stop(point):
        tau = point.data["tau"]
        if not tau_span[0] <= tau <= tau_span[1]:
            return "tau-bounds"
        if abs(point.data["trace"]) >= 2.0:
            return "trace-guard"
        return None

    def run(sign: float) -> Branch:
        direction = np.zeros(5)
        direction[3] = sign
        leg = continue_branch(residual, seed, ds=ds, ds_max=ds_max,
                              max_points=max_points // 2, direction=direction,
                              fix_index=3, point_data=point_data, stop=stop)
        if leg.termination == "trace-guard" and leg.points:
            leg.points.pop()  # the guard violator is not an NS point
        return leg

    down, up = run(-1.0), run(1.0)
    branch = Branch(points=list(reversed(down.points[1:])) + up.points,
                    termination=up.termination, message=up.message)
    return branch


# ---------------------------------------------------------------------------
# Fourier representation of closed invariant curves


def _series_val(coeffs: np.ndarray, phi, zero_mean: bool = False, deriv: int = 0):
    """Evaluate a real trigonometric polynomial [a0, a1, b1, ...] at phi."""
    phi_arr = np.atleast_1d(np.asarray(phi, dtype=float))
    if zero_mean:
        a0, rest = 0.0, coeffs
    else:
        a0, rest = coeffs[0], coeffs[1:]
    n = rest.size // 2
    k = np.arange(1, n + 1)
    ka = phi_arr[:, None] * k
    A, B = rest[0::2], rest[1::2]
    if deriv == 0:
        out = a0 + np.cos(ka) @ A + np.sin(ka) @ B
    elif deriv == 1:
        out = -(np.sin(ka) * k) @ A + (np.cos(ka) * k) @ B
    elif deriv == 2:
        out = -(np.cos(ka) * k * k) @ A - (np.sin(ka) * k * k) @ B
    else:
        raise ValueError("deriv must be 0, 1 or 2")
    return out if np.ndim(phi) else float(out[0])


def _fit_series(samples: np.ndarray, zero_mean: bool = False) -> np.ndarray:
    """Exact trigonometric interpolation on the standard odd node set."""
    m = samples.size
    n = (m - 1) // 2
    spec = np.fft.fft(samples) / m
    coeffs = np.empty(2 * n + 1)
    coeffs[0] = spec[0].real
    coeffs[1::2] = 2.0 * spec[1:n + 1].real
    coeffs[2::2] = -2.0 * spec[1:n + 1].imag
    return coeffs[1:] if zero_mean else coeffs


@dataclass
class FourierCurve:
    """Closed curve y(phi) = y0 + r(phi)(cos phi, sin phi) with dynamics data.

    ``r_coeffs`` and ``t_coeffs`` are full trigonometric polynomials
    [a0, a1, b1, ...] for the radius and the crossing offset; the angle
    image is eta(phi) = phi + omega + p(phi) with ``p_coeffs`` zero-mean
    (no a0 entry).  ``y0``/``t0`` are the enclosed fixed point and its
    offset.
    """

    n_modes: int
    r_coeffs: np.ndarray
    t_coeffs: np.ndarray
    p_coeffs: np.ndarray
    omega: float
    y0: np.ndarray
    t0: float

    def __post_init__(self):
        n = self.n_modes
        if self.r_coeffs.size != 2 * n + 1 or self.t_coeffs.size != 2 * n + 1 \
                or self.p_coeffs.size != 2 * n:
            raise ValueError("coefficient vector sizes inconsistent with n_modes")

    # -- evaluation ---------------------------------------------------------

    def nodes(self) -> np.ndarray:
        m = 2 * self.n_modes + 1
        return 2.0 * math.pi * np.arange(m) / m

    def radius(self, phi, deriv: int = 0):
        return _series_val(self.r_coeffs, phi, deriv=deriv)

    def offset(self, phi, deriv: int = 0):
        """Crossing offset t(phi) along the curve."""
        return _series_val(self.t_coeffs, phi, deriv=deriv)

    def eta(self, phi):
        return np.asarray(phi, dtype=float) + self.omega \
            + _series_val(self.p_coeffs, phi, zero_mean=True)

    def eta_prime(self, phi):
        return 1.0 + _series_val(self.p_coeffs, phi, zero_mean=True, deriv=1)

    def point(self, phi) -> np.ndarray:
        phi_arr = np.atleast_1d(np.asarray(phi, dtype=float))
        r = _series_val(self.r_coeffs, phi_arr)
        pts = self.y0 + r[:, None] * np.stack([np.cos(phi_arr), np.sin(phi_arr)], axis=-1)
        return pts if np.ndim(phi) else pts[0]

    def mean_radius(self) -> float:
        return float(self.r_coeffs[0])

    # -- invariants ---------------------------------------------------------

    def check_parametrization(self):
        """Raise :class:`ParametrizationBreakdown` unless r > 0 and eta' > 0."""
        phi = self.nodes()
        if np.min(self.radius(phi)) <= 0.0:
            raise ParametrizationBreakdown("radius vanishes at a collocation node")
        if np.min(self.eta_prime(phi)) <= 0.0:
            raise ParametrizationBreakdown("angle image not strictly increasing")

    # -- packing ------------------------------------------------------------

    def pack(self) -> np.ndarray:
        return np.concatenate([self.r_coeffs, self.t_coeffs, self.p_coeffs,
                               [self.omega], self.y0, [self.t0]])

    @classmethod
    def unpack(cls, n_modes: int, z: np.ndarray) -> "FourierCurve":
        z = np.asarray(z, dtype=float)
        m = 2 * n_modes + 1
        if z.size != cls.dim(n_modes):
            raise ValueError("vector length does not match n_modes")
        r = z[:m]
        t = z[m:2 * m]
        p = z[2 * m:2 * m + 2 * n_modes]
        rest = z[2 * m + 2 * n_modes:]
        return cls(n_modes=n_modes, r_coeffs=r.copy(), t_coeffs=t.copy(),
                   p_coeffs=p.copy(), omega=float(rest[0]),
                   y0=rest[1:3].copy(), t0=float(rest[3]))

    @staticmethod
    def dim(n_modes: int) -> int:
        return 6 * n_modes + 6

    def resample(self, n_modes: int) -> "FourierCurve":
        """Re-interpolate on a different mode count (exact when growing)."""
        m = 2 * n_modes + 1
        phi = 2.0 * math.pi * np.arange(m) / m
        return FourierCurve(
            n_modes=n_modes,
            r_coeffs=_fit_series(self.radius(phi)),
            t_coeffs=_fit_series(self.offset(phi)),
            p_coeffs=_fit_series(self.eta(phi) - phi - self.omega, zero_mean=True),
            omega=self.omega,
            y0=self.y0.copy(),
            t0=self.t0,
        )


def invariant_curve_residual(curve: FourierCurve, tau: float, alpha: float,
                             epsilon: float, zeta: float) -> np.ndarray:
    """Collocation residual of the invariance equation plus the center pin.

    At each node: the curve point advanced for tau + t(phi) under input +1
    must land on the curve at angle eta(phi) with opposite sign, and the
    same point advanced for t(phi) under input -1 must sit on the
    threshold line.  The final three components pin (y0, t0) to the
    branch-minus fixed point.

    No parametrization check happens here: the residual must stay smooth
    for intermediate Newton iterates, which may transiently cross r = 0.
    Accepted solutions are validated by the callers.
    """

    flow = AffineOscillatorFlow(zeta)
    c = np.array([math.cos(alpha), math.sin(alpha)])
    phi = curve.nodes()
    pts = curve.point(phi)
    t_phi = curve.offset(phi)
    eta = curve.eta(phi)
    r_eta = _series_val(curve.r_coeffs, eta)
    img = curve.y0 + r_eta[:, None] * np.stack([np.cos(eta), np.sin(eta)], axis=-1)
    fwd = flow.apply_batch(pts, +1, tau + t_phi)
    on_line = epsilon - flow.apply_batch(pts, -1, t_phi) @ c
    fp = fixed_point_residual(curve.y0, curve.t0, tau, alpha, epsilon, zeta)
    return np.concatenate([(img + fwd).ravel(), on_line, fp])


def collision_closure(curve: FourierCurve, phi_star: float,
                      require_max: bool = False) -> np.ndarray:
    """Residual (t(phi*), t'(phi*)) of the grazing condition max t = 0.

    The maximizer is carried as the explicit unknown phi*, which turns the
    max condition into two smooth equations.  With ``require_max`` the
    second-order condition is enforced and :class:`NotAMaximum` raised when
    t''(phi*) >= 0.
    """

    if require_max and curve.offset(phi_star, deriv=2) >= 0.0:
        raise NotAMaximum(f"offset stationary point at phi={phi_star:.4g} is not a maximum")
    return np.array([curve.offset(phi_star), curve.offset(phi_star, deriv=1)])


# ---------------------------------------------------------------------------
# colliding-curve family: seeding, square solve, continuation


def _family_residual(w: np.ndarray, n_modes: int, epsilon: float, zeta: float) -> np.ndarray:
    """Stacked residual for unknowns [curve, phi*, tau, alpha]."""
    nz = FourierCurve.dim(n_modes)
    curve = FourierCurve.unpack(n_modes, w[:nz])
    phi_star, tau, alpha = w[nz], w[nz + 1], w[nz + 2]
    return np.concatenate([
        invariant_curve_residual(curve, tau, alpha, epsilon, zeta),
        collision_closure(curve, phi_star),
    ])


def _wrap_angle(x):
    return np.mod(np.asarray(x, dtype=float) + math.pi, 2.0 * math.pi) - math.pi


def _fit_scattered(phis: np.ndarray, values: np.ndarray, n_modes: int,
                   fit_modes: int = 12) -> np.ndarray:
    """Least-squares Fourier fit on scattered angles, zero-padded to n_modes."""
    k = min(fit_modes, n_modes, (phis.size - 1) // 2)
    cols = [np.ones_like(phis)]
    for j in range(1, k + 1):
        cols.append(np.cos(j * phis))
        cols.append(np.sin(j * phis))
    coef, *_ = np.linalg.lstsq(np.stack(cols, axis=-1), values, rcond=None)
    out = np.zeros(2 * n_modes + 1)
    out[:coef.size] = coef
    return out


def _ns_alpha_at(zeta: float, epsilon: float, tau: float, hint: float,
                 halfwidth: float = 0.08, n_scan: int = 33) -> float:
    """Switching angle on the fixed-point NS locus at the given delay."""

    def val(alpha: float) -> float:
        y0, _ = solve_fixed_point(zeta, tau, alpha, epsilon)
        return float(np.linalg.det(_minus_jacobian(y0, tau, alpha, epsilon, zeta))) - 1.0

    grid = np.linspace(hint - halfwidth, hint + halfwidth, n_scan)
    vals = np.full(n_scan, np.nan)
    for i, a in enumerate(grid):
        try:
            vals[i] = val(float(a))
        except RelayDynError:
            continue
    ok = np.isfinite(vals[:-1]) & np.isfinite(vals[1:]) & (vals[:-1] * vals[1:] < 0)
    hits = np.flatnonzero(ok)
    if hits.size == 0:
        raise NoConvergence(f"no NS crossing within {halfwidth} of alpha={hint:.4g}")
    i = hits[np.argmin(np.abs(0.5 * (grid[hits] + grid[hits + 1]) - hint))]
    return float(brentq(val, grid[i], grid[i + 1], xtol=1e-13))


def seed_colliding_curve(zeta: float, epsilon: float, nsc: tuple[float, float],
                         dtau: float = 1e-3, n_modes: int = 32) -> np.ndarray:
    """Initial guess [curve, phi*, tau, alpha] for the grazing curve near onset.

    At tau = tau_nsc + dtau the switching angle is first moved onto the NS
    locus, where DF_minus at the fixed point has unit-modulus eigenvalues.
    The invariant ellipse of that linearization, scaled so it touches the
    threshold line, seeds the radius series; the rotation and angle
    distortion come from the linear map's action on the ellipse, and the
    offset series from actual crossing-time solves around it.  The ellipse
    is accurate to second order in the amplitude, which keeps Newton well
    inside the genuine-curve basin (the degenerate zero-radius solution of
    the system always exists alongside the family).
    """

    tau_nsc = nsc[0]
    tau_s = tau_nsc + dtau
    alpha_s = _ns_alpha_at(zeta, epsilon, tau_s, hint=nsc[1])
    y0, t0 = solve_fixed_point(zeta, tau_s, alpha_s, epsilon)
    J = _minus_jacobian(y0, tau_s, alpha_s, epsilon, zeta)
    lam, vec = np.linalg.eig(J)
    v = vec[:, int(np.argmax(lam.imag))]
    a, b = 2.0 * v.real, -2.0 * v.imag

    c = np.array([math.cos(alpha_s), math.sin(alpha_s)])
    h0 = float(c @ y0)
    swing = math.hypot(float(c @ a), float(c @ b))
    rho = (epsilon - h0) / swing          # line-touching amplitude

    s = np.linspace(0.0, 2.0 * math.pi, 1024, endpoint=False)
    ell = rho * (np.outer(np.cos(s), a) + np.outer(np.sin(s), b))
    r_coeffs = _fit_scattered(np.arctan2(ell[:, 1], ell[:, 0]),
                              np.hypot(ell[:, 0], ell[:, 1]), n_modes)

    m = 2 * n_modes + 1
    phi = 2.0 * math.pi * np.arange(m) / m
    rel = _series_val(r_coeffs, phi)[:, None] * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    pts = y0 + rel
    img = rel @ J.T
    d = _wrap_angle(np.arctan2(img[:, 1], img[:, 0]) - phi)
    omega0 = float(d.mean())

    ctx = oscillator_context(zeta, alpha_s, tau_s, epsilon, y_ref=y0)
    t_samples = np.array([crossing_time(ctx, p, -1) for p in pts])
    phi_star = float(phi[int(np.argmax(t_samples))])

    curve = FourierCurve(n_modes=n_modes, r_coeffs=r_coeffs,
                         t_coeffs=_fit_series(t_samples),
                         p_coeffs=_fit_series(_wrap_angle(d - omega0), zero_mean=True),
                         omega=omega0, y0=np.asarray(y0, float), t0=t0)
    return np.concatenate([curve.pack(), [phi_star, tau_s, alpha_s]])


def solve_colliding_curve(w_guess: np.ndarray, n_modes: int, epsilon: float,
                          zeta: float, tol: float = 1e-10) -> np.ndarray:
    """Square Newton solve of the grazing-curve system at frozen tau."""
    nz = FourierCurve.dim(n_modes)
    tau = float(w_guess[nz + 1])
    v0 = np.delete(w_guess, nz + 1)

    def fn(v):
        w = np.insert(v, nz + 1, tau)
        return _family_residual(w, n_modes, epsilon, zeta)

    v = newton(fn, v0, tol=tol)
    w = np.insert(v, nz + 1, tau)
    FourierCurve.unpack(n_modes, w[:nz]).check_parametrization()
    return w


def continue_colliding_family(zeta: float, epsilon: float, *, n_modes: int = 32,
                              dtau_seed: float = 1e-3, nsc: tuple[float, float] | None = None,
                              tau_stop: float | None = None,
                              ds: float = 2e-3, ds_min: float = 1e-9,
                              ds_max: float = 2.5e-2, max_points: int = 400,
                              breakup_tol: float = 1e-2) -> Branch:
    """Continue the family of threshold-grazing invariant curves in (tau, alpha).

    Seeds just past the on-surface NS point and steps by pseudo-arclength
    in the direction of growing tau.  Every accepted point records the
    curve, its mean radius and the spectral error estimate; the run ends
    with termination ``BreakupDetected`` once that estimate exceeds
    ``breakup_tol``, with ``NotAMaximum`` if the grazing point stops being
    a maximum, or at ``tau_stop``.
    """

    if nsc is None:
        nsc = find_nsc(zeta, epsilon)
    w_guess = seed_colliding_curve(zeta, epsilon, nsc, dtau=dtau_seed, n_modes=n_modes)
    try:
        w0 = solve_colliding_curve(w_guess, n_modes, epsilon, zeta)
    except RelayDynError as exc:
        raise InitialPointFailed(f"grazing-curve seed failed: {exc}") from exc

    nz = FourierCurve.dim(n_modes)

    def residual(w):
        return _family_residual(w, n_modes, epsilon, zeta)

    def point_data(w):
        curve = FourierCurve.unpack(n_modes, w[:nz])
        err = fourier_error_estimate(curve, params=(w[nz + 1], w[nz + 2], epsilon, zeta))
        return {
            "curve": curve,
            "phi_star": float(w[nz]),
            "tau": float(w[nz + 1]),
            "alpha": float(w[nz + 2]),
            "radius": curve.mean_radius(),
            "omega": curve.omega,
            "t0": curve.t0,
            "error": err,
        }

    def stop(point):
        if point.data["error"] > breakup_tol:
            raise BreakupDetected(
                f"error estimate {point.data['error']:.3e} beyond {breakup_tol:.1e} "
                f"at tau={point.data['tau']:.6g}")
        curve = point.data["curve"]
        curve.check_parametrization()
        collision_closure(curve, point.data["phi_star"], require_max=True)
        if tau_stop is not None and point.data["tau"] >= tau_stop:
            return "tau-stop"
        return None

    direction = np.zeros(w0.size)
    direction[nz + 1] = 1.0
    return continue_branch(residual, w0, ds=ds, ds_min=ds_min, ds_max=ds_max,
                           max_points=max_points, direction=direction,
                           fix_index=nz + 1, point_data=point_data, stop=stop)


# ---------------------------------------------------------------------------
# error estimate and geometric invariance


def _mode_energies(coeffs: np.ndarray, zero_mean: bool = False) -> np.ndarray:
    rest = coeffs if zero_mean else coeffs[1:]
    e = rest[0::2] ** 2 + rest[1::2] ** 2
    if not zero_mean:
        e = np.concatenate([[coeffs[0] ** 2], e])
    else:
        e = np.concatenate([[0.0], e])
    return e


def fourier_error_estimate(curve: FourierCurve,
                           params: tuple[float, float, float, float] | None = None) -> float:
    """Spectral health of a curve: tail-energy fraction, optionally residual.

    The tail fraction is the energy in the top quartile of modes of the
    three series (radius, angle part, offset) over their total energy.
    When (tau, alpha, eps, zeta) is supplied the invariance residual is
    also evaluated midway between collocation nodes and the larger of the
    two measures returned.
    """

    n = curve.n_modes
    energies = (_mode_energies(curve.r_coeffs)
                + _mode_energies(curve.p_coeffs, zero_mean=True)
                + _mode_energies(curve.t_coeffs))
    total = float(energies.sum())
    if total == 0.0:
        return 0.0
    k_cut = n - max(1, n // 4)
    tail = float(energies[k_cut + 1:].sum()) / total

    if params is None:
        return tail
    tau, alpha, epsilon, zeta = params
    flow = AffineOscillatorFlow(zeta)
    c = np.array([math.cos(alpha), math.sin(alpha)])
    m = 2 * n + 1
    phi = 2.0 * math.pi * (np.arange(m) + 0.5) / m
    pts = curve.point(phi)
    t_phi = curve.offset(phi)
    eta = curve.eta(phi)
    r_eta = _series_val(curve.r_coeffs, eta)
    img = curve.y0 + r_eta[:, None] * np.stack([np.cos(eta), np.sin(eta)], axis=-1)
    fwd = flow.apply_batch(pts, +1, tau + t_phi)
    res = max(float(np.max(np.abs(img + fwd))),
              float(np.max(np.abs(epsilon - flow.apply_batch(pts, -1, t_phi) @ c))))
    return max(tail, res)


def curve_radial_mismatch(curve: FourierCurve, pts: np.ndarray) -> np.ndarray:
    """Distance of points from the curve, measured radially about y0."""
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    rel = pts - curve.y0
    ang = np.arctan2(rel[:, 1], rel[:, 0])
    return np.abs(np.hypot(rel[:, 0], rel[:, 1]) - curve.radius(ang))
