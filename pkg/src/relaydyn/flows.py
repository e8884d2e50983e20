"""Flow backends for the two constant-input vector fields of a relay system.

A flow backend knows how to advance a state under either of the two frozen
inputs u = +1 / u = -1, evaluate the vector field itself, and report the
derivative of the time-t flow with respect to the initial state.  Two
implementations are provided:

* :class:`AffineOscillatorFlow` - the damped harmonic oscillator with
  constant forcing, advanced in closed form.  Valid for positive *and*
  negative times, which the return-map construction relies on.
* :class:`NumericalFlow` - an adaptive Runge-Kutta 5(4) wrapper for vector
  fields without a usable closed form.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .errors import IntegrationFailure

__all__ = ["AffineOscillatorFlow", "NumericalFlow"]


class AffineOscillatorFlow:
    """Closed-form flow of  x'' + 2*zeta*x' + (1+zeta^2)*x = (1+zeta^2)*u.

    The state is y = (x, x').  With u frozen at +1 or -1 the system is affine,
    y' = B y + u*b, and the flow is y(t) = A(t) y0 + u * v(t) with

        A(t) = exp(-zeta*t) * [[cos t + zeta*sin t,        sin t       ],
                               [-(1+zeta^2)*sin t,  cos t - zeta*sin t]],

        v(t) = exp(-zeta*t) * (-zeta*sin t - cos t + exp(zeta*t),
                               (1+zeta^2)*sin t).

    Both formulas hold for every real t; negative times run the flow
    backwards exactly.  The equilibria are (u, 0).  For zeta < 0 they are
    unstable foci, the regime where the relay feedback produces the
    self-sustained oscillations this package studies.
    """

    dim = 2

    def __init__(self, zeta: float):
        self.zeta = float(zeta)
        self._omsq = 1.0 + self.zeta * self.zeta

    # -- closed-form pieces ----------------------------------------------

    def flow_matrix(self, t: float) -> np.ndarray:
        """State-transition matrix A(t) of the homogeneous part."""
        z = self.zeta
        e = math.exp(-z * t)
        c = math.cos(t)
        s = math.sin(t)
        return np.array([
            [e * (c + z * s), e * s],
            [-e * self._omsq * s, e * (c - z * s)],
        ])

    def flow_offset(self, t: float) -> np.ndarray:
        """Forced response v(t), i.e. the flow of the origin under u = +1."""
        z = self.zeta
        e = math.exp(-z * t)
        c = math.cos(t)
        s = math.sin(t)
        return np.array([e * (-z * s - c) + 1.0, e * self._omsq * s])

    # -- backend interface -------------------------------------------------

    def apply(self, y, u: int, t: float) -> np.ndarray:
        """Advance y by time t (any sign) under frozen input u."""
        z = self.zeta
        e = math.exp(-z * t)
        c = math.cos(t)
        s = math.sin(t)
        a11 = e * (c + z * s)
        a12 = e * s
        a21 = -e * self._omsq * s
        a22 = e * (c - z * s)
        v1 = e * (-z * s - c) + 1.0
        v2 = e * self._omsq * s
        return np.array([
            a11 * y[0] + a12 * y[1] + u * v1,
            a21 * y[0] + a22 * y[1] + u * v2,
        ])

    def apply_path(self, y, u: int, ts) -> np.ndarray:
        """Vectorised :meth:`apply`: one row per entry of ts."""
        ts = np.asarray(ts, dtype=float)
        z = self.zeta
        e = np.exp(-z * ts)
        c = np.cos(ts)
        s = np.sin(ts)
        x = e * ((c + z * s) * y[0] + s * y[1]) + u * (e * (-z * s - c) + 1.0)
        xdot = e * (-self._omsq * s * y[0] + (c - z * s) * y[1]) + u * e * self._omsq * s
        return np.stack([x, xdot], axis=-1)

    def apply_batch(self, ys, u: int, ts) -> np.ndarray:
        """Row-paired :meth:`apply`: ys[i] advanced by ts[i]."""
        ys = np.asarray(ys, dtype=float)
        ts = np.asarray(ts, dtype=float)
        z = self.zeta
        e = np.exp(-z * ts)
        c = np.cos(ts)
        s = np.sin(ts)
        x = e * ((c + z * s) * ys[:, 0] + s * ys[:, 1]) + u * (e * (-z * s - c) + 1.0)
        xdot = e * (-self._omsq * s * ys[:, 0] + (c - z * s) * ys[:, 1]) \
            + u * e * self._omsq * s
        return np.stack([x, xdot], axis=-1)

    def velocity(self, y, u: int) -> np.ndarray:
        """Vector field f(y, u)."""
        return np.array([
            y[1],
            -2.0 * self.zeta * y[1] - self._omsq * (y[0] - u),
        ])

    def jacobian(self, y, u: int, t: float) -> np.ndarray:
        """d(flow)/d(initial state); state-independent for an affine system."""
        return self.flow_matrix(t)

    def equilibrium(self, u: int) -> np.ndarray:
        return np.array([float(u), 0.0])

    def lipschitz(self) -> float:
        """2-norm of the linear part; a Lipschitz constant of f in y."""
        B = np.array([[0.0, 1.0], [-self._omsq, -2.0 * self.zeta]])
        return float(np.linalg.norm(B, 2))

    def __repr__(self) -> str:  # pragma: no cover
        return f"AffineOscillatorFlow(zeta={self.zeta})"


class NumericalFlow:
    """Adaptive RK45 flow for a vector-field pair without closed form.

    Parameters
    ----------
    field : callable(y, u) -> array
        Right-hand side; u is +1 or -1.
    dim : state dimension.
    field_jacobian : optional callable(y, u) -> (dim, dim) array.
        Enables flow Jacobians through the variational equations.  Without
        it :meth:`jacobian` falls back to central differences.
    rtol, atol : solver tolerances (default 1e-10 / 1e-10).
    """

    def __init__(self, field: Callable, dim: int, field_jacobian: Callable | None = None,
                 rtol: float = 1e-10, atol: float = 1e-10):
        self.field = field
        self.dim = int(dim)
        self.field_jacobian = field_jacobian
        self.rtol = float(rtol)
        self.atol = float(atol)

    def _solve(self, y, u, t, dense=False):
        if t == 0.0:
            # solve_ivp rejects empty spans
            return None
        sol = solve_ivp(lambda s, yy: self.field(yy, u), (0.0, t), np.asarray(y, float),
                        method="RK45", rtol=self.rtol, atol=self.atol,
                        dense_output=dense)
        if not sol.success:
            raise IntegrationFailure(f"RK45 failed over span (0, {t}): {sol.message}")
        return sol

    def apply(self, y, u: int, t: float) -> np.ndarray:
        sol = self._solve(y, u, t)
        if sol is None:
            return np.asarray(y, float).copy()
        return sol.y[:, -1]

    def apply_dense(self, y, u: int, t: float):
        """Advance and return an interpolant over the span (used for recording)."""
        sol = self._solve(y, u, t, dense=True)
        return sol

    def apply_path(self, y, u: int, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float)
        if ts.size == 0:
            return np.empty((0, self.dim))
        out = np.empty((ts.size, self.dim))
        pos = ts > 0.0
        neg = ts < 0.0
        if pos.any():
            sol = self._solve(y, u, ts[pos].max(), dense=True)
            out[pos] = sol.sol(ts[pos]).T
        if neg.any():
            sol = self._solve(y, u, ts[neg].min(), dense=True)
            out[neg] = sol.sol(ts[neg]).T
        out[~(pos | neg)] = np.asarray(y, float)
        return out

    def velocity(self, y, u: int) -> np.ndarray:
        return np.asarray(self.field(y, u), dtype=float)

    def jacobian(self, y, u: int, t: float) -> np.ndarray:
        if self.field_jacobian is None:
            return self._jacobian_fd(y, u, t)
        n = self.dim

        def rhs(s, z):
            yy = z[:n]
            M = z[n:].reshape(n, n)
            J = self.field_jacobian(yy, u)
            return np.concatenate([self.field(yy, u), (J @ M).ravel()])

        z0 = np.concatenate([np.asarray(y, float), np.eye(n).ravel()])
        if t == 0.0:
            return np.eye(n)
        sol = solve_ivp(rhs, (0.0, t), z0, method="RK45", rtol=self.rtol, atol=self.atol)
        if not sol.success:
            raise IntegrationFailure(f"variational RK45 failed: {sol.message}")
        return sol.y[n:, -1].reshape(n, n)

    def _jacobian_fd(self, y, u, t, h: float = 1e-6) -> np.ndarray:
        y = np.asarray(y, float)
        cols = []
        for j in range(self.dim):
            dp = y.copy()
            dm = y.copy()
            dp[j] += h
            dm[j] -= h
            cols.append((self.apply(dp, u, t) - self.apply(dm, u, t)) / (2 * h))
        return np.stack(cols, axis=1)
