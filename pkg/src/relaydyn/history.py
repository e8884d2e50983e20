"""State histories and evolved trajectories.

The phase space of a delayed relay system pairs a continuous history segment
(the last `horizon` time units of the state path, with horizon at least the
delay) with the current relay output.  Two history representations:

* :class:`BreakpointHistory` - an anchor value plus relay switch times and
  the input label active on each subinterval.  Evaluation composes the flow
  backend from the anchor, so it is exact whenever the backend is.
* :class:`SampledHistory` - values on a uniform grid with cubic
  interpolation, for histories that are not flow trajectories (measured
  data, random initial conditions) or for the generic backend.

Both evaluate at any s in [-horizon, 0] and report a path derivative, which
is what the event engine needs to assess crossing transversality.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

__all__ = [
    "BreakpointHistory",
    "SampledHistory",
    "HybridState",
    "CrossingRecord",
    "SwitchRecord",
    "Trajectory",
]

_EDGE_TOL = 1e-9


class BreakpointHistory:
    """Exact history: anchor value at -horizon plus switch times and labels.

    Parameters
    ----------
    flow : backend with ``apply``/``apply_path``/``velocity``.
    horizon : positive window length.
    anchor : state at s = -horizon.
    times : strictly increasing switch times inside (-horizon, 0].
    labels : input label on each subinterval; ``len(times) + 1`` entries,
        ``labels[i]`` active on ``[times[i-1], times[i])`` (right-continuous
        in the label).
    """

    def __init__(self, flow, horizon: float, anchor, times: Sequence[float] = (),
                 labels: Sequence[int] = (-1,)):
        self.flow = flow
        self.horizon = float(horizon)
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        self.times = [float(t) for t in times]
        self.labels = [int(u) for u in labels]
        if len(self.labels) != len(self.times) + 1:
            raise ValueError("need one label per subinterval")
        if any(u not in (-1, 1) for u in self.labels):
            raise ValueError("labels must be +1 or -1")
        lo = -self.horizon
        for t in self.times:
            if not (lo < t <= 0.0):
                raise ValueError("switch times must be increasing inside (-horizon, 0]")
            lo = t
        # propagate the anchor across the breakpoints once
        self._starts = [np.asarray(anchor, dtype=float)]
        self._start_times = [-self.horizon] + self.times
        for i, t in enumerate(self.times):
            y = self.flow.apply(self._starts[i], self.labels[i], t - self._start_times[i])
            self._starts.append(y)

    @property
    def dim(self) -> int:
        return self._starts[0].shape[0]

    def _segment(self, s: float) -> int:
        return bisect.bisect_right(self.times, s)

    def _check(self, s: float) -> float:
        if s < -self.horizon - _EDGE_TOL or s > _EDGE_TOL:
            raise ValueError(f"history evaluated at {s} outside [{-self.horizon}, 0]")
        return min(max(s, -self.horizon), 0.0)

    def __call__(self, s):
        if np.ndim(s) > 0:
            return np.stack([self(float(si)) for si in np.asarray(s).ravel()])
        s = self._check(float(s))
        i = self._segment(s)
        return self.flow.apply(self._starts[i], self.labels[i], s - self._start_times[i])

    def derivative(self, s: float) -> np.ndarray:
        """Path velocity; uses the label right-continuous at s."""
        s = self._check(float(s))
        return self.flow.velocity(self(s), self.label_at(s))

    def label_at(self, s: float) -> int:
        return self.labels[self._segment(self._check(float(s)))]

    def head(self) -> np.ndarray:
        return self(0.0)

    def pieces(self, lo: float) -> list[tuple[float, float]]:
        """Smooth subintervals covering [lo, 0]."""
        cuts = [lo] + [t for t in self.times if lo < t < 0.0] + [0.0]
        return list(zip(cuts[:-1], cuts[1:]))


class SampledHistory:
    """History on a uniform grid over [-horizon, 0] with cubic interpolation."""

    def __init__(self, horizon: float, values):
        self.horizon = float(horizon)
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 4:
            raise ValueError("need at least 4 samples, shape (m, dim)")
        self.values = values
        self.grid = np.linspace(-self.horizon, 0.0, values.shape[0])
        self._spline = CubicSpline(self.grid, values, axis=0)
        self._dspline = self._spline.derivative()

    @classmethod
    def constant(cls, y0, horizon: float, n: int = 9) -> "SampledHistory":
        y0 = np.asarray(y0, dtype=float)
        return cls(horizon, np.tile(y0, (n, 1)))

    @classmethod
    def from_function(cls, fn: Callable[[float], np.ndarray], horizon: float,
                      n: int = 129) -> "SampledHistory":
        grid = np.linspace(-horizon, 0.0, n)
        return cls(horizon, np.stack([np.asarray(fn(s), dtype=float) for s in grid]))

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    def _check(self, s: float) -> float:
        if s < -self.horizon - _EDGE_TOL or s > _EDGE_TOL:
            raise ValueError(f"history evaluated at {s} outside [{-self.horizon}, 0]")
        return min(max(s, -self.horizon), 0.0)

    def __call__(self, s):
        if np.ndim(s) > 0:
            return self._spline(np.clip(np.asarray(s, dtype=float), -self.horizon, 0.0))
        return self._spline(self._check(float(s)))

    def derivative(self, s: float) -> np.ndarray:
        return self._dspline(self._check(float(s)))

    def head(self) -> np.ndarray:
        return self(0.0)

    def pieces(self, lo: float) -> list[tuple[float, float]]:
        return [(lo, 0.0)]


@dataclass(frozen=True)
class HybridState:
    """A point of the hybrid phase space: history segment plus relay output."""

    history: BreakpointHistory | SampledHistory
    u: int

    def __post_init__(self):
        if self.u not in (-1, 1):
            raise ValueError("relay output must be +1 or -1")


@dataclass(frozen=True)
class CrossingRecord:
    """The switching signal reached a threshold line and armed a switch."""

    time: float
    level: float          # +eps or -eps
    direction: int        # sign of d/dt h(y) at the crossing
    slope: float
    switch_time: float    # time + delay

    @property
    def in_history(self) -> bool:
        return self.time <= 0.0


@dataclass(frozen=True)
class SwitchRecord:
    """The relay output changed value (always a crossing's delayed echo)."""

    time: float
    new_u: int
    crossing_time: float


@dataclass
class Segment:
    """One constant-input piece of the headpoint path."""

    t0: float
    y0: np.ndarray
    u: int
    dense: object = None   # generic backend keeps the solver interpolant


class Trajectory:
    """Headpoint path of one evolution together with its event log.

    Supports evaluation on [-horizon, T]: non-positive times delegate to the
    initial history, positive times are reconstructed from the recorded
    constant-input segments (exactly, for a closed-form backend).
    """

    def __init__(self, flow, initial_history, segments: list[Segment],
                 crossings: list[CrossingRecord], switches: list[SwitchRecord],
                 T: float):
        self.flow = flow
        self.initial_history = initial_history
        self.segments = segments
        self.crossings = crossings
        self.switches = switches
        self.T = float(T)
        self._seg_times = [s.t0 for s in segments]

    # -- evaluation --------------------------------------------------------

    def __call__(self, t):
        if np.ndim(t) > 0:
            return np.stack([self(float(ti)) for ti in np.asarray(t).ravel()])
        t = float(t)
        if t <= 0.0:
            return self.initial_history(t)
        if t > self.T + _EDGE_TOL:
            raise ValueError(f"trajectory evaluated at {t} beyond T={self.T}")
        t = min(t, self.T)
        i = bisect.bisect_right(self._seg_times, t) - 1
        seg = self.segments[i]
        if seg.dense is not None:
            return seg.dense.sol(t - seg.t0)
        return self.flow.apply(seg.y0, seg.u, t - seg.t0)

    def u_at(self, t: float) -> int:
        """Relay output at time t (right-continuous)."""
        t = float(t)
        i = bisect.bisect_right(self._seg_times, t) - 1
        return self.segments[max(i, 0)].u

    def head(self) -> np.ndarray:
        return self(self.T)

    # -- event views ---------------------------------------------------------

    def crossing_times(self, include_history: bool = False) -> np.ndarray:
        ts = [c.time for c in self.crossings if include_history or c.time > 0.0]
        return np.asarray(ts, dtype=float)

    def switch_times(self) -> np.ndarray:
        return np.asarray([s.time for s in self.switches], dtype=float)

    def switch_points(self) -> np.ndarray:
        """Headpoint locations at the switch times, one row per switch."""
        if not self.switches:
            return np.empty((0, self.initial_history.dim))
        return np.stack([self(s.time) for s in self.switches])

    # -- tail extraction -----------------------------------------------------

    def tail_history(self, horizon: float):
        """History segment covering [T - horizon, T], shifted so the head is 0."""
        lo = self.T - horizon
        if lo < -self.initial_history.horizon - _EDGE_TOL:
            raise ValueError("requested horizon reaches beyond the recorded past")
        exact = all(s.dense is None for s in self.segments) and (
            lo >= 0.0 or isinstance(self.initial_history, BreakpointHistory))
        if exact:
            times, labels = self._tail_events(lo)
            return BreakpointHistory(self.flow, horizon, self(lo), times, labels)
        n = max(129, getattr(self.initial_history, "values", np.empty((129, 0))).shape[0])
        grid = np.linspace(lo, self.T, n)
        return SampledHistory(horizon, np.stack([self(t) for t in grid]))

    def _tail_events(self, lo: float) -> tuple[list[float], list[int]]:
        """Label-change times in (lo, T] shifted by -T, plus per-interval labels."""
        # (time, label) pairs, label active from that time onward
        pairs: list[tuple[float, int]] = []
        if lo < 0.0:
            hist = self.initial_history
            pairs.append((lo, hist.label_at(lo)))
            for t, u in zip([-hist.horizon] + hist.times, hist.labels):
                if lo < t <= 0.0:
                    pairs.append((t, u))
        for seg in self.segments:
            if seg.t0 >= lo:
                pairs.append((seg.t0, seg.u))
        if not pairs or pairs[0][0] > lo:
            pairs.insert(0, (lo, self.u_at(lo)))
        cleaned = [pairs[0]]
        for t, u in pairs[1:]:
            if u != cleaned[-1][1] and t > lo:
                cleaned.append((t, u))
        times = [t - self.T for t, _ in cleaned[1:]]
        labels = [u for _, u in cleaned]
        return times, labels
