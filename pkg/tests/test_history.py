"""History containers: exact breakpoint form, sampled form, hybrid state."""

import numpy as np
import pytest

from relaydyn.flows import AffineOscillatorFlow
from relaydyn.history import BreakpointHistory, HybridState, SampledHistory


@pytest.fixture
def flow():
    return AffineOscillatorFlow(-0.1)


def test_breakpoint_history_composes_flow(flow):
    anchor = np.array([0.4, -0.2])
    hist = BreakpointHistory(flow, 5.0, anchor, times=[-3.0, -1.0],
                             labels=[1, -1, 1])
    np.testing.assert_allclose(hist(-5.0), anchor, atol=1e-14)
    # manual composition: +1 for 2 units, -1 for 2 units, +1 afterwards
    y1 = flow.apply(anchor, 1, 2.0)
    y2 = flow.apply(y1, -1, 2.0)
    np.testing.assert_allclose(hist(-3.0), y1, atol=1e-13)
    np.testing.assert_allclose(hist(-1.0), y2, atol=1e-13)
    np.testing.assert_allclose(hist(-2.0), flow.apply(y1, -1, 1.0), atol=1e-13)
    np.testing.assert_allclose(hist(0.0), flow.apply(y2, 1, 1.0), atol=1e-13)
    np.testing.assert_allclose(hist.head(), hist(0.0))


def test_breakpoint_history_labels_right_continuous(flow):
    hist = BreakpointHistory(flow, 4.0, [1.0, 0.0], times=[-2.0],
                             labels=[-1, 1])
    assert hist.label_at(-2.0) == 1
    assert hist.label_at(-2.0 - 1e-12) == -1
    assert hist.label_at(0.0) == 1
    # derivative uses the active label
    np.testing.assert_allclose(hist.derivative(-2.0),
                               flow.velocity(hist(-2.0), 1), atol=1e-13)


def test_breakpoint_history_pieces(flow):
    hist = BreakpointHistory(flow, 4.0, [1.0, 0.0], times=[-3.0, -1.0],
                             labels=[1, -1, 1])
    assert hist.pieces(-2.0) == [(-2.0, -1.0), (-1.0, 0.0)]
    assert hist.pieces(-4.0) == [(-4.0, -3.0), (-3.0, -1.0), (-1.0, 0.0)]


def test_breakpoint_history_validation(flow):
    with pytest.raises(ValueError):
        BreakpointHistory(flow, -1.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        BreakpointHistory(flow, 2.0, [0.0, 0.0], times=[-1.0], labels=[1])
    with pytest.raises(ValueError):
        BreakpointHistory(flow, 2.0, [0.0, 0.0], times=[-3.0], labels=[1, -1])
    with pytest.raises(ValueError):
        BreakpointHistory(flow, 2.0, [0.0, 0.0], times=[-1.0], labels=[1, 2])
    hist = BreakpointHistory(flow, 2.0, [0.0, 0.0])
    with pytest.raises(ValueError):
        hist(0.5)
    with pytest.raises(ValueError):
        hist(-2.5)


def test_sampled_history_constant():
    hist = SampledHistory.constant([0.3, -0.7], 4.2)
    for s in (-4.2, -1.0, 0.0):
        np.testing.assert_allclose(hist(s), [0.3, -0.7], atol=1e-14)
        np.testing.assert_allclose(hist.derivative(s), 0.0, atol=1e-12)
    assert hist.dim == 2


def test_sampled_history_interpolates_smooth_function():
    def fn(s):
        return np.array([np.sin(s), np.cos(s)])

    hist = SampledHistory.from_function(fn, 5.0, n=129)
    ss = np.linspace(-5.0, 0.0, 257)
    err = max(float(np.max(np.abs(hist(s) - fn(s)))) for s in ss)
    assert err < 1e-6
    derr = max(float(np.max(np.abs(hist.derivative(s)
                                   - np.array([np.cos(s), -np.sin(s)]))))
               for s in ss)
    assert derr < 1e-4


def test_sampled_history_needs_enough_samples():
    with pytest.raises(ValueError):
        SampledHistory(1.0, np.zeros((3, 2)))


def test_hybrid_state_validates_relay_output():
    hist = SampledHistory.constant([0.0, 0.0], 1.0)
    HybridState(hist, 1)
    HybridState(hist, -1)
    with pytest.raises(ValueError):
        HybridState(hist, 0)
