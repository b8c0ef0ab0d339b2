"""Detector, decay fit, taxonomy, and the pre-spike walk-back."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spikelab import (SpikeEvent, StageSegmentation, TaxonomyConfig,
                      classify_spike, detect_spikes_series, fit_decay,
                      pre_spike_index)
from spikelab.errors import ConfigError, InsufficientWindow, InvalidSeries

# === detection ==============================================================


def test_detector_finds_a_planted_spike():
    losses = [1.0, 1.0, 1.0, 10.0, 1.0, 1.0]
    events = detect_spikes_series(losses, rho=3.0, window=2)
    assert len(events) == 1
    e = events[0]
    assert (e.onset_step, e.peak_step, e.recovery_step) == (3, 3, 4)
    assert e.peak_ratio == pytest.approx(10.0)
    assert not e.recovery_at_end


def test_detector_flags_truncated_event():
    losses = [1.0, 1.0, 1.0, 10.0, 20.0]
    events = detect_spikes_series(losses, rho=3.0, window=2)
    assert len(events) == 1
    e = events[0]
    assert e.recovery_at_end
    assert e.recovery_step == 4 and e.peak_step == 4


def test_detector_quiet_series():
    assert detect_spikes_series(np.ones(100), rho=3.0, window=10) == []


def test_detector_validation():
    with pytest.raises(ConfigError):
        detect_spikes_series([1.0] * 10, rho=1.0, window=2)
    with pytest.raises(ConfigError):
        detect_spikes_series([1.0, 2.0], rho=3.0, window=5)


def test_event_ordering_enforced():
    with pytest.raises(ConfigError):
        SpikeEvent(onset_step=5, peak_step=4, recovery_step=6, peak_ratio=2.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(min_value=0.1, max_value=100.0), min_size=30,
                max_size=90))
def test_detector_invariants(losses):
    window = 5
    events = detect_spikes_series(losses, rho=3.0, window=window)
    n = len(losses)
    prev_end = -1
    arr = np.asarray(losses)
    for e in events:
        assert window <= e.onset_step <= e.peak_step <= e.recovery_step < n
        assert e.onset_step > prev_end
        prev_end = e.recovery_step
        # the peak is the max inside the event window
        seg = arr[e.onset_step:e.recovery_step + 1]
        assert arr[e.peak_step] == seg.max()
        # onset really exceeded its trailing baseline
        base = np.median(arr[e.onset_step - window:e.onset_step])
        assert arr[e.onset_step] > 3.0 * base


# === decay fit ==============================================================


def test_fit_recovers_sqrt_beta2():
    beta2 = 0.99
    v = beta2 ** np.arange(200)
    fit = fit_decay(v, (0, 200))
    assert fit.alpha_hat == pytest.approx(math.sqrt(beta2), rel=1e-9)
    assert fit.r_squared == pytest.approx(1.0)
    assert fit.window == (0, 200)


def test_fit_window_validation():
    v = 0.9 ** np.arange(100)
    with pytest.raises(InvalidSeries):
        fit_decay(v, (0, 5))
    with pytest.raises(InvalidSeries):
        fit_decay(np.zeros(100), (0, 50))


# === pre-spike walk-back ====================================================


def test_walkback_through_rising_run():
    losses = [5.0, 1.0, 2.0, 3.0, 9.0]
    assert pre_spike_index(losses, 4) == 1


def test_walkback_stops_at_flat_step():
    losses = [5.0, 1.0, 1.0, 3.0, 9.0]
    assert pre_spike_index(losses, 4) == 2


def test_walkback_clamps_at_zero():
    losses = [1.0, 2.0, 3.0, 4.0]
    assert pre_spike_index(losses, 1) == 0
    assert pre_spike_index(losses, 0) == 0


# === taxonomy ===============================================================


def _series(pre, spike, post, w=5):
    return np.concatenate([np.full(w, pre), np.full(3, spike), np.full(w, post)])


def _event(w=5):
    return SpikeEvent(onset_step=w, peak_step=w + 1, recovery_step=w + 2,
                      peak_ratio=10.0)


CFG = TaxonomyConfig(window=5)


def test_catastrophic_label():
    train = _series(1.0, 50.0, 40.0)
    test = _series(1.0, 50.0, 40.0)
    assert classify_spike(train, test, _event(), CFG).label == "catastrophic"


def test_malignant_label():
    train = _series(1.0, 50.0, 1.0)
    test = _series(1.0, 50.0, 5.0)
    assert classify_spike(train, test, _event(), CFG).label == "malignant"


def test_benign_label():
    train = _series(1.0, 50.0, 1.0)
    test = _series(2.0, 50.0, 1.5)
    out = classify_spike(train, test, _event(), CFG)
    assert out.label == "benign"
    assert out.evidence["pre_gap"]


def test_neutral_label():
    train = _series(1.0, 50.0, 1.0)
    test = _series(1.0, 50.0, 1.0)
    assert classify_spike(train, test, _event(), CFG).label == "neutral"


def test_taxonomy_needs_full_window():
    short = _series(1.0, 50.0, 1.0, w=2)
    with pytest.raises(InsufficientWindow):
        classify_spike(short, short,
                       SpikeEvent(onset_step=2, peak_step=3, recovery_step=4,
                                  peak_ratio=5.0), CFG)


# === segmentation helpers ===================================================


def test_stage_labels_extend_last_open_stage():
    seg = StageSegmentation(boundaries={"t0": 0, "t1": 2, "t2": 4, "t3": None,
                                        "t4": None, "t5": None})
    labels = seg.stage_labels(6)
    assert labels == ["1", "1", "2", "2", "3", "3"]
    assert seg.ordered()


def test_stage_labels_empty_when_t1_missing():
    seg = StageSegmentation(boundaries={"t0": 0, "t1": None, "t2": None,
                                        "t3": None, "t4": None, "t5": None})
    assert seg.stage_labels(4) == ["1", "1", "1", "1"]


def test_ordered_rejects_regression():
    seg = StageSegmentation(boundaries={"t0": 0, "t1": 5, "t2": 3, "t3": None,
                                        "t4": None, "t5": None})
    assert not seg.ordered()
