"""RR assembly, artifact correction, and 5-minute epoch segmentation."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neohrv.epochs import (EPOCH_S, RrSeries, build_rr, correct_artifacts,
                           segment_epochs)
from neohrv.errors import ValidationError
from neohrv.qrs import RPeakSeries


def _peaks(times):
    times = np.asarray(times, dtype=float)
    return RPeakSeries(peak_times=times,
                       peak_indices=np.round(times * 256).astype(int),
                       detection_quality=1.0)


def _series(rr):
    rr = np.asarray(rr, dtype=float)
    return RrSeries(rr_s=rr, beat_times=np.concatenate(([0.0], np.cumsum(rr))),
                    corrected_mask=np.zeros(len(rr), dtype=bool))


def test_build_rr_simple():
    rr = build_rr(_peaks([0.0, 0.4, 0.8]))
    assert np.allclose(rr.rr_s, [0.4, 0.4])


def test_build_rr_uniform_train():
    rr = build_rr(_peaks(0.5 * np.arange(301)))
    assert len(rr.rr_s) == 300
    assert np.allclose(rr.rr_s, 0.5)


def test_build_rr_rejects_non_monotone():
    with pytest.raises(ValidationError, match="strictly increasing"):
        build_rr(_peaks([0.0, 0.5, 0.4]))


def test_single_outlier_replaced():
    out = correct_artifacts(_series([0.40, 0.40, 1.60, 0.40, 0.40]))
    assert np.allclose(out.rr_s, 0.40)
    assert list(out.corrected_mask) == [False, False, True, False, False]
    assert not out.uncorrectable_mask.any()


def test_clean_series_untouched():
    vals = [0.45, 0.46, 0.44, 0.45, 0.47, 0.45]
    out = correct_artifacts(_series(vals))
    assert np.array_equal(out.rr_s, np.asarray(vals))
    assert not out.corrected_mask.any()


def test_long_bad_run_uncorrectable():
    vals = [0.45] * 10 + [1.6] * 10 + [0.45] * 10
    out = correct_artifacts(_series(vals))
    assert out.uncorrectable_mask[10:20].all()
    assert not out.corrected_mask.any()
    assert np.array_equal(out.rr_s, np.asarray(vals))  # values left in place


def test_deviation_rule_catches_in_bounds_outlier():
    # 0.62 is inside [0.2, 0.75] but deviates > 30% from its neighbours
    vals = [0.45, 0.45, 0.62, 0.45, 0.45]
    out = correct_artifacts(_series(vals))
    assert out.corrected_mask[2]
    assert abs(out.rr_s[2] - 0.45) < 1e-12


@given(st.lists(st.floats(min_value=0.25, max_value=0.7), min_size=10, max_size=80),
       st.data())
@settings(max_examples=60, deadline=None)
def test_correction_is_idempotent(vals, data):
    # plant up to two spikes anywhere
    n_spikes = data.draw(st.integers(min_value=0, max_value=2))
    for _ in range(n_spikes):
        i = data.draw(st.integers(min_value=0, max_value=len(vals) - 1))
        vals[i] = data.draw(st.floats(min_value=0.05, max_value=1.9))
    once = correct_artifacts(_series(vals))
    twice = correct_artifacts(once)
    assert np.array_equal(once.rr_s, twice.rr_s)
    assert np.array_equal(once.corrected_mask, twice.corrected_mask)
    assert np.array_equal(once.uncorrectable_mask, twice.uncorrectable_mask)


def test_segmentation_clean_train():
    rr = _series(np.full(1800, 0.5))  # 900 s of 0.5 s beats
    eps = segment_epochs(rr, 900.0)
    assert len(eps) == 3
    assert all(ep.valid for ep in eps)
    assert [len(ep.rr.rr_s) for ep in eps] == [600, 600, 600]
    for ep in eps:
        assert abs(np.mean(ep.nn) - 1.0) < 1e-12


def test_gap_invalidates_epoch():
    beats = np.concatenate([np.arange(0, 100, 0.5),
                            np.arange(105, 900.5, 0.5)])  # 5 s flatline
    rr = build_rr(_peaks(beats))
    eps = segment_epochs(rr, 900.0)
    assert not eps[0].valid and eps[0].rejection_reason == "gap"
    assert eps[1].valid and eps[2].valid


def test_excess_artifact_invalidates_epoch():
    rr = _series(np.full(600, 0.5))
    corrected = np.zeros(600, dtype=bool)
    corrected[:150] = True  # 25% corrected
    marked = RrSeries(rr_s=rr.rr_s, beat_times=rr.beat_times,
                      corrected_mask=corrected)
    eps = segment_epochs(marked, 300.0)
    assert len(eps) == 1
    assert not eps[0].valid
    assert eps[0].rejection_reason == "excess_artifact"


def test_too_few_beats_invalidates_epoch():
    rr = _series(np.full(620, 0.7))  # spans 434 s; epoch 1 nearly empty
    eps = segment_epochs(rr, 600.0)
    assert not eps[1].valid
    assert eps[1].rejection_reason in ("too_few_beats", "gap")


def test_below_one_epoch_returns_nothing():
    rr = _series(np.full(400, 0.5))
    assert segment_epochs(rr, 299.0) == []


def test_interval_belongs_to_epoch_of_ending_beat():
    # a beat exactly on the boundary closes the earlier epoch's last interval
    beats = np.arange(0.0, 600.5, 0.5)
    rr = build_rr(_peaks(beats))
    eps = segment_epochs(rr, 600.0)
    first, second = eps
    assert first.rr.beat_times[-1] == 300.0
    assert second.rr.beat_times[0] == 300.0
    assert len(first.rr.rr_s) + len(second.rr.rr_s) == len(rr.rr_s)
