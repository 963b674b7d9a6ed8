"""MAP arithmetic, episode detection, epoch tagging, subject inclusion."""

import numpy as np
import pytest

from neohrv.bp import (compute_map, detect_episodes, subject_inclusion,
                       tag_epochs)
from neohrv.model import BpChannel, Recording, EcgChannel
from neohrv.synth import SynthSpec, synth_cohort
from tests.conftest import make_epoch


def _bp(map_target, missing=()):
    """Constant-pulse-pressure BP whose MAP equals map_target elementwise."""
    m = np.asarray(map_target, dtype=float)
    dp = m - 5.0
    sp = dp + 15.0  # MAP = dp + 15/3 = dp + 5
    mask = np.zeros(len(m), dtype=bool)
    mask[list(missing)] = True
    return BpChannel(sp_mmhg=sp, dp_mmhg=dp, missing=mask)


def _map_series(map_target, missing=()):
    return compute_map(_bp(map_target, missing))


@pytest.mark.parametrize("sp,dp,expected", [(60, 30, 40), (35, 35, 35), (45, 24, 31)])
def test_map_formula(sp, dp, expected):
    bp = BpChannel(sp_mmhg=np.array([float(sp)]), dp_mmhg=np.array([float(dp)]),
                   missing=np.array([False]))
    assert compute_map(bp).map_mmhg[0] == pytest.approx(expected)


def test_ten_minute_dip_is_one_episode():
    ms = _map_series(np.full(600, 30.0))
    eps = detect_episodes(ms, ga_weeks=27)
    assert len(eps) == 1
    assert eps[0].threshold_mmhg == 31.0
    assert eps[0].duration_s == 600.0


def test_never_below_threshold_no_episode():
    ms = _map_series(np.full(600, 35.0))
    assert detect_episodes(ms, ga_weeks=27) == []


def test_four_minute_dip_rejected_five_minute_kept():
    m = np.full(1800, 40.0)
    m[100:340] = 28.0   # 240 s: too short
    m[900:1200] = 28.0  # 300 s: qualifies
    eps = detect_episodes(_map_series(m), ga_weeks=27)
    assert len(eps) == 1
    assert eps[0].t_start_s == 900.0 and eps[0].t_end_s == 1200.0


def test_missing_tolerance_inside_run():
    m = np.full(1000, 28.0)
    # 4% missing inside the run is absorbed; the run stays one episode
    missing = range(400, 440)
    eps = detect_episodes(_map_series(m, missing), ga_weeks=27)
    assert len(eps) == 1
    assert eps[0].duration_s == 1000.0


def test_excess_missing_splits_run():
    m = np.full(800, 28.0)
    missing = range(300, 500)  # 200 s gap: way over 10%
    eps = detect_episodes(_map_series(m, missing), ga_weeks=27)
    assert len(eps) == 2
    assert eps[0].t_end_s <= 300.0 and eps[1].t_start_s >= 500.0


def test_epoch_inside_episode_tagged_hypotensive(rng):
    ep = make_epoch(np.full(700, 0.42))
    ms = _map_series(np.full(400, 28.0))
    tag = tag_epochs([ep], ms, ga_weeks=27)[0][1]
    assert tag.hypotensive and not tag.bp_insufficient


def test_sample_at_threshold_is_normal():
    ep = make_epoch(np.full(700, 0.42))
    m = np.full(400, 28.0)
    m[150] = 31.0  # exactly GA + 4: strict inequality fails
    tag = tag_epochs([ep], _map_series(m), ga_weeks=27)[0][1]
    assert not tag.hypotensive and not tag.bp_insufficient


def test_low_coverage_flags_bp_insufficient():
    ep = make_epoch(np.full(700, 0.42))
    ms = _map_series(np.full(400, 28.0), missing=range(0, 200))
    tag = tag_epochs([ep], ms, ga_weeks=27)[0][1]
    assert tag.bp_insufficient and not tag.hypotensive


def _recording_with_dip(dip_s):
    m = np.full(3600, 40.0)
    if dip_s:
        m[1000:1000 + dip_s] = 28.0
    ecg = EcgChannel(fs_hz=256, samples=np.zeros(256 * 3600))
    return Recording(subject_id="r", ga_weeks=27, ecg=ecg, bp=_bp(m), outcome=0)


def test_inclusion_requires_qualifying_episode():
    assert subject_inclusion(_recording_with_dip(360))
    assert not subject_inclusion(_recording_with_dip(0))
    assert not subject_inclusion(_recording_with_dip(240))


def test_synthetic_cohort_inclusion_count():
    spec = SynthSpec(n_subjects=35, n_healthy=18, n_dippers=23,
                     duration_s=1800.0, dip_schedule=((1, 2),), seed=3)
    cohort, truths = synth_cohort(spec)
    included = [r.subject_id for r in cohort.recordings if subject_inclusion(r)]
    assert len(included) == 23
    dippers = {t["subject_id"] for t in truths if t["dips"]}
    assert set(included) == dippers
