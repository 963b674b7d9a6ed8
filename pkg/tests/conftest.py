"""Shared fixtures and small data builders for the test suite."""

import numpy as np
import pytest

from neohrv.epochs import RrSeries, build_rr, correct_artifacts, segment_epochs
from neohrv.epochs import Epoch, EPOCH_S
from neohrv.pipeline import build_feature_table
from neohrv.synth import SynthSpec, synth_cohort


def random_rr(rng, n=300, lo=0.35, hi=0.55):
    """A physiological random RR series with mild serial correlation."""
    steps = rng.normal(0.0, 0.01, size=n)
    rr = np.clip(0.5 * (lo + hi) + np.cumsum(steps) * 0.2
                 + rng.normal(0.0, 0.01, size=n), lo, hi)
    return rr


def make_epoch(rr, subject_id="t01", epoch_index=0):
    """Wrap a raw RR array into a valid Epoch starting at t = 0."""
    rr = np.asarray(rr, dtype=float)
    beats = np.concatenate(([0.0], np.cumsum(rr)))
    series = RrSeries(rr_s=rr, beat_times=beats,
                      corrected_mask=np.zeros(len(rr), dtype=bool))
    t0 = EPOCH_S * epoch_index
    return Epoch(subject_id, epoch_index, t0, t0 + EPOCH_S, series,
                 rr / float(np.mean(rr)), True, None)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_cohort():
    """Planted cohort small enough for module-level tests: 23 subjects,
    40 min each, two scheduled dips."""
    spec = SynthSpec(duration_s=2400.0, dip_schedule=((2, 2), (5, 2)), seed=0)
    cohort, truths = synth_cohort(spec)
    return spec, cohort, truths


@pytest.fixture(scope="session")
def small_feature_table(small_cohort):
    _, cohort, _ = small_cohort
    table, labels, episode_info = build_feature_table(cohort, resample_hz=4.0)
    return table, labels, episode_info
