"""MAP computation, hypotensive-episode detection, and epoch tagging.

Hypotension threshold is strict: MAP < GA + margin (default margin 4 mmHg),
with GA in completed weeks. An episode is a maximal run of below-threshold
1 Hz samples lasting at least 5 minutes, tolerating up to 10% missing samples
inside the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .epochs import Epoch
from .model import BpChannel, Recording

DEFAULT_MARGIN = 4.0
MIN_EPISODE_S = 300.0
MAX_MISSING_IN_RUN = 0.10
MIN_EPOCH_BP_COVERAGE = 0.90


@dataclass(frozen=True)
class MapSeries:
    map_mmhg: np.ndarray  # 1 Hz, NaN where missing
    missing: np.ndarray   # bool


@dataclass(frozen=True)
class HypotensiveEpisode:
    t_start_s: float
    t_end_s: float
    min_map_mmhg: float
    threshold_mmhg: float

    @property
    def duration_s(self) -> float:
        return self.t_end_s - self.t_start_s


@dataclass(frozen=True)
class EpochBpTag:
    hypotensive: bool
    bp_insufficient: bool  # < 90% of 1 Hz samples present in the window


def compute_map(bp: BpChannel) -> MapSeries:
    m = bp.dp_mmhg + (bp.sp_mmhg - bp.dp_mmhg) / 3.0
    m = np.where(bp.missing, np.nan, m)
    return MapSeries(map_mmhg=m, missing=bp.missing.copy())


def detect_episodes(map_series: MapSeries, ga_weeks: int,
                    margin: float = DEFAULT_MARGIN,
                    min_duration_s: float = MIN_EPISODE_S) -> list[HypotensiveEpisode]:
    """Maximal runs of MAP strictly below GA + margin, >= min_duration long.

    Missing samples inside a run are tolerated up to 10% of the run length;
    a run that would exceed that tolerance is split at the missing stretch.
    """
    threshold = float(ga_weeks + margin)
    m = map_series.map_mmhg
    below = np.zeros(len(m), dtype=bool)
    present = ~map_series.missing
    below[present] = m[present] < threshold
    missing = map_series.missing

    episodes = []
    i = 0
    n = len(m)
    while i < n:
        if not below[i]:
            i += 1
            continue
        # grow a run of below-threshold samples, absorbing missing stretches
        # as long as the missing fraction stays within tolerance
        j = i + 1
        last_below = i
        n_missing = 0
        while j < n:
            if below[j]:
                last_below = j
                j += 1
            elif missing[j]:
                length = j - i + 1
                if (n_missing + 1) / length > MAX_MISSING_IN_RUN:
                    break
                n_missing += 1
                j += 1
            else:
                break
        start, end = i, last_below + 1  # [start, end) in seconds
        if end - start >= min_duration_s:
            seg = m[start:end]
            episodes.append(HypotensiveEpisode(
                t_start_s=float(start), t_end_s=float(end),
                min_map_mmhg=float(np.nanmin(seg)), threshold_mmhg=threshold))
        i = max(j, last_below + 1)
    return episodes


def tag_epochs(epochs: list[Epoch], map_series: MapSeries,
               ga_weeks: int, margin: float = DEFAULT_MARGIN) -> list[tuple[Epoch, EpochBpTag]]:
    """Tag each epoch hypotensive iff every present MAP sample in its window
    is strictly below GA + margin and at least 90% of samples are present."""
    threshold = float(ga_weeks + margin)
    m = map_series.map_mmhg
    out = []
    for ep in epochs:
        lo, hi = int(ep.t_start_s), min(int(ep.t_end_s), len(m))
        window = m[lo:hi]
        present = ~np.isnan(window)
        coverage = float(np.mean(present)) if len(window) else 0.0
        if coverage < MIN_EPOCH_BP_COVERAGE:
            out.append((ep, EpochBpTag(hypotensive=False, bp_insufficient=True)))
            continue
        hypo = bool(np.all(window[present] < threshold)) and present.any()
        out.append((ep, EpochBpTag(hypotensive=hypo, bp_insufficient=False)))
    return out


def subject_inclusion(rec: Recording, margin: float = DEFAULT_MARGIN,
                      min_duration_s: float = MIN_EPISODE_S) -> bool:
    """True iff the recording has at least one qualifying hypotensive episode."""
    eps = detect_episodes(compute_map(rec.bp), rec.ga_weeks,
                          margin=margin, min_duration_s=min_duration_s)
    return len(eps) >= 1
