"""RR/NN interval series, artifact correction, and 5-minute epoching.

Artifact rule: an interval is bad if it leaves the physiological range
[0.2 s, 0.75 s] or deviates more than 30% from the centered 5-interval
moving average of its accepted neighbours. Runs of up to 2 consecutive bad
intervals are replaced by that moving average; longer runs are left in place
and marked uncorrectable, which feeds epoch rejection.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ValidationError
from .qrs import RPeakSeries

RR_BOUNDS_S = (0.2, 0.75)
MA_HALF_WINDOW = 2           # centered 5-interval window
DEVIATION_FRAC = 0.30
MAX_CONSECUTIVE_FIXES = 2
EPOCH_S = 300.0
MIN_BEAT_YIELD = 0.80        # fraction of 300/median-RR expected beats
MAX_ARTIFACT_FRAC = 0.20     # corrected + uncorrectable intervals
MAX_GAP_S = 2.0


@dataclass(frozen=True)
class RrSeries:
    rr_s: np.ndarray            # inter-beat intervals, seconds
    beat_times: np.ndarray      # len(rr_s) + 1 cumulative beat times
    corrected_mask: np.ndarray  # True where the value was replaced
    uncorrectable_mask: np.ndarray = None  # True inside uncorrectable runs

    def __post_init__(self):
        if self.uncorrectable_mask is None:
            object.__setattr__(self, "uncorrectable_mask",
                               np.zeros(len(self.rr_s), dtype=bool))
        if len(self.beat_times) != len(self.rr_s) + 1:
            raise ValidationError("beat_times must have len(rr_s) + 1 entries")
        if np.any(self.rr_s <= 0):
            raise ValidationError("all RR intervals must be positive")


@dataclass(frozen=True)
class Epoch:
    subject_id: str
    epoch_index: int
    t_start_s: float
    t_end_s: float
    rr: RrSeries
    nn: np.ndarray      # rr / mean(rr within epoch), dimensionless
    valid: bool
    rejection_reason: str | None = None  # too_few_beats | excess_artifact | gap

    @property
    def corrected_frac(self) -> float:
        n = len(self.rr.rr_s)
        if n == 0:
            return 0.0
        return float(np.mean(self.rr.corrected_mask | self.rr.uncorrectable_mask))


def build_rr(peaks: RPeakSeries) -> RrSeries:
    if len(peaks) < 2:
        raise ValidationError(f"need at least 2 peaks to build RR, got {len(peaks)}")
    t = np.asarray(peaks.peak_times, dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValidationError("peak times must be strictly increasing")
    rr = np.diff(t)
    return RrSeries(rr_s=rr, beat_times=t, corrected_mask=np.zeros(len(rr), dtype=bool))


def correct_artifacts(rr: RrSeries) -> RrSeries:
    """Replace isolated outliers by the local moving average; flag long runs.

    The single-pass sweep is repeated until no decision changes: replacing a
    value shifts its neighbours' moving averages, which can implicate further
    intervals, so only the fixpoint is idempotent under re-application.
    """
    if len(rr.rr_s) == 0:
        raise ValidationError("empty RR series")
    cur = rr
    for _ in range(len(rr.rr_s)):
        nxt = _correct_once(cur)
        if (np.array_equal(nxt.rr_s, cur.rr_s)
                and np.array_equal(nxt.corrected_mask, cur.corrected_mask)
                and np.array_equal(nxt.uncorrectable_mask, cur.uncorrectable_mask)):
            return nxt
        cur = nxt
    return cur


def _correct_once(rr: RrSeries) -> RrSeries:
    vals = rr.rr_s.copy()
    n = len(vals)
    trusted = rr.corrected_mask.copy()  # previously corrected values pass as-is
    bounds_ok = ((vals >= RR_BOUNDS_S[0]) & (vals <= RR_BOUNDS_S[1])) | trusted

    def neighbour_avg(i, ok):
        lo, hi = max(0, i - MA_HALF_WINDOW), min(n, i + MA_HALF_WINDOW + 1)
        js = [j for j in range(lo, hi) if j != i and ok[j]]
        return (float(np.mean(vals[js])), len(js)) if js else (np.nan, 0)

    bad = np.zeros(n, dtype=bool)
    for i in range(n):
        if trusted[i]:
            continue
        if not bounds_ok[i]:
            bad[i] = True
            continue
        avg, cnt = neighbour_avg(i, bounds_ok)
        if cnt and abs(vals[i] - avg) > DEVIATION_FRAC * avg:
            bad[i] = True

    corrected = rr.corrected_mask.copy()
    uncorrectable = rr.uncorrectable_mask.copy()
    accepted = ~bad
    i = 0
    while i < n:
        if not bad[i]:
            i += 1
            continue
        j = i
        while j < n and bad[j]:
            j += 1
        run = range(i, j)
        if len(run) <= MAX_CONSECUTIVE_FIXES:
            for k in run:
                avg, cnt = neighbour_avg(k, accepted)
                if cnt:
                    vals[k] = avg
                    corrected[k] = True
                else:
                    uncorrectable[k] = True
        else:
            for k in run:
                uncorrectable[k] = True
        i = j

    return RrSeries(rr_s=vals, beat_times=rr.beat_times,
                    corrected_mask=corrected, uncorrectable_mask=uncorrectable)


def segment_epochs(rr: RrSeries, duration_s: float, subject_id: str = "") -> list[Epoch]:
    """Cut the series into contiguous non-overlapping 300 s epochs.

    An interval belongs to the epoch containing its ending beat. Validity:
    enough beats, low artifact fraction, and no inter-beat gap above 2 s
    (including the stretches from the window edges to the first/last beat).
    """
    if duration_s < EPOCH_S:
        return []
    n_epochs = int(duration_s // EPOCH_S)
    out = []
    t = rr.beat_times
    for e in range(n_epochs):
        t0, t1 = EPOCH_S * e, EPOCH_S * (e + 1)
        # intervals whose ending beat lies in (t0, t1]
        sel = (t[1:] > t0) & (t[1:] <= t1)
        idx = np.flatnonzero(sel)
        sub = RrSeries(rr_s=rr.rr_s[idx],
                       beat_times=np.concatenate(([t[idx[0]]], t[idx + 1])) if len(idx)
                       else np.empty(1),
                       corrected_mask=rr.corrected_mask[idx],
                       uncorrectable_mask=rr.uncorrectable_mask[idx]) if len(idx) else None

        reason = None
        if sub is None or len(idx) < 2:
            reason = "too_few_beats"
        else:
            beats_in = t[(t >= t0) & (t <= t1)]
            gaps = np.diff(beats_in) if len(beats_in) > 1 else np.empty(0)
            edge_gaps = []
            if len(beats_in):
                edge_gaps = [beats_in[0] - t0, t1 - beats_in[-1]]
            if (len(gaps) and np.max(gaps) > MAX_GAP_S) or any(g > MAX_GAP_S for g in edge_gaps):
                reason = "gap"
            else:
                expected = EPOCH_S / float(np.median(sub.rr_s))
                if len(idx) < MIN_BEAT_YIELD * expected:
                    reason = "too_few_beats"
                elif np.mean(sub.corrected_mask | sub.uncorrectable_mask) > MAX_ARTIFACT_FRAC:
                    reason = "excess_artifact"

        if reason is None:
            nn = sub.rr_s / float(np.mean(sub.rr_s))
            out.append(Epoch(subject_id, e, t0, t1, sub, nn, True, None))
        else:
            empty = sub if sub is not None else RrSeries(
                rr_s=np.empty(0), beat_times=np.empty(1),
                corrected_mask=np.empty(0, dtype=bool))
            out.append(Epoch(subject_id, e, t0, t1, empty, np.empty(0), False, reason))
    return out
