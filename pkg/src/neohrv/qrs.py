"""Pan-Tompkins style R-peak detection tuned for neonatal ECG.

Pipeline: band-pass (5-25 Hz, wider than the adult 5-15 Hz band because the
neonatal QRS is narrower) -> five-point derivative -> squaring -> 100 ms
moving-window integration. All filters are applied zero-phase / centered, so
no group-delay compensation is needed downstream; detected indices refer
directly to the input grid.

Peak picking uses the classic adaptive dual thresholds with search-back, a
180 ms refractory period, and refinement of each accepted peak to the local
maximum of the band-passed signal within +/-25 ms. All thresholds are derived
from the signal itself, so detection is invariant to global amplitude scaling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import butter, filtfilt

from .errors import ValidationError
from .model import EcgChannel

BAND_HZ = (5.0, 25.0)
MWI_WIDTH_S = 0.100
REFRACTORY_S = 0.180
REFINE_WINDOW_S = 0.060  # just over half the MWI width; well under refractory
INIT_WINDOW_S = 2.0
SEARCHBACK_FACTOR = 1.66
# physiological RR bounds used only for the quality metric
RR_BOUNDS_S = (0.2, 0.75)


@dataclass(frozen=True)
class RPeakSeries:
    peak_times: np.ndarray  # seconds, strictly increasing
    peak_indices: np.ndarray  # sample indices into the input ECG
    detection_quality: float  # fraction of RR intervals inside RR_BOUNDS_S

    def __len__(self):
        return len(self.peak_times)


def preprocess_ecg(ecg: EcgChannel) -> np.ndarray:
    """Return the moving-window-integrated detection signal (dimensionless)."""
    fs = ecg.fs_hz
    x = np.asarray(ecg.samples, dtype=float)
    warmup = int(3 * fs)
    if len(x) < warmup:
        raise ValidationError(f"ECG shorter than filter warm-up ({warmup} samples)")
    nyq = fs / 2.0
    b, a = butter(2, [BAND_HZ[0] / nyq, BAND_HZ[1] / nyq], btype="band")
    bandpassed = filtfilt(b, a, x)
    # five-point derivative, centered (zero phase)
    h = np.array([1.0, 2.0, 0.0, -2.0, -1.0]) * (fs / 8.0)
    deriv = np.convolve(bandpassed, h, mode="same")
    squared = deriv * deriv
    width = max(1, int(round(MWI_WIDTH_S * fs)))
    mwi = np.convolve(squared, np.ones(width) / width, mode="same")
    return mwi


def bandpass_ecg(ecg: EcgChannel) -> np.ndarray:
    """Zero-phase band-passed ECG used for peak-time refinement."""
    fs = ecg.fs_hz
    nyq = fs / 2.0
    b, a = butter(2, [BAND_HZ[0] / nyq, BAND_HZ[1] / nyq], btype="band")
    return filtfilt(b, a, np.asarray(ecg.samples, dtype=float))


def _local_maxima(x: np.ndarray) -> np.ndarray:
    return np.flatnonzero((x[1:-1] > x[:-2]) & (x[1:-1] >= x[2:])) + 1


def detect_r_peaks(ecg: EcgChannel) -> RPeakSeries:
    """Detect R peaks. A flat/undetectable signal yields an empty series."""
    fs = ecg.fs_hz
    if np.ptp(np.asarray(ecg.samples, dtype=float)) == 0.0:
        return RPeakSeries(np.empty(0), np.empty(0, dtype=int), 0.0)
    mwi = preprocess_ecg(ecg)
    bp = bandpass_ecg(ecg)
    if not np.any(mwi > 0):
        return RPeakSeries(np.empty(0), np.empty(0, dtype=int), 0.0)

    refractory = int(round(REFRACTORY_S * fs))
    refine = int(round(REFINE_WINDOW_S * fs))
    cand = _local_maxima(mwi)
    if len(cand) == 0:
        return RPeakSeries(np.empty(0), np.empty(0, dtype=int), 0.0)

    init = mwi[: int(INIT_WINDOW_S * fs)]
    spk = float(np.max(init))
    npk = 0.5 * float(np.mean(init))

    accepted: list[int] = []
    rr_avg = None

    def threshold1():
        return npk + 0.25 * (spk - npk)

    i = 0
    while i < len(cand):
        idx = cand[i]
        val = mwi[idx]
        if accepted and idx - accepted[-1] < refractory:
            i += 1
            continue
        if val > threshold1():
            accepted.append(idx)
            spk = 0.125 * val + 0.875 * spk
            if len(accepted) >= 2:
                rr = accepted[-1] - accepted[-2]
                rr_avg = rr if rr_avg is None else 0.125 * rr + 0.875 * rr_avg
        else:
            npk = 0.125 * val + 0.875 * npk
            # search-back: if we have gone too long without a beat, re-scan
            # the gap with the lowered threshold
            if accepted and rr_avg is not None and idx - accepted[-1] > SEARCHBACK_FACTOR * rr_avg:
                lo = accepted[-1] + refractory
                gap = cand[(cand >= lo) & (cand <= idx)]
                if len(gap):
                    best = gap[np.argmax(mwi[gap])]
                    if mwi[best] > 0.5 * threshold1():
                        accepted.append(int(best))
                        spk = 0.25 * mwi[best] + 0.75 * spk
                        rr = accepted[-1] - accepted[-2]
                        rr_avg = 0.125 * rr + 0.875 * rr_avg
        i += 1

    # refine to the local maximum of the band-passed signal
    refined = []
    for idx in accepted:
        lo = max(0, idx - refine)
        hi = min(len(bp), idx + refine + 1)
        refined.append(lo + int(np.argmax(bp[lo:hi])))
    refined = np.array(sorted(set(refined)), dtype=int)
    # refinement may pull neighbours together; enforce the refractory period
    keep = [0]
    for j in range(1, len(refined)):
        if refined[j] - refined[keep[-1]] >= refractory:
            keep.append(j)
    refined = refined[keep] if len(refined) else refined

    times = refined / fs
    rr = np.diff(times)
    quality = float(np.mean((rr >= RR_BOUNDS_S[0]) & (rr <= RR_BOUNDS_S[1]))) if len(rr) else 0.0
    return RPeakSeries(peak_times=times, peak_indices=refined, detection_quality=quality)
