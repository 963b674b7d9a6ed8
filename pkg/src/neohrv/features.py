"""The fifteen HRV features computed per valid 5-minute epoch.

Conventions, stated once and used everywhere:
  * meanRR is computed on the raw RR intervals in seconds; every other
    feature is computed on the per-epoch normalized NN intervals.
  * population (not sample) moments throughout.
  * kurtosis is plain (Gaussian -> 3), not excess.
  * ApEn uses m = 2, r = 0.2 * population std, Chebyshev distance,
    self-matches included.
  * Allan factor uses a single 10 s counting window.
  * spectral powers come from cubic-spline resampled NN (default 256 Hz),
    mean removed, Welch PSD (Hann, 150 s segments, 50% overlap), band
    powers by rectangle-rule integration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.signal import welch
from scipy.spatial.distance import cdist

from .epochs import Epoch
from .errors import DegenerateError, ValidationError

FEATURE_ORDER = [
    "VLF", "LF", "HF", "LF_HF", "MeanRR", "SDNN", "TINN", "Skewness",
    "Kurtosis", "ApEn", "SD1", "SD2", "RMSSD", "SDNN_RMSSD", "AllanFactor",
]

TINN_BIN_S = 0.0078125  # conventional 1/128 s histogram grid
RATIO_INF = float("inf")


@dataclass(frozen=True)
class SpectralConfig:
    resample_hz: float = 256.0
    vlf_band: tuple = (0.008, 0.04)
    lf_band: tuple = (0.04, 0.2)
    hf_band: tuple = (0.2, 1.0)
    welch_segment_s: float = 150.0
    overlap_frac: float = 0.5
    taper: str = "hann"

    def __post_init__(self):
        bands = [self.vlf_band, self.lf_band, self.hf_band]
        flat = [f for b in bands for f in b]
        if flat != sorted(flat) or any(b[0] >= b[1] for b in bands):
            raise ValidationError("spectral bands must be increasing and non-overlapping")


@dataclass
class FeatureVector:
    VLF: float
    LF: float
    HF: float
    LF_HF: float
    MeanRR: float
    SDNN: float
    TINN: float
    Skewness: float
    Kurtosis: float
    ApEn: float
    SD1: float
    SD2: float
    RMSSD: float
    SDNN_RMSSD: float
    AllanFactor: float
    flags: list = field(default_factory=list)

    def to_array(self) -> np.ndarray:
        return np.array([getattr(self, name) for name in FEATURE_ORDER], dtype=float)

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in FEATURE_ORDER}


def time_domain(nn, rr):
    """(meanRR, SDNN, skewness, kurtosis); degenerate series -> (.., 0, 3)."""
    nn = np.asarray(nn, dtype=float)
    rr = np.asarray(rr, dtype=float)
    if len(nn) < 10:
        raise ValidationError("time_domain needs at least 10 intervals")
    mean_rr = float(np.mean(rr))
    mu = np.mean(nn)
    dev = nn - mu
    var = float(np.mean(dev ** 2))
    sdnn = math.sqrt(var)
    if var == 0.0:
        return mean_rr, 0.0, 0.0, 3.0
    skew = float(np.mean(dev ** 3)) / var ** 1.5
    kurt = float(np.mean(dev ** 4)) / var ** 2
    return mean_rr, sdnn, skew, kurt


def tinn(nn, bin_width=None):
    """Triangular-interpolation width of the NN histogram.

    Exhaustive search over bin-edge pairs (N, M) straddling the modal bin for
    the triangle (zero at N and M, apex at the modal bin center with the modal
    height) minimizing summed squared error to the histogram. Returns M - N.
    """
    nn = np.asarray(nn, dtype=float)
    if len(nn) < 20:
        raise ValidationError("tinn needs at least 20 intervals")
    w = float(bin_width) if bin_width is not None else TINN_BIN_S  # caller rescales
    lo, hi = float(np.min(nn)), float(np.max(nn))
    n_bins = max(1, int(math.ceil((hi - lo) / w))) if hi > lo else 1
    edges = lo + w * np.arange(n_bins + 1)
    counts, _ = np.histogram(nn, bins=edges) if n_bins > 1 else (np.array([len(nn)]), None)
    if n_bins == 1:
        return w  # all mass in one bin; degenerate
    mode = int(np.argmax(counts))
    peak_x = edges[mode] + w / 2.0
    peak_y = float(counts[mode])
    centers = edges[:-1] + w / 2.0

    best = (math.inf, w)
    for i_n in range(0, mode + 1):          # left edge index (edges[i_n] <= peak)
        x_n = edges[i_n]
        for i_m in range(mode + 1, n_bins + 1):  # right edge index
            x_m = edges[i_m]
            tri = np.zeros(n_bins)
            left = (centers > x_n) & (centers <= peak_x)
            right = (centers > peak_x) & (centers < x_m)
            if peak_x > x_n:
                tri[left] = peak_y * (centers[left] - x_n) / (peak_x - x_n)
            tri[right] = peak_y * (x_m - centers[right]) / (x_m - peak_x)
            tri[mode] = peak_y
            err = float(np.sum((counts - tri) ** 2))
            width = x_m - x_n
            if err < best[0] - 1e-15 or (abs(err - best[0]) <= 1e-15 and width < best[1]):
                best = (err, width)
    return best[1]


def rmssd_and_ratio(nn):
    """(RMSSD, SDNN/RMSSD); RMSSD of zero yields an infinite ratio."""
    nn = np.asarray(nn, dtype=float)
    if len(nn) < 2:
        raise ValidationError("rmssd needs at least 2 intervals")
    diffs = np.diff(nn)
    rmssd = math.sqrt(float(np.mean(diffs ** 2)))
    sdnn = float(np.std(nn))
    ratio = sdnn / rmssd if rmssd > 0 else RATIO_INF
    return rmssd, ratio


def poincare(nn):
    """(SD1, SD2) from the lag-1 Poincare scatter, population statistics.

    Successive differences are treated as zero-mean, so SD1 is the RMS of
    (y - x)/sqrt(2) and the identity SD1 = RMSSD/sqrt(2) is exact.
    """
    nn = np.asarray(nn, dtype=float)
    if len(nn) < 3:
        raise ValidationError("poincare needs at least 3 intervals")
    x, y = nn[:-1], nn[1:]
    d = (y - x) / math.sqrt(2.0)
    sd1 = math.sqrt(float(np.mean(d ** 2)))
    sd2 = float(np.std((y + x) / math.sqrt(2.0)))
    return sd1, sd2


def approximate_entropy(nn, m: int = 2, r_factor: float = 0.2):
    """ApEn(m, r, N) with Chebyshev distance and self-matches included."""
    x = np.asarray(nn, dtype=float)
    n = len(x)
    if n < 50:
        raise ValidationError("approximate_entropy needs at least 50 intervals")
    sd = float(np.std(x))
    if sd == 0.0:
        return 0.0
    r = r_factor * sd

    def phi(mm):
        k = n - mm + 1
        emb = np.lib.stride_tricks.sliding_window_view(x, mm)  # k x mm
        # Chebyshev distance matrix in one shot; k is a few hundred here
        d = cdist(emb, emb, metric="chebyshev")
        counts = np.count_nonzero(d <= r, axis=1)
        return float(np.mean(np.log(counts / k)))

    return phi(m) - phi(m + 1)


def allan_factor(beat_times, t_start, t_end, window_s: float = 10.0):
    """AF = E[(N_{i+1}-N_i)^2] / (2 E[N_i]) over contiguous counting windows."""
    beat_times = np.asarray(beat_times, dtype=float)
    n_windows = int((t_end - t_start) // window_s)
    if n_windows < 2:
        raise ValidationError("allan_factor needs the epoch to span >= 2 windows")
    edges = t_start + window_s * np.arange(n_windows + 1)
    counts, _ = np.histogram(beat_times, bins=edges)
    mean_count = float(np.mean(counts))
    if mean_count == 0.0:
        raise DegenerateError("allan_factor undefined: zero beats")
    d = np.diff(counts.astype(float))
    return float(np.mean(d ** 2)) / (2.0 * mean_count)


def spectral(nn, beat_times, cfg: SpectralConfig = SpectralConfig()):
    """(VLF, LF, HF, LF/HF) band powers of the resampled NN series.

    nn[i] is anchored at the time of its ending beat (beat_times[i+1]).
    """
    nn = np.asarray(nn, dtype=float)
    beat_times = np.asarray(beat_times, dtype=float)
    if len(beat_times) != len(nn) + 1:
        raise ValidationError("beat_times must have len(nn) + 1 entries")
    t = beat_times[1:]
    spline = CubicSpline(t, nn)
    fs = cfg.resample_hz
    grid = np.arange(math.ceil(t[0] * fs), math.floor(t[-1] * fs) + 1) / fs
    sig = spline(grid)
    sig = sig - np.mean(sig)
    nperseg = min(len(sig), int(round(cfg.welch_segment_s * fs)))
    noverlap = int(nperseg * cfg.overlap_frac)
    freqs, psd = welch(sig, fs=fs, window=cfg.taper, nperseg=nperseg,
                       noverlap=noverlap, detrend=False)
    df = freqs[1] - freqs[0]

    def band_power(band):
        mask = (freqs >= band[0]) & (freqs < band[1])
        return float(np.sum(psd[mask]) * df)

    vlf = band_power(cfg.vlf_band)
    lf = band_power(cfg.lf_band)
    hf = band_power(cfg.hf_band)
    ratio = lf / hf if hf > 0 else RATIO_INF
    return vlf, lf, hf, ratio


def extract_features(epoch: Epoch, cfg: SpectralConfig = SpectralConfig()) -> FeatureVector:
    """Assemble the fifteen features for one valid epoch."""
    if not epoch.valid:
        raise ValidationError(f"epoch invalid ({epoch.rejection_reason})")
    nn, rr = epoch.nn, epoch.rr.rr_s
    flags = []

    mean_rr, sdnn, skew, kurt = time_domain(nn, rr)
    if sdnn == 0.0:
        flags.append("degenerate_moments")
    tinn_w = tinn(nn, bin_width=TINN_BIN_S / mean_rr)
    rmssd, ratio = rmssd_and_ratio(nn)
    if not math.isfinite(ratio):
        flags.append("rmssd_zero")
    sd1, sd2 = poincare(nn)
    apen = approximate_entropy(nn)
    af = allan_factor(epoch.rr.beat_times, epoch.t_start_s, epoch.t_end_s)
    vlf, lf, hf, lf_hf = spectral(nn, epoch.rr.beat_times, cfg)
    if not math.isfinite(lf_hf):
        flags.append("hf_zero")

    return FeatureVector(VLF=vlf, LF=lf, HF=hf, LF_HF=lf_hf, MeanRR=mean_rr,
                         SDNN=sdnn, TINN=tinn_w, Skewness=skew, Kurtosis=kurt,
                         ApEn=apen, SD1=sd1, SD2=sd2, RMSSD=rmssd,
                         SDNN_RMSSD=ratio, AllanFactor=af, flags=flags)
