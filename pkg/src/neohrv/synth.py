"""Synthetic cohort generator with analytic ground truth.

Beat times come from an integral-pulse-frequency-modulation (IPFM) process:
the instantaneous rate r(t) = base * (1 + sum_j a_j sin(2 pi f_j t + phi_j))
is integrated analytically and beats are emitted where the integral crosses
integers (Newton inversion, machine-precision beat times). Band-limited rate
modulation gives analytically known spectral content for validating the
frequency-domain features.

The two-class effect is planted as beat-time jitter whose standard deviation
is multiplied during scheduled blood-pressure dips for subjects that
"respond" (healthy class), which raises successive-difference variability
(RMSSD and friends) exactly where the hypotensive epochs are. The multiplier
is drawn per epoch around a subject-level trait: subjects separate cleanly
but individual epochs overlap, so epoch-level single-feature discrimination
stays bounded while subject-level aggregation recovers the classes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import ValidationError
from .model import BpChannel, CohortDataset, EcgChannel, Recording

QRS_SIGMA_S = 0.010  # Ricker template scale; main complex spans ~40 ms
QRS_SPAN_S = 0.100   # rendered support of one template


@dataclass(frozen=True)
class SynthSpec:
    n_subjects: int = 23
    n_healthy: int = 12
    n_dippers: int | None = None          # None = every subject dips
    duration_s: float = 7200.0
    fs_hz: int = 256
    ga_weeks_range: tuple = (24, 31)
    # instantaneous-rate modulation components: (freq_hz, amplitude)
    modulation: tuple = ((0.1, 0.03), (0.32, 0.01))
    rr_jitter_frac: float = 0.01          # baseline beat-time jitter std / mean RR
    noise_mv: float = 0.01
    # dip schedule: (start_epoch, n_epochs) pairs on the 300 s epoch grid
    dip_schedule: tuple = ((2, 3), (8, 3), (14, 3), (20, 3))
    dip_depth_mmhg: float = 4.0           # MAP below threshold during a dip
    bp_headroom_mmhg: float = 6.0         # MAP above threshold outside dips
    pulse_pressure_mmhg: float = 18.0
    # class effect: jitter multiplier during dips, per class. The subject-level
    # ranges are disjoint; per-epoch lognormal spread makes single epochs
    # overlap so no single feature separates the classes at epoch level.
    responder_mult_range: tuple = (2.0, 3.0)
    nonresponder_mult_range: tuple = (1.0, 1.15)
    epoch_jitter_log_sd: float = 0.18     # per-dip-epoch lognormal spread
    # heart-rate ranges overlap broadly so MeanRR is only mildly informative
    hr_bpm_healthy: tuple = (132.0, 164.0)
    hr_bpm_abnormal: tuple = (142.0, 175.0)
    null_effect: bool = False             # no planted response, shared HR range
    seed: int = 0


def synth_rr(hr_bpm, modulation, duration_s):
    """IPFM beat times and RR intervals for stationary rate modulation.

    Beats are the solutions of integral(r, 0..t) = k for integer k, found by
    Newton iteration on the closed-form rate integral.
    """
    base = hr_bpm / 60.0
    comps = [(f, a) for f, a in modulation if a != 0.0]
    if sum(abs(a) for _, a in comps) >= 1.0:
        raise ValidationError("modulation amplitudes must keep the rate positive")

    def rate(t):
        r = np.full_like(t, 1.0)
        for f, a in comps:
            r = r + a * np.sin(2.0 * np.pi * f * t)
        return base * r

    def integral(t):
        s = t.copy()
        for f, a in comps:
            w = 2.0 * np.pi * f
            s = s + (a / w) * (1.0 - np.cos(w * t))
        return base * s

    n_beats = int(math.floor(integral(np.array([duration_s]))[0]))
    k = np.arange(1, n_beats + 1, dtype=float)
    t = k / base
    for _ in range(60):
        step = (integral(t) - k) / rate(t)
        t = t - step
        if np.max(np.abs(step)) < 1e-12:
            break
    beat_times = np.concatenate(([0.0], t))
    return beat_times, np.diff(beat_times)


def synth_ecg(beat_times, fs_hz, noise_mv, seed) -> EcgChannel:
    """Render an ECG: Ricker QRS template at each beat plus baseline wander
    and white noise. Templates are placed with sub-sample accuracy."""
    if fs_hz not in (256, 1024):
        raise ValidationError(f"unsupported synth ECG rate {fs_hz}")
    beat_times = np.asarray(beat_times, dtype=float)
    if len(beat_times) >= 2 and np.min(np.diff(beat_times)) < QRS_SPAN_S:
        raise ValidationError("RR interval shorter than the QRS template span")
    duration = beat_times[-1] + 0.5
    n = int(round(duration * fs_hz))
    sig = np.zeros(n)
    half = int(QRS_SPAN_S / 2 * fs_hz)
    starts = np.clip(np.round(beat_times * fs_hz).astype(int) - half, 0, n - 1)
    offsets = np.arange(2 * half + 1)
    idx = starts[:, None] + offsets[None, :]
    tau = (idx / fs_hz - beat_times[:, None]) / QRS_SIGMA_S
    templates = (1.0 - tau * tau) * np.exp(-0.5 * tau * tau)  # Ricker, peak 1 mV
    valid = idx < n
    np.add.at(sig, idx[valid], templates[valid])
    grid = np.arange(n) / fs_hz
    sig += 0.05 * np.sin(2.0 * np.pi * 0.33 * grid)  # baseline wander, below passband
    if noise_mv > 0:
        rng = np.random.default_rng(seed)
        sig += rng.normal(0.0, noise_mv, size=n)
    return EcgChannel(fs_hz=fs_hz, samples=sig)


def dip_windows(spec: SynthSpec) -> list[tuple[float, float]]:
    return [(300.0 * start, 300.0 * (start + length))
            for start, length in spec.dip_schedule]


def synth_bp(ga_weeks, duration_s, dips, spec: SynthSpec, seed) -> BpChannel:
    """1 Hz SP/DP traces whose MAP sits above GA+4 at baseline and strictly
    below it inside each scheduled dip window."""
    rng = np.random.default_rng(seed)
    n = int(duration_s)
    threshold = ga_weeks + 4.0
    target_map = np.full(n, threshold + spec.bp_headroom_mmhg)
    t = np.arange(n, dtype=float)
    for t0, t1 in dips:
        if t1 > duration_s:
            raise ValidationError("dip overlaps the recording end")
        target_map[(t >= t0) & (t < t1)] = threshold - spec.dip_depth_mmhg
    # slow common-mode noise, small against the dip depth / headroom
    noise = rng.normal(0.0, 0.4, size=n)
    kernel = np.ones(9) / 9.0
    target_map = target_map + np.convolve(noise, kernel, mode="same")
    pp = spec.pulse_pressure_mmhg
    dp = target_map - pp / 3.0
    sp = dp + pp
    return BpChannel(sp_mmhg=sp, dp_mmhg=dp,
                     missing=np.zeros(n, dtype=bool))


def _jitter_windows(dips, dip_mult, log_sd, rng):
    """Split each dip into 300 s chunks and draw a lognormal multiplier per
    chunk around the subject trait."""
    windows = []
    for t0, t1 in dips:
        edges = np.arange(t0, t1, 300.0)
        for e0 in edges:
            factor = dip_mult * math.exp(rng.normal(0.0, log_sd))
            windows.append((e0, min(e0 + 300.0, t1), factor))
    return windows


def _jitter_beats(beat_times, windows, base_sigma, rng):
    sigma = np.full(len(beat_times), base_sigma)
    for t0, t1, factor in windows:
        sigma[(beat_times >= t0) & (beat_times < t1)] *= factor
    jittered = beat_times + rng.normal(0.0, 1.0, size=len(beat_times)) * sigma
    jittered[0] = max(jittered[0], 0.0)
    return np.sort(jittered)


def _subject_traits(spec: SynthSpec, healthy_flags, rng):
    """Per-subject (hr_bpm, dip jitter multiplier). Responder multipliers are
    disjoint between classes, while heart-rate ranges overlap, so MeanRR alone
    cannot separate the cohort and the dip response carries the outcome."""
    n = spec.n_subjects
    hr = np.empty(n)
    mult = np.empty(n)
    for i in range(n):
        if spec.null_effect:
            # no planted response and no subject-level traits at all, so any
            # apparent discrimination can only come from chance ranking
            hr[i] = 0.5 * (spec.hr_bpm_healthy[0] + spec.hr_bpm_healthy[1])
            mult[i] = 1.0
        elif healthy_flags[i]:
            mult[i] = rng.uniform(*spec.responder_mult_range)
            hr[i] = rng.uniform(*spec.hr_bpm_healthy)
        else:
            mult[i] = rng.uniform(*spec.nonresponder_mult_range)
            hr[i] = rng.uniform(*spec.hr_bpm_abnormal)
    return hr, mult


def synth_subject(spec: SynthSpec, subject_id, ga_weeks, hr_bpm, dip_mult,
                  healthy, dips, seed):
    """Generate one recording plus its machine-readable ground truth."""
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_jit, s_ecg, s_bp = seq.spawn(3)
    ideal_beats, _ = synth_rr(hr_bpm, spec.modulation, spec.duration_s)
    rng = np.random.default_rng(s_jit)
    base_sigma = spec.rr_jitter_frac * 60.0 / hr_bpm
    windows = _jitter_windows(dips, dip_mult, spec.epoch_jitter_log_sd, rng)
    beats = _jitter_beats(ideal_beats, windows, base_sigma, rng)
    ecg = synth_ecg(beats, spec.fs_hz, spec.noise_mv, s_ecg)
    bpc = synth_bp(ga_weeks, spec.duration_s, dips, spec, s_bp)
    rec = Recording(subject_id=subject_id, ga_weeks=int(ga_weeks), ecg=ecg,
                    bp=bpc, outcome=0 if healthy else 1)
    truth = {
        "subject_id": subject_id,
        "healthy": bool(healthy),
        "hr_bpm": float(hr_bpm),
        "dip_jitter_mult": float(dip_mult),
        "modulation": [list(c) for c in spec.modulation],
        "beat_times": beats.tolist(),
        "dips": [list(d) for d in dips],
        "ga_weeks": int(ga_weeks),
    }
    return rec, truth


def synth_cohort(spec: SynthSpec):
    """Build the full cohort. Returns (CohortDataset, list of truth dicts)."""
    master = np.random.SeedSequence(spec.seed)
    rng = np.random.default_rng(master.spawn(1)[0])
    n = spec.n_subjects
    healthy_flags = np.zeros(n, dtype=bool)
    healthy_flags[:spec.n_healthy] = True
    rng.shuffle(healthy_flags)
    n_dippers = n if spec.n_dippers is None else spec.n_dippers
    dipper_flags = np.zeros(n, dtype=bool)
    dipper_flags[:n_dippers] = True
    rng.shuffle(dipper_flags)
    hr, mult = _subject_traits(spec, healthy_flags, rng)
    ga = rng.integers(spec.ga_weeks_range[0], spec.ga_weeks_range[1] + 1, size=n)

    subject_seeds = master.spawn(n)
    recs, truths = [], []
    for i in range(n):
        dips = dip_windows(spec) if dipper_flags[i] else []
        rec, truth = synth_subject(
            spec, subject_id=f"s{i + 1:02d}", ga_weeks=int(ga[i]),
            hr_bpm=float(hr[i]), dip_mult=float(mult[i]),
            healthy=bool(healthy_flags[i]), dips=dips, seed=subject_seeds[i])
        recs.append(rec)
        truths.append(truth)
    cohort = CohortDataset(recordings=recs, provenance=f"synthetic seed={spec.seed}")
    return cohort, truths
