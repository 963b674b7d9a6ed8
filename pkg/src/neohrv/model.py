"""Data model and file ingestion for synchronized ECG + BP recordings.

File formats:
  ECG CSV      header ``t_s,ecg_mv``; strictly increasing uniform time grid.
  BP CSV       header ``t_s,sp_mmhg,dp_mmhg``; 1 Hz grid; absent rows are
               missing samples (masked, never interpolated).
  meta JSON    keys ``subject_id``, ``ga_weeks``, ``fs_ecg_hz``, ``ccs``.
  manifest     JSON list of ``{"ecg": ..., "bp": ..., "meta": ...}`` triplets.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import ValidationError

SUPPORTED_FS = (256, 1024)
GA_HARD_RANGE = (20, 45)  # loader rejects outside; study cohort is 22-32
EPOCH_S = 300.0


@dataclass(frozen=True)
class EcgChannel:
    fs_hz: int
    samples: np.ndarray  # millivolts

    @property
    def duration_s(self) -> float:
        return len(self.samples) / self.fs_hz


@dataclass(frozen=True)
class BpChannel:
    """Systolic/diastolic pressures on a 1 Hz grid; gaps carried in `missing`."""

    sp_mmhg: np.ndarray
    dp_mmhg: np.ndarray
    missing: np.ndarray  # bool, True where the 1 Hz slot has no sample

    def __post_init__(self):
        if not (len(self.sp_mmhg) == len(self.dp_mmhg) == len(self.missing)):
            raise ValidationError("BP channel arrays must have equal length")
        ok = ~self.missing
        sp, dp = self.sp_mmhg[ok], self.dp_mmhg[ok]
        if len(sp) and not np.all((dp > 0) & (dp <= sp) & (sp < 200)):
            raise ValidationError("BP values must satisfy 0 < dp <= sp < 200")

    @property
    def duration_s(self) -> float:
        return float(len(self.sp_mmhg))


@dataclass(frozen=True)
class Recording:
    """One subject's synchronized channels. t = 0 at recording start for both."""

    subject_id: str
    ga_weeks: int
    ecg: EcgChannel
    bp: BpChannel
    outcome: int  # 0 = healthy, 1 = abnormal short-term outcome


@dataclass
class CohortDataset:
    recordings: list[Recording]
    provenance: str = "real"

    def __post_init__(self):
        ids = [r.subject_id for r in self.recordings]
        if len(set(ids)) != len(ids):
            raise ValidationError("duplicate subject_id in cohort")


def _validate_ecg(fs_hz, samples, allow_any_fs=False) -> EcgChannel:
    fs_hz = int(fs_hz)
    if fs_hz not in SUPPORTED_FS and not allow_any_fs:
        raise ValidationError(
            f"unsupported ECG sampling rate {fs_hz} Hz (expected one of {SUPPORTED_FS}; "
            "pass allow_any_fs to override)")
    samples = np.asarray(samples, dtype=float)
    if len(samples) < fs_hz * EPOCH_S:
        raise ValidationError(
            f"ECG too short: {len(samples)} samples < one 300 s epoch at {fs_hz} Hz")
    return EcgChannel(fs_hz=fs_hz, samples=samples)


def load_ecg_csv(path, fs_expected=None, allow_any_fs=False) -> EcgChannel:
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise ValidationError(f"{path}: cannot parse ECG CSV ({exc})") from exc
    if list(df.columns) != ["t_s", "ecg_mv"]:
        raise ValidationError(f"{path}:1: expected header 't_s,ecg_mv', got {list(df.columns)}")
    t = df["t_s"].to_numpy(dtype=float)
    dt = np.diff(t)
    if len(dt) and np.any(dt <= 0):
        line = int(np.argmax(dt <= 0)) + 3  # +1 header, +1 one-based, +1 second row of pair
        raise ValidationError(f"{path}:{line}: non-monotone timestamps")
    if len(dt) and np.any(np.abs(dt - dt[0]) > 1e-6):
        line = int(np.argmax(np.abs(dt - dt[0]) > 1e-6)) + 3
        raise ValidationError(f"{path}:{line}: non-uniform sampling grid")
    fs = round(1.0 / dt[0]) if len(dt) else (fs_expected or 0)
    if fs_expected is not None and fs != fs_expected:
        raise ValidationError(f"{path}: sampling rate {fs} Hz disagrees with metadata {fs_expected} Hz")
    return _validate_ecg(fs, df["ecg_mv"].to_numpy(dtype=float), allow_any_fs=allow_any_fs)


def load_bp_csv(path) -> BpChannel:
    try:
        df = pd.read_csv(path, float_precision="round_trip")
    except Exception as exc:
        raise ValidationError(f"{path}: cannot parse BP CSV ({exc})") from exc
    if list(df.columns) != ["t_s", "sp_mmhg", "dp_mmhg"]:
        raise ValidationError(
            f"{path}:1: expected header 't_s,sp_mmhg,dp_mmhg', got {list(df.columns)}")
    t = df["t_s"].to_numpy(dtype=float)
    if len(t) == 0:
        raise ValidationError(f"{path}: empty BP file")
    if np.any(np.diff(t) <= 0):
        line = int(np.argmax(np.diff(t) <= 0)) + 3
        raise ValidationError(f"{path}:{line}: non-monotone timestamps")
    idx = np.rint(t).astype(int)
    if np.any(np.abs(t - idx) > 1e-6) or np.any(idx < 0):
        raise ValidationError(f"{path}: BP timestamps must lie on the 1 Hz integer grid")
    n = idx[-1] + 1
    sp = np.full(n, np.nan)
    dp = np.full(n, np.nan)
    missing = np.ones(n, dtype=bool)
    sp[idx] = df["sp_mmhg"].to_numpy(dtype=float)
    dp[idx] = df["dp_mmhg"].to_numpy(dtype=float)
    missing[idx] = False
    return BpChannel(sp_mmhg=sp, dp_mmhg=dp, missing=missing)


def load_meta_json(path) -> dict:
    try:
        with open(path) as fh:
            meta = json.load(fh)
    except Exception as exc:
        raise ValidationError(f"{path}: cannot parse metadata JSON ({exc})") from exc
    for key in ("subject_id", "ga_weeks", "fs_ecg_hz", "ccs"):
        if key not in meta:
            raise ValidationError(f"{path}: missing metadata key '{key}'")
    ga = meta["ga_weeks"]
    if not isinstance(ga, int) or not (GA_HARD_RANGE[0] <= ga <= GA_HARD_RANGE[1]):
        raise ValidationError(f"{path}: GA out of range: {ga} (accepted {GA_HARD_RANGE})")
    if meta["ccs"] not in (0, 1):
        raise ValidationError(f"{path}: ccs must be 0 or 1, got {meta['ccs']}")
    return meta


def load_recording(ecg_path, bp_path, meta_path, allow_any_fs=False) -> Recording:
    """Load and validate one (ecg, bp, meta) file triplet."""
    meta = load_meta_json(meta_path)
    ecg = load_ecg_csv(ecg_path, fs_expected=int(meta["fs_ecg_hz"]), allow_any_fs=allow_any_fs)
    bp = load_bp_csv(bp_path)
    return Recording(subject_id=str(meta["subject_id"]), ga_weeks=int(meta["ga_weeks"]),
                     ecg=ecg, bp=bp, outcome=int(meta["ccs"]))


def recording_duration(rec: Recording) -> float:
    """Common analyzable duration in seconds: min of the two channel spans."""
    return min(rec.ecg.duration_s, rec.bp.duration_s)


def write_recording(rec: Recording, ecg_path, bp_path, meta_path):
    """Write a recording back to the CSV/JSON formats, bit-exact on reload."""
    fs = rec.ecg.fs_hz
    with open(ecg_path, "w") as fh:
        fh.write("t_s,ecg_mv\n")
        fh.writelines(
            f"{i / fs!r},{float(v)!r}\n" for i, v in enumerate(rec.ecg.samples))
    with open(bp_path, "w") as fh:
        fh.write("t_s,sp_mmhg,dp_mmhg\n")
        for i in range(len(rec.bp.sp_mmhg)):
            if rec.bp.missing[i]:
                continue
            fh.write(f"{float(i)!r},{float(rec.bp.sp_mmhg[i])!r},"
                     f"{float(rec.bp.dp_mmhg[i])!r}\n")
    with open(meta_path, "w") as fh:
        json.dump({"subject_id": rec.subject_id, "ga_weeks": rec.ga_weeks,
                   "fs_ecg_hz": rec.ecg.fs_hz, "ccs": rec.outcome}, fh, indent=2)
        fh.write("\n")


def load_manifest(path, allow_any_fs=False) -> CohortDataset:
    with open(path) as fh:
        entries = json.load(fh)
    if not isinstance(entries, list) or not entries:
        raise ValidationError(f"{path}: manifest must be a non-empty JSON list")
    base = os.path.dirname(os.path.abspath(path))
    recs = []
    for ent in entries:
        paths = [os.path.join(base, ent[k]) if not os.path.isabs(ent[k]) else ent[k]
                 for k in ("ecg", "bp", "meta")]
        recs.append(load_recording(*paths, allow_any_fs=allow_any_fs))
    return CohortDataset(recordings=recs, provenance=f"manifest:{os.path.basename(path)}")
