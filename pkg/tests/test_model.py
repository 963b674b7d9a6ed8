"""Loaders, validation, and round-trip fidelity of the file formats."""

import json

import numpy as np
import pytest

from neohrv.errors import ValidationError
from neohrv.model import (BpChannel, EcgChannel, CohortDataset, Recording,
                          load_bp_csv, load_ecg_csv, load_manifest,
                          load_meta_json, load_recording, recording_duration,
                          write_recording)


def _write_triplet(tmp_path, rec):
    ecg_p = tmp_path / "ecg.csv"
    bp_p = tmp_path / "bp.csv"
    meta_p = tmp_path / "meta.json"
    write_recording(rec, ecg_p, bp_p, meta_p)
    return ecg_p, bp_p, meta_p


def _toy_recording(duration_s=600, fs=256, ga=27, ccs=0, missing=()):
    rng = np.random.default_rng(7)
    samples = rng.normal(0.0, 0.1, size=int(duration_s * fs))
    n_bp = int(duration_s)
    mask = np.zeros(n_bp, dtype=bool)
    mask[list(missing)] = True
    sp = np.full(n_bp, 55.0)
    dp = np.full(n_bp, 30.0)
    bp = BpChannel(sp_mmhg=sp, dp_mmhg=dp, missing=mask)
    return Recording(subject_id="t01", ga_weeks=ga,
                     ecg=EcgChannel(fs_hz=fs, samples=samples), bp=bp, outcome=ccs)


def test_one_hour_recording_has_expected_sample_count(tmp_path):
    rec = _toy_recording(duration_s=3600)
    paths = _write_triplet(tmp_path, rec)
    loaded = load_recording(*paths)
    assert len(loaded.ecg.samples) == 921600
    assert loaded.ecg.fs_hz == 256
    assert loaded.ga_weeks == 27 and loaded.outcome == 0


def test_round_trip_is_bit_exact(tmp_path):
    rec = _toy_recording(duration_s=600, missing=range(100, 130))
    paths = _write_triplet(tmp_path, rec)
    loaded = load_recording(*paths)
    assert np.array_equal(loaded.ecg.samples, rec.ecg.samples)
    ok = ~rec.bp.missing
    assert np.array_equal(loaded.bp.sp_mmhg[ok], rec.bp.sp_mmhg[ok])
    assert np.array_equal(loaded.bp.dp_mmhg[ok], rec.bp.dp_mmhg[ok])


def test_bp_dropout_is_masked(tmp_path):
    rec = _toy_recording(duration_s=600, missing=range(200, 230))
    _, bp_p, _ = _write_triplet(tmp_path, rec)
    bp = load_bp_csv(bp_p)
    assert int(bp.missing.sum()) == 30
    assert bp.missing[200] and bp.missing[229] and not bp.missing[230]


def test_ga_out_of_range_rejected(tmp_path):
    meta_p = tmp_path / "meta.json"
    meta_p.write_text(json.dumps({"subject_id": "x", "ga_weeks": 50,
                                  "fs_ecg_hz": 256, "ccs": 0}))
    with pytest.raises(ValidationError, match="GA out of range"):
        load_meta_json(meta_p)


def test_unsupported_sampling_rate_rejected(tmp_path):
    rec = _toy_recording(duration_s=600)
    ecg_p = tmp_path / "ecg.csv"
    with open(ecg_p, "w") as fh:
        fh.write("t_s,ecg_mv\n")
        for i, v in enumerate(rec.ecg.samples[:200000]):
            fh.write(f"{i / 500.0!r},{float(v)!r}\n")
    with pytest.raises(ValidationError, match="unsupported ECG sampling rate"):
        load_ecg_csv(ecg_p)
    assert load_ecg_csv(ecg_p, allow_any_fs=True).fs_hz == 500


def test_non_uniform_ecg_grid_rejected(tmp_path):
    ecg_p = tmp_path / "ecg.csv"
    t = np.arange(800000) / 256.0
    t[400000] += 1e-3
    with open(ecg_p, "w") as fh:
        fh.write("t_s,ecg_mv\n")
        fh.writelines(f"{float(ti)!r},0.0\n" for ti in t)
    with pytest.raises(ValidationError, match="non-uniform|non-monotone"):
        load_ecg_csv(ecg_p)


def test_bp_timestamps_must_be_integer_grid(tmp_path):
    bp_p = tmp_path / "bp.csv"
    bp_p.write_text("t_s,sp_mmhg,dp_mmhg\n0.0,50,30\n1.5,50,30\n")
    with pytest.raises(ValidationError, match="1 Hz integer grid"):
        load_bp_csv(bp_p)


def test_bp_invariant_dp_le_sp():
    with pytest.raises(ValidationError, match="0 < dp <= sp < 200"):
        BpChannel(sp_mmhg=np.array([40.0]), dp_mmhg=np.array([45.0]),
                  missing=np.array([False]))


def test_recording_duration_is_channel_minimum():
    rec = _toy_recording(duration_s=3600)
    short_bp = BpChannel(sp_mmhg=rec.bp.sp_mmhg[:3500],
                         dp_mmhg=rec.bp.dp_mmhg[:3500],
                         missing=rec.bp.missing[:3500])
    rec2 = Recording(subject_id="t01", ga_weeks=27, ecg=rec.ecg,
                     bp=short_bp, outcome=0)
    assert recording_duration(rec2) == 3500.0


def test_duplicate_subject_ids_rejected():
    rec = _toy_recording()
    with pytest.raises(ValidationError, match="duplicate subject_id"):
        CohortDataset(recordings=[rec, rec])


def test_manifest_loader(tmp_path):
    rec = _toy_recording(duration_s=600)
    _write_triplet(tmp_path, rec)
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps([{"ecg": "ecg.csv", "bp": "bp.csv",
                                     "meta": "meta.json"}]))
    cohort = load_manifest(manifest)
    assert len(cohort.recordings) == 1
    assert cohort.recordings[0].subject_id == "t01"


def test_ecg_sampling_rate_must_match_metadata(tmp_path):
    rec = _toy_recording(duration_s=600)
    ecg_p, bp_p, meta_p = _write_triplet(tmp_path, rec)
    meta = json.loads(meta_p.read_text())
    meta["fs_ecg_hz"] = 1024
    meta_p.write_text(json.dumps(meta))
    with pytest.raises(ValidationError, match="disagrees with metadata"):
        load_recording(ecg_p, bp_p, meta_p)
