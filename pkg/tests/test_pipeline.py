"""End-to-end pipeline: artifact set, embedded config hash, determinism."""

import json
import os

import numpy as np
import pandas as pd
import pytest

from neohrv.errors import ValidationError
from neohrv.features import FEATURE_ORDER
from neohrv.pipeline import (ARTIFACTS, PipelineConfig, build_feature_table,
                             run_pipeline)

SMALL_SYNTH = {
    "n_subjects": 8,
    "n_healthy": 4,
    "duration_s": 1800.0,
    "dip_schedule": [[1, 2]],
}

SMALL_GRID = [{"eta": 0.3, "max_depth": 2, "n_stages": 20, "min_child": 2}]


def _config(out_dir, **over):
    base = dict(out_dir=str(out_dir), synth=SMALL_SYNTH, subset="hypotensive",
                resample_hz=4.0, grid=SMALL_GRID, seed=0)
    base.update(over)
    return PipelineConfig(**base)


def test_feature_table_shape(small_feature_table, small_cohort):
    spec, cohort, _ = small_cohort
    table, labels, episode_info = small_feature_table
    assert set(FEATURE_ORDER) <= set(table.columns)
    assert {"subject_id", "epoch_index", "hypotensive", "label"} <= set(table.columns)
    assert set(labels) == set(table["subject_id"].unique())
    assert len(episode_info) == spec.n_subjects
    assert all(info["included"] for info in episode_info.values())
    # every recording yields at most duration/300 valid epochs
    per_subject = table.groupby("subject_id").size()
    assert (per_subject <= spec.duration_s // 300).all()


def test_hypotensive_epochs_align_with_dips(small_feature_table, small_cohort):
    spec, _, _ = small_cohort
    table, _, _ = small_feature_table
    dip_epochs = {start + k for start, length in spec.dip_schedule
                  for k in range(length)}
    hypo = table[table["hypotensive"]]
    assert set(hypo["epoch_index"].unique()) <= dip_epochs


def test_config_hash_stable_and_sensitive(tmp_path):
    c1 = _config(tmp_path)
    c2 = _config(tmp_path)
    assert c1.config_hash() == c2.config_hash()
    assert c1.config_hash() != _config(tmp_path, seed=1).config_hash()
    assert len(c1.config_hash()) == 16


def test_run_pipeline_writes_all_artifacts(tmp_path):
    paths = run_pipeline(_config(tmp_path / "a"))
    assert set(paths) == set(ARTIFACTS)
    h = _config(tmp_path / "a").config_hash()
    for name, path in paths.items():
        assert os.path.exists(path)
        with open(path) as fh:
            head = fh.read(4096)
        assert h in head


def test_run_pipeline_is_byte_deterministic(tmp_path):
    p1 = run_pipeline(_config(tmp_path / "r1"))
    p2 = run_pipeline(_config(tmp_path / "r2"))
    for name in ARTIFACTS:
        with open(p1[name], "rb") as fh:
            b1 = fh.read()
        with open(p2[name], "rb") as fh:
            b2 = fh.read()
        assert b1 == b2, f"{name} differs between identical runs"


def test_loo_report_contents(tmp_path):
    paths = run_pipeline(_config(tmp_path / "rep"))
    with open(paths["loo_report.json"]) as fh:
        report = json.load(fh)
    assert report["subset"] == "hypotensive"
    assert 0.0 <= report["auc"] <= 1.0
    assert report["leakage_checks"] > 0
    assert set(report["subject_probs"]) == set(report["subject_labels"])
    assert abs(sum(report["mean_importance"].values()) - 1.0) < 1e-6


def test_auc_table_artifact_well_formed(tmp_path):
    paths = run_pipeline(_config(tmp_path / "auc"))
    table = pd.read_csv(paths["auc_table.csv"], comment="#")
    assert len(table) == 15
    assert set(table["delta"]) <= {"up", "down"}
    for col in ("auc_corrected_original", "auc_corrected_hypotensive"):
        assert ((table[col] >= 0.5) & (table[col] <= 1.0)).all()


def test_non_dippers_are_excluded(tmp_path):
    synth = dict(SMALL_SYNTH, n_dippers=6)
    paths = run_pipeline(_config(tmp_path / "excl", synth=synth))
    with open(paths["episodes.json"]) as fh:
        info = json.load(fh)["subjects"]
    included = [s for s, v in info.items() if v["included"]]
    assert len(included) == 6
    table = pd.read_csv(paths["features.csv"], comment="#")
    assert set(table["subject_id"].unique()) == set(included)


def test_config_requires_a_source(tmp_path):
    with pytest.raises(ValidationError, match="manifest or a synth"):
        run_pipeline(PipelineConfig(out_dir=str(tmp_path), synth=None))


def test_unknown_subset_rejected(tmp_path):
    with pytest.raises(ValidationError, match="subset"):
        run_pipeline(_config(tmp_path, subset="weird"))
