"""End-to-end pipeline: cohort -> R peaks -> epochs -> episodes -> features
-> AUC table -> KDE/PCA exports -> LOO evaluation.

Every output artifact embeds the config hash and seed (CSV header comment or
JSON fields), and two runs with the same config produce byte-identical trees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from . import bp as bp_mod
from .epochs import build_rr, correct_artifacts, segment_epochs
from .errors import DegenerateError, ValidationError
from .evaluate import run_loo
from .features import FEATURE_ORDER, SpectralConfig, extract_features
from .gbdt import Hyperparameters
from .model import CohortDataset, load_manifest, recording_duration
from .qrs import detect_r_peaks
from .stats import auc_table, kde_pdf, pca_project
from .synth import SynthSpec, synth_cohort

ARTIFACTS = ("features.csv", "auc_table.csv", "kde_rmssd.csv", "pca.csv",
             "importance.csv", "loo_report.json", "episodes.json")


@dataclass
class PipelineConfig:
    out_dir: str = "out"
    manifest: str | None = None
    synth: dict | None = None          # SynthSpec fields; used when no manifest
    subset: str = "hypotensive"
    margin_mmhg: float = 4.0
    min_episode_s: float = 300.0
    resample_hz: float = 256.0
    # min_child is kept high so leaves pool epochs from several subjects,
    # which is what makes the model transfer across subjects in LOO
    grid: list = field(default_factory=lambda: [
        {"eta": 0.3, "max_depth": 2, "n_stages": 50, "min_child": 25},
        {"eta": 0.3, "max_depth": 3, "n_stages": 50, "min_child": 25},
    ])
    seed: int = 0

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def identity_dict(self) -> dict:
        """Everything that determines the outputs; out_dir is a location,
        not an input, so identical runs to different directories agree."""
        d = self.as_dict()
        d.pop("out_dir")
        return d

    def config_hash(self) -> str:
        blob = json.dumps(self.identity_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    @staticmethod
    def from_dict(d: dict) -> "PipelineConfig":
        return PipelineConfig(**d)


def build_feature_table(cohort: CohortDataset, margin=4.0, min_episode_s=300.0,
                        resample_hz=256.0):
    """Run detection, epoching, BP tagging and feature extraction for every
    included subject. Returns (feature DataFrame, labels, per-subject episode
    info). Subjects without a qualifying hypotensive episode are excluded."""
    cfg = SpectralConfig(resample_hz=resample_hz)
    rows = []
    labels = {}
    episode_info = {}
    for rec in cohort.recordings:
        map_series = bp_mod.compute_map(rec.bp)
        episodes = bp_mod.detect_episodes(map_series, rec.ga_weeks, margin=margin,
                                          min_duration_s=min_episode_s)
        included = len(episodes) >= 1
        episode_info[rec.subject_id] = {
            "included": included,
            "episodes": [{"t_start_s": e.t_start_s, "t_end_s": e.t_end_s,
                          "min_map_mmhg": e.min_map_mmhg,
                          "threshold_mmhg": e.threshold_mmhg} for e in episodes],
        }
        if not included:
            continue
        labels[rec.subject_id] = rec.outcome
        peaks = detect_r_peaks(rec.ecg)
        if len(peaks) < 2:
            continue
        rr = correct_artifacts(build_rr(peaks))
        eps = segment_epochs(rr, recording_duration(rec), subject_id=rec.subject_id)
        tagged = bp_mod.tag_epochs(eps, map_series, rec.ga_weeks, margin=margin)
        for ep, tag in tagged:
            if not ep.valid:
                continue
            fv = extract_features(ep, cfg)
            row = {"subject_id": rec.subject_id, "epoch_index": ep.epoch_index,
                   "hypotensive": tag.hypotensive,
                   "bp_insufficient": tag.bp_insufficient,
                   "label": rec.outcome}
            row.update(fv.as_dict())
            rows.append(row)
    if not rows:
        raise DegenerateError("no valid epochs in the cohort")
    table = pd.DataFrame(rows)
    return table, labels, episode_info


def _write_csv(df: pd.DataFrame, path, header_line):
    with open(path, "w") as fh:
        fh.write(header_line + "\n")
        df.to_csv(fh, index=False, lineterminator="\n")


def _write_json(payload: dict, path, cfg_hash, seed):
    payload = dict(payload)
    payload["config_hash"] = cfg_hash
    payload["seed"] = seed
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=1)
        fh.write("\n")


def _combined_auc_table(table, labels):
    orig = auc_table(table, labels, "original")
    hypo = auc_table(table, labels, "hypotensive")
    merged = orig.merge(hypo, on="feature_name", suffixes=("_original", "_hypotensive"))
    merged["delta"] = np.where(
        merged["auc_corrected_hypotensive"] >= merged["auc_corrected_original"],
        "up", "down")
    return merged


def _kde_export(table, grid_points=256):
    vals = table["RMSSD"].to_numpy(dtype=float)
    lo, hi = np.min(vals), np.max(vals)
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, grid_points)
    out = []
    subsets = {
        "original": table,
        "normal": table[~table["hypotensive"] & ~table["bp_insufficient"]],
        "hypotensive": table[table["hypotensive"]],
    }
    for subset_name, sub in subsets.items():
        for outcome, cls in (("healthy", 0), ("abnormal", 1)):
            v = sub.loc[sub["label"] == cls, "RMSSD"].to_numpy(dtype=float)
            if len(v) < 10:
                continue
            dens = kde_pdf(v, grid)
            out.append(pd.DataFrame({"subset": subset_name, "outcome": outcome,
                                     "grid": grid, "density": dens}))
    return pd.concat(out, ignore_index=True)


def _pca_export(table):
    out = []
    for subset_name in ("original", "hypotensive"):
        sub = table if subset_name == "original" else table[table["hypotensive"]]
        if len(sub) < 4:
            continue
        proj, fractions = pca_project(sub[FEATURE_ORDER].to_numpy(dtype=float), k=3)
        df = pd.DataFrame({"subset": subset_name,
                           "subject_id": sub["subject_id"].to_numpy(),
                           "epoch_index": sub["epoch_index"].to_numpy(),
                           "label": sub["label"].to_numpy()})
        for j in range(proj.shape[1]):
            df[f"pc{j + 1}"] = proj[:, j]
            df[f"explained_frac_{j + 1}"] = fractions[j]
        out.append(df)
    return pd.concat(out, ignore_index=True)


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the full pipeline; returns {artifact name: path}."""
    if config.subset not in ("original", "hypotensive"):
        raise ValidationError(f"unknown subset '{config.subset}'")
    if config.manifest:
        cohort = load_manifest(config.manifest)
    elif config.synth is not None:
        spec = SynthSpec(**{**config.synth, "seed": config.seed})
        cohort, _ = synth_cohort(spec)
    else:
        raise ValidationError("config needs either a manifest or a synth spec")

    table, labels, episode_info = build_feature_table(
        cohort, margin=config.margin_mmhg, min_episode_s=config.min_episode_s,
        resample_hz=config.resample_hz)

    if config.subset == "hypotensive" and not table["hypotensive"].any():
        missing = sorted(table["subject_id"].unique())
        raise DegenerateError(f"no hypotensive epochs in cohort; subjects: {missing}")

    grid = [Hyperparameters.from_dict(d) for d in config.grid]
    report = run_loo(table, labels, subset=config.subset, grid=grid, seed=config.seed)

    os.makedirs(config.out_dir, exist_ok=True)
    h = config.config_hash()
    header = f"# config_hash={h} seed={config.seed}"
    paths = {name: os.path.join(config.out_dir, name) for name in ARTIFACTS}

    _write_csv(table, paths["features.csv"], header)
    _write_csv(_combined_auc_table(table, labels), paths["auc_table.csv"], header)
    _write_csv(_kde_export(table), paths["kde_rmssd.csv"], header)
    _write_csv(_pca_export(table), paths["pca.csv"], header)
    imp = pd.DataFrame({"feature_name": FEATURE_ORDER,
                        "mean_importance": [report.mean_importance[f]
                                            for f in FEATURE_ORDER]})
    _write_csv(imp, paths["importance.csv"], header)
    _write_json(report.as_dict(), paths["loo_report.json"], h, config.seed)
    _write_json({"subjects": episode_info, "config": config.identity_dict()},
                paths["episodes.json"], h, config.seed)
    return paths
