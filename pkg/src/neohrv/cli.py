"""Command-line entry point wiring the pipeline stages together.

Exit codes: 0 success, 2 usage error, 3 data validation failure,
4 numeric/degenerate failure.
"""

from __future__ import annotations

import functools
import json
import os
import sys

import click
import numpy as np
import pandas as pd

from . import bp as bp_mod
from .epochs import RrSeries, build_rr, correct_artifacts, segment_epochs
from .errors import DegenerateError, LeakageError, ValidationError
from .evaluate import run_loo
from .features import FEATURE_ORDER, SpectralConfig, extract_features
from .gbdt import GbdtModel, Hyperparameters, predict_proba, train as gbdt_train
from .model import load_bp_csv, load_ecg_csv, write_recording
from .pipeline import PipelineConfig, run_pipeline
from .qrs import detect_r_peaks
from .stats import auc_table, kde_pdf, pca_project
from .synth import SynthSpec, synth_cohort


def handle_errors(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (DegenerateError, LeakageError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(4)
    return wrapper


def _read_table(path):
    return pd.read_csv(path, comment="#")


@click.group()
def main():
    """HRV / blood-pressure analysis toolkit for preterm outcome prediction."""


@main.command()
@click.option("--spec", "spec_path", type=click.Path(exists=True), default=None,
              help="JSON file of SynthSpec fields (defaults used when omitted).")
@click.option("--seed", type=int, default=0)
@click.option("--out-dir", required=True, type=click.Path())
@handle_errors
def synth(spec_path, seed, out_dir):
    """Generate a synthetic cohort with ground truth files."""
    fields = {}
    if spec_path:
        with open(spec_path) as fh:
            fields = json.load(fh)
    fields.setdefault("seed", seed)
    fields = {k: tuple(v) if isinstance(v, list) else v for k, v in fields.items()}
    if "modulation" in fields:
        fields["modulation"] = tuple(tuple(c) for c in fields["modulation"])
    if "dip_schedule" in fields:
        fields["dip_schedule"] = tuple(tuple(d) for d in fields["dip_schedule"])
    spec = SynthSpec(**fields)
    cohort, truths = synth_cohort(spec)
    os.makedirs(out_dir, exist_ok=True)
    manifest = []
    for rec, truth in zip(cohort.recordings, truths):
        sid = rec.subject_id
        write_recording(rec, os.path.join(out_dir, f"{sid}_ecg.csv"),
                        os.path.join(out_dir, f"{sid}_bp.csv"),
                        os.path.join(out_dir, f"{sid}_meta.json"))
        with open(os.path.join(out_dir, f"{sid}_truth.json"), "w") as fh:
            json.dump(truth, fh, sort_keys=True)
            fh.write("\n")
        manifest.append({"ecg": f"{sid}_ecg.csv", "bp": f"{sid}_bp.csv",
                         "meta": f"{sid}_meta.json"})
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=1)
        fh.write("\n")
    click.echo(f"wrote {len(manifest)} subjects to {out_dir}")


@main.command()
@click.option("--ecg", "ecg_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def rpeaks(ecg_path, out_path):
    """Detect R peaks in an ECG CSV."""
    ecg = load_ecg_csv(ecg_path)
    peaks = detect_r_peaks(ecg)
    pd.DataFrame({"peak_index": peaks.peak_indices,
                  "peak_time_s": peaks.peak_times}).to_csv(out_path, index=False)
    click.echo(f"{len(peaks)} peaks, detection quality {peaks.detection_quality:.3f}")


def _rr_from_peaks_csv(path):
    df = _read_table(path)
    if "peak_time_s" not in df.columns:
        raise ValidationError(f"{path}: expected a 'peak_time_s' column")
    times = df["peak_time_s"].to_numpy(dtype=float)

    class _Peaks:
        peak_times = times

        def __len__(self):
            return len(times)

    return correct_artifacts(build_rr(_Peaks()))


@main.command()
@click.option("--rr", "rr_path", required=True, type=click.Path(exists=True),
              help="Peak-times CSV (output of `neohrv rpeaks`).")
@click.option("--subject-id", default="", help="Subject id stamped on epochs.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--intervals-out", type=click.Path(), default=None,
              help="Optional long-format per-interval CSV for `neohrv features`.")
@handle_errors
def epochs(rr_path, subject_id, out_path, intervals_out):
    """Build artifact-corrected 5-minute epochs from detected peak times."""
    rr = _rr_from_peaks_csv(rr_path)
    eps = segment_epochs(rr, rr.beat_times[-1], subject_id=subject_id)
    rows = [{"subject_id": ep.subject_id, "epoch_index": ep.epoch_index,
             "t_start_s": ep.t_start_s, "n_beats": len(ep.rr.rr_s),
             "corrected_frac": ep.corrected_frac, "valid": ep.valid,
             "rejection_reason": ep.rejection_reason or ""} for ep in eps]
    pd.DataFrame(rows).to_csv(out_path, index=False)
    if intervals_out:
        recs = []
        for ep in eps:
            if not ep.valid:
                continue
            for j in range(len(ep.rr.rr_s)):
                recs.append({"subject_id": ep.subject_id,
                             "epoch_index": ep.epoch_index,
                             "beat_time_s": ep.rr.beat_times[j + 1],
                             "rr_s": ep.rr.rr_s[j],
                             "corrected": bool(ep.rr.corrected_mask[j])})
        pd.DataFrame(recs).to_csv(intervals_out, index=False)
    click.echo(f"{sum(ep.valid for ep in eps)}/{len(eps)} valid epochs")


@main.command()
@click.option("--bp", "bp_path", required=True, type=click.Path(exists=True))
@click.option("--ga", "ga_weeks", required=True, type=int)
@click.option("--margin", type=float, default=4.0)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def episodes(bp_path, ga_weeks, margin, out_path):
    """Detect hypotensive episodes (MAP < GA + margin for >= 5 min)."""
    bpc = load_bp_csv(bp_path)
    eps = bp_mod.detect_episodes(bp_mod.compute_map(bpc), ga_weeks, margin=margin)
    payload = [{"t_start_s": e.t_start_s, "t_end_s": e.t_end_s,
                "min_map_mmhg": e.min_map_mmhg,
                "threshold_mmhg": e.threshold_mmhg} for e in eps]
    with open(out_path, "w") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")
    click.echo(f"{len(eps)} episodes")


@main.command()
@click.option("--epochs", "intervals_path", required=True, type=click.Path(exists=True),
              help="Per-interval CSV from `neohrv epochs --intervals-out`.")
@click.option("--bp", "bp_path", type=click.Path(exists=True), default=None,
              help="BP CSV for hypotension tagging (with --ga).")
@click.option("--ga", "ga_weeks", type=int, default=None)
@click.option("--resample-hz", type=float, default=256.0)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def features(intervals_path, bp_path, ga_weeks, resample_hz, out_path):
    """Compute the fifteen HRV features per epoch."""
    df = _read_table(intervals_path)
    cfg = SpectralConfig(resample_hz=resample_hz)
    map_series = None
    if bp_path:
        if ga_weeks is None:
            raise ValidationError("--bp requires --ga")
        map_series = bp_mod.compute_map(load_bp_csv(bp_path))
    rows = []
    for (sid, e_idx), grp in df.groupby(["subject_id", "epoch_index"], sort=True):
        rr_vals = grp["rr_s"].to_numpy(dtype=float)
        end_times = grp["beat_time_s"].to_numpy(dtype=float)
        beats = np.concatenate(([end_times[0] - rr_vals[0]], end_times))
        rr = RrSeries(rr_s=rr_vals, beat_times=beats,
                      corrected_mask=grp["corrected"].to_numpy(dtype=bool))
        from .epochs import Epoch, EPOCH_S
        t0 = EPOCH_S * int(e_idx)
        ep = Epoch(str(sid), int(e_idx), t0, t0 + EPOCH_S, rr,
                   rr_vals / float(np.mean(rr_vals)), True, None)
        hypo = False
        if map_series is not None:
            hypo = bp_mod.tag_epochs([ep], map_series, ga_weeks)[0][1].hypotensive
        row = {"subject_id": str(sid), "epoch_index": int(e_idx), "hypotensive": hypo}
        row.update(extract_features(ep, cfg).as_dict())
        rows.append(row)
    pd.DataFrame(rows).to_csv(out_path, index=False)
    click.echo(f"{len(rows)} epochs featurized")


@main.command("auc-table")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None,
              help="JSON {subject_id: 0|1}; defaults to a 'label' column.")
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def auc_table_cmd(features_path, labels_path, out_path):
    """Per-feature AUC over original and hypotensive epoch subsets."""
    table = _read_table(features_path)
    labels = _labels_for(table, labels_path)
    orig = auc_table(table, labels, "original")
    hypo = auc_table(table, labels, "hypotensive")
    merged = orig.merge(hypo, on="feature_name", suffixes=("_original", "_hypotensive"))
    if out_path.endswith(".json"):
        merged.to_json(out_path, orient="records", indent=1)
    else:
        merged.to_csv(out_path, index=False)
    click.echo(f"wrote {out_path}")


def _labels_for(table, labels_path):
    if labels_path:
        with open(labels_path) as fh:
            return {str(k): int(v) for k, v in json.load(fh).items()}
    if "label" not in table.columns:
        raise ValidationError("no --labels file and no 'label' column in features")
    return dict(zip(table["subject_id"].astype(str), table["label"].astype(int)))


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--feature", "feature_name", default="RMSSD")
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def kde(features_path, feature_name, out_path):
    """Kernel density curve of one feature (grid, density columns)."""
    table = _read_table(features_path)
    if feature_name not in table.columns:
        raise ValidationError(f"unknown feature '{feature_name}'")
    vals = table[feature_name].to_numpy(dtype=float)
    lo, hi = float(np.min(vals)), float(np.max(vals))
    pad = 0.1 * (hi - lo) if hi > lo else 1.0
    grid = np.linspace(lo - pad, hi + pad, 256)
    pd.DataFrame({"grid": grid, "density": kde_pdf(vals, grid)}).to_csv(
        out_path, index=False)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--k", type=int, default=3)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def pca(features_path, k, out_path):
    """PCA projection of the fifteen-feature matrix."""
    table = _read_table(features_path)
    proj, fractions = pca_project(table[FEATURE_ORDER].to_numpy(dtype=float), k=k)
    out = pd.DataFrame({"subject_id": table["subject_id"],
                        "epoch_index": table["epoch_index"]})
    for j in range(proj.shape[1]):
        out[f"pc{j + 1}"] = proj[:, j]
        out[f"explained_frac_{j + 1}"] = fractions[j]
    out.to_csv(out_path, index=False)
    click.echo(f"wrote {out_path}")


@main.command("train")
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None)
@click.option("--hp", "hp_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--model-out", "model_out", required=True, type=click.Path())
@handle_errors
def train_cmd(features_path, labels_path, hp_path, seed, model_out):
    """Train the boosted-tree classifier on an epoch feature table."""
    table = _read_table(features_path)
    labels = _labels_for(table, labels_path)
    hp = Hyperparameters()
    if hp_path:
        with open(hp_path) as fh:
            hp = Hyperparameters.from_dict(json.load(fh))
    X = table[FEATURE_ORDER].to_numpy(dtype=float)
    y = table["subject_id"].astype(str).map(labels).to_numpy(dtype=float)
    model = gbdt_train(X, y, hp=hp, seed=seed, feature_names=FEATURE_ORDER)
    with open(model_out, "w") as fh:
        fh.write(model.to_json())
        fh.write("\n")
    click.echo(f"trained {len(model.trees)} stages -> {model_out}")


@main.command()
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--features", "features_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def predict(model_path, features_path, out_path):
    """Per-epoch abnormal-outcome probabilities from a trained model."""
    with open(model_path) as fh:
        model = GbdtModel.from_json(fh.read())
    table = _read_table(features_path)
    probs = predict_proba(model, table[FEATURE_ORDER].to_numpy(dtype=float))
    out = table[["subject_id", "epoch_index"]].copy()
    out["prob_abnormal"] = probs
    out.to_csv(out_path, index=False)
    click.echo(f"wrote {out_path}")


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--subset", type=click.Choice(["original", "hypotensive"]),
              default="hypotensive")
@click.option("--grid", "grid_path", type=click.Path(exists=True), default=None)
@click.option("--seed", type=int, default=0)
@click.option("--out", "out_path", required=True, type=click.Path())
@handle_errors
def loo(manifest_path, subset, grid_path, seed, out_path):
    """Leave-one-subject-out evaluation from a cohort manifest."""
    from .model import load_manifest
    from .pipeline import build_feature_table
    cohort = load_manifest(manifest_path)
    table, labels, _ = build_feature_table(cohort)
    grid = None
    if grid_path:
        with open(grid_path) as fh:
            grid = [Hyperparameters.from_dict(d) for d in json.load(fh)]
    report = run_loo(table, labels, subset=subset,
                     grid=grid if grid else [Hyperparameters()], seed=seed)
    with open(out_path, "w") as fh:
        json.dump(report.as_dict(), fh, sort_keys=True, indent=1)
        fh.write("\n")
    imp_path = os.path.splitext(out_path)[0] + "_importance.csv"
    pd.DataFrame({"feature_name": FEATURE_ORDER,
                  "mean_importance": [report.mean_importance[f] for f in FEATURE_ORDER]}
                 ).to_csv(imp_path, index=False)
    click.echo(f"subject-level AUC {report.auc:.3f}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--out-dir", type=click.Path(), default=None)
@click.option("--subset", type=click.Choice(["original", "hypotensive"]), default=None)
@click.option("--seed", type=int, default=None)
@handle_errors
def run(config_path, out_dir, subset, seed):
    """Run the full pipeline and write all plot-ready artifacts."""
    if config_path is None:
        raise click.UsageError("missing --config")
    with open(config_path) as fh:
        cfg_dict = json.load(fh)
    if out_dir is not None:
        cfg_dict["out_dir"] = out_dir
    if subset is not None:
        cfg_dict["subset"] = subset
    if seed is not None:
        cfg_dict["seed"] = seed
    config = PipelineConfig.from_dict(cfg_dict)
    paths = run_pipeline(config)
    for name, path in paths.items():
        click.echo(f"{name}: {path}")


if __name__ == "__main__":
    main()
