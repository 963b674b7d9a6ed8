"""Subject-independent evaluation: leave-one-subject-out with nested
subject-preserving 5x2 cross-validation for hyperparameter selection.

Inputs are the epoch feature table (one row per valid epoch, columns
``subject_id``, ``hypotensive`` plus the fifteen feature columns) and a
per-subject label map. A hard leakage guard raises if any test subject's
epochs ever reach a training set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from .errors import DegenerateError, LeakageError, ValidationError
from .features import FEATURE_ORDER
from .gbdt import GbdtModel, Hyperparameters, aggregate_recording, feature_importance, \
    predict_proba, train
from .stats import auc

DEFAULT_GRID = tuple(
    Hyperparameters(eta=eta, max_depth=depth, n_stages=k, lam=1.0, gamma=0.0)
    for eta in (0.1, 0.3) for depth in (2, 3, 4) for k in (50, 100, 200))


@dataclass(frozen=True)
class FoldPlan:
    folds: list  # list of (train_ids tuple, test_ids tuple)
    kind: str    # "loo" | "cv_5x2"


@dataclass
class EvaluationReport:
    subset: str
    subject_probs: dict          # subject_id -> aggregated probability
    subject_labels: dict
    auc: float
    fold_hyperparameters: dict   # held-out subject_id -> hp dict
    mean_importance: dict        # feature name -> mean normalized gain
    excluded_subjects: list
    seed: int
    leakage_checks: int          # number of disjointness assertions executed

    def as_dict(self) -> dict:
        return {"subset": self.subset, "subject_probs": self.subject_probs,
                "subject_labels": self.subject_labels, "auc": self.auc,
                "fold_hyperparameters": self.fold_hyperparameters,
                "mean_importance": self.mean_importance,
                "excluded_subjects": self.excluded_subjects,
                "seed": self.seed, "leakage_checks": self.leakage_checks}


def make_loo_folds(subjects) -> FoldPlan:
    subjects = list(subjects)
    if len(subjects) < 3:
        raise ValidationError("leave-one-out needs at least 3 subjects")
    folds = [(tuple(s for s in subjects if s != held), (held,)) for held in subjects]
    return FoldPlan(folds=folds, kind="loo")


def make_5x2_folds(subjects, seed) -> FoldPlan:
    """Five seeded shuffles, each split into subject-level halves; both
    orientations of every split are used, giving 10 (train, validate) pairs."""
    subjects = list(subjects)
    if len(subjects) < 4:
        raise ValidationError("5x2 CV needs at least 4 subjects")
    rng = np.random.default_rng(seed)
    folds = []
    for _ in range(5):
        perm = list(rng.permutation(subjects))
        half = len(perm) // 2
        a, b = tuple(perm[:half]), tuple(perm[half:])
        folds.append((a, b))
        folds.append((b, a))
    return FoldPlan(folds=folds, kind="cv_5x2")


def _assert_disjoint(train_ids, test_ids):
    overlap = set(train_ids) & set(test_ids)
    if overlap:
        raise LeakageError(f"subjects on both sides of a fold: {sorted(overlap)}")


def _split_xy(table: pd.DataFrame, labels: dict, ids):
    rows = table[table["subject_id"].isin(ids)]
    X = rows[FEATURE_ORDER].to_numpy(dtype=float)
    y = rows["subject_id"].map(labels).to_numpy(dtype=float)
    return rows, X, y


def _subject_level_auc(rows: pd.DataFrame, probs: np.ndarray, labels: dict) -> float:
    agg = {}
    for sid, grp in rows.groupby("subject_id", sort=True):
        agg[sid] = aggregate_recording(probs[rows.index.get_indexer(grp.index)])
    pos = [p for s, p in agg.items() if labels[s] == 1]
    neg = [p for s, p in agg.items() if labels[s] == 0]
    if not pos or not neg:
        raise DegenerateError("single-class validation fold")
    return auc(pos, neg)


def select_hyperparameters(table, labels, subjects, grid, seed):
    """Pick the grid point maximizing mean subject-level validation AUC over
    the 10 nested 5x2 pairs. Ties prefer the simpler model: smallest stage
    count, then smallest depth, then largest lambda. Returns
    (Hyperparameters, per-point mean scores, leakage check count)."""
    grid = list(grid)
    if not grid:
        raise ValidationError("empty hyperparameter grid")
    checks = 0
    if len(grid) == 1:
        return grid[0], [None], checks
    plan = make_5x2_folds(subjects, seed)
    scores = []
    for hp in grid:
        vals = []
        for train_ids, val_ids in plan.folds:
            _assert_disjoint(train_ids, val_ids)
            checks += 1
            tr_rows, Xtr, ytr = _split_xy(table, labels, train_ids)
            va_rows, Xva, _ = _split_xy(table, labels, val_ids)
            if len(set(ytr)) < 2 or len(va_rows) == 0:
                continue
            model = train(Xtr, ytr, hp=hp, feature_names=FEATURE_ORDER)
            probs = predict_proba(model, Xva)
            try:
                vals.append(_subject_level_auc(va_rows.reset_index(drop=True),
                                               probs, labels))
            except DegenerateError:
                continue
        if not vals:
            scores.append(float("-inf"))
        else:
            scores.append(float(np.mean(vals)))
    if all(s == float("-inf") for s in scores):
        raise DegenerateError("all nested validation pairs were degenerate")
    order = sorted(range(len(grid)),
                   key=lambda i: (-scores[i], grid[i].n_stages,
                                  grid[i].max_depth, -grid[i].lam))
    return grid[order[0]], scores, checks


def run_loo(table: pd.DataFrame, labels: dict, subset: str,
            grid=DEFAULT_GRID, seed: int = 0) -> EvaluationReport:
    """Leave-one-subject-out evaluation on the chosen epoch subset."""
    if subset not in ("original", "hypotensive"):
        raise ValidationError(f"unknown subset '{subset}'")
    df = table if subset == "original" else table[table["hypotensive"]]
    present = sorted(df["subject_id"].unique())
    all_subjects = sorted(table["subject_id"].unique())
    excluded = [s for s in all_subjects if s not in present]
    for s in present:
        if s not in labels:
            raise ValidationError(f"no label for subject {s}")
    plan = make_loo_folds(present)

    checks = 0
    subject_probs = {}
    fold_hp = {}
    importances = []
    for train_ids, test_ids in plan.folds:
        _assert_disjoint(train_ids, test_ids)
        checks += 1
        held = test_ids[0]
        hp, _, nested_checks = select_hyperparameters(
            df, labels, list(train_ids), grid, seed)
        checks += nested_checks
        tr_rows, Xtr, ytr = _split_xy(df, labels, train_ids)
        if len(set(ytr)) < 2:
            raise DegenerateError(f"single-class training set for held-out {held}")
        if held in set(tr_rows["subject_id"]):
            raise LeakageError(f"held-out subject {held} found in training rows")
        checks += 1
        model = train(Xtr, ytr, hp=hp, feature_names=FEATURE_ORDER)
        te_rows, Xte, _ = _split_xy(df, labels, test_ids)
        subject_probs[held] = aggregate_recording(predict_proba(model, Xte))
        fold_hp[held] = hp.as_dict()
        importances.append(feature_importance(model))

    pos = [p for s, p in subject_probs.items() if labels[s] == 1]
    neg = [p for s, p in subject_probs.items() if labels[s] == 0]
    if not pos or not neg:
        raise DegenerateError("cohort has a single outcome class")
    mean_imp = np.mean(np.stack(importances), axis=0)
    return EvaluationReport(
        subset=subset,
        subject_probs={s: float(p) for s, p in subject_probs.items()},
        subject_labels={s: int(labels[s]) for s in present},
        auc=float(auc(pos, neg)),
        fold_hyperparameters=fold_hp,
        mean_importance={name: float(v) for name, v in zip(FEATURE_ORDER, mean_imp)},
        excluded_subjects=excluded,
        seed=int(seed),
        leakage_checks=checks)
