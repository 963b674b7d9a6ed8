"""Per-feature predictive-power AUC, KDE density curves, and PCA projection.

The positive class is always the abnormal outcome (label 1). AUC is the
Mann-Whitney pair statistic: pairs with pos > neg count 1, ties count 1/2,
divided by n_pos * n_neg.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd
from scipy.stats import rankdata

from .errors import DegenerateError, ValidationError
from .features import FEATURE_ORDER


@dataclass(frozen=True)
class AucResult:
    feature_name: str
    auc: float            # raw oriented value (positive class = abnormal)
    auc_corrected: float  # max(auc, 1 - auc), the Table-style report value
    n_pos: int
    n_neg: int


def auc(scores_pos, scores_neg) -> float:
    """Mann-Whitney AUC of positive vs negative scores, ties counting 1/2."""
    pos = np.asarray(scores_pos, dtype=float)
    neg = np.asarray(scores_neg, dtype=float)
    if len(pos) == 0 or len(neg) == 0:
        raise DegenerateError("auc needs at least one score on each side")
    ranks = rankdata(np.concatenate([pos, neg]), method="average")
    u = float(np.sum(ranks[: len(pos)])) - len(pos) * (len(pos) + 1) / 2.0
    return u / (len(pos) * len(neg))


def auc_table(features: pd.DataFrame, labels: dict, subset: str) -> pd.DataFrame:
    """One AUC row per feature over epochs; each epoch inherits its subject's
    label. `subset` is 'original' (all valid epochs) or 'hypotensive'."""
    if subset not in ("original", "hypotensive"):
        raise ValidationError(f"unknown subset '{subset}'")
    df = features
    if subset == "hypotensive":
        df = df[df["hypotensive"]]
    if len(df) == 0:
        raise DegenerateError(f"subset '{subset}' contains no epochs")
    y = df["subject_id"].map(labels)
    if y.isna().any():
        missing = sorted(df.loc[y.isna(), "subject_id"].unique())
        raise ValidationError(f"missing labels for subjects: {missing}")
    pos_mask = (y == 1).to_numpy()
    rows = []
    for name in FEATURE_ORDER:
        vals = df[name].to_numpy(dtype=float)
        a = auc(vals[pos_mask], vals[~pos_mask])
        rows.append(AucResult(name, a, max(a, 1.0 - a),
                              int(pos_mask.sum()), int((~pos_mask).sum())))
    return pd.DataFrame([r.__dict__ for r in rows])


def kde_pdf(values, grid) -> np.ndarray:
    """Gaussian KDE with the Silverman rule-of-thumb bandwidth."""
    x = np.asarray(values, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if len(x) < 10:
        raise ValidationError("kde_pdf needs at least 10 values")
    sd = float(np.std(x, ddof=1))
    iqr = float(np.subtract(*np.percentile(x, [75, 25])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread == 0.0:
        # zero variance: delta-like spike at the common value
        h = 1e-12
    else:
        h = 0.9 * spread * len(x) ** (-0.2)
    z = (grid[:, None] - x[None, :]) / h
    dens = np.mean(np.exp(-0.5 * z * z), axis=1) / (h * np.sqrt(2.0 * np.pi))
    return dens


def pca_project(features: np.ndarray, k: int = 3):
    """Top-k PCA of the correlation matrix of z-scored columns.

    Returns (projection n x k, explained-variance fractions). Sign convention:
    the largest-magnitude loading of each component is positive.
    """
    x = np.asarray(features, dtype=float)
    n, p = x.shape
    if n < k + 1:
        raise ValidationError(f"pca needs at least k+1={k + 1} rows, got {n}")
    mu = x.mean(axis=0)
    sd = x.std(axis=0)
    sd_safe = np.where(sd > 0, sd, 1.0)
    z = (x - mu) / sd_safe
    corr = z.T @ z / n
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]
    k_eff = min(k, int(np.sum(eigvals > 1e-12 * max(eigvals[0], 1.0))))
    for j in range(p):
        lead = np.argmax(np.abs(eigvecs[:, j]))
        if eigvecs[lead, j] < 0:
            eigvecs[:, j] = -eigvecs[:, j]
    fractions = eigvals / np.sum(eigvals)
    return z @ eigvecs[:, :k_eff], fractions[:k_eff]
