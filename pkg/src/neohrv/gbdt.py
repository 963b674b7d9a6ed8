"""Gradient-boosted regression trees for binary outcome probabilities.

Second-order boosting on the logistic loss with a regularized objective:
per-leaf penalty gamma and L2 leaf-weight penalty lambda. Split search is
exact greedy over all features and midpoint thresholds; gain ties break to
the lowest feature index, then the lowest threshold, so training is fully
deterministic for a given dataset and hyperparameters.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError, ValidationError

PROB_EPS = 1e-15


@dataclass(frozen=True)
class Hyperparameters:
    eta: float = 0.3
    max_depth: int = 3
    n_stages: int = 100
    lam: float = 1.0         # L2 penalty on leaf weights
    gamma: float = 0.0       # per-leaf penalty
    min_child: int = 5       # minimum examples per side of a split

    @staticmethod
    def from_dict(d: dict) -> "Hyperparameters":
        return Hyperparameters(**d)

    def as_dict(self) -> dict:
        return {"eta": self.eta, "max_depth": self.max_depth,
                "n_stages": self.n_stages, "lam": self.lam,
                "gamma": self.gamma, "min_child": self.min_child}


@dataclass
class TreeNode:
    feature: int = -1          # -1 marks a leaf
    threshold: float = 0.0
    left: "TreeNode" = None
    right: "TreeNode" = None
    weight: float = 0.0        # log-odds contribution at leaves
    gain: float = 0.0          # realized split gain (internal nodes)

    def predict_one(self, x) -> float:
        node = self
        while node.feature >= 0:
            node = node.left if x[node.feature] < node.threshold else node.right
        return node.weight

    def to_dict(self) -> dict:
        if self.feature < 0:
            return {"leaf": self.weight}
        return {"feature": self.feature, "threshold": self.threshold,
                "gain": self.gain, "left": self.left.to_dict(),
                "right": self.right.to_dict()}

    @staticmethod
    def from_dict(d: dict) -> "TreeNode":
        if "leaf" in d:
            return TreeNode(weight=float(d["leaf"]))
        return TreeNode(feature=int(d["feature"]), threshold=float(d["threshold"]),
                        gain=float(d.get("gain", 0.0)),
                        left=TreeNode.from_dict(d["left"]),
                        right=TreeNode.from_dict(d["right"]))


@dataclass
class GbdtModel:
    trees: list
    base_score: float          # prior log-odds
    hp: Hyperparameters
    n_features: int
    feature_names: list = field(default_factory=list)

    def margin(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        out = np.full(len(X), self.base_score)
        for tree in self.trees:
            out += self.hp.eta * _predict_tree(tree, X)
        return out

    def to_json(self) -> str:
        payload = {"base_score": self.base_score, "hp": self.hp.as_dict(),
                   "n_features": self.n_features,
                   "feature_names": self.feature_names,
                   "trees": [t.to_dict() for t in self.trees]}
        return json.dumps(payload, sort_keys=True, separators=(",", ":"))

    @staticmethod
    def from_json(text: str) -> "GbdtModel":
        d = json.loads(text)
        return GbdtModel(trees=[TreeNode.from_dict(t) for t in d["trees"]],
                         base_score=float(d["base_score"]),
                         hp=Hyperparameters.from_dict(d["hp"]),
                         n_features=int(d["n_features"]),
                         feature_names=list(d.get("feature_names", [])))


def _predict_tree(tree: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))
    for i, row in enumerate(X):
        out[i] = tree.predict_one(row)
    return out


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _leaf_weight(g_sum, h_sum, lam):
    return -g_sum / (h_sum + lam)


def _best_split(X, g, h, idx, hp):
    """Exact greedy search. Returns (gain, feature, threshold, left_idx, right_idx)
    or None when no split improves the objective by more than gamma."""
    gi, hi = g[idx], h[idx]
    g_sum, h_sum = gi.sum(), hi.sum()
    parent = g_sum * g_sum / (h_sum + hp.lam)
    n = len(idx)
    best = None
    for f in range(X.shape[1]):
        vals = X[idx, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        gl = np.cumsum(gi[order])[:-1]
        hl = np.cumsum(hi[order])[:-1]
        # candidate cut after position pos; threshold midway between distinct
        # consecutive values; both children must hold >= min_child examples
        counts = np.arange(1, n)
        ok = (sv[1:] > sv[:-1]) & (counts >= hp.min_child) & (n - counts >= hp.min_child)
        if not np.any(ok):
            continue
        gr, hr = g_sum - gl, h_sum - hl
        gains = 0.5 * (gl * gl / (hl + hp.lam) + gr * gr / (hr + hp.lam) - parent) - hp.gamma
        gains = np.where(ok, gains, -np.inf)
        pos = int(np.argmax(gains))  # first max = lowest threshold on ties
        gain = float(gains[pos])
        if gain > 0 and (best is None or gain > best[0]):
            thr = 0.5 * (sv[pos] + sv[pos + 1])
            best = (gain, f, thr, idx[order[: pos + 1]], idx[order[pos + 1:]])
    return best


def _build_tree(X, g, h, idx, hp, depth=0) -> TreeNode:
    if depth < hp.max_depth and len(idx) >= 2 * hp.min_child:
        split = _best_split(X, g, h, idx, hp)
        if split is not None:
            gain, f, thr, left, right = split
            return TreeNode(feature=f, threshold=thr, gain=gain,
                            left=_build_tree(X, g, h, left, hp, depth + 1),
                            right=_build_tree(X, g, h, right, hp, depth + 1))
    return TreeNode(weight=_leaf_weight(g[idx].sum(), h[idx].sum(), hp.lam))


def train(X, y, hp: Hyperparameters = Hyperparameters(), seed: int = 0,
          feature_names=None) -> GbdtModel:
    """Fit a boosted ensemble. Deterministic given data order and seed.

    The exact greedy search uses no randomness; `seed` is accepted for
    interface stability and recorded nowhere in the model.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) == 0:
        raise DegenerateError("empty training set")
    if len(X) != len(y):
        raise ValidationError("X and y length mismatch")
    if np.all(y == y[0]):
        raise DegenerateError("single-class training data")
    if np.any(~np.isfinite(X)):
        raise ValidationError("training features must be finite")

    prior = float(np.mean(y))
    base = math.log(prior / (1.0 - prior))
    margin = np.full(len(y), base)
    trees = []
    idx_all = np.arange(len(y))
    cur_obj = _log_loss(margin, y)
    for _ in range(hp.n_stages):
        p = _sigmoid(margin)
        g = p - y
        h = p * (1.0 - p)
        tree = _build_tree(X, g, h, idx_all, hp)
        new_margin = margin + hp.eta * _predict_tree(tree, X)
        new_obj = cur_obj + _tree_penalty(tree, hp) + \
            _log_loss(new_margin, y) - _log_loss(margin, y)
        if new_obj <= cur_obj:
            trees.append(tree)
            margin = new_margin
            cur_obj = new_obj
        else:
            # the regularized objective would rise: emit a no-op stage so the
            # per-stage objective trace stays non-increasing
            trees.append(TreeNode(weight=0.0))
    return GbdtModel(trees=trees, base_score=base, hp=hp, n_features=X.shape[1],
                     feature_names=list(feature_names or []))


def predict_proba(model: GbdtModel, X) -> np.ndarray:
    """Probability of the abnormal outcome (label 1) for each row."""
    p = _sigmoid(model.margin(X))
    return np.clip(p, PROB_EPS, 1.0 - PROB_EPS)


def _log_loss(margin, y) -> float:
    p = np.clip(_sigmoid(margin), PROB_EPS, 1.0 - PROB_EPS)
    return float(-np.sum(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))


def _tree_penalty(tree: TreeNode, hp: Hyperparameters) -> float:
    """gamma*T + lambda/2 * sum of squared applied leaf contributions.

    The penalty weighs the contributions actually added to the margin
    (eta * leaf weight). A zero-weight stump is a no-op stage and carries no
    penalty at all.
    """
    leaves = _collect_leaves(tree)
    if leaves == [0.0]:
        return 0.0
    return (hp.gamma * len(leaves)
            + 0.5 * hp.lam * sum((hp.eta * w) ** 2 for w in leaves))


def regularized_objective(model: GbdtModel, X, y, n_trees=None) -> float:
    """Logistic loss plus the complexity penalty of the first n_trees stages;
    used to verify per-stage monotonicity."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    trees = model.trees if n_trees is None else model.trees[:n_trees]
    margin = np.full(len(X), model.base_score)
    penalty = 0.0
    for tree in trees:
        margin += model.hp.eta * _predict_tree(tree, X)
        penalty += _tree_penalty(tree, model.hp)
    return _log_loss(margin, y) + penalty


def _collect_leaves(tree: TreeNode) -> list:
    if tree.feature < 0:
        return [tree.weight]
    return _collect_leaves(tree.left) + _collect_leaves(tree.right)


def aggregate_recording(probs) -> float:
    """Mean per-epoch probability: one value per subject."""
    probs = np.asarray(probs, dtype=float)
    if len(probs) == 0:
        raise DegenerateError("no epoch probabilities to aggregate")
    return float(np.mean(probs))


def feature_importance(model: GbdtModel) -> np.ndarray:
    """Accumulated realized split gain per feature, normalized to sum 1.
    All-zero (no splits anywhere) is returned as-is; callers may flag it."""
    totals = np.zeros(model.n_features)

    def walk(node):
        if node.feature >= 0:
            totals[node.feature] += node.gain
            walk(node.left)
            walk(node.right)

    for tree in model.trees:
        walk(tree)
    s = totals.sum()
    return totals / s if s > 0 else totals
