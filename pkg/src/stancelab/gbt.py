"""Gradient-boosted decision trees for binary classification, from scratch.

Trees are fit to the logistic loss with second-order (gradient/hessian) split
gains, exact greedy split finding, leaf steps capped by ``max_delta_step``,
and early stopping on a held-out validation slice. Sparse-zero feature values
route left by default, which falls out of the `x < threshold` split rule on
non-negative count data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import _kernels
from .features import FeatureMatrix

MatrixLike = Union[FeatureMatrix, np.ndarray]


class TrainingError(Exception):
    pass


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 300
    learning_rate: float = 0.1
    max_delta_step: float = 1.0
    max_depth: int = 6
    validation_fraction: float = 0.2
    early_stopping_rounds: int = 20
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_estimators < 1 or self.max_depth < 1:
            raise ValueError("n_estimators and max_depth must be positive")
        if not (0.0 < self.validation_fraction < 1.0):
            raise ValueError("validation_fraction must be in (0, 1)")
        if self.learning_rate <= 0 or self.max_delta_step < 0:
            raise ValueError("bad learning_rate / max_delta_step")
        if self.early_stopping_rounds < 1:
            raise ValueError("early_stopping_rounds must be positive")


@dataclass
class Tree:
    """Flat-array regression tree; feature == -1 marks a leaf."""
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain_by_col: dict[int, float] = field(default_factory=dict)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


@dataclass
class BoostedModel:
    trees: list[Tree]
    base_score: float
    columns: list[str]
    params: BoostParams
    stopped_at: int
    best_val_loss: float

    def total_gain(self) -> np.ndarray:
        gains = np.zeros(len(self.columns))
        for tree in self.trees:
            for col, gain in tree.gain_by_col.items():
                gains[col] += gain
        return gains

    # -- serialization: versioned text format, round-trip exact --------------

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("stancelab-model v1\n")
            p = self.params
            fh.write("params"
                     f" n_estimators={p.n_estimators}"
                     f" learning_rate={p.learning_rate!r}"
                     f" max_delta_step={p.max_delta_step!r}"
                     f" max_depth={p.max_depth}"
                     f" validation_fraction={p.validation_fraction!r}"
                     f" early_stopping_rounds={p.early_stopping_rounds}"
                     f" reg_lambda={p.reg_lambda!r}"
                     f" min_child_weight={p.min_child_weight!r}"
                     f" rng_seed={p.rng_seed}\n")
            fh.write(f"base_score {self.base_score!r}\n")
            fh.write(f"stopped_at {self.stopped_at}\n")
            fh.write(f"best_val_loss {self.best_val_loss!r}\n")
            fh.write(f"columns {len(self.columns)}\n")
            for j, ident in enumerate(self.columns):
                fh.write(f"col {j} {ident}\n")
            fh.write(f"trees {len(self.trees)}\n")
            for t, tree in enumerate(self.trees):
                fh.write(f"tree {t} {tree.n_nodes}\n")
                for i in range(tree.n_nodes):
                    if tree.feature[i] >= 0:
                        fh.write(f"n {i} s {int(tree.feature[i])} "
                                 f"{float(tree.threshold[i])!r} "
                                 f"{int(tree.left[i])} {int(tree.right[i])}\n")
                    else:
                        fh.write(f"n {i} l {float(tree.value[i])!r}\n")
                for col in sorted(tree.gain_by_col):
                    fh.write(f"treegain {t} {col} {tree.gain_by_col[col]!r}\n")
            fh.write("end\n")

    @classmethod
    def load(cls, path) -> "BoostedModel":
        with open(path, encoding="utf-8") as fh:
            if fh.readline().strip() != "stancelab-model v1":
                raise TrainingError(f"unrecognized model file {path}")
            kv = dict(item.split("=", 1)
                      for item in fh.readline().split()[1:])
            params = BoostParams(
                n_estimators=int(kv["n_estimators"]),
                learning_rate=float(kv["learning_rate"]),
                max_delta_step=float(kv["max_delta_step"]),
                max_depth=int(kv["max_depth"]),
                validation_fraction=float(kv["validation_fraction"]),
                early_stopping_rounds=int(kv["early_stopping_rounds"]),
                reg_lambda=float(kv["reg_lambda"]),
                min_child_weight=float(kv["min_child_weight"]),
                rng_seed=int(kv["rng_seed"]),
            )
            base_score = float(fh.readline().split()[1])
            stopped_at = int(fh.readline().split()[1])
            best_val_loss = float(fh.readline().split()[1])
            n_cols = int(fh.readline().split()[1])
            columns = []
            for _ in range(n_cols):
                _tag, _j, ident = fh.readline().rstrip("\n").split(" ", 2)
                columns.append(ident)
            n_trees = int(fh.readline().split()[1])
            trees = []
            line = fh.readline()
            for _ in range(n_trees):
                _tag, _t, n_nodes = line.split()
                n_nodes = int(n_nodes)
                feature = np.full(n_nodes, -1, dtype=np.int64)
                threshold = np.zeros(n_nodes)
                left = np.zeros(n_nodes, dtype=np.int64)
                right = np.zeros(n_nodes, dtype=np.int64)
                value = np.zeros(n_nodes)
                gains: dict[int, float] = {}
                while True:
                    line = fh.readline()
                    parts = line.split()
                    if parts[0] == "n":
                        i = int(parts[1])
                        if parts[2] == "s":
                            feature[i] = int(parts[3])
                            threshold[i] = float(parts[4])
                            left[i] = int(parts[5])
                            right[i] = int(parts[6])
                        else:
                            value[i] = float(parts[3])
                    elif parts[0] == "treegain":
                        gains[int(parts[2])] = float(parts[3])
                    else:
                        break
                trees.append(Tree(feature, threshold, left, right, value, gains))
        return cls(trees=trees, base_score=base_score, columns=columns,
                   params=params, stopped_at=stopped_at,
                   best_val_loss=best_val_loss)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def _log_loss(y: np.ndarray, p: np.ndarray) -> float:
    p = np.clip(p, 1e-15, 1 - 1e-15)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def _as_dense(matrix: MatrixLike) -> tuple[np.ndarray, list[str]]:
    if isinstance(matrix, FeatureMatrix):
        return matrix.to_dense(), matrix.column_identifiers()
    X = np.asarray(matrix, dtype=np.float64)
    return X, [f"f{j:05d}" for j in range(X.shape[1])]


def _build_tree(X: np.ndarray, g: np.ndarray, h: np.ndarray,
                rows: np.ndarray, params: BoostParams,
                margin_update: np.ndarray) -> Tree:
    """Grow one tree depth-first; adds each leaf's step to margin_update."""
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    value: list[float] = []
    gains: dict[int, float] = {}

    def new_node() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(0.0)
        return len(feature) - 1

    def grow(node_rows: np.ndarray, depth: int) -> int:
        node = new_node()
        g_sum = float(g[node_rows].sum())
        h_sum = float(h[node_rows].sum())
        col, thr, gain = -1, 0.0, 0.0
        if depth < params.max_depth and len(node_rows) >= 2:
            col, thr, gain = _kernels.best_split(
                X[node_rows], g[node_rows], h[node_rows],
                params.reg_lambda, params.min_child_weight)
        if col >= 0:
            gains[col] = gains.get(col, 0.0) + gain
            feature[node] = col
            threshold[node] = thr
            go_left = X[node_rows, col] < thr
            left[node] = grow(node_rows[go_left], depth + 1)
            right[node] = grow(node_rows[~go_left], depth + 1)
        else:
            w = -g_sum / (h_sum + params.reg_lambda)
            if params.max_delta_step > 0:
                w = max(-params.max_delta_step, min(params.max_delta_step, w))
            step = params.learning_rate * w
            value[node] = step
            margin_update[node_rows] += step
        return node

    grow(rows, 0)
    return Tree(np.asarray(feature, dtype=np.int64),
                np.asarray(threshold),
                np.asarray(left, dtype=np.int64),
                np.asarray(right, dtype=np.int64),
                np.asarray(value),
                gains)


def _tree_margin(tree: Tree, X: np.ndarray) -> np.ndarray:
    out = np.zeros(X.shape[0])
    _kernels.predict_margin(X, tree.feature, tree.threshold, tree.left,
                            tree.right, tree.value,
                            np.zeros(1, dtype=np.int64), out)
    return out


def _stratified_split(y: np.ndarray, fraction: float,
                      rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; returns (train_idx, val_idx)."""
    train, val = [], []
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        idx = idx[rng.permutation(len(idx))]
        n_val = max(1, int(round(fraction * len(idx)))) if len(idx) > 1 else 0
        n_val = min(n_val, len(idx) - 1)
        val.extend(idx[:n_val])
        train.extend(idx[n_val:])
    return np.sort(np.asarray(train, dtype=np.int64)), \
        np.sort(np.asarray(val, dtype=np.int64))


def train(matrix: MatrixLike, labels: Sequence[int],
          params: Optional[BoostParams] = None,
          base_score: float = 0.0) -> BoostedModel:
    """Fit a boosted-tree classifier with early stopping.

    ``labels`` must contain both classes. Training is deterministic given
    ``params.rng_seed``. Halts once the validation log-loss has not improved
    for ``early_stopping_rounds`` iterations; the returned model keeps the
    trees up to the best iteration.
    """
    params = params or BoostParams()
    X, columns = _as_dense(matrix)
    y = np.asarray(labels, dtype=np.float64)
    if X.size == 0 or len(y) == 0:
        raise TrainingError("empty training matrix")
    if len(y) != X.shape[0]:
        raise TrainingError("label count does not match row count")
    classes = set(np.unique(y))
    if classes != {0.0, 1.0}:
        raise TrainingError(f"need both binary classes, got {sorted(classes)}")

    rng = np.random.default_rng(params.rng_seed)
    train_idx, val_idx = _stratified_split(y.astype(np.int64),
                                           params.validation_fraction, rng)
    if len(set(y[train_idx])) < 2:
        raise TrainingError("training split lost one of the classes")
    X_tr, y_tr = np.ascontiguousarray(X[train_idx]), y[train_idx]
    X_val, y_val = np.ascontiguousarray(X[val_idx]), y[val_idx]

    margin_tr = np.full(len(y_tr), base_score)
    margin_val = np.full(len(y_val), base_score)
    all_rows = np.arange(len(y_tr), dtype=np.int64)

    trees: list[Tree] = []
    best_loss = math.inf
    best_iter = -1
    for it in range(params.n_estimators):
        p = _sigmoid(margin_tr)
        g = p - y_tr
        h = np.maximum(p * (1.0 - p), 1e-16)
        update = np.zeros(len(y_tr))
        tree = _build_tree(X_tr, g, h, all_rows, params, update)
        trees.append(tree)
        margin_tr += update
        if len(y_val) == 0:
            # too few rows to hold out a validation slice; no early stopping
            best_iter = it
            continue
        margin_val += _tree_margin(tree, X_val)
        val_loss = _log_loss(y_val, _sigmoid(margin_val))
        if val_loss < best_loss:
            best_loss = val_loss
            best_iter = it
        elif it - best_iter >= params.early_stopping_rounds:
            break

    kept = trees[:best_iter + 1]
    return BoostedModel(trees=kept, base_score=base_score, columns=columns,
                        params=params, stopped_at=len(kept),
                        best_val_loss=best_loss)


def fit_single_tree_full_batch(X: np.ndarray, y: Sequence[int],
                               params: Optional[BoostParams] = None) -> Tree:
    """One tree fit on all rows from a zero margin, without a validation
    split. Used for small-instance verification against exhaustive search."""
    params = params or BoostParams()
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64)
    p = np.full(len(y), 0.5)
    g = p - y
    h = p * (1.0 - p)
    update = np.zeros(len(y))
    rows = np.arange(len(y), dtype=np.int64)
    return _build_tree(X, g, h, rows, params, update)


def _reconcile(model: BoostedModel, matrix: MatrixLike) -> np.ndarray:
    """Dense matrix in the model's column order; unknown columns are absent
    (zero), extra input columns are ignored."""
    if isinstance(matrix, FeatureMatrix):
        X = np.zeros((len(matrix.rows), len(model.columns)))
        pos = {ident: j for j, ident in enumerate(model.columns)}
        idents = matrix.column_identifiers()
        for (i, j), v in matrix.cells.items():
            k = pos.get(idents[j])
            if k is not None:
                X[i, k] = v
        return X
    X = np.asarray(matrix, dtype=np.float64)
    if X.shape[1] != len(model.columns):
        raise TrainingError("column count mismatch for ndarray input")
    return np.ascontiguousarray(X)


def predict_margin(model: BoostedModel, matrix: MatrixLike) -> np.ndarray:
    X = _reconcile(model, matrix)
    out = np.full(X.shape[0], model.base_score)
    for tree in model.trees:
        out += _tree_margin(tree, X)
    return out


def predict_confidence(model: BoostedModel, matrix: MatrixLike) -> np.ndarray:
    """Per-row confidence: logistic of the additive ensemble score, in (0,1)."""
    return _sigmoid(predict_margin(model, matrix))


def feature_importance(model: BoostedModel) -> list[tuple[str, float]]:
    """All columns ranked by total gain, descending; ties broken by name."""
    gains = model.total_gain()
    pairs = [(model.columns[j], float(gains[j])) for j in range(len(gains))]
    return sorted(pairs, key=lambda kv: (-kv[1], kv[0]))


@dataclass(frozen=True)
class CVReport:
    k: int
    precision_mean: float
    precision_std: float
    recall_mean: float
    recall_std: float

    def __post_init__(self):
        if self.k < 2:
            raise ValueError("k must be >= 2")


def _macro_precision_recall(y_true: np.ndarray,
                            y_pred: np.ndarray) -> tuple[float, float]:
    precisions, recalls = [], []
    for cls in (0, 1):
        tp = int(np.sum((y_pred == cls) & (y_true == cls)))
        fp = int(np.sum((y_pred == cls) & (y_true != cls)))
        fn = int(np.sum((y_pred != cls) & (y_true == cls)))
        precisions.append(tp / (tp + fp) if tp + fp else 0.0)
        recalls.append(tp / (tp + fn) if tp + fn else 0.0)
    return float(np.mean(precisions)), float(np.mean(recalls))


def _stratified_folds(y: np.ndarray, k: int,
                      rng: np.random.Generator) -> list[np.ndarray]:
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        idx = np.nonzero(y == cls)[0]
        if len(idx) < k:
            raise TrainingError(
                f"class {cls} has only {len(idx)} rows; cannot stratify into "
                f"{k} folds")
        idx = idx[rng.permutation(len(idx))]
        for pos, i in enumerate(idx):
            folds[pos % k].append(int(i))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def cross_validate(matrix: MatrixLike, labels: Sequence[int],
                   params: Optional[BoostParams] = None, k: int = 5) -> CVReport:
    """Stratified k-fold CV; macro precision/recall at threshold 0.5."""
    params = params or BoostParams()
    X, _cols = _as_dense(matrix)
    y = np.asarray(labels, dtype=np.int64)
    rng = np.random.default_rng(params.rng_seed)
    folds = _stratified_folds(y, k, rng)

    precisions, recalls = [], []
    for f in range(k):
        test_idx = folds[f]
        train_idx = np.sort(np.concatenate([folds[i] for i in range(k) if i != f]))
        fold_params = replace(params, rng_seed=params.rng_seed + f + 1)
        model = train(X[train_idx], y[train_idx], fold_params)
        conf = predict_confidence(model, np.ascontiguousarray(X[test_idx]))
        pred = (conf >= 0.5).astype(np.int64)
        prec, rec = _macro_precision_recall(y[test_idx], pred)
        precisions.append(prec)
        recalls.append(rec)
    return CVReport(k=k,
                    precision_mean=float(np.mean(precisions)),
                    precision_std=float(np.std(precisions)),
                    recall_mean=float(np.mean(recalls)),
                    recall_std=float(np.std(recalls)))


def accept_by_threshold(confidences: Sequence[float],
                        threshold: float) -> list[Optional[int]]:
    """Accept the positive class at ``conf >= t``, the negative class at
    ``conf <= 1 - t``, and reject (None) in between."""
    if not (0.5 < threshold <= 1.0):
        raise ValueError("threshold must be in (0.5, 1]")
    out: list[Optional[int]] = []
    for c in confidences:
        if c >= threshold:
            out.append(1)
        elif c <= 1.0 - threshold:
            out.append(0)
        else:
            out.append(None)
    return out


def train_one_vs_rest(matrix: MatrixLike, labels: Sequence[str],
                      params: Optional[BoostParams] = None
                      ) -> dict[str, BoostedModel]:
    """One binary model per class, for multi-class attributes (age cohorts)."""
    params = params or BoostParams()
    classes = sorted(set(labels))
    if len(classes) < 2:
        raise TrainingError("need at least two classes")
    y = np.asarray(labels)
    models = {}
    for offset, cls in enumerate(classes):
        cls_params = replace(params, rng_seed=params.rng_seed + 101 * offset)
        models[cls] = train(matrix, (y == cls).astype(np.int64), cls_params)
    return models


def predict_one_vs_rest(models: dict[str, BoostedModel], matrix: MatrixLike,
                        threshold: Optional[float] = None
                        ) -> list[Optional[str]]:
    """Argmax over per-class confidences; with a threshold, the winning class
    must reach it or the row is rejected."""
    classes = sorted(models)
    conf = np.column_stack([predict_confidence(models[c], matrix)
                            for c in classes])
    out: list[Optional[str]] = []
    for row in conf:
        best = int(np.argmax(row))
        if threshold is not None and row[best] < threshold:
            out.append(None)
        else:
            out.append(classes[best])
    return out
