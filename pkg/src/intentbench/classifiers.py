"""Fixed-vector classifier families: linear SVM (SGD hinge), RBF-kernel SVM
(simplified SMO), multinomial logistic regression, k-nearest neighbors,
decision tree and random forest (Gini), a two-hidden-layer feedforward
network with early stopping, and a cosine nearest-instance classifier.

All models share the same contract: ``fit`` is deterministic under its seed,
``predict_scores`` returns per-label scores aligned to the ascending label
order, and ``predict`` breaks argmax ties by ascending label name unless the
model documents an instance-based rule (KNN, cosine-1NN).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import ArgumentError, ConvergenceError, TrainingError
from .evaluation import macro_f1
from .numerics import RngStream, softmax
from .recurrent import TrainHistory, early_stop, stratified_holdout


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters shared across the model families; every value has a
    conventional default and any subset can be overridden."""

    lam: float = 1e-4            # L2 strength for the gradient-trained models
    lr: float = 0.1
    lr_decay: float = 0.9        # multiplicative, per epoch
    epochs: int = 50
    k_neighbors: int = 5
    n_trees: int = 100
    max_depth: int = 32
    gamma: float | None = None   # RBF width; None resolves to 1/n_features
    svm_c: float = 1.0           # SMO box constraint
    hidden1: int = 128
    hidden2: int = 128
    batch_size: int = 32
    patience: int = 5
    val_fraction: float = 0.1
    rf_bootstrap: bool = True
    rf_features: int | None = None  # None resolves to ceil(sqrt(n_features))
    smo_tol: float = 1e-3
    smo_max_passes: int = 5
    smo_max_sweeps: int = 500

    def __post_init__(self):
        positives = {
            "lam": self.lam, "lr": self.lr, "lr_decay": self.lr_decay,
            "epochs": self.epochs, "k_neighbors": self.k_neighbors,
            "n_trees": self.n_trees, "max_depth": self.max_depth,
            "svm_c": self.svm_c, "hidden1": self.hidden1, "hidden2": self.hidden2,
            "batch_size": self.batch_size, "patience": self.patience,
            "smo_tol": self.smo_tol, "smo_max_passes": self.smo_max_passes,
            "smo_max_sweeps": self.smo_max_sweeps,
        }
        for name, value in positives.items():
            if value <= 0:
                raise ArgumentError(f"{name} must be positive, got {value}")
        if self.gamma is not None and self.gamma <= 0:
            raise ArgumentError("gamma must be positive when given")
        if self.rf_features is not None and self.rf_features <= 0:
            raise ArgumentError("rf_features must be positive when given")
        if not 0.0 < self.val_fraction <= 0.5:
            raise ArgumentError("val_fraction must lie in (0, 0.5]")


def _prepare(X, y):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ArgumentError(f"X must be 2-D, got shape {X.shape}")
    y = list(y)
    if len(y) != X.shape[0]:
        raise ArgumentError("X and y lengths differ")
    labels = tuple(sorted(set(y)))
    if len(labels) < 2:
        raise TrainingError(f"need at least 2 classes, got {len(labels)}")
    index = {lab: i for i, lab in enumerate(labels)}
    y_idx = np.array([index[v] for v in y], dtype=np.int64)
    return X, y_idx, labels


class Classifier:
    """Shared prediction plumbing; subclasses implement fit and scores."""

    kind: str = "base"

    def __init__(self):
        self.labels_: tuple[str, ...] = ()

    def predict_scores(self, x) -> np.ndarray:
        raise NotImplementedError

    def predict(self, x) -> str:
        scores = self.predict_scores(x)
        return self.labels_[int(np.argmax(scores))]

    def predict_many(self, X) -> list[str]:
        return [self.predict(x) for x in np.asarray(X, dtype=np.float64)]

    def to_state(self) -> dict:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# Linear SVM (one-vs-rest hinge loss, SGD)
# ---------------------------------------------------------------------------


def linear_svm_loss_and_grad(W, b, X, ysigns, lam):
    """Full-batch one-vs-rest hinge objective and its (sub)gradient.

    ysigns is (C, N) with +-1 entries. Used for gradient validation; the
    trainer itself runs per-sample SGD on the same objective.
    """
    margins = ysigns * (W @ X.T + b[:, None])
    viol = margins < 1.0
    loss = float(np.sum(np.maximum(0.0, 1.0 - margins)) / X.shape[0]) + lam * float(np.sum(W * W))
    coeff = np.where(viol, -ysigns, 0.0) / X.shape[0]
    gW = coeff @ X + 2.0 * lam * W
    gb = coeff.sum(axis=1)
    return loss, gW, gb


class LinearSvmClassifier(Classifier):
    kind = "linear-svm"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.weights: np.ndarray | None = None
        self.bias: np.ndarray | None = None

    def fit(self, X, y, seed: int = 0) -> "LinearSvmClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        n, d = X.shape
        c = len(labels)
        cfg = self.config
        W = np.zeros((c, d))
        b = np.zeros(c)
        ysigns = np.full((n, c), -1.0)
        ysigns[np.arange(n), y_idx] = 1.0
        rng = RngStream(seed).derive("linear-svm")
        lr = cfg.lr
        for _ in range(cfg.epochs):
            order = rng.permutation(n)
            for i in order:
                x = X[i]
                ys = ysigns[i]
                margins = ys * (W @ x + b)
                W *= 1.0 - lr * cfg.lam
                viol = margins < 1.0
                if np.any(viol):
                    W[viol] += lr * ys[viol, None] * x
                    b[viol] += lr * ys[viol]
            lr *= cfg.lr_decay
        self.weights, self.bias = W, b
        return self

    def predict_scores(self, x) -> np.ndarray:
        return self.weights @ np.asarray(x, dtype=np.float64) + self.bias

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "weights": self.weights.tolist(), "bias": self.bias.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "LinearSvmClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.weights = np.asarray(state["weights"], dtype=np.float64)
        clf.bias = np.asarray(state["bias"], dtype=np.float64)
        return clf


def train_linear_svm(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return LinearSvmClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# RBF-kernel SVM (one-vs-rest, simplified SMO)
# ---------------------------------------------------------------------------


def _rbf_kernel(A, B, gamma):
    sq_a = np.sum(A * A, axis=1)[:, None]
    sq_b = np.sum(B * B, axis=1)[None, :]
    d2 = np.maximum(sq_a + sq_b - 2.0 * (A @ B.T), 0.0)
    return np.exp(-gamma * d2)


def _smo_binary(K, ysign, c_box, tol, max_passes, max_sweeps, rng):
    """Simplified sequential minimal optimization on a precomputed kernel."""
    n = K.shape[0]
    alpha = np.zeros(n)
    b = 0.0
    ay = alpha * ysign  # maintained incrementally
    passes = 0
    sweeps = 0
    while passes < max_passes:
        if sweeps >= max_sweeps:
            raise ConvergenceError(
                f"SMO did not converge within {max_sweeps} sweeps", iterations=sweeps
            )
        sweeps += 1
        changed = 0
        for i in range(n):
            e_i = float(ay @ K[:, i]) + b - ysign[i]
            if not ((ysign[i] * e_i < -tol and alpha[i] < c_box)
                    or (ysign[i] * e_i > tol and alpha[i] > 0)):
                continue
            j = rng.randint(n - 1)
            if j >= i:
                j += 1
            e_j = float(ay @ K[:, j]) + b - ysign[j]
            a_i, a_j = alpha[i], alpha[j]
            if ysign[i] != ysign[j]:
                low, high = max(0.0, a_j - a_i), min(c_box, c_box + a_j - a_i)
            else:
                low, high = max(0.0, a_i + a_j - c_box), min(c_box, a_i + a_j)
            if low == high:
                continue
            eta = 2.0 * K[i, j] - K[i, i] - K[j, j]
            if eta >= 0.0:
                continue
            a_j_new = min(max(a_j - ysign[j] * (e_i - e_j) / eta, low), high)
            if abs(a_j_new - a_j) < 1e-5:
                continue
            a_i_new = a_i + ysign[i] * ysign[j] * (a_j - a_j_new)
            b1 = b - e_i - ysign[i] * (a_i_new - a_i) * K[i, i] \
                - ysign[j] * (a_j_new - a_j) * K[i, j]
            b2 = b - e_j - ysign[i] * (a_i_new - a_i) * K[i, j] \
                - ysign[j] * (a_j_new - a_j) * K[j, j]
            if 0.0 < a_i_new < c_box:
                b = b1
            elif 0.0 < a_j_new < c_box:
                b = b2
            else:
                b = (b1 + b2) / 2.0
            alpha[i], alpha[j] = a_i_new, a_j_new
            ay[i] = a_i_new * ysign[i]
            ay[j] = a_j_new * ysign[j]
            changed += 1
        passes = passes + 1 if changed == 0 else 0
    return alpha, b


class KernelSvmClassifier(Classifier):
    kind = "kernel-svm"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.X: np.ndarray | None = None
        self.alpha_y: np.ndarray | None = None  # (C, N) alpha_i * ysign_i
        self.bias: np.ndarray | None = None
        self.gamma: float | None = None

    def fit(self, X, y, seed: int = 0) -> "KernelSvmClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        cfg = self.config
        n, d = X.shape
        gamma = cfg.gamma if cfg.gamma is not None else 1.0 / d
        K = _rbf_kernel(X, X, gamma)
        alpha_y = np.zeros((len(labels), n))
        bias = np.zeros(len(labels))
        for c in range(len(labels)):
            ysign = np.where(y_idx == c, 1.0, -1.0)
            rng = RngStream(seed).derive("smo", c)
            alpha, b = _smo_binary(
                K, ysign, cfg.svm_c, cfg.smo_tol, cfg.smo_max_passes,
                cfg.smo_max_sweeps, rng,
            )
            alpha_y[c] = alpha * ysign
            bias[c] = b
        self.X, self.alpha_y, self.bias, self.gamma = X, alpha_y, bias, gamma
        return self

    def predict_scores(self, x) -> np.ndarray:
        kcol = _rbf_kernel(self.X, np.asarray(x, dtype=np.float64)[None, :], self.gamma)[:, 0]
        return self.alpha_y @ kcol + self.bias

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "x": self.X.tolist(), "alpha_y": self.alpha_y.tolist(),
            "bias": self.bias.tolist(), "gamma": self.gamma,
        }

    @classmethod
    def from_state(cls, state: dict) -> "KernelSvmClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.X = np.asarray(state["x"], dtype=np.float64)
        clf.alpha_y = np.asarray(state["alpha_y"], dtype=np.float64)
        clf.bias = np.asarray(state["bias"], dtype=np.float64)
        clf.gamma = float(state["gamma"])
        return clf


def train_kernel_svm(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return KernelSvmClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# Multinomial logistic regression (full-batch gradient descent)
# ---------------------------------------------------------------------------


def logreg_loss_and_grad(W, b, X, y_idx, lam):
    """Mean softmax cross-entropy with L2 on the weights (bias excluded)."""
    n = X.shape[0]
    probs = softmax(X @ W.T + b)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y_idx], 1e-300))))
    loss += lam * float(np.sum(W * W))
    delta = probs
    delta[np.arange(n), y_idx] -= 1.0
    gW = delta.T @ X / n + 2.0 * lam * W
    gb = delta.mean(axis=0)
    return loss, gW, gb


class LogisticRegressionClassifier(Classifier):
    kind = "logreg"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.weights: np.ndarray | None = None
        self.bias: np.ndarray | None = None

    def fit(self, X, y, seed: int = 0) -> "LogisticRegressionClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        cfg = self.config
        W = np.zeros((len(labels), X.shape[1]))
        b = np.zeros(len(labels))
        lr = cfg.lr
        for _ in range(cfg.epochs):
            _, gW, gb = logreg_loss_and_grad(W, b, X, y_idx, cfg.lam)
            W -= lr * gW
            b -= lr * gb
            lr *= cfg.lr_decay
        self.weights, self.bias = W, b
        return self

    def predict_scores(self, x) -> np.ndarray:
        return softmax(self.weights @ np.asarray(x, dtype=np.float64) + self.bias)

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "weights": self.weights.tolist(), "bias": self.bias.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "LogisticRegressionClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.weights = np.asarray(state["weights"], dtype=np.float64)
        clf.bias = np.asarray(state["bias"], dtype=np.float64)
        return clf


def train_logreg(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return LogisticRegressionClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# K-nearest neighbors
# ---------------------------------------------------------------------------


class KnnClassifier(Classifier):
    """Lazy Euclidean-distance learner. Ties: equal distances resolve to the
    lower training index; equal vote counts resolve to the label whose
    nearest member appears earliest among the K neighbors."""

    kind = "knn"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.X: np.ndarray | None = None
        self.y_idx: np.ndarray | None = None

    def fit(self, X, y, seed: int = 0) -> "KnnClassifier":
        X, y_idx, labels = _prepare(X, y)
        if self.config.k_neighbors > X.shape[0]:
            raise ArgumentError(
                f"k={self.config.k_neighbors} exceeds training size {X.shape[0]}"
            )
        self.labels_ = labels
        self.X, self.y_idx = X, y_idx
        return self

    def _neighbors(self, x) -> np.ndarray:
        d2 = np.sum((self.X - np.asarray(x, dtype=np.float64)) ** 2, axis=1)
        return np.argsort(d2, kind="stable")[: self.config.k_neighbors]

    def predict_scores(self, x) -> np.ndarray:
        votes = np.zeros(len(self.labels_))
        for i in self._neighbors(x):
            votes[self.y_idx[i]] += 1.0
        return votes

    def predict(self, x) -> str:
        top = self._neighbors(x)
        votes: dict[int, int] = {}
        first_rank: dict[int, int] = {}
        for rank, i in enumerate(top):
            lab = int(self.y_idx[i])
            votes[lab] = votes.get(lab, 0) + 1
            first_rank.setdefault(lab, rank)
        best = max(votes, key=lambda lab: (votes[lab], -first_rank[lab]))
        return self.labels_[best]

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "x": self.X.tolist(), "y_idx": self.y_idx.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "KnnClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.X = np.asarray(state["x"], dtype=np.float64)
        clf.y_idx = np.asarray(state["y_idx"], dtype=np.int64)
        return clf


def train_knn(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return KnnClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# Decision tree and random forest (Gini impurity)
# ---------------------------------------------------------------------------


def gini_impurity(counts) -> float:
    """1 - sum of squared class proportions."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass
class TreeNode:
    feature: int = -1
    threshold: float = 0.0
    left: "TreeNode | None" = None
    right: "TreeNode | None" = None
    counts: np.ndarray | None = None  # leaf class counts

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X, y_idx, indices, features, n_classes):
    """Best (feature, threshold, gain) by Gini decrease over midpoint
    thresholds; ties resolve to the lower feature then lower threshold."""
    node_y = y_idx[indices]
    n = len(indices)
    parent_counts = np.bincount(node_y, minlength=n_classes).astype(np.float64)
    parent_gini = gini_impurity(parent_counts)
    best = None  # (gain, feature, threshold, order, pos)
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), node_y] = 1.0
    for f in features:
        values = X[indices, f]
        order = np.argsort(values, kind="stable")
        sv = values[order]
        boundaries = np.flatnonzero(sv[:-1] < sv[1:])
        if boundaries.size == 0:
            continue
        left_counts = np.cumsum(onehot[order], axis=0)[boundaries]
        n_left = (boundaries + 1).astype(np.float64)
        n_right = n - n_left
        right_counts = parent_counts - left_counts
        gini_left = 1.0 - np.sum((left_counts / n_left[:, None]) ** 2, axis=1)
        gini_right = 1.0 - np.sum((right_counts / n_right[:, None]) ** 2, axis=1)
        gains = parent_gini - (n_left * gini_left + n_right * gini_right) / n
        pos = int(np.argmax(gains))
        gain = float(gains[pos])
        if best is None or gain > best[0]:
            b = boundaries[pos]
            threshold = (sv[b] + sv[b + 1]) / 2.0
            best = (gain, f, threshold, order, b)
    return best


def _grow_tree(X, y_idx, indices, depth, cfg, n_classes, feature_sampler):
    counts = np.bincount(y_idx[indices], minlength=n_classes).astype(np.float64)
    if (
        len(indices) < 2
        or depth >= cfg.max_depth
        or np.count_nonzero(counts) <= 1
    ):
        return TreeNode(counts=counts)
    best = _best_split(X, y_idx, indices, feature_sampler(), n_classes)
    if best is None:
        return TreeNode(counts=counts)
    _, feature, threshold, _, _ = best
    mask = X[indices, feature] <= threshold
    left_idx = indices[mask]
    right_idx = indices[~mask]
    node = TreeNode(feature=feature, threshold=threshold)
    node.left = _grow_tree(X, y_idx, left_idx, depth + 1, cfg, n_classes, feature_sampler)
    node.right = _grow_tree(X, y_idx, right_idx, depth + 1, cfg, n_classes, feature_sampler)
    return node


def _tree_leaf(node: TreeNode, x) -> TreeNode:
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return node


def _node_to_state(node: TreeNode) -> dict:
    if node.is_leaf:
        return {"counts": node.counts.tolist()}
    return {
        "feature": node.feature, "threshold": node.threshold,
        "left": _node_to_state(node.left), "right": _node_to_state(node.right),
    }


def _node_from_state(state: dict) -> TreeNode:
    if "counts" in state:
        return TreeNode(counts=np.asarray(state["counts"], dtype=np.float64))
    return TreeNode(
        feature=int(state["feature"]), threshold=float(state["threshold"]),
        left=_node_from_state(state["left"]), right=_node_from_state(state["right"]),
    )


class DecisionTreeClassifier(Classifier):
    kind = "decision-tree"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.root: TreeNode | None = None

    def fit(self, X, y, seed: int = 0) -> "DecisionTreeClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        all_features = list(range(X.shape[1]))
        self.root = _grow_tree(
            X, y_idx, np.arange(X.shape[0]), 0, self.config, len(labels),
            lambda: all_features,
        )
        return self

    def predict_scores(self, x) -> np.ndarray:
        leaf = _tree_leaf(self.root, np.asarray(x, dtype=np.float64))
        total = leaf.counts.sum()
        return leaf.counts / total if total > 0 else leaf.counts

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "root": _node_to_state(self.root),
        }

    @classmethod
    def from_state(cls, state: dict) -> "DecisionTreeClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.root = _node_from_state(state["root"])
        return clf


def train_decision_tree(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return DecisionTreeClassifier(cfg).fit(X, y, seed)


class RandomForestClassifier(Classifier):
    """Bootstrap-aggregated Gini trees with ceil(sqrt(d)) feature candidates
    per split; prediction is the vote mode with ties by ascending label."""

    kind = "random-forest"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.trees: list[TreeNode] = []

    def fit(self, X, y, seed: int = 0) -> "RandomForestClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        cfg = self.config
        n, d = X.shape
        mtry = cfg.rf_features if cfg.rf_features is not None else int(math.ceil(math.sqrt(d)))
        mtry = min(mtry, d)
        base = RngStream(seed)
        self.trees = []
        for t in range(cfg.n_trees):
            rng = base.derive("tree", t)
            if cfg.rf_bootstrap:
                sample = rng.integers(n, n)
            else:
                sample = np.arange(n)

            if mtry >= d:
                sampler = lambda: list(range(d))
            else:
                sampler = lambda: rng.permutation(d)[:mtry].tolist()
            self.trees.append(
                _grow_tree(X, y_idx, np.asarray(sample), 0, cfg, len(labels), sampler)
            )
        return self

    def predict_scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        votes = np.zeros(len(self.labels_))
        for root in self.trees:
            leaf = _tree_leaf(root, x)
            votes[int(np.argmax(leaf.counts))] += 1.0
        return votes / len(self.trees)

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "trees": [_node_to_state(t) for t in self.trees],
        }

    @classmethod
    def from_state(cls, state: dict) -> "RandomForestClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.trees = [_node_from_state(t) for t in state["trees"]]
        return clf


def train_random_forest(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return RandomForestClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# Feedforward network: input -> h1 -> h2 -> softmax
# ---------------------------------------------------------------------------


def ffnn_loss_and_grad(params, X, y_idx, lam):
    """Cross-entropy loss and gradients for the two-ReLU-layer network.

    ``params`` is [W1, b1, W2, b2, W3, b3] with Wk shaped (fan_in, fan_out).
    """
    W1, b1, W2, b2, W3, b3 = params
    n = X.shape[0]
    z1 = X @ W1 + b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ W2 + b2
    a2 = np.maximum(z2, 0.0)
    logits = a2 @ W3 + b3
    probs = softmax(logits)
    loss = float(-np.mean(np.log(np.maximum(probs[np.arange(n), y_idx], 1e-300))))
    loss += lam * (float(np.sum(W1 * W1)) + float(np.sum(W2 * W2)) + float(np.sum(W3 * W3)))
    delta = probs
    delta[np.arange(n), y_idx] -= 1.0
    delta /= n
    gW3 = a2.T @ delta + 2.0 * lam * W3
    gb3 = delta.sum(axis=0)
    d2 = (delta @ W3.T) * (z2 > 0.0)
    gW2 = a1.T @ d2 + 2.0 * lam * W2
    gb2 = d2.sum(axis=0)
    d1 = (d2 @ W2.T) * (z1 > 0.0)
    gW1 = X.T @ d1 + 2.0 * lam * W1
    gb1 = d1.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2, gW3, gb3]


class FeedForwardClassifier(Classifier):
    kind = "ffnn"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.params: list[np.ndarray] | None = None

    @staticmethod
    def _init_params(d, h1, h2, c, rng: RngStream) -> list[np.ndarray]:
        def layer(fan_in, fan_out):
            bound = 1.0 / math.sqrt(fan_in)
            W = rng.uniform(fan_in * fan_out, -bound, bound).reshape(fan_in, fan_out)
            b = np.zeros(fan_out)
            return W, b

        W1, b1 = layer(d, h1)
        W2, b2 = layer(h1, h2)
        W3, b3 = layer(h2, c)
        return [W1, b1, W2, b2, W3, b3]

    def fit(self, X, y, seed: int = 0) -> "FeedForwardClassifier":
        X, y_idx, labels = _prepare(X, y)
        self.labels_ = labels
        cfg = self.config
        rng = RngStream(seed).derive("ffnn")
        params = self._init_params(X.shape[1], cfg.hidden1, cfg.hidden2, len(labels), rng)
        train_idx, val_idx = stratified_holdout(y_idx, cfg.val_fraction, rng.derive("val"))
        if val_idx.size == 0:  # tiny datasets: no held-out split, no early stop
            train_idx = np.arange(X.shape[0])
        Xtr, ytr = X[train_idx], y_idx[train_idx]
        history = TrainHistory()
        best_params = [p.copy() for p in params]
        lr = cfg.lr
        shuffler = rng.derive("batches")
        for _ in range(cfg.epochs):
            order = shuffler.permutation(len(train_idx))
            epoch_loss = 0.0
            n_batches = 0
            for start in range(0, len(order), cfg.batch_size):
                batch = order[start:start + cfg.batch_size]
                loss, grads = ffnn_loss_and_grad(params, Xtr[batch], ytr[batch], cfg.lam)
                for p, g in zip(params, grads):
                    p -= lr * g
                epoch_loss += loss
                n_batches += 1
            lr *= cfg.lr_decay
            if val_idx.size:
                preds = [self._predict_with(params, X[i]) for i in val_idx]
                golds = [labels[y_idx[i]] for i in val_idx]
                score = macro_f1(preds, golds, labels)
            else:
                preds = [self._predict_with(params, Xtr[i]) for i in range(len(train_idx))]
                score = macro_f1(preds, [labels[c] for c in ytr], labels)
            if history.record(epoch_loss / max(n_batches, 1), score):
                best_params = [p.copy() for p in params]
            if early_stop(history, cfg.patience):
                break
        self.params = best_params
        return self

    def _predict_with(self, params, x) -> str:
        return self.labels_[int(np.argmax(self._scores_with(params, x)))]

    @staticmethod
    def _scores_with(params, x) -> np.ndarray:
        W1, b1, W2, b2, W3, b3 = params
        a1 = np.maximum(x @ W1 + b1, 0.0)
        a2 = np.maximum(a1 @ W2 + b2, 0.0)
        return softmax(a2 @ W3 + b3)

    def predict_scores(self, x) -> np.ndarray:
        return self._scores_with(self.params, np.asarray(x, dtype=np.float64))

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "params": [p.tolist() for p in self.params],
        }

    @classmethod
    def from_state(cls, state: dict) -> "FeedForwardClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.params = [np.asarray(p, dtype=np.float64) for p in state["params"]]
        return clf


def train_ffnn(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return FeedForwardClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# Cosine nearest-instance classifier
# ---------------------------------------------------------------------------


class CosineNearestClassifier(Classifier):
    """Label of the training instance with maximal cosine similarity; ties
    resolve to the lower training index. Zero-norm vectors similarity 0."""

    kind = "cosine-1nn"

    def __init__(self, config: TrainConfig | None = None):
        super().__init__()
        self.config = config or TrainConfig()
        self.X: np.ndarray | None = None
        self.y_idx: np.ndarray | None = None
        self._row_norms: np.ndarray | None = None

    def fit(self, X, y, seed: int = 0) -> "CosineNearestClassifier":
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ArgumentError("training set must be a nonempty 2-D matrix")
        y = list(y)
        labels = tuple(sorted(set(y)))
        index = {lab: i for i, lab in enumerate(labels)}
        self.labels_ = labels
        self.X = X
        self.y_idx = np.array([index[v] for v in y], dtype=np.int64)
        self._row_norms = np.sqrt(np.sum(X * X, axis=1))
        return self

    def _similarities(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        qn = float(np.sqrt(x @ x))
        if qn == 0.0:
            return np.zeros(self.X.shape[0])
        sims = self.X @ x
        with np.errstate(divide="ignore", invalid="ignore"):
            sims = np.where(self._row_norms > 0.0, sims / (self._row_norms * qn), 0.0)
        return sims

    def predict(self, x) -> str:
        sims = self._similarities(x)
        return self.labels_[int(self.y_idx[int(np.argmax(sims))])]

    def predict_scores(self, x) -> np.ndarray:
        sims = self._similarities(x)
        scores = np.full(len(self.labels_), -1.0)
        for c in range(len(self.labels_)):
            member = sims[self.y_idx == c]
            if member.size:
                scores[c] = float(member.max())
        return scores

    def to_state(self) -> dict:
        return {
            "config": asdict(self.config), "labels": list(self.labels_),
            "x": self.X.tolist(), "y_idx": self.y_idx.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> "CosineNearestClassifier":
        clf = cls(TrainConfig(**state.get("config", {})))
        clf.labels_ = tuple(state["labels"])
        clf.X = np.asarray(state["x"], dtype=np.float64)
        clf.y_idx = np.asarray(state["y_idx"], dtype=np.int64)
        clf._row_norms = np.sqrt(np.sum(clf.X * clf.X, axis=1))
        return clf


def train_cosine_1nn(X, y, cfg: TrainConfig | None = None, seed: int = 0):
    return CosineNearestClassifier(cfg).fit(X, y, seed)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

MODEL_KINDS = {
    cls.kind: cls
    for cls in (
        LinearSvmClassifier, KernelSvmClassifier, LogisticRegressionClassifier,
        KnnClassifier, DecisionTreeClassifier, RandomForestClassifier,
        FeedForwardClassifier, CosineNearestClassifier,
    )
}

_FORMAT = "intentbench-model"


def save_model(clf, path) -> None:
    """Self-describing JSON artifact; floats serialize via repr and therefore
    round-trip exactly, so save -> load -> predict is bit-identical."""
    payload = {"format": _FORMAT, "version": 1, "kind": clf.kind, "state": clf.to_state()}
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != _FORMAT:
        raise ArgumentError(f"not an {_FORMAT} artifact: {path}")
    kind = payload.get("kind")
    from .recurrent import SequenceModel  # registered lazily to stay import-cycle-free

    if kind in SequenceModel.KINDS:
        return SequenceModel.from_state(payload["state"])
    if kind not in MODEL_KINDS:
        raise ArgumentError(f"unknown model kind {kind!r}")
    return MODEL_KINDS[kind].from_state(payload["state"])
