"""Classical four-model ensemble over latent vectors.

Members: one-vs-rest linear SVM (primal subgradient on hinge loss plus L2),
random forest (bootstrap + Gini + sqrt-d feature subsampling), exact-scan
KNN, and one-vs-rest gradient-boosted regression trees on logistic loss.
Their probability rows are combined by soft voting (element-wise mean);
a hard-voting mode is available behind the ``voting`` switch.

All probability rows are float64 distributions; ties in hard decisions go
to the lowest class index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .metrics import hard_labels
from .rng import Rng


class FitError(ValueError):
    pass


def _softmax_rows(scores: np.ndarray) -> np.ndarray:
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def vote_labels(prob_rows: np.ndarray) -> np.ndarray:
    """Hard labels from probability rows (argmax, documented tie rule)."""
    return hard_labels(prob_rows)


# ---------------------------------------------------------------------------
# linear SVM


@dataclass
class SvmModel:
    weights: np.ndarray      # [C, d]
    biases: np.ndarray       # [C]
    lam: float
    temperature: float = 1.0


def svm_fit(latents: np.ndarray, labels: np.ndarray, lam: float = 1e-4,
            epochs: int = 400, seed: int = 0, lr: float = 0.05,
            temperature: float = 1.0) -> SvmModel:
    """One-vs-rest linear SVMs by full-batch subgradient descent on
    hinge loss + lam*||w||^2, with a 1/(1+0.01t) step decay."""
    X = np.asarray(latents, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    classes = np.unique(y)
    if len(classes) < 2:
        raise FitError("svm_fit needs at least two classes present")
    c = int(y.max()) + 1
    n, d = X.shape
    rng = Rng(seed)
    W = rng.normal((c, d), 0.0, 1e-3)
    b = np.zeros(c)
    Y = np.full((n, c), -1.0)
    Y[np.arange(n), y] = 1.0
    for t in range(epochs):
        margins = X @ W.T + b
        viol = (Y * margins) < 1.0
        coeff = viol * Y
        gW = 2.0 * lam * W - (coeff.T @ X) / n
        gb = -coeff.sum(axis=0) / n
        step = lr / (1.0 + 0.01 * t)
        W -= step * gW
        b -= step * gb
    return SvmModel(W, b, lam, temperature)


def svm_margins(model: SvmModel, latents: np.ndarray) -> np.ndarray:
    X = np.asarray(latents, dtype=np.float64)
    return X @ model.weights.T + model.biases


def svm_predict_proba(model: SvmModel, latents: np.ndarray) -> np.ndarray:
    """Softmax over per-class margins divided by the temperature."""
    return _softmax_rows(svm_margins(model, latents) / model.temperature)


# ---------------------------------------------------------------------------
# decision trees (shared by the forest and the booster)


@dataclass
class TreeTable:
    """Flat node table; feature -1 marks a leaf.

    ``value`` is a [n_nodes, C] class histogram for classification trees and
    a [n_nodes, 1] mean response for regression trees.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)


class _TreeBuilder:
    def __init__(self, value_width: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.width = value_width

    def new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(np.zeros(self.width))
        return len(self.feature) - 1

    def table(self) -> TreeTable:
        return TreeTable(np.array(self.feature, dtype=np.int32),
                         np.array(self.threshold, dtype=np.float32),
                         np.array(self.left, dtype=np.int32),
                         np.array(self.right, dtype=np.int32),
                         np.stack(self.value))


def _resolve_max_features(d: int, max_features) -> int:
    if max_features is None:
        return d
    if max_features == "sqrt":
        return max(1, int(round(np.sqrt(d))))
    return min(d, max(1, int(max_features)))


def grow_classification_tree(X: np.ndarray, y: np.ndarray, n_classes: int,
                             rng: Rng, max_depth: int | None = None,
                             max_features=None) -> TreeTable:
    """CART-style tree on Gini impurity.  Node visit order is depth-first
    left-first, so the per-split feature draws are reproducible."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    y = np.asarray(y, dtype=np.int32)
    n, d = X.shape
    m = _resolve_max_features(d, max_features)
    builder = _TreeBuilder(n_classes)
    stack = [(np.arange(n, dtype=np.int64), 0, builder.new_node())]
    while stack:
        idx, depth, slot = stack.pop()
        hist = np.bincount(y[idx], minlength=n_classes).astype(np.float64)
        builder.value[slot] = hist
        if (len(idx) < 2 or (max_depth is not None and depth >= max_depth)
                or np.count_nonzero(hist) < 2):
            continue
        cols = np.sort(rng.choice(d, m)) if m < d else np.arange(d, dtype=np.int64)
        sub = np.ascontiguousarray(X[np.ix_(idx, cols)])
        f_local, thr, _gain = kernels.best_split_gini(sub, y[idx], n_classes)
        if f_local < 0:
            continue
        feat = int(cols[f_local])
        go_left = X[idx, feat] <= np.float32(thr)
        left_slot = builder.new_node()
        right_slot = builder.new_node()
        builder.feature[slot] = feat
        builder.threshold[slot] = thr
        builder.left[slot] = left_slot
        builder.right[slot] = right_slot
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))
    return builder.table()


def grow_regression_tree(X: np.ndarray, resid: np.ndarray,
                         max_depth: int) -> TreeTable:
    """Squared-error tree fitted to residuals; leaves store the mean."""
    X = np.ascontiguousarray(X, dtype=np.float32)
    resid = np.asarray(resid, dtype=np.float64)
    n = len(X)
    builder = _TreeBuilder(1)
    stack = [(np.arange(n, dtype=np.int64), 0, builder.new_node())]
    while stack:
        idx, depth, slot = stack.pop()
        builder.value[slot] = np.array([resid[idx].mean()])
        if len(idx) < 2 or depth >= max_depth:
            continue
        f, thr, _gain = kernels.best_split_sse(
            np.ascontiguousarray(X[idx]), np.ascontiguousarray(resid[idx]))
        if f < 0:
            continue
        go_left = X[idx, f] <= np.float32(thr)
        left_slot = builder.new_node()
        right_slot = builder.new_node()
        builder.feature[slot] = int(f)
        builder.threshold[slot] = thr
        builder.left[slot] = left_slot
        builder.right[slot] = right_slot
        stack.append((idx[~go_left], depth + 1, right_slot))
        stack.append((idx[go_left], depth + 1, left_slot))
    return builder.table()


def apply_tree(tree: TreeTable, X: np.ndarray) -> np.ndarray:
    """Leaf index for each row, by vectorised level-wise descent."""
    X = np.asarray(X, dtype=np.float32)
    cur = np.zeros(len(X), dtype=np.int64)
    active = tree.feature[cur] >= 0
    while active.any():
        rows = np.nonzero(active)[0]
        nodes = cur[rows]
        feats = tree.feature[nodes]
        go_left = X[rows, feats] <= tree.threshold[nodes]
        cur[rows] = np.where(go_left, tree.left[nodes], tree.right[nodes])
        active = tree.feature[cur] >= 0
    return cur


def tree_predict(tree: TreeTable, X: np.ndarray) -> np.ndarray:
    """Hard class votes (argmax of leaf histogram, ties to lowest index)."""
    leaves = apply_tree(tree, X)
    return tree.value[leaves].argmax(axis=1)


# ---------------------------------------------------------------------------
# random forest


@dataclass
class RandomForestModel:
    trees: list[TreeTable]
    n_classes: int


def rf_fit(latents: np.ndarray, labels: np.ndarray, n_trees: int = 100,
           seed: int = 0, max_depth: int | None = None,
           max_features="sqrt", bootstrap: bool = True) -> RandomForestModel:
    """Each tree trains on its own bootstrap with sqrt-d feature subsampling
    at every split."""
    X = np.asarray(latents, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    if len(X) == 0:
        raise FitError("rf_fit needs a nonempty dataset")
    n_classes = int(y.max()) + 1
    root = Rng(seed)
    trees = []
    for t in range(n_trees):
        rng = root.fork(t)
        rows = rng.integers(len(X), len(X)) if bootstrap else np.arange(len(X))
        trees.append(grow_classification_tree(
            X[rows], y[rows], n_classes, rng, max_depth, max_features))
    return RandomForestModel(trees, n_classes)


def rf_predict_proba(model: RandomForestModel, latents: np.ndarray) -> np.ndarray:
    """Probability = fraction of trees voting each class."""
    X = np.asarray(latents, dtype=np.float32)
    counts = np.zeros((len(X), model.n_classes), dtype=np.float64)
    for tree in model.trees:
        votes = tree_predict(tree, X)
        counts[np.arange(len(X)), votes] += 1.0
    return counts / len(model.trees)


def rf_predict(model: RandomForestModel, latents: np.ndarray) -> np.ndarray:
    """Mode of the tree votes, ties to the lowest class index."""
    return rf_predict_proba(model, latents).argmax(axis=1)


# ---------------------------------------------------------------------------
# k nearest neighbours


@dataclass
class KnnModel:
    latents: np.ndarray
    labels: np.ndarray
    k: int
    n_classes: int


def knn_fit(latents: np.ndarray, labels: np.ndarray, k: int = 7,
            n_classes: int | None = None) -> KnnModel:
    X = np.asarray(latents, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    if not 1 <= k <= len(X):
        raise FitError(f"k must satisfy 1 <= k <= {len(X)}, got {k}")
    if n_classes is None:
        n_classes = int(y.max()) + 1
    return KnnModel(X, y, k, n_classes)


def knn_predict_proba(model: KnnModel, queries: np.ndarray) -> np.ndarray:
    """Exact scan: Euclidean distances, ties in distance broken by training
    index, probabilities = neighbour class frequencies / k."""
    Q = np.asarray(queries, dtype=np.float32)
    if model.k > len(model.latents):
        raise FitError(f"k={model.k} exceeds store size {len(model.latents)}")
    store = model.latents.astype(np.float64)
    out = np.zeros((len(Q), model.n_classes), dtype=np.float64)
    for i, q in enumerate(Q.astype(np.float64)):
        d2 = ((store - q) ** 2).sum(axis=1)
        nearest = np.argsort(d2, kind="stable")[:model.k]
        counts = np.bincount(model.labels[nearest], minlength=model.n_classes)
        out[i] = counts / model.k
    return out


# ---------------------------------------------------------------------------
# gradient-boosted trees


@dataclass
class GbtModel:
    trees: list[list[TreeTable]]   # [round][class]
    lr: float
    n_classes: int
    depth: int
    train_loss: list[float] = field(default_factory=list)


def gbt_fit(latents: np.ndarray, labels: np.ndarray, rounds: int = 50,
            lr: float = 0.1, depth: int = 3, seed: int = 0,
            subsample: float = 1.0) -> GbtModel:
    """One-vs-rest boosting on logistic loss: every round fits a regression
    tree to each class's negative gradient and adds it with constant weight
    lr.  `subsample` < 1 draws a seeded row subset per tree."""
    if rounds < 1:
        raise FitError(f"rounds must be >= 1, got {rounds}")
    if depth < 1:
        raise FitError(f"depth must be >= 1, got {depth}")
    X = np.asarray(latents, dtype=np.float32)
    y = np.asarray(labels, dtype=np.int64)
    n = len(X)
    n_classes = int(y.max()) + 1
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), y] = 1.0
    scores = np.zeros((n, n_classes))
    root = Rng(seed)
    model = GbtModel([], lr, n_classes, depth)
    for r in range(rounds):
        stage = []
        for c in range(n_classes):
            p = 1.0 / (1.0 + np.exp(-scores[:, c]))
            resid = onehot[:, c] - p
            if subsample < 1.0:
                take = max(1, int(subsample * n))
                rows = np.sort(root.fork(r * n_classes + c).permutation(n)[:take])
            else:
                rows = np.arange(n)
            tree = grow_regression_tree(X[rows], resid[rows], depth)
            stage.append(tree)
            scores[:, c] += lr * tree.value[apply_tree(tree, X), 0]
        model.trees.append(stage)
        p_all = 1.0 / (1.0 + np.exp(-scores))
        eps = 1e-12
        loss = -(onehot * np.log(np.maximum(p_all, eps))
                 + (1 - onehot) * np.log(np.maximum(1 - p_all, eps))).sum() / n
        model.train_loss.append(float(loss))
    return model


def gbt_scores(model: GbtModel, latents: np.ndarray,
               max_rounds: int | None = None) -> np.ndarray:
    """Raw additive scores, optionally truncated to the first max_rounds."""
    X = np.asarray(latents, dtype=np.float32)
    stages = model.trees if max_rounds is None else model.trees[:max_rounds]
    scores = np.zeros((len(X), model.n_classes))
    for stage in stages:
        for c, tree in enumerate(stage):
            scores[:, c] += model.lr * tree.value[apply_tree(tree, X), 0]
    return scores


def gbt_predict_proba(model: GbtModel, latents: np.ndarray) -> np.ndarray:
    return _softmax_rows(gbt_scores(model, latents))


# ---------------------------------------------------------------------------
# the ensemble


@dataclass(frozen=True)
class SynXrfConfig:
    svm_lambda: float = 1e-4
    svm_epochs: int = 400
    svm_lr: float = 0.05
    svm_temperature: float = 1.0
    rf_trees: int = 100
    rf_max_depth: int | None = None
    knn_k: int = 7
    gbt_rounds: int = 50
    gbt_lr: float = 0.1
    gbt_depth: int = 3
    voting: str = "soft"

    def __post_init__(self):
        if self.voting not in ("soft", "hard"):
            raise FitError(f"voting must be 'soft' or 'hard', got {self.voting!r}")


@dataclass
class SynXrfModel:
    svm: SvmModel
    rf: RandomForestModel
    knn: KnnModel
    gbt: GbtModel
    voting: str = "soft"

    def members(self) -> dict:
        return {"svm": self.svm, "rf": self.rf, "knn": self.knn, "gbt": self.gbt}


def synxrf_fit(config: SynXrfConfig, latents: np.ndarray, labels: np.ndarray,
               seed: int) -> SynXrfModel:
    root = Rng(seed)
    n_classes = int(np.asarray(labels).max()) + 1
    svm = svm_fit(latents, labels, config.svm_lambda, config.svm_epochs,
                  root.fork(1).randint(2 ** 31), config.svm_lr,
                  config.svm_temperature)
    rf = rf_fit(latents, labels, config.rf_trees, root.fork(2).randint(2 ** 31),
                config.rf_max_depth)
    knn = knn_fit(latents, labels, config.knn_k, n_classes)
    gbt = gbt_fit(latents, labels, config.gbt_rounds, config.gbt_lr,
                  config.gbt_depth, root.fork(4).randint(2 ** 31))
    return SynXrfModel(svm, rf, knn, gbt, config.voting)


def member_probas(model: SynXrfModel, latents: np.ndarray) -> dict[str, np.ndarray]:
    return {
        "svm": svm_predict_proba(model.svm, latents),
        "rf": rf_predict_proba(model.rf, latents),
        "knn": knn_predict_proba(model.knn, latents),
        "gbt": gbt_predict_proba(model.gbt, latents),
    }


def soft_vote(prob_rows: list[np.ndarray]) -> np.ndarray:
    """Element-wise mean of member probability rows."""
    if not prob_rows:
        raise FitError("soft_vote needs at least one member")
    return np.mean(np.stack([np.asarray(p, dtype=np.float64) for p in prob_rows]),
                   axis=0)


def hard_vote(prob_rows: list[np.ndarray]) -> np.ndarray:
    """Vote-fraction rows from member argmax decisions."""
    if not prob_rows:
        raise FitError("hard_vote needs at least one member")
    stacked = np.stack([np.asarray(p).argmax(axis=1) for p in prob_rows])
    n = stacked.shape[1]
    c = prob_rows[0].shape[1]
    counts = np.zeros((n, c), dtype=np.float64)
    for votes in stacked:
        counts[np.arange(n), votes] += 1.0
    return counts / len(prob_rows)


def synxrf_predict_proba(model: SynXrfModel, latents: np.ndarray) -> np.ndarray:
    rows = list(member_probas(model, latents).values())
    if model.voting == "hard":
        return hard_vote(rows)
    return soft_vote(rows)


def synxrf_predict(model: SynXrfModel, latents: np.ndarray) -> np.ndarray:
    return vote_labels(synxrf_predict_proba(model, latents))
