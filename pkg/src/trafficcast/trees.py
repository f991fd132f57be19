"""Regression trees grown from scratch and the ensembles built on them.

Three learners share one CART core:

* Random forest: bootstrap rows, exhaustive midpoint splits.
* Extra-trees: full sample, one uniform random threshold per candidate feature.
* AdaBoost.R2: weighted-bootstrap shallow trees combined by weighted median.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np

from .serialization import hex_array, unhex_array

LEAF = -1
# splits whose child SSE is within this fraction of the node SSE count as ties
TIE_RTOL = 1e-10


@dataclass(frozen=True)
class TreeParams:
    max_features: Union[str, float, int] = "all"
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    max_depth: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0")
        mf = self.max_features
        if isinstance(mf, str):
            if mf not in ("all", "sqrt"):
                raise ValueError(f"max_features must be 'all', 'sqrt' or a number, got {mf!r}")
        elif isinstance(mf, float):
            if not 0.0 < mf <= 1.0:
                raise ValueError("fractional max_features must lie in (0, 1]")
        elif isinstance(mf, int) and mf < 1:
            raise ValueError("integer max_features must be >= 1")

    def n_candidates(self, n_features: int) -> int:
        mf = self.max_features
        if mf == "all":
            k = n_features
        elif mf == "sqrt":
            k = math.floor(math.sqrt(n_features))
        elif isinstance(mf, float):
            k = math.floor(mf * n_features)
        else:
            k = mf
        return max(1, min(n_features, k))


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    tree: TreeParams = field(default_factory=TreeParams)
    bootstrap: Optional[bool] = None  # None: on for random_forest, off for extra_trees
    mode: str = "random_forest"

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.mode not in ("random_forest", "extra_trees"):
            raise ValueError(f"unknown forest mode {self.mode!r}")

    @property
    def use_bootstrap(self) -> bool:
        return self.mode == "random_forest" if self.bootstrap is None else self.bootstrap


@dataclass(frozen=True)
class BoostParams:
    n_estimators: int = 50
    learning_rate: float = 1.0
    base: TreeParams = field(default_factory=lambda: TreeParams(max_depth=3))
    loss: str = "linear"

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.loss not in ("linear", "square", "exponential"):
            raise ValueError(f"unknown loss {self.loss!r}")


def _check_xy(X, y=None):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("need a non-empty 2-D feature matrix")
    if y is None:
        return X
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
    return X, y


@dataclass
class RegressionTree:
    """Flat node table; ``feature == -1`` marks a leaf. Samples go left when ``x <= threshold``."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    n_features: int

    @property
    def node_count(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.node_count, dtype=int)
        for i in range(self.node_count):
            if self.feature[i] != LEAF:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = _check_xy(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"expected {self.n_features} features, got {X.shape[1]}")
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] != LEAF
        while active.any():
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "n_features": self.n_features,
            "feature": self.feature.tolist(),
            "threshold": hex_array(self.threshold),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": hex_array(self.value),
            "n_samples": self.n_samples.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegressionTree":
        return cls(
            feature=np.asarray(d["feature"], dtype=np.int64),
            threshold=unhex_array(d["threshold"]),
            left=np.asarray(d["left"], dtype=np.int64),
            right=np.asarray(d["right"], dtype=np.int64),
            value=unhex_array(d["value"]),
            n_samples=np.asarray(d["n_samples"], dtype=np.int64),
            n_features=d["n_features"],
        )


def _pick(sse: np.ndarray, feats: np.ndarray, thresholds: np.ndarray, node_sse: float):
    """Best (feature, threshold) with ties broken by feature index then threshold."""
    best = sse.min()
    tied = sse <= best + TIE_RTOL * node_sse
    order = np.lexsort((thresholds[tied], feats[tied]))
    k = np.flatnonzero(tied)[order[0]]
    return int(feats[k]), float(thresholds[k])


def _best_exhaustive(Xn, yn, feats, min_leaf, node_sse):
    n = yn.shape[0]
    cols = Xn[:, feats]
    order = np.argsort(cols, axis=0, kind="stable")
    xs = np.take_along_axis(cols, order, axis=0)
    ys = (yn - yn.mean())[order]
    csum = np.cumsum(ys, axis=0)[:-1]
    csq = np.cumsum(ys * ys, axis=0)[:-1]
    tot, totsq = ys.sum(axis=0), (ys * ys).sum(axis=0)
    n_left = np.arange(1, n)[:, None]
    n_right = n - n_left
    sse = (csq - csum ** 2 / n_left) + ((totsq - csq) - (tot - csum) ** 2 / n_right)
    valid = (xs[:-1] < xs[1:]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not valid.any():
        return None
    pos, col = np.nonzero(valid)
    lo, hi = xs[pos, col], xs[pos + 1, col]
    thresholds = (lo + hi) / 2.0
    # adjacent floats: the midpoint may round up onto the larger value
    thresholds = np.where(thresholds >= hi, lo, thresholds)
    return _pick(sse[pos, col], feats[col], thresholds, node_sse)


def _best_random(Xn, yn, feats, min_leaf, node_sse, rng):
    cand_f, cand_t, cand_sse = [], [], []
    for f in feats:
        x = Xn[:, f]
        lo, hi = x.min(), x.max()
        if lo == hi:
            continue
        t = rng.uniform(lo, hi)
        go_left = x <= t
        nl = int(go_left.sum())
        nr = yn.shape[0] - nl
        if nl < min_leaf or nr < min_leaf:
            continue
        yl, yr = yn[go_left], yn[~go_left]
        cand_f.append(f)
        cand_t.append(t)
        cand_sse.append(((yl - yl.mean()) ** 2).sum() + ((yr - yr.mean()) ** 2).sum())
    if not cand_f:
        return None
    return _pick(np.array(cand_sse), np.array(cand_f), np.array(cand_t), node_sse)


def fit_tree(X, y, params: TreeParams = TreeParams(), rng: Optional[np.random.Generator] = None,
             split_mode: str = "exhaustive") -> RegressionTree:
    """Grow a regression tree depth-first by greedy SSE reduction.

    Parameters
    ----------
    X : array of shape (n_samples, n_features)
    y : array of shape (n_samples,)
    params : TreeParams
        Candidate-feature rule, size limits and depth cap.
    rng : numpy Generator, optional
        Drives candidate-feature sampling and random thresholds. Defaults to
        ``default_rng(params.seed)``.
    split_mode : {"exhaustive", "random_threshold"}

    Returns
    -------
    RegressionTree
    """
    X, y = _check_xy(X, y)
    if split_mode not in ("exhaustive", "random_threshold"):
        raise ValueError(f"unknown split_mode {split_mode!r}")
    if rng is None:
        rng = np.random.default_rng(params.seed)
    n_features = X.shape[1]
    k = params.n_candidates(n_features)
    min_leaf = params.min_samples_leaf

    feature, threshold, left, right, value, counts = [], [], [], [], [], []

    def new_node(idx):
        feature.append(LEAF)
        threshold.append(0.0)
        left.append(LEAF)
        right.append(LEAF)
        value.append(float(y[idx].mean()))
        counts.append(len(idx))
        return len(feature) - 1

    stack = [(new_node(np.arange(X.shape[0])), np.arange(X.shape[0]), 0)]
    while stack:
        node, idx, depth = stack.pop()
        n = len(idx)
        yn = y[idx]
        if (n < params.min_samples_split or n < 2 * min_leaf
                or (params.max_depth is not None and depth >= params.max_depth)
                or np.all(yn == yn[0])):
            continue
        feats = np.arange(n_features) if k == n_features else np.sort(
            rng.choice(n_features, size=k, replace=False))
        Xn = X[idx]
        node_sse = float(((yn - yn.mean()) ** 2).sum())
        if split_mode == "exhaustive":
            best = _best_exhaustive(Xn, yn, feats, min_leaf, node_sse)
        else:
            best = _best_random(Xn, yn, feats, min_leaf, node_sse, rng)
        if best is None:
            continue
        f, t = best
        go_left = Xn[:, f] <= t
        li, ri = idx[go_left], idx[~go_left]
        feature[node], threshold[node] = f, t
        left[node] = new_node(li)
        right[node] = new_node(ri)
        # right pushed first so the left subtree is numbered first
        stack.append((right[node], ri, depth + 1))
        stack.append((left[node], li, depth + 1))

    return RegressionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        value=np.asarray(value, dtype=np.float64),
        n_samples=np.asarray(counts, dtype=np.int64),
        n_features=n_features,
    )


def _spawn_seeds(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.default_rng(seed).integers(0, 2 ** 63 - 1, size=n)]


def _params_dict(params) -> dict:
    return asdict(params)


def _tree_params(d: dict) -> TreeParams:
    return TreeParams(**d)


@dataclass
class ForestModel:
    params: ForestParams
    tree_seeds: list[int]
    trees: list[RegressionTree]

    def predict(self, X) -> np.ndarray:
        X = _check_xy(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees:
            total += tree.predict(X)
        return total / len(self.trees)

    def to_dict(self) -> dict:
        return {"params": _params_dict(self.params), "tree_seeds": self.tree_seeds,
                "trees": [t.to_dict() for t in self.trees]}

    @classmethod
    def from_dict(cls, d: dict) -> "ForestModel":
        p = dict(d["params"])
        p["tree"] = _tree_params(p["tree"])
        return cls(ForestParams(**p), list(d["tree_seeds"]),
                   [RegressionTree.from_dict(t) for t in d["trees"]])


def _fit_one(X, y, params: ForestParams, seed: int) -> RegressionTree:
    rng = np.random.default_rng(seed)
    if params.use_bootstrap:
        idx = rng.integers(0, X.shape[0], size=X.shape[0])
        X, y = X[idx], y[idx]
    mode = "exhaustive" if params.mode == "random_forest" else "random_threshold"
    return fit_tree(X, y, params.tree, rng, mode)


def fit_forest(X, y, params: ForestParams = ForestParams()) -> ForestModel:
    """Random forest or extra-trees; per-tree seeds are fixed before any tree is grown."""
    X, y = _check_xy(X, y)
    seeds = _spawn_seeds(params.tree.seed, params.n_estimators)
    return ForestModel(params, seeds, [_fit_one(X, y, params, s) for s in seeds])


def weighted_median(predictions: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Per-column weighted median of an (n_estimators, n_samples) prediction array.

    Picks the smallest prediction whose cumulative weight reaches half the total.
    """
    predictions = np.atleast_2d(predictions)
    order = np.argsort(predictions, axis=0, kind="stable")
    cdf = np.cumsum(np.asarray(weights)[order], axis=0)
    at_or_above = cdf >= 0.5 * cdf[-1]
    k = at_or_above.argmax(axis=0)
    chosen = order[k, np.arange(predictions.shape[1])]
    return predictions[chosen, np.arange(predictions.shape[1])]


@dataclass
class BoostModel:
    params: BoostParams
    estimators: list[RegressionTree]
    estimator_weights: np.ndarray
    estimator_errors: np.ndarray
    # row weights before each round, then after the last update (only if recorded)
    weight_history: Optional[list[np.ndarray]] = None

    def predict(self, X) -> np.ndarray:
        X = _check_xy(X)
        preds = np.array([est.predict(X) for est in self.estimators])
        return weighted_median(preds, self.estimator_weights)

    def to_dict(self) -> dict:
        return {"params": _params_dict(self.params),
                "estimator_weights": hex_array(self.estimator_weights),
                "estimator_errors": hex_array(self.estimator_errors),
                "estimators": [t.to_dict() for t in self.estimators]}

    @classmethod
    def from_dict(cls, d: dict) -> "BoostModel":
        p = dict(d["params"])
        p["base"] = _tree_params(p["base"])
        return cls(BoostParams(**p), [RegressionTree.from_dict(t) for t in d["estimators"]],
                   unhex_array(d["estimator_weights"]), unhex_array(d["estimator_errors"]))


def _normalized_loss(pred, y, kind):
    err = np.abs(pred - y)
    emax = err.max()
    if emax > 0:
        err = err / emax
    if kind == "square":
        err = err ** 2
    elif kind == "exponential":
        err = 1.0 - np.exp(-err)
    return err


def fit_adaboost_r2(X, y, params: BoostParams = BoostParams(),
                    record_weights: bool = False) -> BoostModel:
    """AdaBoost.R2 (Drucker, 1997).

    Each round fits ``params.base`` on a bootstrap sample drawn with the
    current row weights. Boosting stops early on a perfect round (the
    estimator is kept with weight 1) or when the weighted loss reaches 0.5
    (that estimator is dropped unless it would leave the ensemble empty).
    """
    X, y = _check_xy(X, y)
    n = X.shape[0]
    if n < 2:
        raise ValueError("AdaBoost.R2 needs at least 2 rows")
    rng = np.random.default_rng(params.base.seed)
    lr = params.learning_rate
    w = np.full(n, 1.0 / n)
    history = [w.copy()] if record_weights else None
    estimators, est_weights, est_errors = [], [], []

    for _ in range(params.n_estimators):
        cdf = np.cumsum(w)
        cdf /= cdf[-1]
        idx = np.searchsorted(cdf, rng.random(n), side="right")
        idx = np.minimum(idx, n - 1)
        tree = fit_tree(X[idx], y[idx], params.base, rng, "exhaustive")
        err = _normalized_loss(tree.predict(X), y, params.loss)
        avg = float(np.dot(w, err))

        if avg <= 0:
            estimators.append(tree)
            est_weights.append(1.0)
            est_errors.append(avg)
            break
        if avg >= 0.5:
            if not estimators:
                estimators.append(tree)
                est_weights.append(1.0)
                est_errors.append(avg)
            break

        beta = avg / (1.0 - avg)
        estimators.append(tree)
        est_weights.append(lr * math.log(1.0 / beta))
        est_errors.append(avg)
        w = w * np.power(beta, (1.0 - err) * lr)
        w /= w.sum()
        if record_weights:
            history.append(w.copy())

    return BoostModel(params, estimators, np.asarray(est_weights), np.asarray(est_errors), history)


def predict(model, rows) -> np.ndarray:
    """Predict with any fitted tree, forest or boost model."""
    return model.predict(rows)
