"""Second-order gradient-boosted regression trees, written from scratch.

Per-sample loss is ``0.5 * (y - yhat) ** 2`` so the gradient is ``yhat - y``
and the hessian is 1. Each tree adds the penalty

    gamma * n_leaves + 0.5 * reg_lambda * sum(w ** 2) + reg_alpha * sum(|w|)

and is grown by exact greedy search over midpoints between consecutive
distinct feature values. Ties on gain (equal up to ``TIE_RTOL`` of the
node's score scale) go to the lowest feature index, then the lowest threshold.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence, Union

import numpy as np

from tickforge.errors import DataError, ValidationError
from tickforge.features import ScalerParams, transform
from tickforge.rng import XorShift64Star, subsample_count

MODEL_FORMAT = "tickforge-gbt/1"


@dataclass(frozen=True)
class Hyperparams:
    n_trees: int = 100
    learning_rate: float = 0.1
    max_depth: int = 3
    min_child_weight: float = 1.0
    subsample: float = 1.0
    colsample: float = 1.0
    gamma: float = 0.0
    reg_alpha: float = 0.0
    reg_lambda: float = 1.0
    seed: int = 42

    def __post_init__(self):
        for name in ("learning_rate", "min_child_weight", "subsample", "colsample",
                     "gamma", "reg_alpha", "reg_lambda"):
            v = getattr(self, name)
            if isinstance(v, int) and not isinstance(v, bool):
                object.__setattr__(self, name, float(v))
        problems = []
        if not (isinstance(self.n_trees, int) and self.n_trees >= 1):
            problems.append(f"n_trees must be an integer >= 1 (got {self.n_trees!r})")
        if not 0.0 < self.learning_rate <= 1.0:
            problems.append(f"learning_rate must be in (0, 1] (got {self.learning_rate!r})")
        if not (isinstance(self.max_depth, int) and self.max_depth >= 1):
            problems.append(f"max_depth must be an integer >= 1 (got {self.max_depth!r})")
        if not self.min_child_weight >= 0.0:
            problems.append(f"min_child_weight must be >= 0 (got {self.min_child_weight!r})")
        for name in ("subsample", "colsample"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                problems.append(f"{name} must be in (0, 1] (got {v!r})")
        for name in ("gamma", "reg_alpha", "reg_lambda"):
            v = getattr(self, name)
            if not v >= 0.0:
                problems.append(f"{name} must be >= 0 (got {v!r})")
        if not isinstance(self.seed, int):
            problems.append(f"seed must be an integer (got {self.seed!r})")
        if problems:
            raise ValidationError("; ".join(problems))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict, **overrides) -> Hyperparams:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        merged = {**d, **overrides}
        for name in ("n_trees", "max_depth", "seed"):
            v = merged.get(name)
            if isinstance(v, float) and v.is_integer():
                merged[name] = int(v)
        return cls(**merged)


# Chosen configuration reported for the BTC/USDT 15-minute study.
BEST_PRESET = Hyperparams(
    n_trees=300,
    learning_rate=0.2,
    max_depth=4,
    min_child_weight=3.0,
    subsample=1.0,
    colsample=0.8,
    gamma=0.0,
    reg_alpha=1.0,
    reg_lambda=0.5,
)


@dataclass(frozen=True)
class Leaf:
    weight: float
    cover: float = 0.0


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"
    gain: float = 0.0
    cover: float = 0.0


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class GbtModel:
    base_score: float
    trees: tuple[TreeNode, ...]
    hyperparams: Hyperparams
    scaler: ScalerParams | None = None
    feature_names: tuple[str, ...] = ()
    horizon: int | None = None
    train_fraction: float | None = None
    n_features: int = field(default=0)

    def predict(self, X) -> np.ndarray:
        return predict(self, X)

    def predict_raw(self, rows) -> np.ndarray:
        """Standardize unscaled feature rows with the stored scaler, then predict."""
        if self.scaler is None:
            raise ValidationError("model has no scaler; call predict on standardized rows")
        return predict(self, transform(rows, self.scaler))


def soft_threshold(G, alpha):
    return np.sign(G) * np.maximum(np.abs(G) - alpha, 0.0)


def leaf_weight(G: float, H: float, reg_lambda: float = 0.0, reg_alpha: float = 0.0) -> float:
    """Minimizer of ``0.5*(H+lambda)*w**2 + G*w + alpha*|w|``."""
    denom = H + reg_lambda
    if not denom > 0:
        raise ValidationError(f"leaf weight undefined: H + lambda = {denom}")
    return float(-soft_threshold(G, reg_alpha) / denom)


def _score(G, H, reg_lambda, reg_alpha):
    t = soft_threshold(G, reg_alpha)
    return t * t / (H + reg_lambda)


def split_gain(G_L, H_L, G_R, H_R, reg_lambda=0.0, reg_alpha=0.0, gamma=0.0):
    """Objective reduction from splitting a leaf into (L, R), net of ``gamma``.

    Works elementwise on arrays as well as on scalars.
    """
    parent = _score(G_L + G_R, H_L + H_R, reg_lambda, reg_alpha)
    return 0.5 * (_score(G_L, H_L, reg_lambda, reg_alpha)
                  + _score(G_R, H_R, reg_lambda, reg_alpha) - parent) - gamma


# Gains closer than this (relative to the node's score scale) count as ties, so
# the tie-break does not depend on the order in which gradients were summed.
TIE_RTOL = 1e-10


def _best_split(X, g, h, idx, cols, G, H, hp):
    """Best admissible (gain, feature, threshold) at a node, or None."""
    g_node = g[idx]
    h_node = h[idx]
    per_feature = []
    for f in cols:
        xs = X[idx, f]
        order = np.argsort(xs, kind="stable")
        xs = xs[order]
        distinct = xs[:-1] < xs[1:]
        if not distinct.any():
            continue
        gl = np.cumsum(g_node[order])[:-1]
        hl = np.cumsum(h_node[order])[:-1]
        gr = G - gl
        hr = H - hl
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = split_gain(gl, hl, gr, hr, hp.reg_lambda, hp.reg_alpha, hp.gamma)
        ok = (distinct & (gain > 0.0)
              & (hl >= hp.min_child_weight) & (hr >= hp.min_child_weight))
        if ok.any():
            cand = np.flatnonzero(ok)
            per_feature.append((f, xs, cand, gain[cand]))
    if not per_feature:
        return None
    top = max(float(gains.max()) for _, _, _, gains in per_feature)
    scale = top + hp.gamma + float(_score(G, H, hp.reg_lambda, hp.reg_alpha))
    floor = top - TIE_RTOL * scale
    # lowest feature, then lowest threshold, among gains tied with the maximum
    for f, xs, cand, gains in per_feature:
        hits = np.flatnonzero(gains >= floor)
        if len(hits):
            i = cand[hits[0]]
            lo, hi = xs[i], xs[i + 1]
            t = lo + (hi - lo) / 2.0
            if not lo < t:
                t = hi
            return float(gains[hits[0]]), int(f), float(t)
    return None


def grow_tree(
    X: np.ndarray,
    g: np.ndarray,
    h: np.ndarray,
    hp: Hyperparams,
    col_mask: Sequence[int] | None = None,
    rows: np.ndarray | None = None,
) -> TreeNode:
    """Grow one regression tree on the sampled ``rows`` using columns ``col_mask``."""
    X = np.asarray(X, dtype=float)
    g = np.asarray(g, dtype=float)
    h = np.asarray(h, dtype=float)
    if not len(g) == len(h) == len(X):
        raise ValidationError("gradients, hessians and rows differ in length")
    idx = np.arange(len(X)) if rows is None else np.asarray(rows, dtype=np.intp)
    if len(idx) == 0:
        raise ValidationError("cannot grow a tree on an empty sample")
    cols = sorted(range(X.shape[1]) if col_mask is None else col_mask)

    def grow(node_idx, depth):
        G = float(g[node_idx].sum())
        H = float(h[node_idx].sum())
        if depth < hp.max_depth and len(node_idx) > 1:
            best = _best_split(X, g, h, node_idx, cols, G, H, hp)
            if best is not None:
                gain, f, t = best
                go_left = X[node_idx, f] < t
                return Split(f, t, grow(node_idx[go_left], depth + 1),
                             grow(node_idx[~go_left], depth + 1), gain, H)
        return Leaf(leaf_weight(G, H, hp.reg_lambda, hp.reg_alpha), H)

    return grow(idx, 0)


def tree_predict(node: TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(len(X))

    def route(n, idx):
        if isinstance(n, Leaf):
            out[idx] = n.weight
            return
        left = X[idx, n.feature] < n.threshold
        route(n.left, idx[left])
        route(n.right, idx[~left])

    route(node, np.arange(len(X)))
    return out


def fit(X_train, y_train, hp: Hyperparams) -> GbtModel:
    """Boost ``hp.n_trees`` trees on already standardized features.

    Each round draws, in this order, a row sample of ``ceil(subsample*m)``
    and a column sample of ``ceil(colsample*n)`` from one generator seeded
    with ``hp.seed``.
    """
    X = np.asarray(X_train, dtype=float)
    y = np.asarray(y_train, dtype=float)
    if X.ndim != 2 or len(X) < 2:
        raise DataError(f"need a 2-D matrix with at least 2 rows, got shape {X.shape}")
    if len(y) != len(X):
        raise DataError(f"{len(X)} rows but {len(y)} targets")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise DataError("training data contains non-finite values")
    m, n = X.shape
    rng = XorShift64Star(hp.seed)
    n_rows = subsample_count(hp.subsample, m)
    n_cols = subsample_count(hp.colsample, n)
    base = float(np.mean(y))
    pred = np.full(m, base)
    hess = np.ones(m)
    trees = []
    for _ in range(hp.n_trees):
        grad = pred - y
        rows = rng.sample(m, n_rows)
        cols = rng.sample(n, n_cols)
        tree = grow_tree(X, grad, hess, hp, cols.tolist(), rows)
        trees.append(tree)
        pred = pred + hp.learning_rate * tree_predict(tree, X)
    return GbtModel(base, tuple(trees), hp, n_features=n)


def predict(model: GbtModel, X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or (model.n_features and X.shape[1] != model.n_features):
        raise DataError(f"model expects {model.n_features} features, got shape {X.shape}")
    out = np.full(len(X), model.base_score)
    for tree in model.trees:
        out += model.hyperparams.learning_rate * tree_predict(tree, X)
    return out


def tree_penalty(node: TreeNode, hp: Hyperparams) -> float:
    leaves = list(iter_leaves(node))
    w = np.array([leaf.weight for leaf in leaves])
    return hp.gamma * len(leaves) + 0.5 * hp.reg_lambda * float(w @ w) + hp.reg_alpha * float(np.abs(w).sum())


def training_objective(model: GbtModel, X, y) -> float:
    """Half squared error plus every tree's penalty."""
    r = np.asarray(y, dtype=float) - predict(model, X)
    return 0.5 * float(r @ r) + sum(tree_penalty(t, model.hyperparams) for t in model.trees)


def iter_leaves(node: TreeNode):
    if isinstance(node, Leaf):
        yield node
    else:
        yield from iter_leaves(node.left)
        yield from iter_leaves(node.right)


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


# -- persistence -------------------------------------------------------------

def _node_to_dict(node: TreeNode) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": node.weight, "cover": node.cover}
    return {
        "feature": node.feature,
        "threshold": node.threshold,
        "gain": node.gain,
        "cover": node.cover,
        "left": _node_to_dict(node.left),
        "right": _node_to_dict(node.right),
    }


def _node_from_dict(d: dict, n_features: int) -> TreeNode:
    if "leaf" in d:
        return Leaf(float(d["leaf"]), float(d.get("cover", 0.0)))
    f = int(d["feature"])
    if not 0 <= f < n_features:
        raise DataError(f"tree references feature {f} but model has {n_features}")
    return Split(f, float(d["threshold"]), _node_from_dict(d["left"], n_features),
                 _node_from_dict(d["right"], n_features),
                 float(d.get("gain", 0.0)), float(d.get("cover", 0.0)))


def model_to_dict(model: GbtModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "base_score": model.base_score,
        "n_features": model.n_features,
        "feature_names": list(model.feature_names),
        "horizon": model.horizon,
        "train_fraction": model.train_fraction,
        "hyperparams": model.hyperparams.to_dict(),
        "scaler": model.scaler.to_dict() if model.scaler is not None else None,
        "trees": [_node_to_dict(t) for t in model.trees],
    }


def model_from_dict(d: dict) -> GbtModel:
    if d.get("format") != MODEL_FORMAT:
        raise DataError(f"unsupported model format {d.get('format')!r}, expected {MODEL_FORMAT!r}")
    n = int(d["n_features"])
    scaler = ScalerParams.from_dict(d["scaler"]) if d.get("scaler") else None
    return GbtModel(
        base_score=float(d["base_score"]),
        trees=tuple(_node_from_dict(t, n) for t in d["trees"]),
        hyperparams=Hyperparams.from_dict(d["hyperparams"]),
        scaler=scaler,
        feature_names=tuple(d.get("feature_names") or ()),
        horizon=d.get("horizon"),
        train_fraction=d.get("train_fraction"),
        n_features=n,
    )


def dumps(model: GbtModel) -> str:
    # json writes floats with repr(), which round-trips exactly
    return json.dumps(model_to_dict(model), indent=1, allow_nan=False) + "\n"


def loads(text: str | bytes) -> GbtModel:
    try:
        return model_from_dict(json.loads(text))
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed model file: {exc}") from None


def with_metadata(model: GbtModel, **kwargs) -> GbtModel:
    return replace(model, **kwargs)
