"""Small classical-classifier suite: KNN, logistic regression, linear SVM, tree.

Used to fit the LID detector and as transfer-study victims. Scores are
thresholdable margins (LGR/SVM) or vote/purity fractions (KNN/tree); a score
exactly at the threshold classifies as positive, fail-closed for an IDS.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError

KINDS = ("knn", "lgr", "linsvm", "dtc")
CLASSIC_MAGIC = "robustids-classic v1"

DEFAULTS = {
    "knn": {"k": 5},
    "lgr": {"epochs": 50, "learning_rate": 0.05, "l2": 1e-4, "batch_size": 64, "class_weight": None},
    "linsvm": {"epochs": 50, "learning_rate": 0.05, "l2": 1e-4, "batch_size": 64, "class_weight": None},
    "dtc": {"max_depth": 12, "min_leaf": 5},
}


@dataclass
class ClassicModel:
    kind: str
    params: dict
    hyper: dict = field(default_factory=dict)


def natural_threshold(kind):
    """Score value at which the positive class starts (ties classify positive)."""
    return 0.0 if kind in ("lgr", "linsvm") else 0.5


def train_classic(kind, X, y, hyperparams=None, seed=0):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if kind not in KINDS:
        raise ValueError(f"unknown classic kind {kind!r}")
    if len(np.unique(y)) < 2:
        raise ValueError("training data contains a single class")
    hyper = dict(DEFAULTS[kind])
    hyper.update(hyperparams or {})
    if kind == "knn":
        params = {"X": X.copy(), "y": y.copy(), "k": int(hyper["k"])}
    elif kind in ("lgr", "linsvm"):
        params = _train_linear(kind, X, y, hyper, seed)
    else:
        params = _train_tree(X, y, hyper)
    return ClassicModel(kind, params, hyper)


def _train_linear(kind, X, y, hyper, seed):
    rng = np.random.default_rng(seed)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    t = 2.0 * y - 1.0  # hinge wants +-1 targets
    lr, l2, bs = hyper["learning_rate"], hyper["l2"], hyper["batch_size"]
    cw = hyper.get("class_weight")
    sample_w = np.ones(n) if cw is None else np.where(y == 1, cw.get(1, 1.0), cw.get(0, 1.0))
    for _ in range(hyper["epochs"]):
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start : start + bs]
            margins = X[idx] @ w + b
            if kind == "lgr":
                # d/dm of log(1 + exp(-t m)) = sigmoid(m) - y
                grad_m = 1.0 / (1.0 + np.exp(-np.clip(margins, -60.0, 60.0))) - y[idx]
            else:
                grad_m = np.where(t[idx] * margins < 1.0, -t[idx], 0.0)
            grad_m = grad_m * sample_w[idx]
            gw = X[idx].T @ grad_m / len(idx) + l2 * w
            gb = grad_m.mean()
            w -= lr * gw
            b -= lr * gb
    return {"w": w, "b": float(b)}


def _gini_best_split(Xf, y_sorted_by, order, n1_total, min_leaf):
    """Best (threshold, weighted gini) along one feature; None if no valid cut."""
    v = Xf[order]
    s = y_sorted_by[order]
    n = len(v)
    left1 = np.cumsum(s)[:-1]
    left_n = np.arange(1, n)
    right1 = n1_total - left1
    right_n = n - left_n
    valid = (v[1:] != v[:-1]) & (left_n >= min_leaf) & (right_n >= min_leaf)
    if not valid.any():
        return None
    p_l = left1 / left_n
    p_r = right1 / right_n
    gini = (left_n * 2 * p_l * (1 - p_l) + right_n * 2 * p_r * (1 - p_r)) / n
    gini = np.where(valid, gini, np.inf)
    i = int(np.argmin(gini))
    return 0.5 * (v[i] + v[i + 1]), float(gini[i])


def _train_tree(X, y, hyper):
    max_depth, min_leaf = hyper["max_depth"], hyper["min_leaf"]
    feature, threshold, left, right, leaf_class, leaf_frac = [], [], [], [], [], []

    def add_leaf(idx):
        frac = float(y[idx].mean())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        leaf_class.append(1 if frac >= 0.5 else 0)
        leaf_frac.append(frac)
        return len(feature) - 1

    def build(idx, depth):
        sub_y = y[idx]
        n1 = int(sub_y.sum())
        if depth >= max_depth or len(idx) < 2 * min_leaf or n1 == 0 or n1 == len(idx):
            return add_leaf(idx)
        best = None
        for f in range(X.shape[1]):
            col = X[idx, f]
            order = np.argsort(col, kind="stable")
            cut = _gini_best_split(col, sub_y, order, n1, min_leaf)
            if cut is not None and (best is None or cut[1] < best[2]):
                best = (f, cut[0], cut[1])
        if best is None:
            return add_leaf(idx)
        f, thr, _ = best
        node = len(feature)
        feature.append(f)
        threshold.append(float(thr))
        left.append(-1)
        right.append(-1)
        leaf_class.append(-1)
        leaf_frac.append(0.0)
        go_left = X[idx, f] <= thr
        left[node] = build(idx[go_left], depth + 1)
        right[node] = build(idx[~go_left], depth + 1)
        return node

    build(np.arange(len(y)), 0)
    return {
        "feature": np.array(feature, dtype=int),
        "threshold": np.array(threshold),
        "left": np.array(left, dtype=int),
        "right": np.array(right, dtype=int),
        "leaf_class": np.array(leaf_class, dtype=int),
        "leaf_frac": np.array(leaf_frac),
    }


def _tree_scores(params, X):
    node = np.zeros(len(X), dtype=int)
    feature = params["feature"]
    active = feature[node] >= 0
    while active.any():
        f = feature[node[active]]
        thr = params["threshold"][node[active]]
        go_left = X[active, f] <= thr
        nxt = np.where(go_left, params["left"][node[active]], params["right"][node[active]])
        node[active] = nxt
        active = feature[node] >= 0
    return params["leaf_frac"][node]


def predict_classic_batch(model, X):
    """(classes, scores); scores compare against natural_threshold(kind)."""
    X = np.asarray(X, dtype=np.float64)
    if model.kind == "knn":
        scores = _knn_scores(model.params, X)
    elif model.kind in ("lgr", "linsvm"):
        scores = X @ model.params["w"] + model.params["b"]
    else:
        scores = _tree_scores(model.params, X)
    classes = (scores >= natural_threshold(model.kind)).astype(int)
    return classes, scores


def _knn_scores(params, X):
    ref, ref_y, k = params["X"], params["y"], params["k"]
    scores = np.empty(len(X))
    ref_sq = np.einsum("ij,ij->i", ref, ref)
    chunk = max(1, 50_000_000 // max(len(ref) * 8, 1))
    for start in range(0, len(X), chunk):
        q = X[start : start + chunk]
        sq = np.maximum(
            np.einsum("ij,ij->i", q, q)[:, None] + ref_sq[None, :] - 2.0 * (q @ ref.T), 0.0
        )
        nn = np.argpartition(sq, k - 1, axis=1)[:, :k]
        scores[start : start + len(q)] = ref_y[nn].mean(axis=1)
    return scores


def predict_classic(model, x):
    classes, scores = predict_classic_batch(model, np.asarray(x)[None, :])
    return int(classes[0]), float(scores[0])


def save_classic(model, path):
    def enc(v):
        return v.tolist() if isinstance(v, np.ndarray) else v

    doc = {
        "format": CLASSIC_MAGIC,
        "kind": model.kind,
        "hyper": model.hyper,
        "params": {k: enc(v) for k, v in model.params.items()},
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


_INT_PARAMS = {"y", "k", "feature", "left", "right", "leaf_class"}


def load_classic(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != CLASSIC_MAGIC:
            raise ValueError(f"unexpected format {doc.get('format')!r}")
        params = {}
        for key, v in doc["params"].items():
            if isinstance(v, list):
                params[key] = np.array(v, dtype=int if key in _INT_PARAMS else np.float64)
            else:
                params[key] = v
        return ClassicModel(doc["kind"], params, doc.get("hyper", {}))
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt classic model ({exc})") from exc
