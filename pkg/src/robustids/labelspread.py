"""Graph label spreading: the robust fallback classifier for flagged flows.

Anchors form a Gaussian-affinity graph; queries are appended as unlabeled
nodes and scores are iterated with Y <- alpha L Y + (1 - alpha) Y0 over the
symmetrically normalized affinity L = D^-1/2 W D^-1/2 until convergence.
The dense closed-form solve serves as the oracle for the iterative path.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError

LS_MAGIC = "robustids-labelspread v1"
DEGREE_FLOOR = 1e-12
N_CLASSES = 2


@dataclass
class LabelSpreadModel:
    anchors: np.ndarray  # (n, d)
    y0: np.ndarray  # (n, 2) one-hot rows; zero rows for unlabeled anchors
    sigma: float
    alpha: float
    tol: float = 1e-6
    max_iter: int = 1000
    query_batch: int = 500
    w_anchor: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.w_anchor is None:
            self.w_anchor = _affinity(self.anchors, self.anchors, self.sigma, zero_diag=True)


def _sq_dists(A, B):
    sq = (
        np.einsum("ij,ij->i", A, A)[:, None]
        + np.einsum("ij,ij->i", B, B)[None, :]
        - 2.0 * (A @ B.T)
    )
    return np.maximum(sq, 0.0)


def _affinity(A, B, sigma, zero_diag=False):
    W = np.exp(-_sq_dists(A, B) / (2.0 * sigma * sigma))
    if zero_diag:
        np.fill_diagonal(W, 0.0)
    return W


def median_pairwise_distance(X, cap=3000, seed=0):
    """Median of pairwise distances (subsampled above `cap` rows)."""
    X = np.asarray(X, dtype=np.float64)
    if len(X) > cap:
        X = X[np.random.default_rng(seed).choice(len(X), size=cap, replace=False)]
    d = np.sqrt(_sq_dists(X, X))
    iu = np.triu_indices(len(X), k=1)
    return float(np.median(d[iu]))


def neighborhood_sigma(X, k=7, cap=3000, seed=0):
    """Default kernel width: mean distance to the k-th nearest neighbor.

    The global median-pairwise scale makes the kernel nearly flat (every node
    couples to every other) and propagation collapses to the class priors;
    the k-NN scale keeps affinity local.
    """
    X = np.asarray(X, dtype=np.float64)
    if len(X) > cap:
        X = X[np.random.default_rng(seed).choice(len(X), size=cap, replace=False)]
    sq = _sq_dists(X, X)
    np.fill_diagonal(sq, np.inf)
    kth = np.partition(sq, k - 1, axis=1)[:, k - 1]
    return float(np.sqrt(kth).mean())


def fit(anchors, labels, sigma=None, alpha=0.9, tol=1e-6, max_iter=1000):
    """Build the anchor graph. labels: 0/1, or -1 for unlabeled anchors."""
    anchors = np.asarray(anchors, dtype=np.float64)
    labels = np.asarray(labels, dtype=int)
    if len(anchors) == 0:
        raise ValueError("need at least one anchor")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must be inside (0, 1), got {alpha}")
    if sigma is None:
        sigma = neighborhood_sigma(anchors)
    if sigma <= 0.0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    y0 = np.zeros((len(anchors), N_CLASSES))
    labeled = labels >= 0
    y0[np.where(labeled)[0], labels[labeled]] = 1.0
    return LabelSpreadModel(anchors, y0, float(sigma), float(alpha), tol, max_iter)


def _extended_operator(model, Q):
    """Normalized affinity over anchors + queries, and the initial label block."""
    W_aq = _affinity(model.anchors, Q, model.sigma)
    W_qq = _affinity(Q, Q, model.sigma, zero_diag=True)
    W = np.block([[model.w_anchor, W_aq], [W_aq.T, W_qq]])
    d = np.maximum(W.sum(axis=1), DEGREE_FLOOR)
    inv_sqrt = 1.0 / np.sqrt(d)
    L = W * inv_sqrt[:, None] * inv_sqrt[None, :]
    y0 = np.vstack([model.y0, np.zeros((len(Q), N_CLASSES))])
    return L, y0


def propagate_iterative(model, queries):
    """Score rows for queries appended as unlabeled nodes, batch by batch."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    out = np.empty((len(Q), N_CLASSES))
    n_a = len(model.anchors)
    for start in range(0, len(Q), model.query_batch):
        qb = Q[start : start + model.query_batch]
        L, y0 = _extended_operator(model, qb)
        Y = y0.copy()
        converged = False
        for _ in range(model.max_iter):
            Y_next = model.alpha * (L @ Y) + (1.0 - model.alpha) * y0
            delta = np.abs(Y_next - Y).max()
            Y = Y_next
            if delta < model.tol:
                converged = True
                break
        if not converged:
            warnings.warn("label spreading did not converge within max_iter", RuntimeWarning)
        out[start : start + len(qb)] = Y[n_a:]
    return out


def propagate_closed_form(model, queries, max_nodes=5000):
    """Exact solve Y* = (1 - alpha) (I - alpha L)^-1 Y0; oracle for the iteration."""
    Q = np.atleast_2d(np.asarray(queries, dtype=np.float64))
    if len(model.anchors) + len(Q) > max_nodes:
        raise ValueError(f"extended graph exceeds {max_nodes} nodes for a dense solve")
    L, y0 = _extended_operator(model, Q)
    system = np.eye(len(L)) - model.alpha * L
    try:
        Y = (1.0 - model.alpha) * np.linalg.solve(system, y0)
    except np.linalg.LinAlgError as exc:  # cannot occur for alpha in (0, 1)
        raise AssertionError("(I - alpha L) went singular") from exc
    return Y[len(model.anchors):]


def predict_ls(model, queries):
    """Argmax over propagated scores; exact ties resolve to malicious."""
    scores = propagate_iterative(model, queries)
    return (scores[:, 1] >= scores[:, 0]).astype(int)


@dataclass
class SmoothnessReport:
    quotients: np.ndarray  # Rayleigh quotient of the normalized Laplacian, per column
    cost: float
    mu: float


def smoothness(model, label_matrix):
    """Diagnostic: graph-smoothness quotients and the clamped three-term cost."""
    F = np.asarray(label_matrix, dtype=np.float64)
    if F.ndim == 1:
        F = F[:, None]
    if F.shape[0] != len(model.anchors):
        raise ValueError("label matrix rows must match the anchor count")
    W = model.w_anchor
    d = W.sum(axis=1)
    lap = np.diag(d) - W
    quotients = np.empty(F.shape[1])
    for c in range(F.shape[1]):
        f = F[:, c]
        num = float(f @ lap @ f)  # sum over edges of w_uv (f_u - f_v)^2
        den = float(f @ (d * f))
        quotients[c] = num / den if den > 0 else 0.0
    mu = model.alpha / (1.0 - model.alpha)
    labeled = model.y0.sum(axis=1) > 0
    term1 = float(((F - model.y0)[labeled] ** 2).sum())
    term2 = float((F[~labeled] ** 2).sum())
    g = F / np.sqrt(np.maximum(d, DEGREE_FLOOR))[:, None]
    term3 = mu * float(np.einsum("ic,ic->", g, lap @ g))
    return SmoothnessReport(quotients, term1 + term2 + term3, mu)


def save_ls(model, path):
    doc = {
        "format": LS_MAGIC,
        "sigma": model.sigma,
        "alpha": model.alpha,
        "tol": model.tol,
        "max_iter": model.max_iter,
        "query_batch": model.query_batch,
        "anchors": model.anchors.tolist(),
        "y0": model.y0.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_ls(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != LS_MAGIC:
            raise ValueError(f"unexpected format {doc.get('format')!r}")
        return LabelSpreadModel(
            np.array(doc["anchors"]),
            np.array(doc["y0"]),
            float(doc["sigma"]),
            float(doc["alpha"]),
            float(doc["tol"]),
            int(doc["max_iter"]),
            int(doc.get("query_batch", 500)),
        )
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt label-spread model ({exc})") from exc
