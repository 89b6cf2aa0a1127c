"""Pure numpy implementations of the per-flow hot kernels.

Same call surface as the compiled backend in `_speed.pyx`; selection happens
in the package __init__.
"""

import numpy as np

DIST_FLOOR = 1e-12
LID_CAP = 1e6


def forward_trace(weights, biases, x):
    """One sample through the net: (softmax probs, list of hidden activations)."""
    h = np.asarray(x, dtype=np.float64)
    trace = []
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if i < last:
            h = np.maximum(z, 0.0)
            trace.append(h)
        else:
            z = z - z.max()
            e = np.exp(z)
            probs = e / e.sum()
    return probs, trace


def input_gradient(weights, biases, x, y):
    """Gradient of the cross-entropy loss at label y with respect to the input."""
    h = np.asarray(x, dtype=np.float64)
    acts = [h]
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if i < last:
            h = np.maximum(z, 0.0)
            acts.append(h)
        else:
            z = z - z.max()
            e = np.exp(z)
            probs = e / e.sum()
    delta = probs.copy()
    delta[y] -= 1.0
    for i in range(last, 0, -1):
        delta = (delta @ weights[i].T) * (acts[i] > 0.0)
    grad = delta @ weights[0].T
    return probs, grad


def logit_value_grad(weights, biases, x, seed):
    """Value and input gradient of seed . logits (pre-softmax)."""
    h = np.asarray(x, dtype=np.float64)
    acts = [h]
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = h @ w + b
        if i < last:
            h = np.maximum(z, 0.0)
            acts.append(h)
    value = float(z @ seed)
    delta = np.asarray(seed, dtype=np.float64)
    for i in range(last, 0, -1):
        delta = (delta @ weights[i].T) * (acts[i] > 0.0)
    grad = delta @ weights[0].T
    return value, grad


def lid_mle(distances):
    """MLE local intrinsic dimensionality over sorted ascending neighbor distances."""
    d = np.asarray(distances, dtype=np.float64)
    r_max = d[-1]
    mean_log = np.log(d / r_max).mean()
    if mean_log == 0.0:
        return LID_CAP
    return min(-1.0 / mean_log, LID_CAP)


def lid_query(query, refs, k):
    """LID of `query` against reference rows: k nearest Euclidean distances, MLE.

    Exact-zero distances (self matches) are dropped; remaining distances are
    floored at DIST_FLOOR. If fewer than k nonzero distances exist the floor
    value pads the neighborhood.
    """
    diff = refs - query
    sq = np.einsum("ij,ij->i", diff, diff)
    sq = sq[sq > 0.0]
    if sq.shape[0] >= k:
        part = np.partition(sq, k - 1)[:k]
    else:
        part = np.concatenate([sq, np.zeros(k - sq.shape[0])])
    d = np.sort(np.maximum(np.sqrt(part), DIST_FLOOR))
    return lid_mle(d)
