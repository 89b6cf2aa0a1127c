"""Local intrinsic dimensionality of samples, estimated from hidden activations.

LID is the MLE over the k nearest neighbor distances; adversarial inputs sit
off the clean activation manifold and show systematically higher values.
Exact-zero distances (self/duplicate matches) are dropped and the rest floored
at DIST_FLOOR, identically at training and inference time.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DataFormatError

DIST_FLOOR = _kernels.DIST_FLOOR
LID_CAP = _kernels.LID_CAP
LIDSET_MAGIC = "robustids-lidset v1"


@dataclass
class ReferenceBank:
    """Clean-sample activations, one matrix per hidden layer."""

    layers: list
    tag: str = ""

    @property
    def n_layers(self):
        return len(self.layers)

    @property
    def rows(self):
        return self.layers[0].shape[0]

    def subsample(self, ref_batch_size, seed):
        idx = np.random.default_rng(seed).choice(self.rows, size=ref_batch_size, replace=False)
        return [layer[idx] for layer in self.layers]


@dataclass
class LidVector:
    values: np.ndarray  # one estimate per hidden layer
    k: int
    label: int | None = None  # 0 clean, 1 adversarial (when part of training data)


def lid_mle(neighbor_distances):
    """MLE estimate from k sorted ascending neighbor distances.

    Zero distances are floored; if all k distances coincide the estimate is
    capped at LID_CAP (the limit is infinite).
    """
    d = np.asarray(neighbor_distances, dtype=np.float64)
    if d.ndim != 1 or d.shape[0] < 2:
        raise ValueError("need at least k=2 neighbor distances")
    d = np.sort(np.maximum(d, DIST_FLOOR))
    return float(_kernels.lid_mle(d))


def build_reference_bank(model, clean_data, min_rows=100, tag=""):
    """Store per-layer hidden activations of clean samples."""
    X = clean_data if isinstance(clean_data, np.ndarray) else clean_data.feature_matrix()
    if len(X) < min_rows:
        raise ValueError(f"need at least {min_rows} clean samples, got {len(X)}")
    _, traces = model.forward_batch(X)
    return ReferenceBank([np.ascontiguousarray(t) for t in traces], tag)


def lid_vector(trace, bank, k=10, ref_batch_size=100, seed=0):
    """Per-layer LID of one sample's activation trace against the bank.

    A seeded reference minibatch is drawn once and shared by all layers.
    """
    if not k < ref_batch_size <= bank.rows:
        raise ValueError(
            f"need k < ref_batch_size <= bank rows, got k={k}, "
            f"ref_batch_size={ref_batch_size}, rows={bank.rows}"
        )
    refs = bank.subsample(ref_batch_size, seed)
    values = np.array(
        [_kernels.lid_query(np.ascontiguousarray(t), r, k) for t, r in zip(trace, refs)]
    )
    return LidVector(values, k)


def _k_smallest_sq(queries, refs, k):
    """Rows of k smallest positive squared distances (zeros dropped, floor-padded)."""
    n = len(queries)
    out = np.empty((n, k))
    floor_sq = DIST_FLOOR * DIST_FLOOR
    chunk = max(1, 2_000_000 // max(refs.size, 1))
    for start in range(0, n, chunk):
        q = queries[start : start + chunk]
        diff = q[:, None, :] - refs[None, :, :]
        sq = np.einsum("ijk,ijk->ij", diff, diff)
        sq[sq <= 0.0] = np.inf  # exact self/duplicate matches drop out
        part = np.partition(sq, k - 1, axis=1)[:, :k]
        part[~np.isfinite(part)] = floor_sq
        out[start : start + len(q)] = np.sort(part, axis=1)
    return out


def lid_matrix(traces, ref_layers, k):
    """(n, L) LID estimates for a batch of traces against fixed reference layers."""
    cols = []
    for t, r in zip(traces, ref_layers):
        d = np.sqrt(_k_smallest_sq(t, r, k))
        d = np.maximum(d, DIST_FLOOR)
        ratios = np.log(d / d[:, -1:])
        mean_log = ratios.mean(axis=1)
        with np.errstate(divide="ignore"):
            est = np.where(mean_log == 0.0, LID_CAP, np.minimum(-1.0 / mean_log, LID_CAP))
        cols.append(est)
    return np.column_stack(cols)


def build_training_set(model, clean_batches, adversarial_batches, k=10, minibatch_size=100):
    """Labeled LID vectors from aligned clean/adversarial batches.

    Per minibatch and layer, clean samples take their neighbors inside the
    clean minibatch (self excluded) and adversarial samples take theirs
    against the same clean minibatch; each pair emits one negative and one
    positive LidVector.
    """
    if minibatch_size <= k:
        raise ValueError(f"minibatch size {minibatch_size} must exceed k={k}")
    if isinstance(clean_batches, np.ndarray):
        clean_batches = [clean_batches]
    if isinstance(adversarial_batches, np.ndarray):
        adversarial_batches = [adversarial_batches]
    out = []
    for clean_X, adv_X in zip(clean_batches, adversarial_batches):
        if len(clean_X) != len(adv_X):
            raise ValueError("clean and adversarial batches must be aligned")
        for start in range(0, len(clean_X), minibatch_size):
            cb = clean_X[start : start + minibatch_size]
            ab = adv_X[start : start + minibatch_size]
            if len(cb) <= k:  # trailing remainder too small for k neighbors
                continue
            _, tr_clean = model.forward_batch(cb)
            _, tr_adv = model.forward_batch(ab)
            neg = lid_matrix(tr_clean, tr_clean, k)
            pos = lid_matrix(tr_adv, tr_clean, k)
            for row in neg:
                out.append(LidVector(row, k, label=0))
            for row in pos:
                out.append(LidVector(row, k, label=1))
    if not out:
        raise ValueError("no minibatch was large enough to process")
    return out


def from_attack_batches(model, batches, k=10, minibatch_size=100):
    """Alg-2-style training set built from generated AdversarialBatch objects."""
    clean = [np.array([s.features for s in b.samples]) for b in batches]
    adv = [b.adv for b in batches]
    return build_training_set(model, clean, adv, k, minibatch_size)


def as_matrix(lid_vectors):
    X = np.array([v.values for v in lid_vectors])
    y = np.array([-1 if v.label is None else v.label for v in lid_vectors], dtype=int)
    return X, y


def save_lid_set(lid_vectors, path, meta=None):
    X, y = as_matrix(lid_vectors)
    k = lid_vectors[0].k
    pairs = " ".join(f"{k_}={v}" for k_, v in sorted((meta or {}).items()))
    with open(path, "w") as fh:
        fh.write(f"# {LIDSET_MAGIC} k={k} layers={X.shape[1]} {pairs}".rstrip() + "\n")
        fh.write(",".join(f"lid_{i + 1}" for i in range(X.shape[1])) + ",label\n")
        for row, label in zip(X, y):
            fh.write(",".join(format(v, ".17g") for v in row) + f",{label}\n")


def load_lid_set(path):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(f"# {LIDSET_MAGIC}"):
            raise DataFormatError(f"{path}: not a {LIDSET_MAGIC} file")
        fields = dict(p.split("=", 1) for p in header.split()[3:])
        k = int(fields["k"])
        fh.readline()
        vectors = []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            label = int(parts[-1])
            vectors.append(
                LidVector(np.array([float(v) for v in parts[:-1]]), k, None if label < 0 else label)
            )
    return vectors
