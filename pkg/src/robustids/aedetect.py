"""Adversarial-example detector over LID features, plus the noise-probe baseline.

The detector standardizes the per-layer LID values and fits one of the
classic models (linear SVM by default). The decision is a thresholded score;
raising the threshold can only reduce the false-positive rate.
"""

import json
from dataclasses import dataclass

import numpy as np

from . import classics
from .errors import DataFormatError
from .lid import as_matrix

DETECTOR_MAGIC = "robustids-detector v1"


@dataclass
class AeDetector:
    inner: classics.ClassicModel
    kind: str
    threshold: float
    feature_mean: np.ndarray
    feature_std: np.ndarray
    meta: dict

    def scores(self, lid_values):
        Z = (np.atleast_2d(lid_values) - self.feature_mean) / self.feature_std
        _, s = classics.predict_classic_batch(self.inner, Z)
        return s


@dataclass
class DbBaseline:
    noise_scale: float = 0.02
    probes: int = 20
    flip_threshold: float = 0.5

    def __post_init__(self):
        if self.probes < 1:
            raise ValueError("need at least one probe")
        if not 0.0 <= self.flip_threshold <= 1.0:
            raise ValueError("flip threshold must be in [0, 1]")


def train_ae_detector(lid_training_set, kind="linsvm", seed=0, heldout_frac=0.2,
                      threshold_offset=0.0, meta=None):
    """Fit the detector on labeled LidVectors; reports held-out accuracy in meta."""
    X, y = (lid_training_set if isinstance(lid_training_set, tuple) else as_matrix(lid_training_set))
    if len(np.unique(y)) < 2:
        raise ValueError("degenerate LID training set: need both labels")
    mean = X.mean(axis=0)
    std = np.maximum(X.std(axis=0), 1e-12)
    Z = (X - mean) / std
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(Z))
    n_held = int(len(Z) * heldout_frac)
    held, rest = order[:n_held], order[n_held:]
    inner = classics.train_classic(kind, Z[rest], y[rest], seed=seed)
    threshold = classics.natural_threshold(kind) + threshold_offset
    detector = AeDetector(inner, kind, threshold, mean, std, dict(meta or {}))
    if n_held:
        flags = detector.scores(X[held]) >= threshold
        detector.meta["heldout_accuracy"] = float((flags.astype(int) == y[held]).mean())
    return detector


def detect(detector, lid_vec):
    """(is_adversarial, score) for one LidVector."""
    score = float(detector.scores(lid_vec.values)[0])
    return score >= detector.threshold, score


def detect_batch(detector, lid_values):
    scores = detector.scores(lid_values)
    return scores >= detector.threshold, scores


def db_detect(model, sample, baseline, seed=0):
    """Noise-probe baseline: Gaussian-perturb the masked dims and count flips."""
    flips = db_detect_batch(
        model, sample.features[None, :], sample.mask, baseline, seed
    )
    return bool(flips[0])


def db_detect_batch(model, X, mask, baseline, seed=0):
    rng = np.random.default_rng(seed)
    base_pred = model.predict_batch(X)
    flip_counts = np.zeros(len(X))
    for _ in range(baseline.probes):
        noise = rng.normal(scale=baseline.noise_scale, size=X.shape) * mask
        probe = np.clip(X + noise, 0.0, 1.0)
        flip_counts += model.predict_batch(probe) != base_pred
    return flip_counts / baseline.probes >= baseline.flip_threshold


def save_detector(detector, path):
    doc = {
        "format": DETECTOR_MAGIC,
        "kind": detector.kind,
        "threshold": detector.threshold,
        "feature_mean": detector.feature_mean.tolist(),
        "feature_std": detector.feature_std.tolist(),
        "meta": detector.meta,
        "inner": {
            "kind": detector.inner.kind,
            "hyper": detector.inner.hyper,
            "params": {
                k: (v.tolist() if isinstance(v, np.ndarray) else v)
                for k, v in detector.inner.params.items()
            },
        },
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_detector(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != DETECTOR_MAGIC:
            raise ValueError(f"unexpected format {doc.get('format')!r}")
        inner_doc = doc["inner"]
        params = {}
        for key, v in inner_doc["params"].items():
            if isinstance(v, list):
                params[key] = np.array(
                    v, dtype=int if key in classics._INT_PARAMS else np.float64
                )
            else:
                params[key] = v
        inner = classics.ClassicModel(inner_doc["kind"], params, inner_doc.get("hyper", {}))
        return AeDetector(
            inner,
            doc["kind"],
            float(doc["threshold"]),
            np.array(doc["feature_mean"]),
            np.array(doc["feature_std"]),
            doc.get("meta", {}),
        )
    except (OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: corrupt detector ({exc})") from exc
