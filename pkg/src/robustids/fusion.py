"""Verdict fusion: route each flow through the DL model, the LID detector,
and (only when flagged adversarial) the label-spreading fallback.

The maliciousness ground truth of an adversarial example is its origin's
label: perturbed benign traffic stays benign, perturbed attacks stay attacks.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels, aedetect, evalkit, labelspread
from .attacks import AdversarialBatch
from .lid import lid_matrix


@dataclass
class LidConfig:
    k: int = 10
    ref_batch_size: int = 100
    seed: int = 0


@dataclass
class FusionVerdict:
    is_adversarial: bool
    is_malicious: bool
    source: str  # "DL" or "ML"
    dl_probs: np.ndarray
    detector_score: float
    ls_scores: np.ndarray | None = None

    def as_dict(self):
        return {
            "is_adversarial": self.is_adversarial,
            "is_malicious": self.is_malicious,
            "source": self.source,
            "dl_probs": self.dl_probs.tolist(),
            "detector_score": self.detector_score,
            "ls_scores": None if self.ls_scores is None else self.ls_scores.tolist(),
        }


@dataclass
class PipelineHandle:
    model: object
    bank: object
    detector: object
    ls_model: object  # None allowed: detector-positive flows then fail closed
    lid_config: LidConfig = field(default_factory=LidConfig)
    _ref: list = field(default=None, repr=False)

    def ref_layers(self):
        # one seeded reference draw per pipeline: deterministic detector behaviour
        if self._ref is None:
            self._ref = self.bank.subsample(self.lid_config.ref_batch_size, self.lid_config.seed)
        return self._ref


def classify(pipeline, features):
    """Single-flow verdict (kernel-backend hot path)."""
    probs, trace = pipeline.model.forward(np.asarray(features, dtype=np.float64))
    refs = pipeline.ref_layers()
    lid_values = np.array(
        [
            _kernels.lid_query(np.ascontiguousarray(t), r, pipeline.lid_config.k)
            for t, r in zip(trace, refs)
        ]
    )
    flags, scores = aedetect.detect_batch(pipeline.detector, lid_values[None, :])
    is_adv = bool(flags[0])
    if is_adv:
        if pipeline.ls_model is None:
            return FusionVerdict(True, True, "ML", probs, float(scores[0]), None)
        ls_scores = labelspread.propagate_iterative(pipeline.ls_model, features[None, :])[0]
        is_mal = bool(ls_scores[1] >= ls_scores[0])
        return FusionVerdict(True, is_mal, "ML", probs, float(scores[0]), ls_scores)
    return FusionVerdict(False, bool(np.argmax(probs) == 1), "DL", probs, float(scores[0]))


def eval_arrays(data):
    """(features, maliciousness truth, adversarial truth) for a Dataset or AE batch."""
    if isinstance(data, AdversarialBatch):
        return data.adv, data.origin_labels(), data.success.astype(bool)
    X = data.feature_matrix()
    return X, data.label_vector(), np.zeros(len(X), dtype=bool)


def classify_batch(pipeline, data, threads=1):
    """Order-preserving verdicts plus (adversarial, maliciousness) metric reports."""
    X, y_mal, y_adv = eval_arrays(data)
    refs = pipeline.ref_layers()
    k = pipeline.lid_config.k

    def stage(chunk):
        probs, traces = pipeline.model.forward_batch(chunk)
        return probs, lid_matrix(traces, refs, k)

    if threads > 1 and len(X) > 1:
        bounds = np.array_split(np.arange(len(X)), threads)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: stage(X[b]), [b for b in bounds if len(b)]))
        probs = np.vstack([p for p, _ in parts])
        lids = np.vstack([l for _, l in parts])
    else:
        probs, lids = stage(X)

    flags, scores = aedetect.detect_batch(pipeline.detector, lids)
    dl_pred = np.argmax(probs, axis=1)
    final = dl_pred.copy()
    ls_scores = [None] * len(X)
    flagged = np.where(flags)[0]
    if len(flagged):
        if pipeline.ls_model is None:
            final[flagged] = 1  # fail closed without the fallback classifier
        else:
            scores_ls = labelspread.propagate_iterative(pipeline.ls_model, X[flagged])
            final[flagged] = (scores_ls[:, 1] >= scores_ls[:, 0]).astype(int)
            for j, i in enumerate(flagged):
                ls_scores[i] = scores_ls[j]
    verdicts = [
        FusionVerdict(
            bool(flags[i]),
            bool(final[i] == 1),
            "ML" if flags[i] else "DL",
            probs[i],
            float(scores[i]),
            ls_scores[i],
        )
        for i in range(len(X))
    ]
    adv_report = evalkit.metrics(flags.astype(int), y_adv.astype(int))
    mal_report = evalkit.metrics(final, y_mal)
    return verdicts, (adv_report, mal_report)


def write_verdicts_jsonl(verdicts, path):
    with open(path, "w") as fh:
        for v in verdicts:
            fh.write(json.dumps(v.as_dict(), sort_keys=True) + "\n")
