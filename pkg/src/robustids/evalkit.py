"""Metrics and the experiment-table builders (victim grid, transfer, comparison)."""

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np


@dataclass
class MetricsReport:
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float
    f1: float
    accuracy: float
    precision_degenerate: bool = False
    recall_degenerate: bool = False
    f1_degenerate: bool = False

    def as_dict(self):
        return asdict(self)


def metrics(predictions, ground_truth, positive_class=1):
    """Confusion counts and the derived ratios; 0/0 reports 0 with a flag."""
    pred = np.asarray(predictions)
    truth = np.asarray(ground_truth)
    if len(pred) == 0 or len(pred) != len(truth):
        raise ValueError("predictions and ground truth must be nonempty and equal length")
    pos_pred = pred == positive_class
    pos_true = truth == positive_class
    tp = int(np.sum(pos_pred & pos_true))
    fp = int(np.sum(pos_pred & ~pos_true))
    tn = int(np.sum(~pos_pred & ~pos_true))
    fn = int(np.sum(~pos_pred & pos_true))
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return MetricsReport(
        tp, fp, tn, fn,
        precision, recall, f1,
        (tp + tn) / len(pred),
        precision_degenerate=tp + fp == 0,
        recall_degenerate=tp + fn == 0,
        f1_degenerate=precision + recall == 0,
    )


def attack_table(model, dataset, attack_names, budgets, overrides=None, eval_n=None, seed=0):
    """Victim accuracy per (attack, budget), Table-1 shaped.

    Budget 0 rows report the model's clean accuracy on the evaluation subset;
    other rows attack its correctly-classified members and report the fraction
    still classified correctly. `overrides` maps attack name -> extra
    AttackConfig fields.
    """
    from . import attacks as attacks_mod
    from .ingest import Dataset

    if eval_n is not None and eval_n < len(dataset):
        idx = np.sort(np.random.default_rng(seed).choice(len(dataset), size=eval_n, replace=False))
        dataset = Dataset([dataset.samples[i] for i in idx], dataset.encoder, dataset.tag)
    clean_acc = float(
        (model.predict_batch(dataset.feature_matrix()) == dataset.label_vector()).mean()
    )
    rows = []
    for name in attack_names:
        for budget in budgets:
            if budget == 0:
                rows.append({"attack": name, "budget": 0.0, "accuracy": clean_acc, "n": len(dataset)})
                continue
            cfg = attacks_mod.AttackConfig(name, budget, **(overrides or {}).get(name, {}))
            batch = attacks_mod.generate_batch(model, dataset, cfg)
            rows.append(
                {
                    "attack": name,
                    "budget": budget,
                    "accuracy": float(1.0 - batch.success.mean()),
                    "n": len(batch),
                }
            )
    return {"clean_accuracy": clean_acc, "rows": rows}


def transferability_matrix(predictors, dataset, adversarial_batches):
    """Accuracy of each predictor on clean data and on the victim's AE batches.

    `predictors` maps model name -> callable(features matrix) -> class vector.
    AEs keep their origin's maliciousness label; Overall pools all batches.
    """
    X = dataset.feature_matrix()
    y = dataset.label_vector()
    rows = []
    for name, predict in predictors.items():
        row = {"model": name, "clean_accuracy": float((predict(X) == y).mean())}
        pooled_correct = 0
        pooled_n = 0
        for batch in adversarial_batches:
            labels = batch.origin_labels()
            correct = int((predict(batch.adv) == labels).sum())
            row[batch.method] = correct / len(batch)
            pooled_correct += correct
            pooled_n += len(batch)
        row["overall"] = pooled_correct / pooled_n if pooled_n else 0.0
        rows.append(row)
    return rows


def comparison_report(pipeline, bare_model, test_sets):
    """Fusion vs bare-DL maliciousness metrics per named test set (Table-5 shaped).

    `test_sets` maps a name (e.g. CLEAN, FGSM) to a Dataset or AdversarialBatch.
    """
    from . import fusion as fusion_mod

    rows = []
    for name, data in test_sets.items():
        X, y_mal, _ = fusion_mod.eval_arrays(data)
        _, (_, mal_report) = fusion_mod.classify_batch(pipeline, data)
        bare = metrics(bare_model.predict_batch(X), y_mal)
        for system, rep in (("DLL-IDS", mal_report), ("Baseline", bare)):
            rows.append(
                {
                    "system": system,
                    "test_data": name,
                    "precision": rep.precision,
                    "recall": rep.recall,
                    "f1": rep.f1,
                    "accuracy": rep.accuracy,
                    "tp": rep.tp,
                    "fp": rep.fp,
                    "tn": rep.tn,
                    "fn": rep.fn,
                }
            )
    return rows


def write_csv(rows, path, columns=None):
    if not rows:
        raise ValueError("nothing to write")
    columns = columns or list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return format(v, ".6f")
    return v


def write_json(obj, path, meta=None):
    doc = {"meta": meta or {}, "data": obj}
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1, default=_json_default)


def _json_default(v):
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, MetricsReport):
        return v.as_dict()
    raise TypeError(f"not JSON serializable: {type(v)}")
