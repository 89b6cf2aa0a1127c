"""Gradient-based evasion attacks under feature constraints.

All four attacks only touch masked (dynamic) dims and keep every coordinate
inside [0, 1] and within an l-inf band of the original sample; `project`
enforces that contract and is the single choke point for feasibility.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DataFormatError

METHODS = ("fgsm", "bim", "deepfool", "cw")
ADVBATCH_MAGIC = "robustids-advbatch v1"
CROSS_MARGIN = 1e-6  # absolute logit margin DeepFool crosses the boundary by


@dataclass
class AttackConfig:
    method: str
    budget: float | None = 0.1  # per-dim l-inf bound in normalized units; None = unbounded
    bim_steps: int = 10
    bim_step: float | None = None  # default budget/5
    overshoot: float = 0.02
    deepfool_max_iter: int = 50
    cw_const: float = 1.0
    cw_steps: int = 200
    cw_lr: float = 0.01
    cw_project_each_step: bool = False

    def __post_init__(self):
        self.method = self.method.lower()
        if self.method not in METHODS:
            raise ValueError(f"unknown attack method {self.method!r}")
        if self.budget is not None and not 0.0 < self.budget <= 1.0:
            raise ValueError(f"budget must be in (0, 1] or None, got {self.budget}")
        if min(self.bim_steps, self.deepfool_max_iter, self.cw_steps) < 1:
            raise ValueError("iteration counts must be positive")

    @property
    def step_base(self):
        return 1.0 if self.budget is None else self.budget


@dataclass
class AdversarialBatch:
    method: str
    budget: float | None
    samples: list  # originals (EncodedSample), all correctly classified by the victim
    adv: np.ndarray  # (n, 128)
    success: np.ndarray  # (n,) bool: prediction flipped
    origin_indices: np.ndarray  # positions in the source dataset

    def __len__(self):
        return len(self.samples)

    def origin_labels(self):
        return np.array([s.label for s in self.samples], dtype=int)


def project(x_orig, x_cand, mask, p):
    """Clamp candidate onto the feasible set around the original.

    Non-masked dims revert to the original; masked dims are clipped to
    [0, 1] intersected with [x_orig - p, x_orig + p] (p None: [0, 1] only).
    Works on single vectors and on (n, d) batches with a shared mask.
    """
    x_orig = np.asarray(x_orig, dtype=np.float64)
    x_cand = np.asarray(x_cand, dtype=np.float64)
    lo, hi = 0.0, 1.0
    if p is not None:
        lo = np.maximum(lo, x_orig - p)
        hi = np.minimum(hi, x_orig + p)
    out = np.clip(x_cand, lo, hi)
    return np.where(mask, out, x_orig)


def _fgsm_batch(model, X, y, mask, cfg):
    grad = model.input_gradient_batch(X, y)
    return project(X, X + cfg.step_base * np.sign(grad), mask, cfg.budget)


def _bim_batch(model, X, y, mask, cfg):
    alpha = cfg.bim_step if cfg.bim_step is not None else cfg.step_base / 5.0
    cur = X.copy()
    for _ in range(cfg.bim_steps):
        grad = model.input_gradient_batch(cur, y)
        cur = project(X, cur + alpha * np.sign(grad), mask, cfg.budget)
    return cur


def _logit_diff_seeds(n):
    # f = z_1 - z_0: positive iff the malicious logit wins
    return np.tile(np.array([-1.0, 1.0]), (n, 1))


def _deepfool_batch(model, X, y, mask, cfg):
    n = len(X)
    cur = X.copy()
    wrong = model.predict_batch(X) != y
    active = ~wrong
    flipped_rows = wrong.copy()
    best = X.copy()
    best_absf = np.full(n, np.inf)
    seeds = _logit_diff_seeds(n)
    for _ in range(cfg.deepfool_max_iter):
        if not active.any():
            break
        idx = np.where(active)[0]
        vals, grads = model.logit_seed_gradient_batch(cur[idx], seeds[: len(idx)])
        grads = grads * mask
        gn2 = np.einsum("ij,ij->i", grads, grads)
        track = np.abs(vals) < best_absf[idx]
        best[idx[track]] = cur[idx[track]]
        best_absf[idx[track]] = np.abs(vals)[track]
        plateau = gn2 < 1e-24
        if plateau.any():
            active[idx[plateau]] = False
            idx = idx[~plateau]
            if len(idx) == 0:
                continue
            vals, grads, gn2 = vals[~plateau], grads[~plateau], gn2[~plateau]
        # absolute crossing margin: a vanishing relative overshoot cannot cross
        # the boundary decisively once |f| shrinks to rounding noise
        scale = (1.0 + cfg.overshoot) * vals + CROSS_MARGIN * np.sign(vals)
        step = -(scale / gn2)[:, None] * grads
        cur[idx] = project(X[idx], cur[idx] + step, mask, cfg.budget)
        flipped = model.predict_batch(cur[idx]) != y[idx]
        flipped_rows[idx[flipped]] = True
        active[idx[flipped]] = False
    # rows that never flipped fall back to the iterate nearest the boundary
    fallback = ~flipped_rows
    cur[fallback] = best[fallback]
    success = model.predict_batch(cur) != y
    return cur, success


def _cw_batch(model, X, y, mask, cfg):
    n = len(X)
    p = cfg.budget
    eps = 1e-6
    w = np.arctanh(2.0 * np.clip(X, eps, 1.0 - eps) - 1.0)
    # g = z_true - z_other; driving it negative flips the prediction
    seeds = np.zeros((n, 2))
    seeds[np.arange(n), y] = 1.0
    seeds[np.arange(n), 1 - y] = -1.0
    best = X.copy()
    best_norm = np.full(n, np.inf)
    # without a band the projection is a no-op and the resync only freezes
    # face-touching coordinates, so iterate-and-project applies to bounded runs
    project_each = cfg.cw_project_each_step and p is not None

    def consider(x_adv):
        candidate = project(X, x_adv, mask, p)
        flipped = model.predict_batch(candidate) != y
        norms = np.einsum("ij,ij->i", candidate - X, candidate - X)
        upd = flipped & (norms < best_norm)
        best[upd] = candidate[upd]
        best_norm[upd] = norms[upd]

    def from_w():
        x_adv = X.copy()
        x_adv[:, mask] = 0.5 * (np.tanh(w[:, mask]) + 1.0)
        return x_adv

    # adaptive-moment steps on w: plain descent stalls where x(1-x) ~ 0
    m1 = np.zeros((n, int(mask.sum())))
    m2 = np.zeros_like(m1)
    b1, b2, opt_eps = 0.9, 0.999, 1e-8
    for step in range(1, cfg.cw_steps + 1):
        x_adv = from_w()
        if project_each:
            x_adv = project(X, x_adv, mask, p)
            # resync w to the projected point; the soft clip keeps dx/dw away
            # from zero so face-touching coordinates stay optimizable
            w[:, mask] = np.arctanh(2.0 * np.clip(x_adv[:, mask], 1e-3, 1.0 - 1e-3) - 1.0)
        consider(x_adv)
        delta = x_adv - X
        vals, grads = model.logit_seed_gradient_batch(x_adv, seeds)
        push = (vals > 0.0)[:, None] * grads  # kappa = 0
        dobj = 2.0 * delta + cfg.cw_const * push
        dxdw = 0.5 * (1.0 - np.tanh(w[:, mask]) ** 2)
        g = dobj[:, mask] * dxdw
        m1 = b1 * m1 + (1 - b1) * g
        m2 = b2 * m2 + (1 - b2) * g * g
        w[:, mask] -= cfg.cw_lr * (m1 / (1 - b1**step)) / (
            np.sqrt(m2 / (1 - b2**step)) + opt_eps
        )
    consider(from_w())
    success = np.isfinite(best_norm)
    return best, success


def _run_batch(model, X, y, mask, cfg):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if cfg.method == "fgsm":
        adv = _fgsm_batch(model, X, y, mask, cfg)
        return adv, model.predict_batch(adv) != y
    if cfg.method == "bim":
        adv = _bim_batch(model, X, y, mask, cfg)
        return adv, model.predict_batch(adv) != y
    if cfg.method == "deepfool":
        return _deepfool_batch(model, X, y, mask, cfg)
    return _cw_batch(model, X, y, mask, cfg)


def _single(model, sample, cfg):
    adv, _ = _run_batch(
        model, sample.features[None, :], np.array([sample.label]), sample.mask, cfg
    )
    return adv[0]


def fgsm(model, sample, config):
    """Single sign step of size equal to the budget."""
    assert config.method == "fgsm"
    return _single(model, sample, config)


def bim(model, sample, config):
    """Iterated sign steps, projected into the band after every step."""
    assert config.method == "bim"
    return _single(model, sample, config)


def deepfool(model, sample, config):
    """Boundary-projection iteration on the signed logit difference."""
    assert config.method == "deepfool"
    return _single(model, sample, config)


def cw(model, sample, config):
    """Penalty-form optimization over the tanh-space variable; best feasible flip wins."""
    assert config.method == "cw"
    return _single(model, sample, config)


def boundary_step(f_value, grad):
    """Closed-form minimal step onto a linear boundary: -f / ||w||^2 * w."""
    grad = np.asarray(grad, dtype=np.float64)
    return -(f_value / float(grad @ grad)) * grad


def generate_batch(model, dataset, config, limit=None, seed=0):
    """Attack the correctly-classified samples of a dataset.

    success[i] is True iff the victim's prediction flipped on the i-th output.
    """
    X = dataset.feature_matrix()
    y = dataset.label_vector()
    correct = model.predict_batch(X) == y
    idx = np.where(correct)[0]
    if len(idx) == 0:
        raise ValueError("no correctly classified samples to attack")
    if limit is not None and limit < len(idx):
        rng = np.random.default_rng(seed)
        idx = np.sort(rng.choice(idx, size=limit, replace=False))
    adv, success = _run_batch(model, X[idx], y[idx], dataset.mask, config)
    return AdversarialBatch(
        method=config.method,
        budget=config.budget,
        samples=[dataset.samples[i] for i in idx],
        adv=adv,
        success=success,
        origin_indices=idx,
    )


def save_batch(batch, path):
    with open(path, "w") as fh:
        budget = "none" if batch.budget is None else format(batch.budget, ".17g")
        fh.write(f"# {ADVBATCH_MAGIC} method={batch.method} budget={budget} n={len(batch)}\n")
        fh.write("origin_id,success," + ",".join(f"a{i:03d}" for i in range(batch.adv.shape[1])) + "\n")
        for oid, ok, row in zip(batch.origin_indices, batch.success, batch.adv):
            fh.write(f"{oid},{int(ok)}," + ",".join(format(v, ".17g") for v in row) + "\n")


def load_batch(path, dataset):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(f"# {ADVBATCH_MAGIC}"):
            raise DataFormatError(f"{path}: not an {ADVBATCH_MAGIC} file")
        fields = dict(p.split("=", 1) for p in header.split()[3:])
        budget = None if fields["budget"] == "none" else float(fields["budget"])
        fh.readline()
        ids, success, rows = [], [], []
        for line in fh:
            parts = line.rstrip("\n").split(",")
            ids.append(int(parts[0]))
            success.append(bool(int(parts[1])))
            rows.append([float(v) for v in parts[2:]])
    idx = np.array(ids, dtype=int)
    return AdversarialBatch(
        method=fields["method"],
        budget=budget,
        samples=[dataset.samples[i] for i in idx],
        adv=np.array(rows),
        success=np.array(success, dtype=bool),
        origin_indices=idx,
    )
