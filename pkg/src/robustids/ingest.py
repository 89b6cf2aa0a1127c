"""NSL-KDD flow ingestion: parse raw records, encode to fixed-width vectors.

Encoded layout (width 128): the 35 dynamic numeric features first (these are
the perturbable dims), then one-hot blocks for protocol_type/service/flag,
then the normalized persistent scalars, then zero padding.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataFormatError

# 41 raw features in file order; 3 are categorical text.
FEATURE_NAMES = (
    "duration", "protocol_type", "service", "flag", "src_bytes", "dst_bytes",
    "land", "wrong_fragment", "urgent", "hot", "num_failed_logins", "logged_in",
    "num_compromised", "root_shell", "su_attempted", "num_root",
    "num_file_creations", "num_shells", "num_access_files", "num_outbound_cmds",
    "is_host_login", "is_guest_login", "count", "srv_count", "serror_rate",
    "srv_serror_rate", "rerror_rate", "srv_rerror_rate", "same_srv_rate",
    "diff_srv_rate", "srv_diff_host_rate", "dst_host_count", "dst_host_srv_count",
    "dst_host_same_srv_rate", "dst_host_diff_srv_rate",
    "dst_host_same_src_port_rate", "dst_host_srv_diff_host_rate",
    "dst_host_serror_rate", "dst_host_srv_serror_rate", "dst_host_rerror_rate",
    "dst_host_srv_rerror_rate",
)
CATEGORICAL = ("protocol_type", "service", "flag")
_INDEX = {name: i for i, name in enumerate(FEATURE_NAMES)}

# protocol_type/service/flag plus three rarely-varying flags; configurable.
DEFAULT_PERSISTENT = (
    "protocol_type", "service", "flag", "land", "is_host_login", "su_attempted",
)

ENCODED_WIDTH = 128
N_DYNAMIC = 35
# one-hot slots reserved per categorical (NSL-KDD cardinalities)
RESERVED_SLOTS = {"protocol_type": 3, "service": 70, "flag": 11}

ENCODER_MAGIC = "robustids-encoder v1"
DATASET_MAGIC = "robustids-dataset v1"


@dataclass(frozen=True)
class FlowRecord:
    values: tuple  # 41 raw strings in FEATURE_NAMES order
    label: str
    difficulty: int

    def __getitem__(self, name):
        return self.values[_INDEX[name]]


@dataclass
class EncodedSample:
    features: np.ndarray  # (128,), each in [0, 1]
    label: int  # 0 benign, 1 malicious
    mask: np.ndarray  # (128,) bool, True on perturbable dims; shared per encoder


@dataclass
class Dataset:
    samples: list
    encoder: "FeatureEncoder"
    tag: str = ""
    _X: np.ndarray = field(default=None, repr=False, compare=False)
    _y: np.ndarray = field(default=None, repr=False, compare=False)

    def __len__(self):
        return len(self.samples)

    def feature_matrix(self):
        if self._X is None:
            self._X = np.array([s.features for s in self.samples])
        return self._X

    def label_vector(self):
        if self._y is None:
            self._y = np.array([s.label for s in self.samples], dtype=int)
        return self._y

    @property
    def mask(self):
        return self.encoder.mask


def parse_nslkdd(path):
    """Parse a comma-separated NSL-KDD file (41 features + label + difficulty)."""
    records = []
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DataFormatError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != len(FEATURE_NAMES) + 2:
            raise DataFormatError(
                f"{path}:{lineno}: expected {len(FEATURE_NAMES) + 2} columns, got {len(parts)}"
            )
        for name in CATEGORICAL:
            if not parts[_INDEX[name]]:
                raise DataFormatError(f"{path}:{lineno}: empty {name} value")
        label = parts[41].rstrip(".")  # tolerate the trailing-period label variant
        try:
            difficulty = int(float(parts[42]))
        except ValueError as exc:
            raise DataFormatError(f"{path}:{lineno}: bad difficulty {parts[42]!r}") from exc
        records.append(FlowRecord(tuple(parts[:41]), label, difficulty))
    return records


class FeatureEncoder:
    """Maps FlowRecords to 128-dim normalized vectors with a perturbation mask."""

    def __init__(self, persistent, vocab, stats):
        self.persistent = tuple(persistent)
        self.vocab = {k: list(v) for k, v in vocab.items()}
        self.stats = {k: (float(lo), float(hi)) for k, (lo, hi) in stats.items()}
        self.dynamic = tuple(n for n in FEATURE_NAMES if n not in self.persistent)
        self.persistent_numeric = tuple(
            n for n in self.persistent if n not in CATEGORICAL
        )
        if len(self.dynamic) != N_DYNAMIC:
            raise ValueError(
                f"persistent set must leave exactly {N_DYNAMIC} dynamic features, "
                f"got {len(self.dynamic)}"
            )
        # layout: [dynamic][one-hot blocks][persistent scalars][padding]
        self.offsets = {}
        pos = N_DYNAMIC
        for name in CATEGORICAL:
            self.offsets[name] = pos
            pos += RESERVED_SLOTS[name]
        for name in self.persistent_numeric:
            self.offsets[name] = pos
            pos += 1
        if pos > ENCODED_WIDTH:
            raise ValueError(f"layout needs {pos} dims, exceeds width {ENCODED_WIDTH}")
        self.padding = ENCODED_WIDTH - pos
        mask = np.zeros(ENCODED_WIDTH, dtype=bool)
        mask[:N_DYNAMIC] = True
        mask.flags.writeable = False
        self.mask = mask
        self._slot = {
            name: {v: i for i, v in enumerate(values)} for name, values in self.vocab.items()
        }

    @property
    def width(self):
        return ENCODED_WIDTH

    def _normalize(self, name, raw):
        try:
            v = float(raw)
        except ValueError as exc:
            raise DataFormatError(f"feature {name}: non-numeric value {raw!r}") from exc
        lo, hi = self.stats[name]
        if hi <= lo:
            return 0.0
        return min(max((v - lo) / (hi - lo), 0.0), 1.0)

    def encode(self, record):
        x = np.zeros(ENCODED_WIDTH)
        for i, name in enumerate(self.dynamic):
            x[i] = self._normalize(name, record[name])
        for name in CATEGORICAL:
            slot = self._slot[name].get(record[name])
            if slot is not None:  # unknown categorical stays all-zero
                x[self.offsets[name] + slot] = 1.0
        for name in self.persistent_numeric:
            x[self.offsets[name]] = self._normalize(name, record[name])
        return EncodedSample(x, 0 if record.label == "normal" else 1, self.mask)

    def encode_all(self, records, tag=""):
        return Dataset([self.encode(r) for r in records], self, tag)

    def to_json(self):
        return json.dumps(
            {
                "format": ENCODER_MAGIC,
                "persistent": list(self.persistent),
                "vocab": self.vocab,
                "stats": {k: [lo, hi] for k, (lo, hi) in self.stats.items()},
                "layout": {
                    "width": ENCODED_WIDTH,
                    "dynamic": list(self.dynamic),
                    "offsets": self.offsets,
                    "padding": self.padding,
                },
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
            if doc["format"] != ENCODER_MAGIC:
                raise ValueError(f"unexpected format {doc.get('format')!r}")
            return cls(doc["persistent"], doc["vocab"], doc["stats"])
        except (KeyError, ValueError, TypeError) as exc:
            raise DataFormatError(f"corrupt encoder document: {exc}") from exc

    def digest(self):
        return hashlib.sha256(self.to_json().encode()).hexdigest()


def fit_encoder(records, persistent=DEFAULT_PERSISTENT):
    """Collect vocabularies and min/max stats; the layout is fixed by the schema."""
    if not records:
        raise ValueError("cannot fit encoder on zero records")
    persistent = tuple(persistent)
    unknown = [n for n in persistent if n not in _INDEX]
    if unknown:
        raise ValueError(f"persistent names not in schema: {unknown}")
    if len(persistent) != len(DEFAULT_PERSISTENT):
        raise ValueError(f"persistent set must have {len(DEFAULT_PERSISTENT)} members")
    missing_cat = [n for n in CATEGORICAL if n not in persistent]
    if missing_cat:
        raise ValueError(f"categorical features must be persistent: {missing_cat}")

    vocab = {name: [] for name in CATEGORICAL}
    seen = {name: set() for name in CATEGORICAL}
    for rec in records:
        for name in CATEGORICAL:
            v = rec[name]
            if v not in seen[name]:
                seen[name].add(v)
                vocab[name].append(v)  # first-seen order
    for name in CATEGORICAL:
        if len(vocab[name]) < 2:
            raise ValueError(f"{name}: fewer than 2 distinct values, one-hot expected")
        if len(vocab[name]) > RESERVED_SLOTS[name]:
            raise ValueError(
                f"{name}: {len(vocab[name])} values exceed the {RESERVED_SLOTS[name]} reserved slots"
            )

    numeric_names = [n for n in FEATURE_NAMES if n not in CATEGORICAL]
    stats = {}
    for name in numeric_names:
        idx = _INDEX[name]
        try:
            col = np.array([float(r.values[idx]) for r in records])
        except ValueError as exc:
            raise DataFormatError(f"feature {name}: non-numeric value in records") from exc
        stats[name] = (float(col.min()), float(col.max()))
    return FeatureEncoder(persistent, vocab, stats)


def split(data, train_n, test_n, seed):
    """Disjoint shuffled train/test subsets, deterministic under seed."""
    samples = data.samples if isinstance(data, Dataset) else list(data)
    encoder = data.encoder if isinstance(data, Dataset) else None
    if train_n + test_n > len(samples):
        raise ValueError(
            f"requested {train_n}+{test_n} samples from a corpus of {len(samples)}"
        )
    order = np.random.default_rng(seed).permutation(len(samples))
    train = [samples[i] for i in order[:train_n]]
    test = [samples[i] for i in order[train_n : train_n + test_n]]
    return Dataset(train, encoder, "train"), Dataset(test, encoder, "test")


def mask_digest(mask):
    return hashlib.sha256(np.asarray(mask, dtype=np.uint8).tobytes()).hexdigest()


def save_dataset(dataset, path):
    """CSV: 128 feature columns + label; header carries tag and mask digest."""
    X = dataset.feature_matrix()
    y = dataset.label_vector()
    with open(path, "w") as fh:
        fh.write(
            f"# {DATASET_MAGIC} tag={dataset.tag} "
            f"mask_sha256={mask_digest(dataset.mask)}\n"
        )
        fh.write(",".join(f"f{i:03d}" for i in range(ENCODED_WIDTH)) + ",label\n")
        for row, label in zip(X, y):
            fh.write(",".join(format(v, ".17g") for v in row) + f",{label}\n")


def load_dataset(path, encoder):
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith(f"# {DATASET_MAGIC}"):
            raise DataFormatError(f"{path}: not a {DATASET_MAGIC} file")
        fields = dict(p.split("=", 1) for p in header.split()[3:])
        if fields.get("mask_sha256") != mask_digest(encoder.mask):
            raise DataFormatError(f"{path}: mask digest does not match the encoder")
        fh.readline()  # column header
        samples = []
        for lineno, line in enumerate(fh, start=3):
            parts = line.rstrip("\n").split(",")
            if len(parts) != ENCODED_WIDTH + 1:
                raise DataFormatError(f"{path}:{lineno}: bad column count")
            x = np.array([float(v) for v in parts[:-1]])
            samples.append(EncodedSample(x, int(parts[-1]), encoder.mask))
    return Dataset(samples, encoder, fields.get("tag", ""))
