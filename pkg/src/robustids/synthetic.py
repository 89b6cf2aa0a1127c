"""Synthetic NSL-KDD-format traffic generator.

Produces files in the KDDTrain+.txt layout (41 features, label, difficulty).
Each traffic class is driven by a few latent factors with tightly correlated
rate families, count/byte features have occasional long-tail spikes (so
min-max normalization compresses typical gaps, as in the real corpus), and a
configurable fraction of flows is blended toward the opposing class to create
an ambiguous band around the decision boundary. Used by the test suite and
handy for demo runs when the real corpus is not on disk.
"""

import argparse

import numpy as np

from .ingest import FEATURE_NAMES, FlowRecord

CLASS_P = {"normal": 0.55, "neptune": 0.18, "smurf": 0.10, "portsweep": 0.12, "misc": 0.05}

NORMAL_SERVICES = ["http", "smtp", "domain_u", "ftp_data", "other", "ssh", "pop_3", "ftp", "telnet", "finger"]
NORMAL_SERVICE_P = [0.40, 0.12, 0.12, 0.08, 0.08, 0.07, 0.05, 0.04, 0.03, 0.01]
RARE_SERVICES = ["X11", "IRC", "Z39_50"]
MISC_LABELS = ["warezclient", "buffer_overflow", "rootkit", "guess_passwd", "back", "satan"]


def _choice(rng, values, probs):
    return values[rng.choice(len(values), p=probs)]


def _rate_family(rng, base, names):
    """Correlated rate features: one latent value plus small per-member jitter.

    Values near the ends absorb to exactly 0.00 / 1.00, as saturated counters
    do in real flow captures; that clumping is what gives clean traffic its
    near-duplicate neighborhoods.
    """
    out = {}
    for name in names:
        v = min(max(base + 0.004 * (rng.random() - 0.5), 0.0), 1.0)
        if v > 0.93 and rng.random() < 0.7:
            v = 1.0
        elif v < 0.07 and rng.random() < 0.7:
            v = 0.0
        out[name] = round(v, 2)
    return out


def _snap(rng, value, candidates, p):
    """Replace `value` by the nearest common value with probability p."""
    if rng.random() < p:
        return min(candidates, key=lambda c: abs(c - value))
    return value


_COMMON_BYTES = (0, 105, 146, 181, 232, 287, 334, 520, 1032)


_SERROR = ("serror_rate", "srv_serror_rate", "dst_host_serror_rate", "dst_host_srv_serror_rate")
_RERROR = ("rerror_rate", "srv_rerror_rate", "dst_host_rerror_rate", "dst_host_srv_rerror_rate")


def _spike(rng, p, scale):
    return int(rng.random() < p) * int(scale * rng.random())


def _saturate(rng, value, cap, start, p=0.6):
    if value >= start and rng.random() < p:
        return cap
    return min(value, cap)


def _latents(rng):
    """Two gridded primary factors plus dependent minors.

    Flows repeat in behavioural patterns; snapping the primaries to a coarse
    grid reproduces that clumping, which keeps the local dimensionality of
    clean traffic low, the way real captures behave.
    """
    u1, u2 = rng.random(2)
    if rng.random() < 0.8:
        u1 = round(u1 * 4) / 4
    if rng.random() < 0.8:
        u2 = round(u2 * 4) / 4
    u3 = min(max(0.5 * (u1 + u2) + 0.10 * (rng.random() - 0.5), 0.0), 1.0)
    u4 = min(max(abs(u1 - u2) + 0.10 * (rng.random() - 0.5), 0.0), 1.0)
    return u1, u2, u3, u4


def _normal_numeric(rng):
    u1, u2, u3, u4 = _latents(rng)
    count = int(1 + 170 * u1 * u1)
    src = int(40 + 9000 * u2)
    if src <= 1200:
        src = _snap(rng, src, _COMMON_BYTES, 0.45)
    row = {
        "duration": int(2500 * u1 * u1 * (rng.random() < 0.55)) + _spike(rng, 0.001, 30000),
        "src_bytes": src + _spike(rng, 0.0015, 250000),
        "dst_bytes": int(80 + 24000 * u3) + _spike(rng, 0.0015, 400000),
        "logged_in": int(rng.random() < 0.65),
        "count": count,
        "srv_count": max(1, int(count * (0.45 + 0.55 * u2))),
        "same_srv_rate": round(0.55 + 0.45 * u2, 2),
        "diff_srv_rate": round(0.25 * u1 * u1, 2),
        "srv_diff_host_rate": round(0.3 * u3, 2),
        "dst_host_count": _saturate(rng, int(20 + 235 * u1), 255, 230),
        "dst_host_srv_count": _saturate(rng, int(10 + 220 * u2), 255, 215),
        "dst_host_same_srv_rate": round(0.5 + 0.5 * u2, 2),
        "dst_host_diff_srv_rate": round(0.2 * u1, 2),
        "dst_host_same_src_port_rate": round(0.35 * u3, 2),
        "dst_host_srv_diff_host_rate": round(0.25 * u4, 2),
    }
    row.update(_rate_family(rng, 0.30 * u3 * u3, _SERROR))
    row.update(_rate_family(rng, 0.35 * u4 * u4, _RERROR))
    return row


def _neptune_numeric(rng):
    u1, u2, u3, u4 = _latents(rng)
    count = _saturate(rng, int(60 + 451 * u1), 511, 420)
    row = {
        "duration": 0,
        "src_bytes": 0,
        "dst_bytes": 0,
        "logged_in": 0,
        "count": count,
        "srv_count": max(1, int(count * (0.7 + 0.3 * u2))),
        "same_srv_rate": round(0.02 + 0.28 * u3, 2),
        "diff_srv_rate": round(0.03 + 0.10 * u1, 2),
        "srv_diff_host_rate": round(0.1 * u2, 2),
        "dst_host_count": _saturate(rng, int(150 + 105 * u1), 255, 230),
        "dst_host_srv_count": int(2 + 40 * u2),
        "dst_host_same_srv_rate": round(0.02 + 0.18 * u3, 2),
        "dst_host_diff_srv_rate": round(0.05 + 0.12 * u1, 2),
        "dst_host_same_src_port_rate": round(0.4 * u4, 2),
        "dst_host_srv_diff_host_rate": round(0.08 * u2, 2),
    }
    row.update(_rate_family(rng, 0.45 + 0.55 * u2, _SERROR))
    row.update(_rate_family(rng, 0.10 * u4 * u4, _RERROR))
    return row


def _smurf_numeric(rng):
    u1, u2, u3, u4 = _latents(rng)
    count = _saturate(rng, int(120 + 391 * u1), 511, 430)
    row = {
        "duration": 0,
        "src_bytes": _snap(rng, int(300 + 1300 * u2), (520, 1032), 0.6),
        "dst_bytes": 0,
        "logged_in": 0,
        "count": count,
        "srv_count": count,
        "same_srv_rate": round(0.75 + 0.25 * u2, 2),
        "diff_srv_rate": round(0.05 * u1, 2),
        "srv_diff_host_rate": round(0.08 * u3, 2),
        "dst_host_count": _saturate(rng, int(180 + 75 * u1), 255, 230),
        "dst_host_srv_count": _saturate(rng, int(150 + 105 * u2), 255, 230),
        "dst_host_same_srv_rate": round(0.8 + 0.2 * u2, 2),
        "dst_host_diff_srv_rate": round(0.05 * u1, 2),
        "dst_host_same_src_port_rate": round(0.5 + 0.5 * u4, 2),
        "dst_host_srv_diff_host_rate": round(0.05 * u2, 2),
    }
    row.update(_rate_family(rng, 0.04 * u3, _SERROR))
    row.update(_rate_family(rng, 0.04 * u4, _RERROR))
    return row


def _portsweep_numeric(rng):
    u1, u2, u3, u4 = _latents(rng)
    row = {
        "duration": int(40 * u1 * (rng.random() < 0.4)),
        "src_bytes": int(60 * u2),
        "dst_bytes": int(300 * u3 * (rng.random() < 0.3)),
        "logged_in": 0,
        "count": int(1 + 9 * u1),
        "srv_count": int(1 + 5 * u2),
        "same_srv_rate": round(0.05 + 0.25 * u3, 2),
        "diff_srv_rate": round(0.45 + 0.55 * u1, 2),
        "srv_diff_host_rate": round(0.25 + 0.45 * u2, 2),
        "dst_host_count": _saturate(rng, int(100 + 155 * u1), 255, 230),
        "dst_host_srv_count": int(2 + 25 * u2),
        "dst_host_same_srv_rate": round(0.02 + 0.13 * u3, 2),
        "dst_host_diff_srv_rate": round(0.4 + 0.6 * u1, 2),
        "dst_host_same_src_port_rate": round(0.4 + 0.6 * u4, 2),
        "dst_host_srv_diff_host_rate": round(0.15 + 0.35 * u2, 2),
    }
    row.update(_rate_family(rng, 0.08 + 0.22 * u3, _SERROR))
    row.update(_rate_family(rng, 0.35 + 0.65 * u2, _RERROR))
    return row


# six compact rare-attack profiles scattered across feature space; each is a
# small cluster of its own so far-field regions carry attack-labeled data
# without raising the local dimensionality of clean traffic
_MISC_PROFILES = np.random.default_rng(20240917).random((6, 17))


def _misc_numeric(rng, which=None):
    if which is None:
        which = int(rng.integers(len(_MISC_PROFILES)))
    base = _MISC_PROFILES[which]
    u = rng.random(3)
    snap = rng.random(3) < 0.7
    u[snap] = np.round(u[snap] * 4) / 4

    def v(i):
        return float(min(max(base[i] + 0.12 * (u[i % 3] - 0.5), 0.0), 1.0))

    row = {
        "duration": int(8000 * v(0) ** 2),
        "src_bytes": int(120000 * v(1) ** 3),
        "dst_bytes": int(200000 * v(2) ** 3),
        "logged_in": int(v(3) < 0.4),
        "count": int(1 + 510 * v(4)),
        "srv_count": int(1 + 400 * v(5)),
        "same_srv_rate": round(v(6), 2),
        "diff_srv_rate": round(v(7), 2),
        "srv_diff_host_rate": round(v(8), 2),
        "dst_host_count": int(255 * v(9)),
        "dst_host_srv_count": int(255 * v(10)),
        "dst_host_same_srv_rate": round(v(11), 2),
        "dst_host_diff_srv_rate": round(v(12), 2),
        "dst_host_same_src_port_rate": round(v(13), 2),
        "dst_host_srv_diff_host_rate": round(v(14), 2),
    }
    row.update(_rate_family(rng, v(15), _SERROR))
    row.update(_rate_family(rng, v(16), _RERROR))
    return row


_NUMERIC_BUILDERS = {
    "normal": _normal_numeric,
    "neptune": _neptune_numeric,
    "smurf": _smurf_numeric,
    "portsweep": _portsweep_numeric,
    "misc": _misc_numeric,
}

_BLEND_TARGETS = {
    "normal": (["neptune", "portsweep", "smurf"], [0.5, 0.35, 0.15]),
    "neptune": (["normal"], [1.0]),
    "smurf": (["normal"], [1.0]),
    "portsweep": (["normal"], [1.0]),
    "misc": (["normal"], [1.0]),
}

# rare flag-like features shared by every class: near-constant noise dims
_RARE_INT = (
    ("wrong_fragment", 0.0015, 3),
    ("urgent", 0.001, 3),
    ("hot", 0.006, 5),
    ("num_failed_logins", 0.003, 4),
    ("num_compromised", 0.0025, 4),
    ("root_shell", 0.0012, 1),
    ("num_root", 0.002, 5),
    ("num_file_creations", 0.003, 4),
    ("num_shells", 0.0012, 2),
    ("num_access_files", 0.0025, 3),
    ("is_guest_login", 0.009, 1),
)


def _categorical(rng, cls):
    if cls == "normal":
        if rng.random() < 0.10:
            proto = "icmp"
            service = _choice(rng, ["eco_i", "ecr_i"], [0.6, 0.4])
            flag = "SF"
        else:
            proto = _choice(rng, ["tcp", "udp"], [0.77, 0.23])
            service = _choice(rng, NORMAL_SERVICES, NORMAL_SERVICE_P)
            if rng.random() < 0.002:
                service = _choice(rng, RARE_SERVICES, [1 / 3] * 3)
            flag = _choice(rng, ["SF", "S0", "REJ", "RSTR", "SH"], [0.85, 0.06, 0.05, 0.03, 0.01])
    elif cls == "neptune":
        proto = "tcp"
        service = _choice(rng, ["private", "http", "telnet", "ftp"], [0.55, 0.25, 0.12, 0.08])
        flag = _choice(rng, ["S0", "REJ", "RSTR", "SF"], [0.7, 0.15, 0.06, 0.09])
    elif cls == "smurf":
        proto = "icmp"
        service = _choice(rng, ["ecr_i", "eco_i"], [0.55, 0.45])
        flag = "SF"
    elif cls == "portsweep":
        proto = "tcp"
        service = _choice(rng, ["private", "other", "ftp", "telnet", "http"], [0.45, 0.2, 0.12, 0.1, 0.13])
        flag = _choice(rng, ["REJ", "RSTR", "SF", "SH", "S0"], [0.4, 0.28, 0.14, 0.09, 0.09])
    else:  # misc
        proto = _choice(rng, ["tcp", "udp", "icmp"], [0.7, 0.2, 0.1])
        service = _choice(
            rng, NORMAL_SERVICES + ["private", "eco_i"], [0.08] * 10 + [0.12, 0.08]
        )
        flag = _choice(rng, ["SF", "REJ", "RSTR", "S0", "SH"], [0.45, 0.2, 0.15, 0.12, 0.08])
    return {"protocol_type": proto, "service": service, "flag": flag}


def _normal_icmp_numeric(rng):
    # ping bursts: the benign counterpart of smurf traffic
    row = _normal_numeric(rng)
    u1, u2, _, _ = _latents(rng)
    row["src_bytes"] = _snap(rng, int(64 + 1400 * u2), (64, 520, 1032), 0.55)
    row["dst_bytes"] = int(64 + 1400 * u2 * (rng.random() < 0.8))
    row["count"] = int(1 + 300 * u1 * u1)
    row["srv_count"] = row["count"]
    row["same_srv_rate"] = round(0.7 + 0.3 * u2, 2)
    row["dst_host_same_src_port_rate"] = round(0.3 + 0.5 * u2, 2)
    row["logged_in"] = 0
    return row


def _blend(own, other, t):
    out = dict(own)
    for key, val in own.items():
        mixed = (1 - t) * val + t * other[key]
        out[key] = int(round(mixed)) if isinstance(val, int) else round(float(mixed), 2)
    return out


def synth_record(rng, ambiguous=0.15, label_noise=0.025):
    cls = _choice(rng, list(CLASS_P), list(CLASS_P.values()))
    cats = _categorical(rng, cls)
    misc_kind = None
    if cls == "misc":
        misc_kind = int(rng.integers(len(_MISC_PROFILES)))
        numeric = _misc_numeric(rng, misc_kind)
    elif cls == "normal" and cats["protocol_type"] == "icmp":
        numeric = _normal_icmp_numeric(rng)
    else:
        numeric = _NUMERIC_BUILDERS[cls](rng)
    if rng.random() < ambiguous:
        targets, probs = _BLEND_TARGETS[cls]
        other_cls = _choice(rng, targets, probs)
        if rng.random() < 0.6:
            t = (0.42, 0.47, 0.50)[int(rng.integers(3))]
        else:
            t = rng.uniform(0.30, 0.56)
        numeric = _blend(numeric, _NUMERIC_BUILDERS[other_cls](rng), t)
        if rng.random() < t:  # categorical identity also drifts in the band
            cats = _categorical(rng, other_cls)
    row = dict(cats)
    row.update(numeric)
    row["land"] = int(rng.random() < 0.001)
    row["num_outbound_cmds"] = 0
    row["is_host_login"] = int(rng.random() < 0.001)
    row["su_attempted"] = int(rng.random() < 0.004) * int(1 + (rng.random() < 0.3))
    for name, p, top in _RARE_INT:
        row[name] = int(rng.random() < p) * int(1 + rng.random() * top)
    label = MISC_LABELS[misc_kind] if cls == "misc" else cls
    if rng.random() < label_noise:  # mislabeled flows, as in real captures
        label = "normal" if cls != "normal" else _choice(rng, ["neptune", "portsweep", "smurf"], [0.4, 0.35, 0.25])
    values = tuple(str(row[name]) for name in FEATURE_NAMES)
    return FlowRecord(values, label, int(1 + rng.random() * 20))


def synth_records(n, seed=0, ambiguous=0.15, label_noise=0.025):
    rng = np.random.default_rng(seed)
    return [synth_record(rng, ambiguous, label_noise) for _ in range(n)]


def write_corpus(path, n, seed=0, ambiguous=0.15, label_noise=0.025):
    records = synth_records(n, seed, ambiguous, label_noise)
    with open(path, "w") as fh:
        for rec in records:
            fh.write(",".join(rec.values) + f",{rec.label},{rec.difficulty}\n")
    return path


def main(argv=None):
    parser = argparse.ArgumentParser(description="generate a synthetic NSL-KDD-format corpus")
    parser.add_argument("path")
    parser.add_argument("n", type=int)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--ambiguous", type=float, default=0.15)
    parser.add_argument("--label-noise", type=float, default=0.025)
    args = parser.parse_args(argv)
    write_corpus(args.path, args.n, args.seed, args.ambiguous, args.label_noise)
    print(f"wrote {args.n} records to {args.path}")


if __name__ == "__main__":
    main()
