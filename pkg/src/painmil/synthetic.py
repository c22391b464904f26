"""Synthetic AU evidence with planted pain-combination bursts.

Every frame starts at ``baseline`` plus Gaussian noise, capped below the
burst threshold. Positive sequences receive one or more bursts in which all
AUs of one AU combination sit at or above the threshold together.
Any sequence may also carry distractor bursts of a single AU that never
forms a combination on its own (AU 4, 9, 10, 26 or 43), kept away from the
planted bursts, so single-AU evidence alone cannot separate the classes.
"""

import configparser
from dataclasses import asdict, dataclass, fields

import numpy as np

from .aus import AU_INDEX, CLUSTER_COMBINATIONS, LONE_AUS, N_AUS, N_CLUSTERS
from .exceptions import ConfigError
from .ingest import EvidenceSequence

# distractors keep this many frames away from a planted burst (one maximal
# normalized-cut segment), so pooling rarely mixes them with the burst
DISTRACTOR_GAP = 81


@dataclass(frozen=True)
class GeneratorConfig:
    n_sequences: int = 100
    len_min: int = 150
    len_max: int = 300
    pos_fraction: float = 0.5
    burst_len_min: int = 5
    burst_len_max: int = 15
    burst_evidence: float = 1.5
    noise_sd: float = 0.3
    seed: int = 0
    baseline: float = -1.0
    burst_threshold: float = 1.0
    burst_clusters: tuple = tuple(range(N_CLUSTERS))
    bursts_per_positive: int = 3
    distractor_rate: float = 0.5

    def __post_init__(self):
        if self.n_sequences < 1:
            raise ConfigError("n_sequences must be >= 1")
        if not 1 <= self.len_min <= self.len_max:
            raise ConfigError("need 1 <= len_min <= len_max")
        if not 0.0 <= self.pos_fraction <= 1.0:
            raise ConfigError("pos_fraction must lie in [0, 1]")
        if not 1 <= self.burst_len_min <= self.burst_len_max:
            raise ConfigError("need 1 <= burst_len_min <= burst_len_max")
        if self.burst_len_max > self.len_min:
            raise ConfigError(
                f"bursts of up to {self.burst_len_max} frames do not fit sequences of {self.len_min}"
            )
        if self.bursts_per_positive < 1:
            raise ConfigError("bursts_per_positive must be >= 1")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be non-negative")
        if not -2.0 <= self.baseline < self.burst_threshold <= self.burst_evidence <= 2.0:
            raise ConfigError("need -2 <= baseline < burst_threshold <= burst_evidence <= 2")
        clusters = tuple(int(k) for k in self.burst_clusters)
        if not clusters or any(not 0 <= k < N_CLUSTERS for k in clusters):
            raise ConfigError(f"burst_clusters must be non-empty indices in [0, {N_CLUSTERS})")
        object.__setattr__(self, "burst_clusters", clusters)
        if not 0.0 <= self.distractor_rate <= 1.0:
            raise ConfigError("distractor_rate must lie in [0, 1]")

    @classmethod
    def from_mapping(cls, values):
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown generator key {key!r}")
            default = known[key].default
            try:
                if isinstance(default, tuple):
                    kwargs[key] = tuple(int(v) for v in str(raw).replace(",", " ").split())
                elif isinstance(default, int):
                    kwargs[key] = int(raw)
                else:
                    kwargs[key] = float(raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path):
        return cls.from_mapping(read_key_values(path))

    def to_text(self):
        lines = []
        for key, value in asdict(self).items():
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def read_key_values(path):
    """Read a ``key = value`` file (``#`` comments allowed, no sections)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    parser.optionxform = str
    with open(path, encoding="utf-8") as fh:
        try:
            parser.read_string("[config]\n" + fh.read())
        except configparser.Error as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return dict(parser["config"])


def _free_start(rng, length, burst_len, blocked):
    """Random start for a burst avoiding the ``blocked`` frame mask, or None."""
    ok = np.array(
        [not blocked[s : s + burst_len].any() for s in range(length - burst_len + 1)]
    )
    choices = np.flatnonzero(ok)
    if choices.size == 0:
        return None
    return int(rng.choice(choices))


def synthesize(config=GeneratorConfig(), seed=None):
    """Generate labelled evidence sequences; deterministic for a given seed.

    ``seed`` overrides ``config.seed``. Exactly ``round(n * pos_fraction)``
    sequences are positive. Each sequence's ``info`` records its planted
    bursts as ``(start, end, combination)`` and, for positives, the cluster.
    """
    cfg = config
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    n_pos = int(round(cfg.n_sequences * cfg.pos_fraction))
    labels = np.array([1] * n_pos + [-1] * (cfg.n_sequences - n_pos))
    labels = labels[rng.permutation(cfg.n_sequences)]
    width = len(str(cfg.n_sequences - 1))
    cap = cfg.burst_threshold - 0.05

    sequences = []
    for i, label in enumerate(labels):
        length = int(rng.integers(cfg.len_min, cfg.len_max + 1))
        ev = cfg.baseline + cfg.noise_sd * rng.standard_normal((length, N_AUS))
        ev = np.minimum(ev, cap)
        blocked = np.zeros(length, dtype=bool)
        info = {"bursts": [], "distractors": []}

        if label == 1:
            cluster = int(rng.choice(cfg.burst_clusters))
            info["cluster"] = cluster
            combos = CLUSTER_COMBINATIONS[cluster]
            for _ in range(cfg.bursts_per_positive):
                combo = combos[int(rng.integers(len(combos)))]
                blen = int(rng.integers(cfg.burst_len_min, cfg.burst_len_max + 1))
                start = _free_start(rng, length, blen, blocked)
                if start is None:
                    break
                cols = [AU_INDEX[a] for a in combo]
                level = cfg.burst_evidence + cfg.noise_sd * rng.standard_normal((blen, len(cols)))
                ev[start : start + blen, cols] = np.maximum(level, cfg.burst_threshold)
                blocked[max(0, start - DISTRACTOR_GAP) : start + blen + DISTRACTOR_GAP] = True
                info["bursts"].append((start, start + blen - 1, combo))

        if rng.random() < cfg.distractor_rate:
            au = LONE_AUS[int(rng.integers(len(LONE_AUS)))]
            for _ in range(int(rng.integers(1, 3))):
                blen = int(rng.integers(cfg.burst_len_min, cfg.burst_len_max + 1))
                start = _free_start(rng, length, blen, blocked)
                if start is None:
                    break
                level = cfg.burst_evidence + cfg.noise_sd * rng.standard_normal(blen)
                ev[start : start + blen, AU_INDEX[au]] = np.maximum(level, cfg.burst_threshold)
                info["distractors"].append((start, start + blen - 1, au))

        ev = np.clip(ev, -2.0, 2.0)
        sequences.append(
            EvidenceSequence(f"seq{i:0{width}d}", np.arange(length), ev, int(label), info)
        )
    return sequences
