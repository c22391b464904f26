"""End-to-end run: ingest or generate, encode, segment, pool, cross-validate, train, report."""

import logging
import os
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .bow import SEGMENTATIONS, make_bags
from .encoding import ENCODINGS
from .evaluation import consistency_rate, cross_validate, roc_points
from .exceptions import ConfigError, PainMilError, ParseError, StageError
from .ingest import filter_analyzable, labels_from_opi, load_labels, load_sequences, _data_rows
from .io import provenance, save_model, write_metrics, write_predictions, write_roc
from .mcil import MCILBoostClassifier
from .milboost import LOSSES, MILBoostClassifier
from .segmentation import DEFAULT_WINDOW_SIZES, NcutConfig
from .synthetic import GeneratorConfig, read_key_values, synthesize

logger = logging.getLogger(__name__)

LEARNERS = ("mil", "mcil")


@dataclass(frozen=True)
class PipelineConfig:
    encoding: str = "clustered"
    segmentation: str = "ncut"
    window_sizes: tuple = DEFAULT_WINDOW_SIZES
    sigma_f: float = 0.1
    sigma_t: float = 30.0
    min_len: int = 21
    max_len: int = 81
    learner: str = "mcil"
    rounds: int = 50
    softmax_u: float = 20.0
    loss: str = "log"
    folds: int = 10
    seed: int = 0
    stratified: bool = True
    min_analyzable: float = 0.5
    evidence: str = ""  # evidence CSV; empty means synthesize
    labels: str = ""  # sequence_id,label CSV
    opi: str = ""  # sequence_id,opi CSV, used when no label file is given
    groups: str = ""  # sequence_id,group CSV for group-wise folds
    coders: str = ""  # sequence_id,coders CSV for the consistency table
    generator: str = ""  # generator key-value file
    out_dir: str = "painmil_out"

    def __post_init__(self):
        if self.encoding not in ENCODINGS:
            raise ConfigError(f"encoding must be one of {ENCODINGS}")
        if self.segmentation not in SEGMENTATIONS:
            raise ConfigError(f"segmentation must be one of {SEGMENTATIONS}")
        if self.learner not in LEARNERS:
            raise ConfigError(f"learner must be one of {LEARNERS}")
        if self.learner == "mcil" and self.encoding != "clustered":
            raise ConfigError("the mcil learner needs the clustered encoding")
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}")
        if self.rounds < 1 or self.softmax_u < 1 or self.folds < 2:
            raise ConfigError("need rounds >= 1, softmax_u >= 1 and folds >= 2")
        if not 0.0 <= self.min_analyzable <= 1.0:
            raise ConfigError("min_analyzable must lie in [0, 1]")
        if not self.window_sizes or min(self.window_sizes) < 1:
            raise ConfigError("window sizes must be positive")
        self.ncut  # validates the ncut parameters

    @property
    def ncut(self):
        return NcutConfig(self.sigma_f, self.sigma_t, self.min_len, self.max_len)

    @classmethod
    def from_mapping(cls, values):
        """Build from string values (config file or ``key=value`` overrides)."""
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in values.items():
            key = key.strip().replace("-", "_")
            if key not in known:
                raise ConfigError(f"unknown pipeline key {key!r}")
            default = known[key].default
            raw = str(raw).strip()
            try:
                if isinstance(default, bool):
                    if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(raw)
                    kwargs[key] = raw.lower() in ("true", "1", "yes")
                elif isinstance(default, tuple):
                    kwargs[key] = tuple(int(v) for v in raw.replace(",", " ").split())
                elif isinstance(default, int):
                    kwargs[key] = int(raw)
                elif isinstance(default, float):
                    kwargs[key] = float(raw)
                else:
                    kwargs[key] = raw
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path, overrides=None):
        values = read_key_values(path)
        values.update(overrides or {})
        return cls.from_mapping(values)

    def with_overrides(self, overrides):
        current = {k: ",".join(map(str, v)) if isinstance(v, tuple) else v for k, v in asdict(self).items()}
        current.update(overrides)
        return PipelineConfig.from_mapping(current)

    def to_dict(self):
        return asdict(self)

    def hash_dict(self):
        """Settings that can change results; the output location is left out."""
        d = self.to_dict()
        d.pop("out_dir")
        return d

    def estimator(self):
        params = dict(n_rounds=self.rounds, softmax_u=self.softmax_u, loss=self.loss)
        if self.learner == "mcil":
            return MCILBoostClassifier(**params)
        return MILBoostClassifier(**params)


@dataclass
class PipelineResult:
    metrics: object
    paths: dict = field(default_factory=dict)
    n_bags: int = 0


def _read_two_columns(path, header, convert):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        lineno, head = next(it, (0, None))
        if head is None or [h.strip() for h in head] != list(header):
            raise ParseError(f"{path}: header must be {','.join(header)!r}", lineno or None)
        for lineno, row in it:
            if len(row) != 2:
                raise ParseError(f"{path}: expected 2 fields, got {len(row)}", lineno)
            try:
                out[row[0].strip()] = convert(row[1].strip())
            except ValueError:
                raise ParseError(f"{path}: bad value {row[1]!r}", lineno) from None
    return out


def load_groups(path):
    return _read_two_columns(path, ("sequence_id", "group"), str)


def load_coder_counts(path):
    return _read_two_columns(path, ("sequence_id", "coders"), int)


def _stage(name, fn, *args, entity=None, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except (PainMilError, OSError) as exc:
        raise StageError(name, entity or getattr(exc, "filename", None), exc) from exc


def load_input(cfg):
    """Labelled, analyzable sequences from files or the generator."""
    if cfg.evidence:
        if cfg.labels:
            labels = _stage("ingest", load_labels, cfg.labels, entity=cfg.labels)
        elif cfg.opi:
            labels = _stage("ingest", labels_from_opi, cfg.opi, entity=cfg.opi)
        else:
            labels = None
        sequences = _stage("ingest", load_sequences, cfg.evidence, labels, entity=cfg.evidence)
    else:
        if cfg.generator:
            gen = _stage("generate", GeneratorConfig.from_file, cfg.generator, entity=cfg.generator)
        else:
            gen = GeneratorConfig(seed=cfg.seed)
        sequences = _stage("generate", synthesize, gen)
    sequences = filter_analyzable(sequences, cfg.min_analyzable)
    labelled = [s for s in sequences if s.label is not None]
    if len(labelled) < len(sequences):
        logger.warning("%d sequence(s) without a label left out", len(sequences) - len(labelled))
    return labelled


def build_bags(cfg, sequences):
    errors = []
    bags = make_bags(
        sequences, cfg.encoding, cfg.segmentation, cfg.window_sizes, None, cfg.ncut, errors=errors
    )
    if errors:
        sid, msg = errors[0]
        raise StageError("segment", sid, msg)
    return bags


def prediction_records(bags, scores, localization, threshold=0.5):
    """Rows for the prediction dump; ``localization`` holds instance indices
    (MIL) or ``(instance, cluster)`` pairs (MCIL), one per bag."""
    records = []
    for bag, score, loc in zip(bags, scores, localization):
        j, k = (int(loc[0]), int(loc[1])) if np.ndim(loc) else (int(loc), None)
        records.append(
            {
                "sequence_id": bag.sequence_id,
                "score": float(score),
                "label": 1 if score > threshold else -1,
                "argmax_cluster": k,
                "segment": bag.segments[j],
            }
        )
    return records


def run_pipeline(cfg):
    """Run every stage and write model, predictions, metrics and ROC files to ``cfg.out_dir``.

    Predictions and metrics come from ``cfg.folds``-fold cross-validation;
    the saved model is then trained on all bags.
    """
    prov = provenance(cfg.hash_dict(), cfg.seed)
    sequences = load_input(cfg)
    bags = build_bags(cfg, sequences)
    if not bags:
        raise StageError("segment", None, "no labelled bags to learn from")
    X = [b.instances for b in bags]
    y = np.array([b.label for b in bags])
    groups = None
    if cfg.groups:
        table = _stage("ingest", load_groups, cfg.groups, entity=cfg.groups)
        missing = [b.sequence_id for b in bags if b.sequence_id not in table]
        if missing:
            raise StageError("evaluate", missing[0], "no group assigned")
        groups = np.array([table[b.sequence_id] for b in bags])

    est = cfg.estimator()
    cv = _stage("evaluate", cross_validate, est, X, y, cfg.folds, cfg.seed, cfg.stratified, groups)
    model = _stage("train", est.fit, X, y)

    os.makedirs(cfg.out_dir, exist_ok=True)
    paths = {name: os.path.join(cfg.out_dir, name) for name in ("model.json", "predictions.csv", "metrics.json", "roc.csv")}
    save_model(model, paths["model.json"], cfg.encoding, prov)

    records = prediction_records(bags, cv.scores, cv.localization, est.threshold)
    write_predictions(records, paths["predictions.csv"], prov)

    extra = {"learner": cfg.learner, "encoding": cfg.encoding, "segmentation": cfg.segmentation, "n_bags": len(bags)}
    if cfg.coders:
        counts = _stage("ingest", load_coder_counts, cfg.coders, entity=cfg.coders)
        decisions = {r["sequence_id"]: r["label"] for r in records}
        table = _stage("evaluate", consistency_rate, decisions, counts)
        extra["consistency"] = {g: {"agree": r.agree, "total": r.total, "rate": r.rate} for g, r in table.items()}
    write_metrics(cv.metrics, paths["metrics.json"], prov, extra)
    fpr, tpr, thr = roc_points(cv.scores, y)
    write_roc(fpr, tpr, thr, paths["roc.csv"], prov)
    return PipelineResult(cv.metrics, paths, len(bags))
