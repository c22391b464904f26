"""Weakly supervised pain detection from facial action unit evidence.

Per-frame AU evidence is mapped to AU-combination features, pooled over
temporal segments into bags, and classified with multiple-instance boosting
(``MILBoostClassifier``) or its clustered variant (``MCILBoostClassifier``).
"""

__version__ = "0.1.0"

from .bow import Bag, SegmentBagger, make_bags
from .encoding import AUCombinationEncoder, encode_clustered, encode_compact
from .evaluation import auc, consistency_rate, cross_validate, kfold
from .ingest import EvidenceSequence, evidence_to_probability, load_sequences, write_sequences
from .mcil import MCILBoostClassifier
from .milboost import MILBoostClassifier
from .pipeline import PipelineConfig, run_pipeline
from .segmentation import NcutConfig, Segment, ncut_segments, scwind
from .softmax import gm_gradient, gm_softmax
from .synthetic import GeneratorConfig, synthesize

__all__ = [
    "AUCombinationEncoder",
    "Bag",
    "EvidenceSequence",
    "GeneratorConfig",
    "MCILBoostClassifier",
    "MILBoostClassifier",
    "NcutConfig",
    "PipelineConfig",
    "Segment",
    "SegmentBagger",
    "auc",
    "consistency_rate",
    "cross_validate",
    "encode_clustered",
    "encode_compact",
    "evidence_to_probability",
    "gm_gradient",
    "gm_softmax",
    "kfold",
    "load_sequences",
    "make_bags",
    "ncut_segments",
    "run_pipeline",
    "scwind",
    "synthesize",
    "write_sequences",
]
