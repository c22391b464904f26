"""Segment-level max pooling and bag assembly."""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .encoding import encode, n_features
from .exceptions import ConfigError, EmptySegmentError, InvalidInputError
from .segmentation import DEFAULT_WINDOW_SIZES, NcutConfig, Segment, ncut_segments, scwind

logger = logging.getLogger(__name__)

SEGMENTATIONS = ("scwind", "ncut")


@dataclass(eq=False)
class Bag:
    """Pooled instances of one sequence.

    ``instances`` is (n_instances, n_features); clustered features are the
    row-major flattening of the 8 x 6 matrix.
    """

    sequence_id: str
    instances: np.ndarray
    segments: list = field(default_factory=list)
    label: int | None = None
    encoding: str = "compact"

    def __post_init__(self):
        self.instances = np.asarray(self.instances, dtype=float)
        if self.instances.ndim != 2 or self.instances.shape[0] == 0:
            raise InvalidInputError(f"{self.sequence_id}: bag needs a non-empty (n, d) instance array")
        if self.instances.shape[1] != n_features(self.encoding):
            raise InvalidInputError(
                f"{self.sequence_id}: {self.instances.shape[1]} features do not match {self.encoding} encoding"
            )
        if len(self.segments) != self.instances.shape[0]:
            raise InvalidInputError(f"{self.sequence_id}: one segment per instance required")
        for seg in self.segments:
            if seg.sequence_id and seg.sequence_id != self.sequence_id:
                raise InvalidInputError(f"segment of {seg.sequence_id} placed in bag {self.sequence_id}")

    def __len__(self):
        return self.instances.shape[0]


def pool_segment(features, frame_index, segment):
    """Entrywise maximum of the frame features whose index falls in ``segment``.

    ``features`` holds analyzable frames only, aligned with ``frame_index``.
    """
    features = np.asarray(features, dtype=float)
    frame_index = np.asarray(frame_index)
    inside = (frame_index >= segment.start) & (frame_index <= segment.end)
    if not np.any(inside):
        raise EmptySegmentError(
            f"segment [{segment.start}, {segment.end}] of {segment.sequence_id or 'sequence'} has no analyzable frames"
        )
    return features[inside].max(axis=0)


def segment_sequence(
    seq,
    method="scwind",
    encoding="compact",
    window_sizes=DEFAULT_WINDOW_SIZES,
    stride=None,
    ncut=NcutConfig(),
    features=None,
):
    """Candidate segments of one ``EvidenceSequence`` in frame-index units.

    Sc-wind runs over all frames; normalized cuts over the analyzable frames
    (their features are needed for the affinity). ``features`` may pass
    precomputed analyzable-frame features to avoid re-encoding.
    """
    if method == "scwind":
        if len(seq) == 0:
            raise InvalidInputError(f"{seq.sequence_id}: empty sequence")
        fi = seq.frame_index
        return [
            Segment(int(fi[s.start]), int(fi[s.end]), seq.sequence_id, "scwind")
            for s in scwind(len(seq), window_sizes, stride)
        ]
    if method == "ncut":
        t, P = seq.probabilities()
        if t.size == 0:
            raise EmptySegmentError(f"{seq.sequence_id}: no analyzable frames")
        F = encode(P, encoding) if features is None else features
        return ncut_segments(F, t, ncut, seq.sequence_id)
    raise ConfigError(f"unknown segmentation {method!r}; choose from {SEGMENTATIONS}")


def bag_from_sequence(seq, segments, encoding="compact", features=None):
    """Pool every segment of ``seq``; empty segments are skipped with a warning."""
    t, P = seq.probabilities()
    F = encode(P, encoding) if features is None else features
    kept, pooled = [], []
    for seg in sorted(segments):
        try:
            pooled.append(pool_segment(F, t, seg))
        except EmptySegmentError as exc:
            logger.warning("%s", exc)
            continue
        kept.append(seg)
    if not pooled:
        raise EmptySegmentError(f"{seq.sequence_id}: every segment is empty")
    return Bag(seq.sequence_id, np.vstack(pooled), kept, seq.label, encoding)


def build_bags(sequences, segments, encoding="compact", require_labels=True, errors=None):
    """One bag per sequence, instances in segment start order.

    ``segments`` maps sequence_id to its segments. Unlabeled sequences are
    skipped with a warning when ``require_labels``; sequences whose segments
    are all empty are dropped and, if ``errors`` is a list, recorded there as
    ``(sequence_id, message)``.
    """
    bags = []
    for seq in sequences:
        if require_labels and seq.label is None:
            logger.warning("%s: unlabeled, skipped", seq.sequence_id)
            continue
        try:
            bags.append(bag_from_sequence(seq, segments[seq.sequence_id], encoding))
        except EmptySegmentError as exc:
            logger.error("%s", exc)
            if errors is not None:
                errors.append((seq.sequence_id, str(exc)))
    return bags


def make_bags(
    sequences,
    encoding="compact",
    segmentation="scwind",
    window_sizes=DEFAULT_WINDOW_SIZES,
    stride=None,
    ncut=NcutConfig(),
    require_labels=True,
    errors=None,
):
    """Encode, segment and pool a list of sequences in one go."""
    bags = []
    for seq in sequences:
        if require_labels and seq.label is None:
            logger.warning("%s: unlabeled, skipped", seq.sequence_id)
            continue
        try:
            t, P = seq.probabilities()
            if t.size == 0:
                raise EmptySegmentError(f"{seq.sequence_id}: no analyzable frames")
            F = encode(P, encoding)
            segs = segment_sequence(seq, segmentation, encoding, window_sizes, stride, ncut, features=F)
            bags.append(bag_from_sequence(seq, segs, encoding, features=F))
        except EmptySegmentError as exc:
            logger.error("%s", exc)
            if errors is not None:
                errors.append((seq.sequence_id, str(exc)))
    return bags


class SegmentBagger(TransformerMixin, BaseEstimator):
    """Turn evidence sequences into bags of max-pooled segment features.

    ``transform`` returns one ``(n_instances, n_features)`` array per
    sequence, the input format of the MIL estimators, so the two compose in
    a :class:`sklearn.pipeline.Pipeline`.
    """

    def __init__(
        self,
        encoding="compact",
        segmentation="scwind",
        window_sizes=DEFAULT_WINDOW_SIZES,
        stride=None,
        sigma_f=0.1,
        sigma_t=30.0,
        min_len=21,
        max_len=81,
    ):
        self.encoding = encoding
        self.segmentation = segmentation
        self.window_sizes = window_sizes
        self.stride = stride
        self.sigma_f = sigma_f
        self.sigma_t = sigma_t
        self.min_len = min_len
        self.max_len = max_len

    def _ncut(self):
        return NcutConfig(self.sigma_f, self.sigma_t, self.min_len, self.max_len)

    def fit(self, X, y=None):
        n_features(self.encoding)
        if self.segmentation not in SEGMENTATIONS:
            raise ConfigError(f"unknown segmentation {self.segmentation!r}")
        self._ncut()
        return self

    def bags(self, sequences):
        """Bags for every sequence; raises if any sequence yields no instance."""
        errors = []
        bags = make_bags(
            sequences,
            self.encoding,
            self.segmentation,
            self.window_sizes,
            self.stride,
            self._ncut(),
            require_labels=False,
            errors=errors,
        )
        if errors:
            raise EmptySegmentError("; ".join(msg for _, msg in errors))
        return bags

    def transform(self, X):
        return [bag.instances for bag in self.bags(X)]

    def __sklearn_is_fitted__(self):
        return True
