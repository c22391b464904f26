"""Frame-level AU-combination feature structures.

Two encodings of a frame's eight AU probabilities:

* compact: an 11-vector of single-AU and pairwise co-occurrence scores, the
  latter by the min rule;
* clustered: an 8 x 6 sparse matrix whose column ``k`` carries the
  probabilities of the AUs taking part in cluster ``k``'s combinations.

Clustered features are flattened row-major to 48 columns wherever a 2-D
layout is needed.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from .aus import (
    AU_IDS,
    AU_INDEX,
    CLUSTER_MASK,
    CLUSTER_NAMES,
    COMPACT_LAYOUT,
    N_AUS,
    N_CLUSTERS,
    N_COMPACT,
)
from .exceptions import IncompleteFrameError, InvalidInputError
from .validation import check_probability

ENCODINGS = ("compact", "clustered")

_COMPACT_INDEX = [tuple(AU_INDEX[a] for a in combo) for combo in COMPACT_LAYOUT]


def combo_probability(p_i, p_j):
    """Co-occurrence score of two AUs: the smaller of their probabilities."""
    check_probability([p_i, p_j])
    return min(float(p_i), float(p_j))


def _check_frames(P):
    P = np.asarray(P, dtype=float)
    squeeze = P.ndim == 1
    if squeeze:
        P = P[np.newaxis, :]
    if P.ndim != 2 or P.shape[1] != N_AUS:
        raise InvalidInputError(f"expected {N_AUS} AU probabilities per frame, got shape {P.shape}")
    if np.any(np.isnan(P)):
        raise IncompleteFrameError("frame has missing AU probabilities")
    check_probability(P, "AU probability")
    return P, squeeze


def encode_compact(P):
    """Compact encoding of one frame (8,) -> (11,) or many frames (n, 8) -> (n, 11)."""
    P, squeeze = _check_frames(P)
    out = np.empty((P.shape[0], N_COMPACT))
    for c, idx in enumerate(_COMPACT_INDEX):
        out[:, c] = P[:, idx].min(axis=1)
    return out[0] if squeeze else out


def encode_clustered(P):
    """Clustered encoding of one frame (8,) -> (8, 6) or many (n, 8) -> (n, 8, 6)."""
    P, squeeze = _check_frames(P)
    out = np.where(CLUSTER_MASK[np.newaxis, :, :], P[:, :, np.newaxis], 0.0)
    return out[0] if squeeze else out


def encode(P, encoding):
    """Encode frames into 2-D feature rows: (n, 11) compact or (n, 48) clustered."""
    if encoding == "compact":
        return encode_compact(np.atleast_2d(P))
    if encoding == "clustered":
        M = encode_clustered(np.atleast_2d(P))
        return M.reshape(M.shape[0], N_AUS * N_CLUSTERS)
    raise InvalidInputError(f"unknown encoding {encoding!r}; choose from {ENCODINGS}")


def n_features(encoding):
    if encoding == "compact":
        return N_COMPACT
    if encoding == "clustered":
        return N_AUS * N_CLUSTERS
    raise InvalidInputError(f"unknown encoding {encoding!r}; choose from {ENCODINGS}")


def feature_names(encoding):
    """Column names for feature dumps, e.g. ``P(4+9)`` or ``au9@4+9/10``."""
    if encoding == "compact":
        return ["P(" + "+".join(str(a) for a in combo) + ")" for combo in COMPACT_LAYOUT]
    n_features(encoding)
    return [f"au{a}@{name}" for a in AU_IDS for name in CLUSTER_NAMES]


class AUCombinationEncoder(TransformerMixin, BaseEstimator):
    """Stateless transformer from per-frame AU probabilities to combination features.

    Parameters
    ----------
    encoding : {"compact", "clustered"}
        Clustered output is flattened row-major to 48 columns.
    """

    def __init__(self, encoding="compact"):
        self.encoding = encoding

    def fit(self, X, y=None):
        n_features(self.encoding)
        self.n_features_in_ = N_AUS
        return self

    def transform(self, X):
        return encode(X, self.encoding)

    def __sklearn_is_fitted__(self):
        return True
