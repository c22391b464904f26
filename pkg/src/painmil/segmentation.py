"""Temporal segment generation: multi-scale scanning windows and normalized cuts.

Normalized cuts here are restricted to temporally contiguous clusters. A
two-way partition of frames ``0..n-1`` into consecutive blocks ``A = [0, t)``
and ``B = [t, n)`` is fully described by the cut point ``t``, so the usual
relaxed eigenvector problem is unnecessary: the exact minimiser of

    Ncut(A, B) = cut(A, B) / assoc(A, V) + cut(A, B) / assoc(B, V)

is found by scanning all ``n - 1`` cut points. With 2-D prefix sums of the
affinity matrix each candidate costs O(1), so one bipartition is O(n^2)
(building the affinity) plus O(n) (the scan). Segments longer than
``max_len`` are split recursively; pieces shorter than ``min_len`` are merged
into a temporal neighbour.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .exceptions import ConfigError, InvalidInputError

logger = logging.getLogger(__name__)

DEFAULT_WINDOW_SIZES = (30, 40, 50)


@dataclass(frozen=True, order=True)
class Segment:
    """Inclusive ``[start, end]`` frame range of one sequence."""

    start: int
    end: int
    sequence_id: str = ""
    method: str = ""

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidInputError(f"segment start {self.start} > end {self.end}")

    def __len__(self):
        return self.end - self.start + 1


@dataclass(frozen=True)
class NcutConfig:
    sigma_f: float = 0.1
    sigma_t: float = 30.0
    min_len: int = 21
    max_len: int = 81

    def __post_init__(self):
        if not (self.sigma_f > 0 and self.sigma_t > 0):
            raise ConfigError("sigma_f and sigma_t must be positive")
        if self.min_len < 1 or self.max_len < self.min_len:
            raise ConfigError("need 1 <= min_len <= max_len")


def scwind(seq_len, window_sizes=DEFAULT_WINDOW_SIZES, stride=None, sequence_id=""):
    """Overlapping scanning windows at several scales over positions ``0..seq_len-1``.

    ``stride`` defaults to half of each window size. When the last stride
    stops short of the end a flush-right window is added. A sequence shorter
    than every window becomes a single segment.
    """
    if seq_len < 1:
        raise InvalidInputError("cannot segment an empty sequence")
    sizes = sorted({int(w) for w in window_sizes})
    if not sizes or sizes[0] < 1:
        raise ConfigError("window sizes must be positive")
    if stride is not None and stride < 1:
        raise ConfigError("stride must be >= 1")

    segments = set()
    for w in sizes:
        if w > seq_len:
            continue
        step = stride if stride is not None else max(1, w // 2)
        starts = list(range(0, seq_len - w + 1, step))
        if starts[-1] + w < seq_len:
            starts.append(seq_len - w)
        segments.update((s, s + w - 1) for s in starts)
    if not segments:
        segments.add((0, seq_len - 1))
    return [Segment(s, e, sequence_id, "scwind") for s, e in sorted(segments)]


def frame_similarity(fu, tu, fv, tv, cfg=NcutConfig()):
    """Affinity of two frames: feature Gaussian plus temporal Gaussian, in (0, 2]."""
    fu = np.ravel(np.asarray(fu, dtype=float))
    fv = np.ravel(np.asarray(fv, dtype=float))
    if fu.shape != fv.shape:
        raise InvalidInputError(f"feature shapes differ: {fu.shape} vs {fv.shape}")
    df = np.sum(((fu - fv) / cfg.sigma_f) ** 2)
    dt = ((tu - tv) / cfg.sigma_t) ** 2
    return float(np.exp(-df) + np.exp(-dt))


def affinity_matrix(F, t, cfg=NcutConfig()):
    """Pairwise ``frame_similarity`` for frames ``F`` (n, d) at times ``t`` (n,)."""
    F = np.asarray(F, dtype=float).reshape(len(F), -1)
    t = np.asarray(t, dtype=float).reshape(-1, 1)
    if F.shape[0] != t.shape[0]:
        raise InvalidInputError("features and frame times differ in length")
    W = np.exp(-cdist(F, F, "sqeuclidean") / cfg.sigma_f**2)
    W += np.exp(-cdist(t, t, "sqeuclidean") / cfg.sigma_t**2)
    return W


def temporal_ncut_values(W):
    """Ncut value for every cut point ``t = 1..n-1`` of affinity ``W``.

    Entry ``t - 1`` scores the split ``[0, t) | [t, n)``.
    """
    n = W.shape[0]
    P = np.zeros((n + 1, n + 1))
    P[1:, 1:] = np.cumsum(np.cumsum(W, axis=0), axis=1)
    ts = np.arange(1, n)
    assoc_a = P[ts, n]
    total = P[n, n]
    assoc_b = total - assoc_a
    cut = assoc_a - P[ts, ts]
    return cut / assoc_a + cut / assoc_b


def best_temporal_cut(W, min_side=1):
    """Cut point minimising Ncut with both sides at least ``min_side`` long.

    Ties (within 1e-12 relative) go to the cut closest to the midpoint, then
    the earlier one. Returns ``(t, value)`` or ``None`` when no cut is allowed.
    """
    n = W.shape[0]
    lo, hi = max(1, min_side), n - max(1, min_side)
    if lo > hi:
        return None
    values = temporal_ncut_values(W)[lo - 1 : hi]
    best = values.min()
    tied = np.flatnonzero(values <= best + 1e-12 * max(1.0, abs(best))) + lo
    t = int(tied[np.argmin(np.abs(tied - n / 2.0))])
    return t, float(values[t - lo])


def _merge_short(pieces, min_len):
    pieces = list(pieces)
    while len(pieces) > 1:
        lengths = [b - a for a, b in pieces]
        i = int(np.argmin(lengths))
        if lengths[i] >= min_len:
            break
        if i == 0:
            j = 1
        elif i == len(pieces) - 1:
            j = i - 1
        else:
            j = i - 1 if lengths[i - 1] <= lengths[i + 1] else i + 1
        a, b = min(i, j), max(i, j)
        pieces[a : b + 1] = [(pieces[a][0], pieces[b][1])]
    return pieces


def ncut_segments(F, t=None, cfg=NcutConfig(), sequence_id=""):
    """Split a sequence of frame features into contiguous normalized-cut segments.

    ``F`` is (n, d) (clustered matrices may be passed as (n, 8, 6)); ``t``
    holds the frame indices, defaulting to ``0..n-1``. Returned segments use
    those frame indices and tile the sequence.
    """
    F = np.asarray(F, dtype=float)
    n = F.shape[0]
    if n < 1:
        raise InvalidInputError("cannot segment an empty sequence")
    t = np.arange(n) if t is None else np.asarray(t)
    if t.shape[0] != n:
        raise InvalidInputError("features and frame times differ in length")
    W = affinity_matrix(F.reshape(n, -1), t, cfg)

    pieces = []
    stack = [(0, n)]
    while stack:
        a, b = stack.pop()
        length = b - a
        if length <= cfg.max_len:
            pieces.append((a, b))
            continue
        sub = W[a:b, a:b]
        found = best_temporal_cut(sub, cfg.min_len)
        if found is None:
            found = best_temporal_cut(sub, 1)
        cut = a + found[0]
        stack.append((cut, b))
        stack.append((a, cut))
    pieces.sort()
    merged = _merge_short(pieces, cfg.min_len)
    if len(merged) != len(pieces):
        logger.debug("%s: merged %d undersized ncut piece(s)", sequence_id, len(pieces) - len(merged))
    return [Segment(int(t[a]), int(t[b - 1]), sequence_id, "ncut") for a, b in merged]
