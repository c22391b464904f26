"""Reading, writing and converting per-frame AU evidence streams."""

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .aus import AU_IDS, N_AUS
from .exceptions import DuplicateKeyError, InvalidInputError, ParseError

logger = logging.getLogger(__name__)

EVIDENCE_COLUMNS = ("sequence_id", "frame_index") + tuple(f"au{a}" for a in AU_IDS)
EVIDENCE_MIN, EVIDENCE_MAX = -2.0, 2.0
LN10 = math.log(10.0)


def evidence_to_probability(e):
    """Map base-10 log-odds evidence to a probability, ``1 / (1 + 10**-e)``.

    Works on scalars and arrays. NaN propagates through arrays (missing AUs);
    infinities, and a NaN scalar, are rejected.
    """
    arr = np.asarray(e, dtype=float)
    if arr.ndim == 0 and not math.isfinite(float(arr)):
        raise InvalidInputError(f"evidence must be finite, got {e!r}")
    if np.any(np.isinf(arr)):
        raise InvalidInputError("evidence must be finite")
    p = expit(arr * LN10)
    return float(p) if arr.ndim == 0 else p


@dataclass(frozen=True, eq=False)
class EvidenceSequence:
    """One video sequence of AU evidence.

    ``evidence`` is ``(n_frames, 8)`` in ``AU_IDS`` order with NaN for a
    missing AU; a frame is analyzable only when all eight are present.
    ``label`` is +1, -1 or None. ``info`` carries free-form metadata (the
    synthetic generator records planted bursts there).
    """

    sequence_id: str
    frame_index: np.ndarray
    evidence: np.ndarray
    label: int | None = None
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        fi = np.asarray(self.frame_index, dtype=np.int64)
        ev = np.asarray(self.evidence, dtype=float)
        if ev.ndim != 2 or ev.shape[1] != N_AUS or ev.shape[0] != fi.shape[0]:
            raise InvalidInputError(
                f"{self.sequence_id}: evidence must be (n_frames, {N_AUS}) matching frame_index"
            )
        if fi.size and (fi[0] < 0 or np.any(np.diff(fi) <= 0)):
            raise InvalidInputError(
                f"{self.sequence_id}: frame_index must be non-negative and strictly increasing"
            )
        if self.label not in (None, 1, -1):
            raise InvalidInputError(f"{self.sequence_id}: label must be +1, -1 or None")
        object.__setattr__(self, "frame_index", fi)
        object.__setattr__(self, "evidence", ev)

    def __len__(self):
        return self.frame_index.shape[0]

    @property
    def analyzable(self):
        return ~np.any(np.isnan(self.evidence), axis=1)

    @property
    def analyzable_fraction(self):
        if len(self) == 0:
            return 0.0
        return float(np.count_nonzero(self.analyzable)) / len(self)

    def probabilities(self):
        """Return ``(frame_index, prob)`` for analyzable frames only."""
        mask = self.analyzable
        return self.frame_index[mask], evidence_to_probability(self.evidence[mask])

    def with_label(self, label):
        return EvidenceSequence(self.sequence_id, self.frame_index, self.evidence, label, self.info)


def clamp_evidence(values, where=""):
    """Clip evidence to [-2, 2], logging a warning when anything was clipped."""
    values = np.asarray(values, dtype=float)
    with np.errstate(invalid="ignore"):
        outside = (values < EVIDENCE_MIN) | (values > EVIDENCE_MAX)
    n = int(np.count_nonzero(outside))
    if n:
        logger.warning("%s: clamped %d evidence value(s) to [-2, 2]", where or "evidence", n)
        values = np.clip(values, EVIDENCE_MIN, EVIDENCE_MAX)
    return values


def _data_rows(fh):
    """Yield ``(line_number, row)`` skipping blank and ``#`` comment lines."""
    for lineno, row in enumerate(csv.reader(fh), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if row[0].lstrip().startswith("#"):
            continue
        yield lineno, row


def _parse_float(cell, lineno, column):
    cell = cell.strip()
    if cell == "":
        return math.nan
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"column {column}: cannot parse {cell!r} as a number", lineno) from None
    if not math.isfinite(value):
        raise ParseError(f"column {column}: non-finite value {cell!r}", lineno)
    return value


def load_sequences(path, labels=None):
    """Read an evidence CSV into a list of sequences, in first-seen order.

    ``labels`` may be a mapping ``sequence_id -> label`` or a path to a label
    CSV. Missing AU cells become NaN, which marks the frame unanalyzable.
    Rows of one sequence need not be contiguous or sorted.
    """
    rows: dict[str, dict[int, list[float]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        try:
            lineno, header = next(it)
        except StopIteration:
            raise ParseError("empty evidence file") from None
        header = [h.strip() for h in header]
        if tuple(header) != EVIDENCE_COLUMNS:
            raise ParseError(
                f"bad header {','.join(header)!r}; expected {','.join(EVIDENCE_COLUMNS)!r}",
                lineno,
            )
        for lineno, row in it:
            if len(row) != len(EVIDENCE_COLUMNS):
                raise ParseError(
                    f"expected {len(EVIDENCE_COLUMNS)} fields, got {len(row)}", lineno
                )
            seq_id = row[0].strip()
            if not seq_id:
                raise ParseError("empty sequence_id", lineno)
            try:
                frame = int(row[1])
            except ValueError:
                raise ParseError(f"frame_index {row[1]!r} is not an integer", lineno) from None
            if frame < 0:
                raise ParseError(f"negative frame_index {frame}", lineno)
            values = [
                _parse_float(cell, lineno, EVIDENCE_COLUMNS[2 + i]) for i, cell in enumerate(row[2:])
            ]
            frames = rows.setdefault(seq_id, {})
            if frame in frames:
                raise DuplicateKeyError(f"duplicate frame ({seq_id}, {frame})", lineno)
            frames[frame] = values

    if isinstance(labels, (str, bytes)) or hasattr(labels, "__fspath__"):
        labels = load_labels(labels)
    labels = labels or {}

    sequences = []
    for seq_id, frames in rows.items():
        order = sorted(frames)
        ev = np.array([frames[f] for f in order], dtype=float).reshape(len(order), N_AUS)
        ev = clamp_evidence(ev, where=seq_id)
        sequences.append(EvidenceSequence(seq_id, np.array(order), ev, labels.get(seq_id)))
    return sequences


def _format_float(x):
    return "" if math.isnan(x) else repr(float(x))


def write_sequences(sequences, path, header_comment=None):
    """Write sequences in the evidence CSV format; floats round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(EVIDENCE_COLUMNS)
        for seq in sequences:
            for f, row in zip(seq.frame_index, seq.evidence):
                w.writerow([seq.sequence_id, int(f)] + [_format_float(v) for v in row])


def load_labels(path):
    """Read a ``sequence_id,label`` CSV with labels in {1, -1}."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        try:
            lineno, header = next(it)
        except StopIteration:
            raise ParseError("empty label file") from None
        if [h.strip() for h in header] != ["sequence_id", "label"]:
            raise ParseError("label header must be 'sequence_id,label'", lineno)
        for lineno, row in it:
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            seq_id, raw = row[0].strip(), row[1].strip()
            if raw not in ("1", "-1", "+1"):
                raise ParseError(f"label must be 1 or -1, got {raw!r}", lineno)
            if seq_id in out:
                raise DuplicateKeyError(f"duplicate label for {seq_id}", lineno)
            out[seq_id] = int(raw)
    return out


def labels_from_opi(path, positive_min=3):
    """Derive binary labels from a ``sequence_id,opi`` CSV.

    OPI >= ``positive_min`` is positive, OPI == 0 negative; sequences with
    intermediate ratings are left out.
    """
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        try:
            lineno, header = next(it)
        except StopIteration:
            raise ParseError("empty OPI file") from None
        if [h.strip() for h in header] != ["sequence_id", "opi"]:
            raise ParseError("OPI header must be 'sequence_id,opi'", lineno)
        for lineno, row in it:
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", lineno)
            opi = _parse_float(row[1], lineno, "opi")
            if math.isnan(opi):
                continue
            if opi >= positive_min:
                out[row[0].strip()] = 1
            elif opi == 0:
                out[row[0].strip()] = -1
    return out


def write_labels(labels, path, header_comment=None):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sequence_id", "label"])
        for seq_id, label in labels.items():
            w.writerow([seq_id, int(label)])


def attach_labels(sequences, labels):
    return [s.with_label(labels.get(s.sequence_id, s.label)) for s in sequences]


def filter_analyzable(sequences, min_fraction=0.5):
    """Drop sequences whose analyzable fraction is below ``min_fraction``."""
    kept = []
    for seq in sequences:
        if seq.analyzable_fraction < min_fraction:
            logger.warning(
                "%s: analyzable fraction %.3f below %.3f, excluded",
                seq.sequence_id, seq.analyzable_fraction, min_fraction,
            )
            continue
        kept.append(seq)
    return kept
