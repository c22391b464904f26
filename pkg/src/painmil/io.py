"""On-disk formats: model files, feature/segment/bag dumps, predictions and reports.

Every file starts with a reproducibility header (tool version, config hash,
seed): a ``#`` comment line in CSV files, a ``provenance`` object in JSON.
Floats are written with ``repr`` so reading a file back is bit-exact.
"""

import csv
import hashlib
import json

import numpy as np

from . import __version__
from ._boost import Stump
from .bow import Bag
from .encoding import ENCODINGS, encode, feature_names, n_features
from .exceptions import ParseError
from .ingest import _data_rows, _format_float
from .mcil import MCILBoostClassifier
from .milboost import MILBoostClassifier
from .segmentation import Segment

MODEL_FORMAT = "painmil-model"
MODEL_VERSION = 1


def config_hash(config):
    """Short SHA-256 of a JSON-serialisable config mapping (key order ignored)."""
    blob = json.dumps(config, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]


def provenance(config=None, seed=None):
    return {"tool": "painmil", "version": __version__, "config_hash": config_hash(config or {}), "seed": seed}


def header_line(prov):
    return f"painmil {prov['version']} config={prov['config_hash']} seed={prov['seed']}"


def _open_csv(path, prov):
    fh = open(path, "w", newline="", encoding="utf-8")
    if prov is not None:
        fh.write(f"# {header_line(prov)}\n")
    return fh, csv.writer(fh, lineterminator="\n")


def _dump_json(obj, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


# -- model files ----------------------------------------------------------


def _learner_tag(model):
    if isinstance(model, MCILBoostClassifier):
        return "mcil"
    if isinstance(model, MILBoostClassifier):
        return "mil"
    raise TypeError(f"cannot serialise {type(model).__name__}")


def save_model(model, path, encoding, prov=None):
    """Write a fitted MIL or MCIL model as versioned JSON."""
    learner = _learner_tag(model)
    ensembles = model.estimators_ if learner == "mcil" else [model.estimators_]
    rows = [
        {"cluster": k, "alpha": float(a), "dim": int(s.dim), "threshold": float(s.threshold), "polarity": int(s.polarity)}
        for k, ens in enumerate(ensembles)
        for a, s in ens
    ]
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "provenance": prov or provenance(),
        "learner": learner,
        "encoding": encoding,
        "softmax_u": float(model.softmax_u),
        "n_features": int(model.n_features_in_),
        "n_clusters": len(ensembles),
        "params": model.get_params(),
        "stumps": rows,
    }
    _dump_json(doc, path)


def load_model(path):
    """Read a model file; returns ``(model, encoding)``."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: not a model file ({exc.msg})", exc.lineno) from None
    if doc.get("format") != MODEL_FORMAT:
        raise ParseError(f"{path}: not a {MODEL_FORMAT} file")
    if doc.get("version") != MODEL_VERSION:
        raise ParseError(f"{path}: unsupported model version {doc.get('version')!r}")
    try:
        params = dict(doc["params"])
        params["softmax_u"] = doc["softmax_u"]
        K = int(doc["n_clusters"])
        ensembles = [[] for _ in range(K)]
        for row in doc["stumps"]:
            stump = Stump(int(row["dim"]), float(row["threshold"]), int(row["polarity"]))
            ensembles[int(row["cluster"])].append((float(row["alpha"]), stump))
        if doc["learner"] == "mcil":
            model = MCILBoostClassifier(**params)
            model.estimators_ = ensembles
        elif doc["learner"] == "mil":
            model = MILBoostClassifier(**params)
            model.estimators_ = ensembles[0]
        else:
            raise ParseError(f"{path}: unknown learner {doc['learner']!r}")
        model.n_features_in_ = int(doc["n_features"])
        model.classes_ = np.array([-1, 1])
        return model, doc["encoding"]
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"{path}: malformed model file ({exc!r})") from None


# -- stage dumps ----------------------------------------------------------


def write_features(sequences, encoding, path, prov=None):
    """Per-frame combination features of analyzable frames."""
    fh, w = _open_csv(path, prov)
    with fh:
        w.writerow(["sequence_id", "frame_index"] + feature_names(encoding))
        for seq in sequences:
            t, P = seq.probabilities()
            if t.size == 0:
                continue
            for f, row in zip(t, encode(P, encoding)):
                w.writerow([seq.sequence_id, int(f)] + [_format_float(v) for v in row])


def write_segments(segments, path, prov=None):
    """``segments`` maps sequence id to a list of :class:`Segment`."""
    fh, w = _open_csv(path, prov)
    with fh:
        w.writerow(["sequence_id", "start", "end", "method"])
        for sid, segs in segments.items():
            for s in segs:
                w.writerow([sid, s.start, s.end, s.method])


def read_segments(path):
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        lineno, header = next(it, (0, None))
        if header != ["sequence_id", "start", "end", "method"]:
            raise ParseError("segment header must be 'sequence_id,start,end,method'", lineno or None)
        for lineno, row in it:
            if len(row) != 4:
                raise ParseError(f"expected 4 fields, got {len(row)}", lineno)
            try:
                seg = Segment(int(row[1]), int(row[2]), row[0], row[3])
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            out.setdefault(row[0], []).append(seg)
    return out


BAG_COLUMNS = ["sequence_id", "label", "segment_start", "segment_end"]


def _bag_feature_columns(width):
    return [f"f{i}" for i in range(width)]


def write_bags(bags, path, prov=None):
    """One row per instance: id, bag label, segment range, pooled features ``f0..``.

    Clustered features are the 8x6 matrix flattened row-major (48 columns).
    """
    if not bags:
        raise ValueError("no bags to write")
    encoding = bags[0].encoding
    fh, w = _open_csv(path, prov)
    with fh:
        w.writerow(BAG_COLUMNS + _bag_feature_columns(n_features(encoding)))
        for bag in bags:
            label = "" if bag.label is None else int(bag.label)
            for seg, row in zip(bag.segments, bag.instances):
                w.writerow([bag.sequence_id, label, seg.start, seg.end] + [_format_float(v) for v in row])


def read_bags(path):
    """Inverse of :func:`write_bags`; the encoding follows from the column count."""
    names = {tuple(_bag_feature_columns(n_features(e))): e for e in ENCODINGS}
    rows, order = {}, []
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        lineno, header = next(it, (0, None))
        if header is None or header[:4] != BAG_COLUMNS:
            raise ParseError(f"bag header must start with {','.join(BAG_COLUMNS)!r}", lineno or None)
        encoding = names.get(tuple(header[4:]))
        if encoding is None:
            raise ParseError("unrecognised feature columns in bag header", lineno)
        width = len(header)
        for lineno, row in it:
            if len(row) != width:
                raise ParseError(f"expected {width} fields, got {len(row)}", lineno)
            sid = row[0]
            try:
                label = int(row[1]) if row[1] else None
                seg = Segment(int(row[2]), int(row[3]), sid, "")
                feats = [float(v) for v in row[4:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno) from None
            if sid not in rows:
                rows[sid] = (label, [], [])
                order.append(sid)
            elif rows[sid][0] != label:
                raise ParseError(f"conflicting labels for {sid}", lineno)
            rows[sid][1].append(seg)
            rows[sid][2].append(feats)
    return [Bag(sid, np.array(rows[sid][2]), rows[sid][1], rows[sid][0], encoding) for sid in order]


def write_predictions(records, path, prov=None):
    """``records``: dicts with sequence_id, score, label, argmax_cluster, segment."""
    fh, w = _open_csv(path, prov)
    with fh:
        w.writerow(["sequence_id", "score", "label", "argmax_cluster", "argmax_segment_start", "argmax_segment_end"])
        for r in records:
            cluster = "" if r.get("argmax_cluster") is None else int(r["argmax_cluster"])
            seg = r["segment"]
            w.writerow([r["sequence_id"], _format_float(r["score"]), int(r["label"]), cluster, seg.start, seg.end])


def write_roc(fpr, tpr, thresholds, path, prov=None):
    fh, w = _open_csv(path, prov)
    with fh:
        w.writerow(["fpr", "tpr", "threshold"])
        for row in zip(fpr, tpr, thresholds):
            w.writerow([_format_float(v) for v in row])


def write_metrics(metrics, path, prov=None, extra=None):
    doc = {"provenance": prov or provenance(), **metrics.to_dict()}
    if extra:
        doc.update(extra)
    _dump_json(doc, path)


def read_predictions(path):
    """``sequence_id -> predicted label`` from a prediction dump."""
    out = {}
    with open(path, newline="", encoding="utf-8") as fh:
        it = _data_rows(fh)
        lineno, header = next(it, (0, None))
        if header is None or header[:3] != ["sequence_id", "score", "label"]:
            raise ParseError("prediction header must start with 'sequence_id,score,label'", lineno or None)
        for lineno, row in it:
            try:
                out[row[0]] = int(row[2])
            except (IndexError, ValueError):
                raise ParseError("malformed prediction row", lineno) from None
    return out
