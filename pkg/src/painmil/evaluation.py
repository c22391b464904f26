"""Metrics, cross-validation folds and coder-consistency tables."""

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import rankdata
from sklearn.base import clone
from sklearn.metrics import roc_curve
from sklearn.model_selection import GroupKFold, KFold, StratifiedGroupKFold, StratifiedKFold

from .exceptions import ConfigError, InvalidInputError, MismatchError, UndefinedMetricError

CODER_GROUPS = ("2+", "1", "0")


def _binary(labels):
    y = np.asarray(labels).ravel()
    if not np.isin(y, (-1, 0, 1)).all():
        raise InvalidInputError("labels must be in {-1, +1} (or {0, 1})")
    return y > 0


def auc(scores, labels):
    """Probability that a random positive outscores a random negative; ties count 1/2."""
    s = np.asarray(scores, dtype=float).ravel()
    pos = _binary(labels)
    if s.shape != pos.shape:
        raise InvalidInputError("scores and labels differ in length")
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative")
    if not np.isfinite(s).all():
        raise InvalidInputError("scores must be finite")
    ranks = rankdata(s)  # average ranks give ties half credit
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def roc_points(scores, labels):
    """``(fpr, tpr, thresholds)`` of the full ROC curve."""
    pos = _binary(labels)
    if pos.all() or not pos.any():
        raise UndefinedMetricError("ROC needs at least one positive and one negative")
    return roc_curve(pos.astype(int), np.asarray(scores, dtype=float), drop_intermediate=False)


def kfold(labels, k=10, seed=0, stratified=True, groups=None):
    """Deterministic ``k``-fold split as a list of ``(train_idx, test_idx)``.

    ``groups`` (e.g. subject ids) keeps every group inside a single fold.
    """
    y = _binary(labels).astype(int)
    n = y.shape[0]
    if not 2 <= k <= n:
        raise ConfigError(f"need 2 <= k <= number of bags ({n}), got k={k}")
    X = np.zeros((n, 1))
    if groups is None:
        if stratified:
            splitter = StratifiedKFold(k, shuffle=True, random_state=seed)
        else:
            splitter = KFold(k, shuffle=True, random_state=seed)
        folds = splitter.split(X, y)
    else:
        groups = np.asarray(groups)
        if groups.shape[0] != n:
            raise InvalidInputError("one group per bag required")
        if len(np.unique(groups)) < k:
            raise ConfigError(f"{len(np.unique(groups))} groups cannot fill {k} folds")
        if stratified:
            folds = StratifiedGroupKFold(k, shuffle=True, random_state=seed).split(X, y, groups)
        else:
            # GroupKFold has no shuffling; permute group labels instead
            perm = {g: i for i, g in enumerate(np.random.default_rng(seed).permutation(np.unique(groups)))}
            folds = GroupKFold(k).split(X, y, [perm[g] for g in groups])
    return [(np.sort(tr), np.sort(te)) for tr, te in folds]


@dataclass
class Metrics:
    accuracy: float
    auc: float
    confusion: dict  # tp, fp, tn, fn
    per_fold: list = field(default_factory=list)  # (accuracy, auc) per fold

    @property
    def n(self):
        return sum(self.confusion.values())

    def to_dict(self):
        return asdict(self)


def confusion_counts(predicted, labels):
    pred = _binary(predicted)
    true = _binary(labels)
    return {
        "tp": int(np.sum(pred & true)),
        "fp": int(np.sum(pred & ~true)),
        "tn": int(np.sum(~pred & ~true)),
        "fn": int(np.sum(~pred & true)),
    }


def score_metrics(scores, labels, threshold=0.5):
    """Accuracy (score strictly above ``threshold`` is positive), AUC and confusion."""
    s = np.asarray(scores, dtype=float)
    pred = np.where(s > threshold, 1, -1)
    conf = confusion_counts(pred, labels)
    acc = (conf["tp"] + conf["tn"]) / max(1, sum(conf.values()))
    try:
        a = auc(s, labels)
    except UndefinedMetricError:
        a = float("nan")
    return Metrics(float(acc), a, conf)


@dataclass
class CVResult:
    metrics: Metrics
    scores: np.ndarray  # out-of-fold bag scores
    fold_of: np.ndarray  # fold index of every bag
    localization: list | None = None  # (instance, cluster) per bag for MCIL


def cross_validate(estimator, X, y, k=10, seed=0, stratified=True, groups=None, threshold=0.5):
    """Out-of-fold scores for every bag; AUC is computed over the pooled ranking.

    A fresh clone of ``estimator`` is fitted per fold, so folds never share
    state. Per-fold AUC is NaN when a test fold holds a single class.
    """
    y = np.asarray(y)
    folds = kfold(y, k, seed, stratified, groups)
    scores = np.full(len(X), np.nan)
    fold_of = np.full(len(X), -1)
    local = [None] * len(X) if hasattr(estimator, "localize") else None
    per_fold = []
    for f, (tr, te) in enumerate(folds):
        if np.intersect1d(tr, te).size:
            raise AssertionError("train and test folds overlap")
        model = clone(estimator).fit([X[i] for i in tr], y[tr])
        Xte = [X[i] for i in te]
        scores[te] = model.decision_function(Xte)
        fold_of[te] = f
        if local is not None:
            for i, loc in zip(te, model.localize(Xte)):
                local[i] = loc
        m = score_metrics(scores[te], y[te], threshold)
        per_fold.append((m.accuracy, m.auc))
    overall = score_metrics(scores, y, threshold)
    overall.per_fold = per_fold
    return CVResult(overall, scores, fold_of, local)


@dataclass(frozen=True)
class ConsistencyRow:
    agree: int
    total: int

    @property
    def rate(self):
        return self.agree / self.total if self.total else float("nan")


def coder_group(count):
    count = int(count)
    if not 0 <= count <= 3:
        raise InvalidInputError(f"coder count must be in 0..3, got {count}")
    return "2+" if count >= 2 else str(count)


def consistency_rate(predictions, coder_counts):
    """Machine-vs-coder agreement per coder group.

    ``predictions`` maps sequence id to a {-1, +1} decision, ``coder_counts``
    maps sequence id to the number of coders (0-3) who scored pain. The
    machine agrees with the "2+" and "1" groups by predicting pain and with
    the "0" group by predicting no pain.
    """
    tally = {g: [0, 0] for g in CODER_GROUPS}
    for sid, count in coder_counts.items():
        if sid not in predictions:
            raise MismatchError(f"no prediction for sequence {sid!r}")
        group = coder_group(count)
        positive = int(predictions[sid]) > 0
        tally[group][0] += int(positive == (group != "0"))
        tally[group][1] += 1
    return {g: ConsistencyRow(a, t) for g, (a, t) in tally.items()}
