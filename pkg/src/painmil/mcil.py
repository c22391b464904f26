"""Multiple clustered instance learning: one boosted classifier per AU cluster."""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._boost import ensemble_score, fit_boosted
from .aus import N_CLUSTERS
from .exceptions import ConfigError, InvalidInputError
from .milboost import _check_common
from .softmax import gm_softmax
from .validation import check_bag_labels, check_bags, check_two_classes


def split_clusters(bag, n_clusters):
    """(n, d * K) row-major or (n, d, K) -> (n, d, K)."""
    bag = np.asarray(bag, dtype=float)
    if bag.ndim == 3:
        if bag.shape[2] != n_clusters:
            raise InvalidInputError(f"expected {n_clusters} cluster columns, got {bag.shape[2]}")
        return bag
    if bag.ndim == 1:
        bag = bag[np.newaxis]
    if bag.shape[1] % n_clusters:
        raise InvalidInputError(f"{bag.shape[1]} features do not split into {n_clusters} clusters")
    return bag.reshape(bag.shape[0], bag.shape[1] // n_clusters, n_clusters)


class MCILBoostClassifier(ClassifierMixin, BaseEstimator):
    """MIL with ``n_clusters`` stump ensembles, each seeing one feature column.

    Instances are clustered feature matrices, ``(d, K)`` or their row-major
    flattening; ensemble ``k`` reads only column ``k``. The bag probability is
    the generalized mean over all (instance, cluster) probabilities, which
    equals the nested soft-max over clusters then instances in either order.
    All clusters receive a stump every round (unless their line search finds
    no decrease).

    Parameters are as for :class:`~painmil.milboost.MILBoostClassifier`, plus
    ``n_clusters`` (6 for the clustered AU structure).
    """

    def __init__(
        self,
        n_rounds=50,
        softmax_u=20.0,
        loss="log",
        max_alpha=10.0,
        aggregation="gm",
        threshold=0.5,
        n_clusters=N_CLUSTERS,
    ):
        self.n_rounds = n_rounds
        self.softmax_u = softmax_u
        self.loss = loss
        self.max_alpha = max_alpha
        self.aggregation = aggregation
        self.threshold = threshold
        self.n_clusters = n_clusters

    def _split(self, X, n_features=None):
        K = int(self.n_clusters)
        bags = [split_clusters(b, K) for b in X]
        flat = check_bags([b.reshape(b.shape[0], -1) for b in bags], n_features)
        return [b.reshape(b.shape[0], -1, K) for b in flat]

    def fit(self, X, y):
        _check_common(self)
        if int(self.n_clusters) < 1:
            raise ConfigError("n_clusters must be >= 1")
        bags = self._split(X)
        y = check_bag_labels(y, len(bags))
        check_two_classes(y)
        stacked = np.concatenate(bags, axis=0)
        result = fit_boosted(
            [stacked[:, :, k] for k in range(stacked.shape[2])],
            [len(b) for b in bags],
            y,
            int(self.n_rounds),
            float(self.softmax_u),
            self.loss,
            float(self.max_alpha),
        )
        self.estimators_ = result.ensembles
        self.loss_history_ = result.loss_history
        self.history_ = [(t, k, a, s) for t, k, a, s, _ in result.history]
        self.n_features_in_ = stacked.shape[1] * stacked.shape[2]
        self.classes_ = np.array([-1, 1])
        return self

    def cluster_scores(self, X):
        """``H^k`` outputs, one (n_instances, K) array per bag."""
        check_is_fitted(self, "estimators_")
        out = []
        for bag in self._split(X, self.n_features_in_):
            out.append(np.column_stack([ensemble_score(e, bag[:, :, k]) for k, e in enumerate(self.estimators_)]))
        return out

    def cluster_proba(self, X):
        return [expit(s) for s in self.cluster_scores(X)]

    def decision_function(self, X):
        out = []
        for p in self.cluster_proba(X):
            p = np.maximum(p, np.finfo(float).tiny)
            out.append(p.max() if self.aggregation == "max" else gm_softmax(p, self.softmax_u))
        return np.array(out, dtype=float)

    def predict_proba(self, X):
        p = self.decision_function(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return np.where(self.decision_function(X) > self.threshold, 1, -1)

    def localize(self, X):
        """``(instance, cluster)`` pair with the largest probability in every bag."""
        out = []
        for s in self.cluster_scores(X):
            j, k = np.unravel_index(int(np.argmax(s)), s.shape)
            out.append((int(j), int(k)))
        return out
