"""MILboost: boosted decision stumps with a generalized-mean bag likelihood."""

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from ._boost import Stump, ensemble_score, fit_boosted
from .exceptions import ConfigError
from .softmax import gm_softmax
from .validation import check_bag_labels, check_bags, check_two_classes

__all__ = ["MILBoostClassifier", "Stump"]

LOSSES = ("log", "linear")
AGGREGATIONS = ("gm", "max")


def _check_common(est):
    if est.loss not in LOSSES:
        raise ConfigError(f"loss must be one of {LOSSES}, got {est.loss!r}")
    if est.aggregation not in AGGREGATIONS:
        raise ConfigError(f"aggregation must be one of {AGGREGATIONS}, got {est.aggregation!r}")
    if not est.softmax_u >= 1.0:
        raise ConfigError("softmax_u must be >= 1")
    if int(est.n_rounds) < 1:
        raise ConfigError("n_rounds must be >= 1")
    if not est.max_alpha > 0:
        raise ConfigError("max_alpha must be positive")


class MILBoostClassifier(ClassifierMixin, BaseEstimator):
    """Multiple-instance boosting over bags of feature vectors.

    ``X`` is a sequence of bags, each an ``(n_instances, n_features)`` array;
    ``y`` holds one label in {-1, +1} (or {0, 1}) per bag. Instance
    probabilities are ``sigmoid(H(x))`` of a stump ensemble ``H``; the bag
    probability is their generalized mean with exponent ``softmax_u``.

    Parameters
    ----------
    n_rounds : int
        Boosting rounds; training may stop earlier when no stump lowers the loss.
    softmax_u : float
        Generalized-mean exponent. Larger values approach the hard maximum.
    loss : {"log", "linear"}
        ``"log"`` is the Bernoulli negative log-likelihood of the bag labels;
        ``"linear"`` drops the logarithms (``-sum(r p + (1 - r)(1 - p))``).
    max_alpha : float
        Upper end of the golden-section search for each stump weight.
    aggregation : {"gm", "max"}
        Bag score at prediction time. Training always uses the soft-max.
    threshold : float
        A bag is positive when its score is strictly above this value.
    """

    def __init__(self, n_rounds=50, softmax_u=20.0, loss="log", max_alpha=10.0, aggregation="gm", threshold=0.5):
        self.n_rounds = n_rounds
        self.softmax_u = softmax_u
        self.loss = loss
        self.max_alpha = max_alpha
        self.aggregation = aggregation
        self.threshold = threshold

    def fit(self, X, y):
        _check_common(self)
        bags = check_bags(X)
        y = check_bag_labels(y, len(bags))
        check_two_classes(y)
        result = fit_boosted(
            [np.vstack(bags)],
            [len(b) for b in bags],
            y,
            int(self.n_rounds),
            float(self.softmax_u),
            self.loss,
            float(self.max_alpha),
        )
        self.estimators_ = result.ensembles[0]
        self.loss_history_ = result.loss_history
        self.selection_objectives_ = [h[4] for h in result.history]
        self.n_features_in_ = bags[0].shape[1]
        self.classes_ = np.array([-1, 1])
        return self

    def _bags(self, X):
        check_is_fitted(self, "estimators_")
        return check_bags(X, self.n_features_in_)

    def instance_scores(self, X):
        """Strong classifier output ``H(x)`` for every instance, one array per bag."""
        return [ensemble_score(self.estimators_, b) for b in self._bags(X)]

    def instance_proba(self, X):
        return [expit(s) for s in self.instance_scores(X)]

    def decision_function(self, X):
        """Bag probability of being positive."""
        out = []
        for p in self.instance_proba(X):
            p = np.maximum(p, np.finfo(float).tiny)
            out.append(p.max() if self.aggregation == "max" else gm_softmax(p, self.softmax_u))
        return np.array(out, dtype=float)

    def predict_proba(self, X):
        p = self.decision_function(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return np.where(self.decision_function(X) > self.threshold, 1, -1)

    def localize(self, X):
        """Index of the most probable instance in every bag."""
        return np.array([int(np.argmax(s)) for s in self.instance_scores(X)])
