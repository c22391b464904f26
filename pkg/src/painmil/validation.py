"""Input validation helpers for bag-structured data."""

import numpy as np

from .exceptions import InvalidInputError, InvalidTrainingSetError


def check_bags(X, n_features=None):
    """Validate a sequence of bags and return them as a list of 2-D float arrays.

    Each bag is an ``(n_instances, n_features)`` array-like. 1-D inputs are
    treated as a single-instance bag. Every bag must be non-empty, finite and
    share the same feature dimension.
    """
    if isinstance(X, np.ndarray) and X.ndim == 2:
        raise InvalidInputError(
            "expected a sequence of bags, got a single 2-D array; wrap it in a list"
        )
    bags = []
    for i, bag in enumerate(X):
        arr = np.asarray(bag, dtype=float)
        if arr.ndim == 1:
            arr = arr[np.newaxis, :]
        elif arr.ndim > 2:
            arr = arr.reshape(arr.shape[0], -1)
        if arr.shape[0] == 0:
            raise InvalidInputError(f"bag {i} has no instances")
        if not np.all(np.isfinite(arr)):
            raise InvalidInputError(f"bag {i} contains non-finite values")
        if n_features is None:
            n_features = arr.shape[1]
        elif arr.shape[1] != n_features:
            raise InvalidInputError(
                f"bag {i} has {arr.shape[1]} features, expected {n_features}"
            )
        bags.append(arr)
    if not bags:
        raise InvalidInputError("no bags given")
    return bags


def check_bag_labels(y, n_bags):
    """Coerce bag labels to an int array over {-1, +1}.

    ``{0, 1}`` labels are mapped to ``{-1, +1}``; anything else is rejected.
    """
    y = np.asarray(y)
    if y.ndim != 1 or y.shape[0] != n_bags:
        raise InvalidInputError(f"expected {n_bags} labels, got shape {y.shape}")
    values = set(np.unique(y).tolist())
    if values <= {-1, 1}:
        out = y.astype(int)
    elif values <= {0, 1}:
        out = np.where(y == 1, 1, -1)
    else:
        raise InvalidInputError(f"labels must be in {{-1, +1}}, got {sorted(values)}")
    return out


def check_two_classes(y):
    if not (np.any(y == 1) and np.any(y == -1)):
        raise InvalidTrainingSetError(
            "training set needs at least one positive and one negative bag"
        )


def check_probability(p, name="probability"):
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)) or np.any(p < 0.0) or np.any(p > 1.0):
        raise InvalidInputError(f"{name} must lie in [0, 1]")
    return p
