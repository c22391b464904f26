"""Generalized-mean soft-max of instance probabilities and its gradient."""

import numpy as np
from scipy.special import logsumexp, softmax

from .exceptions import InvalidInputError


def _check(ps, u):
    ps = np.asarray(ps, dtype=float)
    if ps.size == 0:
        raise InvalidInputError("soft-max of an empty set")
    if not np.all(np.isfinite(ps)) or np.any(ps <= 0.0) or np.any(ps > 1.0):
        raise InvalidInputError("probabilities must lie in (0, 1]")
    if not u >= 1.0:
        raise InvalidInputError(f"soft-max exponent u must be >= 1, got {u}")
    return ps


def gm_softmax(ps, u, axis=None):
    """``((1/N) * sum(p**u)) ** (1/u)``, evaluated in the log domain.

    With ``axis`` the mean runs along that axis only, so nested soft-maxes
    can be composed.
    """
    ps = _check(ps, u)
    n = ps.size if axis is None else ps.shape[axis]
    return np.exp((logsumexp(u * np.log(ps), axis=axis) - np.log(n)) / u)


def gm_gradient(ps, j, u):
    """Partial derivative of :func:`gm_softmax` with respect to ``ps[j]``.

    ``g * p_j**(u-1) / sum(p**u)``, written as ``(g / p_j) * softmax(u log p)_j``
    so large ``u`` neither overflows nor underflows. ``j`` may be any index
    into ``ps`` (flat index or tuple).
    """
    ps = _check(ps, u)
    g = gm_softmax(ps, u)
    share = softmax(u * np.log(ps).ravel()).reshape(ps.shape)
    return float(g / ps[j] * share[j])
