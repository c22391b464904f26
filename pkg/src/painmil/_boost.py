"""Gradient boosting of decision stumps under a GM soft-max bag likelihood.

One routine serves both learners. Instances carry ``K`` feature blocks (one
per cluster) and each block has its own additive stump ensemble ``H^k``.
The bag probability is the generalized mean over every instance and block
probability ``sigmoid(H^k(x))``. Plain MILboost is the case ``K = 1``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import log_expit

from .exceptions import NumericalError

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Stump:
    """``polarity`` where ``x[dim] > threshold``, ``-polarity`` elsewhere."""

    dim: int
    threshold: float
    polarity: int

    def predict(self, X):
        X = np.asarray(X, dtype=float)
        return np.where(X[..., self.dim] > self.threshold, self.polarity, -self.polarity)


def _log1mexp(x):
    """``log(1 - exp(x))`` for ``x <= 0``."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore"):
        return np.where(
            x > -np.log(2.0), np.log(-np.expm1(np.minimum(x, 0.0))), np.log1p(-np.exp(np.minimum(x, 0.0)))
        )


class BagLayout:
    """Contiguous bag ranges over a stacked instance array."""

    def __init__(self, sizes):
        self.sizes = np.asarray(sizes, dtype=np.int64)
        self.starts = np.concatenate([[0], np.cumsum(self.sizes)[:-1]])
        self.owner = np.repeat(np.arange(len(self.sizes)), self.sizes)

    def logsumexp(self, a):
        """Per-bag logsumexp over all rows (and columns) of ``a``."""
        a = a.reshape(a.shape[0], -1)
        row_max = a.max(axis=1)
        m = np.maximum.reduceat(row_max, self.starts)
        s = np.add.reduceat(np.exp(a - m[self.owner, None]).sum(axis=1), self.starts)
        return m + np.log(s)


def bag_log_probs(H, layout, u):
    """``log p_i`` of the GM soft-max over instance probabilities ``sigmoid(H)``.

    ``H`` is (n_instances, K). Also returns the instance log-probabilities.
    """
    logp = log_expit(H)
    n = layout.sizes * H.shape[1]
    return (layout.logsumexp(u * logp) - np.log(n)) / u, logp


def bag_loss(log_pi, r, loss="log"):
    """Negative bag log-likelihood (``loss="log"``) or its log-free variant."""
    log_qi = _log1mexp(log_pi)
    if loss == "log":
        with np.errstate(invalid="ignore"):
            return -float(np.sum(np.where(r == 1, log_pi, 0.0) + np.where(r == 0, log_qi, 0.0)))
    p = np.exp(log_pi)
    return -float(np.sum(r * p + (1 - r) * (1.0 - p)))


def instance_weights(H, layout, r, u, loss="log"):
    """Signed weights ``-dL/dH`` per instance and block, shape (n_instances, K)."""
    log_pi, logp = bag_log_probs(H, layout, u)
    lse = layout.logsumexp(u * logp)
    share = np.exp(u * logp - lse[layout.owner, None])  # p_ij^u / sum_s p_is^u
    one_minus = np.exp(log_expit(-H))
    rr = r[layout.owner, None]
    if loss == "log":
        # r/p_i * p_i - (1-r)/(1-p_i) * p_i, folded to avoid dividing by p_i
        odds = np.exp(log_pi - _log1mexp(log_pi))[layout.owner, None]
        factor = np.where(rr == 1, 1.0, -odds)
    else:
        factor = (2.0 * rr - 1.0) * np.exp(log_pi)[layout.owner, None]
    return factor * share * one_minus


class StumpSearch:
    """Exhaustive stump search over one feature block, sorting once."""

    def __init__(self, X):
        self.X = np.asarray(X, dtype=float)
        n, d = self.X.shape
        self.order = np.argsort(self.X, axis=0, kind="stable")
        xs = np.take_along_axis(self.X, self.order, axis=0)
        # split after sorted position i is valid where the next value is larger
        self.valid = xs[1:] > xs[:-1]
        self.thresholds = 0.5 * (xs[1:] + xs[:-1])

    def objective(self, w, stump):
        return float(np.sum(w * stump.predict(self.X)))

    def best(self, w):
        """Stump maximising ``sum(w * h(x))``; ties -> lowest dim, threshold, then +1.

        Candidates are every midpoint split of every dimension, with both
        polarities. Returns ``(stump, objective)``, or ``(None, -inf)`` when
        no dimension takes two distinct values.
        """
        total = w.sum()
        ws = w[self.order]
        below = np.cumsum(ws, axis=0)[:-1]
        pos = total - 2.0 * below
        obj = np.stack([pos, -pos])  # polarity +1, -1
        obj = np.where(self.valid[None], obj, -np.inf)
        top = obj.max(initial=-np.inf)
        if not np.isfinite(top):
            return None, -np.inf
        scale = max(np.abs(w).sum(), np.finfo(float).tiny)
        # generous bound on the rounding error of the cumulative sums
        tol = 64.0 * np.finfo(float).eps * len(w) * scale
        cand = []
        seen = set()
        for pol_i, i, dim in np.argwhere(obj >= top - tol):
            # zero-weight instances leave the cumulative sum bit-identical;
            # of such a run only the lowest threshold can win the tie-break
            key = (pol_i, dim, obj[pol_i, i, dim])
            if key in seen:
                continue
            seen.add(key)
            cand.append(Stump(int(dim), float(self.thresholds[i, dim]), 1 if pol_i == 0 else -1))
        vals = self._objectives(w, cand)
        keys = [(-v, c.dim, c.threshold, -c.polarity) for v, c in zip(vals, cand)]
        i = min(range(len(cand)), key=keys.__getitem__)
        return cand[i], float(vals[i])

    def _objectives(self, w, stumps, chunk=256):
        """Exact ``sum(w * h(x))`` for each stump, vectorised in chunks."""
        out = np.empty(len(stumps))
        for lo in range(0, len(stumps), chunk):
            part = stumps[lo : lo + chunk]
            dims = np.array([c.dim for c in part])
            thr = np.array([c.threshold for c in part])
            pol = np.array([c.polarity for c in part], dtype=float)
            # rows are contiguous so each sum matches ``objective`` bit for bit
            h = np.where(self.X.T[dims] > thr[:, None], pol[:, None], -pol[:, None])
            out[lo : lo + len(part)] = np.sum(w * h, axis=1)
        return out


def golden_section(f, lo, hi, tol=1e-7):
    """Minimise a unimodal scalar function on ``[lo, hi]``; endpoints included."""
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    x, fx = (c, fc) if fc <= fd else (d, fd)
    fhi = f(hi)
    if fhi < fx:
        x, fx = hi, fhi
    return x, fx


@dataclass
class BoostResult:
    ensembles: list  # per block: list of (alpha, Stump)
    loss_history: list
    history: list  # (round, block, alpha, Stump, objective) in training order


def _column_loss(H, k, h, layout, r, u, loss):
    """Loss as a function of the step ``alpha`` along stump outputs ``h`` in block ``k``.

    Only column ``k`` moves, so the other blocks' per-bag log-sum-exp is
    computed once and each evaluation touches a single column.
    """
    K = H.shape[1]
    if K > 1:
        other = layout.logsumexp(u * log_expit(np.delete(H, k, axis=1)))
    else:
        other = np.full(len(layout.sizes), -np.inf)
    base = H[:, k]
    log_n = np.log(layout.sizes * K)

    def f(alpha):
        lse = np.logaddexp(other, layout.logsumexp(u * log_expit(base + alpha * h)))
        val = bag_loss((lse - log_n) / u, r, loss)
        return val if np.isfinite(val) else np.inf

    return f


def fit_boosted(blocks, sizes, y, n_rounds, u, loss="log", max_alpha=10.0):
    """Train one stump ensemble per feature block under the shared bag loss.

    ``blocks`` is a list of K arrays (n_instances, d_k), rows stacked bag by
    bag with bag sizes ``sizes``; ``y`` holds labels in {-1, +1}. Every round
    computes the weights once, picks each block's best stump, then line
    searches the blocks in order, each from the state the previous one left.
    A block whose line search finds no decrease is skipped; training stops
    when a whole round is skipped.
    """
    layout = BagLayout(sizes)
    r = (np.asarray(y) == 1).astype(float)
    K = len(blocks)
    searches = [StumpSearch(Xk) for Xk in blocks]
    H = np.zeros((layout.owner.shape[0], K))
    ensembles = [[] for _ in range(K)]
    history = []

    current = bag_loss(bag_log_probs(H, layout, u)[0], r, loss)
    if not np.isfinite(current):
        raise NumericalError("initial loss is not finite")
    loss_history = [current]

    for t in range(n_rounds):
        w = instance_weights(H, layout, r, u, loss)
        norm = np.abs(w).sum()
        if not np.isfinite(norm):
            raise NumericalError(f"round {t}: non-finite instance weights")
        if norm == 0.0:
            break
        w = w / norm
        picks = [s.best(w[:, k]) for k, s in enumerate(searches)]

        improved = False
        for k, (stump, objective) in enumerate(picks):
            if stump is None or objective <= 0.0:
                continue
            h = stump.predict(blocks[k]).astype(float)
            alpha, new = golden_section(_column_loss(H, k, h, layout, r, u, loss), 0.0, max_alpha)
            if not (alpha > 0.0 and new < current):
                continue
            H[:, k] += alpha * h
            current = new
            ensembles[k].append((alpha, stump))
            history.append((t, k, alpha, stump, objective))
            improved = True

        if not np.isfinite(current):
            raise NumericalError(f"round {t}: loss is not finite")
        if not improved:
            break
        loss_history.append(current)

    return BoostResult(ensembles, loss_history, history)


def ensemble_score(ensemble, X):
    """Strong classifier output ``sum(alpha * h(x))``; zero for an empty ensemble."""
    X = np.asarray(X, dtype=float)
    out = np.zeros(X.shape[:-1])
    for alpha, stump in ensemble:
        out += alpha * stump.predict(X)
    return out
