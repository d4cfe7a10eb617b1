"""Per-target empirical marginals: ECDF, probability integral transform, generalized inverse.

The ECDF carries the (n+1) denominator with a virtual calibration point at +inf, so in-sample
values never reach 1 and levels above n/(n+1) map back to an infinite score.
"""
import logging
import math

import numpy as np

logger = logging.getLogger(__name__)

# Absorbs float noise in level*(n+1) without moving an exact grid level to the next rank
_LEVEL_SLACK = 1e-9


def order_statistic_index(level, n):
    """1-based rank k = ceil(level*(n+1)); k > n means the +inf point is needed"""
    k = math.ceil(level * (n + 1) - _LEVEL_SLACK)
    return max(k, 1)


class MarginalEcdf:
    """Empirical CDF of one target's calibration scores"""

    def __init__(self, sorted_scores):
        self.sorted_scores = np.asarray(sorted_scores, dtype=np.float64)
        self.sorted_scores.setflags(write=False)
        self.n = len(self.sorted_scores)

    def evaluate(self, s):
        """#{i : score_i <= s} / (n+1); vectorized over s"""
        counts = np.searchsorted(self.sorted_scores, s, side="right")
        return counts / (self.n + 1.0)

    def inverse(self, u):
        """Smallest calibration score with evaluate(score) >= u, +inf above n/(n+1)"""
        return inverse_ecdf(self, u)

    def __repr__(self):
        return f"MarginalEcdf(n={self.n})"


def fit_ecdf(scores):
    """Build the (n+1)-denominator ECDF of one calibration column"""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size == 0:
        raise ValueError("empty calibration column")
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite score")
    return MarginalEcdf(np.sort(scores, kind="mergesort"))


def fit_ecdfs(scores):
    """One ECDF per column of an n x d score matrix"""
    scores = np.atleast_2d(np.asarray(scores, dtype=np.float64))
    return [fit_ecdf(scores[:, j]) for j in range(scores.shape[1])]


def pit_transform(ecdfs, scores):
    """Pseudo-observations u[i][j] = F_j(S_j^(i))"""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim == 1:
        scores = scores[:, None]
    if scores.shape[1] != len(ecdfs):
        raise ValueError(
            f"dimension mismatch: scores have {scores.shape[1]} columns, got {len(ecdfs)} ECDFs"
        )
    pseudo = np.empty_like(scores)
    for j, ecdf in enumerate(ecdfs):
        pseudo[:, j] = ecdf.evaluate(scores[:, j])
    return pseudo


def inverse_ecdf(ecdf, u):
    """Generalized inverse of the ECDF; accepts a scalar or an array of levels"""
    u_arr = np.asarray(u, dtype=np.float64)
    if np.any((u_arr < 0.0) | (u_arr > 1.0)):
        raise ValueError("levels must lie in [0, 1]")

    flat = u_arr.ravel()
    out = np.empty(flat.shape, dtype=np.float64)
    for idx, level in enumerate(flat):
        k = order_statistic_index(level, ecdf.n)
        out[idx] = np.inf if k > ecdf.n else ecdf.sorted_scores[k - 1]

    if u_arr.ndim == 0:
        return float(out[0])
    return out.reshape(u_arr.shape)
