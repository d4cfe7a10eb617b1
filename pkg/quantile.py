"""Multivariate quantile of a fitted copula: level-curve search, CDF gradient, EIF and one-step fix."""
import logging
import math
from dataclasses import dataclass

import cma
import numpy as np

from config import (
    BOX_LOWER,
    BOX_UPPER,
    CONSTRAINT_TOLERANCE,
    GRADIENT_STEP,
    OPTIMIZER_MAX_GENERATIONS,
    OPTIMIZER_SIGMA0,
    PENALTY_PER_DIMENSION,
    REPAIR_MC_FACTOR,
    REPAIR_STEP,
)
from copulas import VineCopula
from marginals import inverse_ecdf

logger = logging.getLogger(__name__)


class LevelCurveError(RuntimeError):
    """Raised when the level curve cannot be located or is flat"""


def _as_list(values):
    if values is None:
        return None
    return [float(v) for v in np.asarray(values, dtype=np.float64).ravel()]


@dataclass
class QuantileResult:
    u_star: np.ndarray
    gradient: np.ndarray
    q_scores: np.ndarray
    alpha: float
    norm: str = "l1"
    u_one_step: np.ndarray = None
    q_plugin: np.ndarray = None
    clamped: bool = False
    # Fitted copula behind u_star; persisted separately, not part of to_dict
    copula: object = None

    def to_dict(self):
        return {
            "u_star": _as_list(self.u_star),
            "u_one_step": _as_list(self.u_one_step),
            "gradient": _as_list(self.gradient),
            "q_scores": _as_list(self.q_scores),
            "q_plugin": _as_list(self.q_plugin),
            "alpha": self.alpha,
            "norm": self.norm,
            "clamped": self.clamped,
        }


def _point_size(points, norm):
    if norm == "l1":
        return np.sum(points, axis=1)
    if norm == "linf":
        return np.max(points, axis=1)
    raise ValueError(f"unknown norm: {norm}")


class _LevelCurveSearch:
    """Penalized CMA-ES run that remembers the smallest feasible point it has seen"""

    def __init__(self, copula, target, norm, tolerance):
        self.copula = copula
        self.target = target
        self.norm = norm
        self.tolerance = tolerance
        self.penalty = PENALTY_PER_DIMENSION * copula.dim
        self.best_point = None
        self.best_size = np.inf

    def evaluate(self, points):
        points = np.atleast_2d(points)
        values = np.asarray(self.copula.cdf(points), dtype=np.float64).reshape(-1)
        sizes = _point_size(points, self.norm)
        feasible = values >= self.target - self.tolerance
        if np.any(feasible):
            idx = np.flatnonzero(feasible)[np.argmin(sizes[feasible])]
            if sizes[idx] < self.best_size:
                self.best_size = sizes[idx]
                self.best_point = points[idx].copy()
        return sizes + self.penalty * np.maximum(0.0, self.target - values)

    def run(self, start, seed):
        d = self.copula.dim
        options = {
            "popsize": 4 + int(math.floor(3 * math.log(d))),
            "maxiter": OPTIMIZER_MAX_GENERATIONS,
            "bounds": [BOX_LOWER, BOX_UPPER],
            "seed": int(seed) + 1,
            "verbose": -9,
        }
        es = cma.CMAEvolutionStrategy(list(start), OPTIMIZER_SIGMA0, options)
        while not es.stop():
            candidates = es.ask()
            es.tell(candidates, self.evaluate(np.asarray(candidates)).tolist())
        return np.asarray(es.result.xbest, dtype=np.float64)


def _repair(copula, point, target):
    """Move along the all-ones direction until the CDF constraint holds"""
    point = np.clip(point, BOX_LOWER, BOX_UPPER)
    value = copula.cdf(point)
    while value < target and point.min() < BOX_UPPER:
        point = np.minimum(point + REPAIR_STEP, BOX_UPPER)
        value = copula.cdf(point)
    return point, value


def optimize_level_curve(copula, alpha, norm="l1", seed=0, tolerance=CONSTRAINT_TOLERANCE):
    """argmin ||U|| subject to C(U) >= 1 - alpha, found by CMA-ES on a penalized objective"""
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    target = 1.0 - alpha
    d = copula.dim
    if d == 1:
        return np.array([target])

    search = _LevelCurveSearch(copula, target, norm, tolerance)
    start = np.full(d, target ** (1.0 / d))
    search.evaluate(start[None, :])
    result = search.run(start, seed)
    if search.best_point is not None:
        # One restart from the incumbent feasible point
        search.run(search.best_point, seed + 1)
        result = search.best_point

    point, value = _repair(copula, result, target)
    if value < target and isinstance(copula, VineCopula):
        logger.warning("level curve not reached at %.4f; retrying with %dx Monte-Carlo samples",
                       value, REPAIR_MC_FACTOR)
        copula = copula.with_mc(mc_samples=copula.mc_samples * REPAIR_MC_FACTOR)
        point, value = _repair(copula, point, target)
    if value < target:
        raise LevelCurveError("level curve unreachable")
    return point


def grad_cdf(copula, u, h=GRADIENT_STEP):
    """Finite-difference gradient of the copula CDF; one-sided where u +- h leaves [0, 1]"""
    u = np.asarray(u, dtype=np.float64).ravel()
    d = len(u)
    upper = np.tile(u, (d, 1))
    lower = np.tile(u, (d, 1))
    for j in range(d):
        upper[j, j] = min(u[j] + h, 1.0)
        lower[j, j] = max(u[j] - h, 0.0)
    values = np.asarray(copula.cdf(np.vstack([upper, lower])), dtype=np.float64).reshape(-1)
    width = np.diag(upper) - np.diag(lower)
    gradient = (values[:d] - values[d:]) / width
    if not np.all(np.isfinite(gradient)):
        raise LevelCurveError("non-finite CDF gradient")
    return np.maximum(gradient, 0.0)


def eif(u_obs, u_star, grad, alpha):
    """Efficient influence function of the level-curve point; rows of u_obs give rows of output"""
    grad = np.asarray(grad, dtype=np.float64).ravel()
    norm2 = float(grad @ grad)
    if norm2 <= 0.0:
        raise LevelCurveError("degenerate level curve")
    u_obs = np.asarray(u_obs, dtype=np.float64)
    dominated = np.all(u_obs <= np.asarray(u_star), axis=-1)
    coefficient = ((1.0 - alpha) - dominated.astype(np.float64)) / norm2
    return np.multiply.outer(coefficient, grad)


def one_step_with_flag(u_star, pseudo, grad, alpha, lower=None, upper=None):
    """One-step point and whether clamping to [1/(n+1), n/(n+1)] changed it"""
    pseudo = np.atleast_2d(np.asarray(pseudo, dtype=np.float64))
    n = len(pseudo)
    lower = 1.0 / (n + 1) if lower is None else lower
    upper = n / (n + 1.0) if upper is None else upper
    raw = np.asarray(u_star, dtype=np.float64) + eif(pseudo, u_star, grad, alpha).mean(axis=0)
    point = np.clip(raw, lower, upper)
    clamped = bool(np.any(point != raw))
    if clamped:
        logger.info("one-step point clamped to [%.4f, %.4f]: %s", lower, upper, np.round(raw, 4))
    return point, clamped


def one_step(u_star, pseudo, grad, alpha):
    """U* plus the mean EIF over the calibration pseudo-observations, clamped"""
    return one_step_with_flag(u_star, pseudo, grad, alpha)[0]


def to_score_space(u, ecdfs):
    """Componentwise inverse ECDF; +inf where a level exceeds n/(n+1)"""
    u = np.asarray(u, dtype=np.float64).ravel()
    return np.array([inverse_ecdf(ecdf, level) for ecdf, level in zip(ecdfs, u)])
