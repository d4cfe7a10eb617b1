"""Conformal calibration schemes, prediction sets and their evaluation.

Schemes:
    independent           per-target split CP at level (1-alpha)^(1/d)
    scalar-{l1,l2,linf}   split CP on a norm of the residual vector
    scalar-*-split        as above on residuals rescaled by per-target spread from a first split
    empirical-copula      diagonal search on the empirical copula
    plugin / corrected    copula fit, level-curve point, optional one-step correction
    plugin-split / corrected-split
                          ECDFs on one half of the calibration set, empirical copula on the other
"""
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from config import (
    DEFAULT_COPULA_KIND,
    DEFAULT_FAMILY_SET,
    DEFAULT_MC_SAMPLES,
    DEFAULT_NORM,
    GRADIENT_STEP,
    REPORT_SCHEMA_VERSION,
    SPLIT_FRACTION,
)
from copulas import fit_copula, fit_empirical
from marginals import fit_ecdfs, order_statistic_index, pit_transform
from models import fit_ridge
from quantile import (
    QuantileResult,
    grad_cdf,
    one_step_with_flag,
    optimize_level_curve,
    to_score_space,
)

logger = logging.getLogger(__name__)

SHAPES = ("hyperrectangle", "ball", "cross-polytope")
_SCALAR_SHAPES = {"l1": "cross-polytope", "l2": "ball", "linf": "hyperrectangle"}
_NORM_ORDERS = {"l1": 1, "l2": 2, "linf": np.inf}
MIN_SPLIT_POINTS = 10


@dataclass
class ScoreMatrix:
    values: np.ndarray
    scheme: str = "abs-residual"

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=np.float64))
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("scores must be finite and non-negative")

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def d(self):
        return self.values.shape[1]


def _as_matrix(values, name):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if np.any(np.isnan(values)):
        raise ValueError(f"NaN in {name}")
    return values


def compute_scores(predictions, labels):
    """Target-wise absolute residuals |prediction - label|"""
    predictions = _as_matrix(predictions, "predictions")
    labels = _as_matrix(labels, "labels")
    if predictions.shape != labels.shape:
        raise ValueError(f"shape mismatch: predictions {predictions.shape} vs labels {labels.shape}")
    return ScoreMatrix(np.abs(predictions - labels))


class PredictionSet:
    """Region around a point prediction.

    hyperrectangle: |y_j - center_j| <= radii_j for every j
    ball / cross-polytope: ||(y - center) / scale|| <= radius in the L2 / L1 norm
    """

    def __init__(self, shape, center, radii, scale=None):
        if shape not in SHAPES:
            raise ValueError(f"unknown prediction-set shape: {shape}")
        self.shape = shape
        self.center = np.asarray(center, dtype=np.float64).ravel()
        self.radii = np.asarray(radii, dtype=np.float64).ravel()
        self.scale = None if scale is None else np.asarray(scale, dtype=np.float64).ravel()

    @property
    def dim(self):
        return len(self.center)

    def contains(self, y):
        offset = np.abs(np.asarray(y, dtype=np.float64) - self.center)
        if self.shape == "hyperrectangle":
            return bool(np.all(offset <= self.radii))
        if self.scale is not None:
            offset = offset / self.scale
        order = 2 if self.shape == "ball" else 1
        return bool(np.linalg.norm(offset, ord=order) <= self.radii[0])

    def log_volume(self):
        if np.any(np.isinf(self.radii)):
            return np.inf
        d = self.dim
        with np.errstate(divide="ignore"):
            if self.shape == "hyperrectangle":
                return float(np.sum(np.log(2.0 * self.radii)))
            r = self.radii[0]
            if self.shape == "ball":
                value = 0.5 * d * math.log(math.pi) - gammaln(0.5 * d + 1.0) + d * np.log(r)
            else:
                value = d * np.log(2.0 * r) - gammaln(d + 1.0)
            if self.scale is not None:
                value += float(np.sum(np.log(self.scale)))
        return float(value)


def form_prediction_set(center, quantile):
    """Hyperrectangle with per-target half-widths equal to the score quantile"""
    return PredictionSet("hyperrectangle", center, quantile)


def evaluate(sets, labels):
    """(coverage, efficiency): share of labels inside their set and mean log-volume"""
    labels = _as_matrix(labels, "labels")
    if len(sets) != len(labels):
        raise ValueError(f"{len(sets)} prediction sets for {len(labels)} labels")
    covered = [s.contains(y) for s, y in zip(sets, labels)]
    volumes = np.array([s.log_volume() for s in sets])
    return float(np.mean(covered)), float(np.mean(volumes))


def target_coverage(sets, labels):
    """Per-target share of labels within the per-axis half-width; rectangles only"""
    labels = _as_matrix(labels, "labels")
    if any(s.shape != "hyperrectangle" for s in sets):
        return None
    inside = np.array([np.abs(y - s.center) <= s.radii for s, y in zip(sets, labels)])
    return inside.mean(axis=0).tolist()


def conformal_quantile(scores, level):
    """k-th smallest score with k = ceil(level*(n+1)); +inf when k > n"""
    scores = np.sort(np.asarray(scores, dtype=np.float64).ravel())
    k = order_statistic_index(level, len(scores))
    return np.inf if k > len(scores) else float(scores[k - 1])


def calibrate_independent(scores, alpha):
    """Per-target split-CP quantiles at the Bonferroni-free level (1-alpha)^(1/d)"""
    values = scores.values
    level = (1.0 - alpha) ** (1.0 / values.shape[1])
    return np.array([conformal_quantile(values[:, j], level) for j in range(values.shape[1])])


def residual_norms(predictions, labels, norm, scale=None):
    residuals = np.abs(_as_matrix(predictions, "predictions") - _as_matrix(labels, "labels"))
    if scale is not None:
        residuals = residuals / scale
    if norm not in _NORM_ORDERS:
        raise ValueError(f"unknown norm: {norm}")
    return np.linalg.norm(residuals, ord=_NORM_ORDERS[norm], axis=1)


def calibrate_scalar(predictions, labels, alpha, norm):
    """Radius of the norm ball from split CP on the scalar residual norm"""
    return conformal_quantile(residual_norms(predictions, labels, norm), 1.0 - alpha)


def _split_positions(n, split_fraction, seed):
    order = np.random.default_rng(seed).permutation(n)
    n_first = int(math.floor(split_fraction * n))
    first, second = order[:n_first], order[n_first:]
    if len(first) < MIN_SPLIT_POINTS or len(second) < MIN_SPLIT_POINTS:
        raise ValueError(
            f"both calibration splits need at least {MIN_SPLIT_POINTS} points, "
            f"got {len(first)} and {len(second)}"
        )
    return first, second


def calibrate_scalar_split(predictions, labels, alpha, norm, split_fraction=SPLIT_FRACTION, seed=0):
    """(radius, scale): per-target residual spread from the first split, radius from the second"""
    predictions = _as_matrix(predictions, "predictions")
    labels = _as_matrix(labels, "labels")
    first, second = _split_positions(len(labels), split_fraction, seed)
    spread = np.abs(predictions[first] - labels[first]).std(axis=0, ddof=1)
    scale = np.where(spread > 0.0, spread, 1.0)
    norms = residual_norms(predictions[second], labels[second], norm, scale)
    return conformal_quantile(norms, 1.0 - alpha), scale


def calibrate_empirical_copula_diagonal(scores, alpha):
    """Smallest t on {k/(n+1)} with C_emp(t,...,t) >= 1-alpha, mapped back through the ECDFs"""
    values = scores.values
    n, d = values.shape
    ecdfs = fit_ecdfs(values)
    row_max = np.sort(pit_transform(ecdfs, values).max(axis=1))
    grid = np.arange(1, n + 1) / (n + 1.0)
    diagonal = np.searchsorted(row_max, grid, side="right") / n
    reached = np.flatnonzero(diagonal >= (1.0 - alpha) - 1e-12)
    if reached.size == 0:
        return np.full(d, np.inf)
    return to_score_space(np.full(d, grid[reached[0]]), ecdfs)


def calibrate_semiparametric(scores, alpha, correction=True, copula_kind=DEFAULT_COPULA_KIND,
                             family_set=DEFAULT_FAMILY_SET, mc_samples=DEFAULT_MC_SAMPLES,
                             norm=DEFAULT_NORM, seed=0):
    """ECDFs, pseudo-observations, copula fit, level-curve point, optional one-step correction"""
    values = scores.values
    ecdfs = fit_ecdfs(values)
    pseudo = pit_transform(ecdfs, values)
    copula = fit_copula(pseudo, copula_kind, family_set, mc_samples=mc_samples, seed=seed)

    u_star = optimize_level_curve(copula, alpha, norm=norm, seed=seed)
    gradient = grad_cdf(copula, u_star)
    q_plugin = to_score_space(u_star, ecdfs)
    if not correction:
        return QuantileResult(u_star=u_star, gradient=gradient, q_scores=q_plugin,
                              alpha=alpha, norm=norm, copula=copula)

    u_one_step, clamped = one_step_with_flag(u_star, pseudo, gradient, alpha)
    return QuantileResult(
        u_star=u_star, gradient=gradient, q_scores=to_score_space(u_one_step, ecdfs),
        alpha=alpha, norm=norm, u_one_step=u_one_step, q_plugin=q_plugin, clamped=clamped,
        copula=copula,
    )


def _upper_score_space(u, ecdfs):
    """Largest score per target whose PIT stays at or below u; +inf past the top rank"""
    out = np.empty(len(ecdfs))
    for j, (ecdf, level) in enumerate(zip(ecdfs, np.ravel(u))):
        rank = int(math.floor(level * (ecdf.n + 1) + 1e-9))
        out[j] = np.inf if rank >= ecdf.n else ecdf.sorted_scores[rank]
    return out


def calibrate_split(scores, alpha, split_fraction=SPLIT_FRACTION, correction=False, seed=0):
    """ECDFs on the first split, empirical-copula diagonal quantile of the second.

    The diagonal point is the k-th smallest max_j F_j(S_j) over the second split with
    k = ceil((1-alpha)(n'+1)), i.e. the empirical copula's quantile at the adjusted level.
    """
    values = scores.values
    n, d = values.shape
    first, second = _split_positions(n, split_fraction, seed)
    ecdfs = fit_ecdfs(values[first])
    pseudo = pit_transform(ecdfs, values[second])
    n_second = len(second)

    k = order_statistic_index(1.0 - alpha, n_second)
    if k > n_second:
        logger.warning("adjusted level %d/%d saturates with n'=%d; returning an infinite set",
                       k, n_second + 1, n_second)
        return QuantileResult(u_star=np.ones(d), gradient=np.zeros(d),
                              q_scores=np.full(d, np.inf), alpha=alpha, norm="linf")

    t = np.sort(pseudo.max(axis=1))[k - 1]
    u_star = np.full(d, t)
    n_first = len(first)
    copula = fit_empirical(pseudo)
    gradient = grad_cdf(copula, u_star, h=max(GRADIENT_STEP, 2.0 / (n_first + 1)))
    q_plugin = _upper_score_space(u_star, ecdfs)
    if not correction:
        return QuantileResult(u_star=u_star, gradient=gradient, q_scores=q_plugin,
                              alpha=alpha, norm="linf", copula=copula)

    u_one_step, clamped = one_step_with_flag(
        u_star, pseudo, gradient, alpha, lower=1.0 / (n_first + 1), upper=n_first / (n_first + 1.0)
    )
    return QuantileResult(
        u_star=u_star, gradient=gradient, q_scores=to_score_space(u_one_step, ecdfs),
        alpha=alpha, norm="linf", u_one_step=u_one_step, q_plugin=q_plugin, clamped=clamped,
        copula=copula,
    )


@dataclass
class CalibrationReport:
    scheme: str
    alpha: float
    n_cal: int
    seed: int
    coverage: float
    efficiency: float
    quantile: list
    config_hash: str = ""
    target_coverage: list = None
    quantile_plugin: list = None
    timing: float = 0.0
    error: str = None
    schema: int = REPORT_SCHEMA_VERSION
    extra: dict = field(default_factory=dict)
    model: object = field(default=None, repr=False, compare=False)

    def to_dict(self):
        data = asdict(replace(self, model=None))
        data.pop("model")
        return data


@dataclass
class ScoredSplit:
    """Point predictions of one fitted model on the calibration and test rows"""
    cal_predictions: np.ndarray
    cal_labels: np.ndarray
    test_predictions: np.ndarray
    test_labels: np.ndarray

    @property
    def scores(self):
        return compute_scores(self.cal_predictions, self.cal_labels)


def score_split(data, ridge_lambda):
    model = fit_ridge(data.X_train, data.Y_train, ridge_lambda)
    return ScoredSplit(model.predict(data.X_cal), data.Y_cal,
                       model.predict(data.X_test), data.Y_test)


def _scheme_sets(scheme, scored, config, alpha, seed):
    """Prediction sets for every test row, the reported quantile vector, extra fields and the
    copula-based QuantileResult (None for the order-statistic schemes)"""
    centers = scored.test_predictions
    d = centers.shape[1]
    extra = {}

    if scheme == "independent":
        quantile = calibrate_independent(scored.scores, alpha)
        return [form_prediction_set(c, quantile) for c in centers], quantile, extra, None

    if scheme.startswith("scalar-"):
        norm = scheme.split("-")[1]
        if scheme.endswith("-split"):
            radius, scale = calibrate_scalar_split(scored.cal_predictions, scored.cal_labels, alpha,
                                                   norm, config.split_fraction, seed)
        else:
            radius = calibrate_scalar(scored.cal_predictions, scored.cal_labels, alpha, norm)
            scale = None
        shape = _SCALAR_SHAPES[norm]
        if shape == "hyperrectangle":
            radii = np.full(d, radius) * (1.0 if scale is None else scale)
            sets = [PredictionSet(shape, c, radii) for c in centers]
        else:
            sets = [PredictionSet(shape, c, [radius], scale) for c in centers]
        extra["radius"] = radius
        quantile = np.full(d, radius) * (1.0 if scale is None else scale)
        return sets, quantile, extra, None

    if scheme == "empirical-copula":
        quantile = calibrate_empirical_copula_diagonal(scored.scores, alpha)
        return [form_prediction_set(c, quantile) for c in centers], quantile, extra, None

    if scheme in ("plugin", "corrected"):
        result = calibrate_semiparametric(
            scored.scores, alpha, correction=scheme == "corrected",
            copula_kind=config.copula_kind, family_set=config.family_set,
            mc_samples=config.mc_samples, norm=config.norm, seed=seed,
        )
    elif scheme in ("plugin-split", "corrected-split"):
        result = calibrate_split(scored.scores, alpha, config.split_fraction,
                                 correction=scheme == "corrected-split", seed=seed)
    else:
        raise ValueError(f"unknown scheme: {scheme}")

    quantile = result.q_scores
    return [form_prediction_set(c, quantile) for c in centers], quantile, extra, result


def run_scheme(scheme, scored, config, seed, alpha=None, config_hash=""):
    """One (scheme, seed, alpha) calibration and its test-set evaluation.

    Failures are recorded in the report's error field instead of propagating.
    """
    alpha = config.alpha if alpha is None else alpha
    d = scored.test_predictions.shape[1]
    started = time.perf_counter()
    try:
        sets, quantile, extra, result = _scheme_sets(scheme, scored, config, alpha, seed)
        coverage, efficiency = evaluate(sets, scored.test_labels)
        if result is not None:
            extra["quantile_result"] = result.to_dict()
        return CalibrationReport(
            scheme=scheme, alpha=alpha, n_cal=len(scored.cal_labels), seed=seed,
            coverage=coverage, efficiency=efficiency,
            quantile=[float(q) for q in quantile], config_hash=config_hash,
            target_coverage=target_coverage(sets, scored.test_labels),
            quantile_plugin=extra.get("quantile_result", {}).get("q_plugin"),
            timing=time.perf_counter() - started, extra=extra,
            model=None if result is None else result.copula,
        )
    except Exception as e:
        logger.warning("scheme %s failed for seed %s: %s", scheme, seed, e)
        return CalibrationReport(
            scheme=scheme, alpha=alpha, n_cal=len(scored.cal_labels), seed=seed,
            coverage=float("nan"), efficiency=float("nan"), quantile=[float("nan")] * d,
            config_hash=config_hash, timing=time.perf_counter() - started, error=str(e),
        )
