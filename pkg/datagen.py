"""Synthetic multi-target regression data with copula-structured noise, and CSV input/output.

The mean function is fixed: f0_j(x) = 10*x[j mod p] + 5*x[0]*x[1] + j, so targets carry both
a linear and an interaction term and sit on different scales. Noise for target j is
Phi^{-1}(w_j) * |f0_j(x)| * relative_noise with w drawn from the noise copula.
"""
import csv
import logging
from dataclasses import dataclass

import numpy as np
from scipy import stats

from config import DEFAULT_FEATURES, DEFAULT_RELATIVE_NOISE

logger = logging.getLogger(__name__)

NOISE_COPULAS = ("independence", "gaussian", "gumbel")

# Keeps the normal quantile finite at the edges of the unit cube
_UNIT_CLIP = 1e-12


class CsvFormatError(ValueError):
    """Malformed CSV input, with its position when known"""


def parse_noise_copula(text):
    """'independence', 'gaussian:RHO' or 'gumbel:THETA' -> (family, parameter)"""
    family, _, raw = text.strip().lower().partition(":")
    if family not in NOISE_COPULAS:
        raise ValueError(f"unknown noise copula: {text!r}")
    if family == "independence":
        if raw:
            raise ValueError("independence noise copula takes no parameter")
        return family, None
    if not raw:
        raise ValueError(f"{family} noise copula needs a parameter, e.g. {family}:0.8")
    try:
        param = float(raw)
    except ValueError:
        raise ValueError(f"invalid {family} parameter: {raw!r}")
    if family == "gaussian" and not -1.0 < param < 1.0:
        raise ValueError("gaussian correlation must lie in (-1, 1)")
    if family == "gumbel" and param < 1.0:
        raise ValueError("gumbel theta must be at least 1")
    return family, param


@dataclass
class SyntheticSpec:
    d: int
    n: int
    p: int = DEFAULT_FEATURES
    noise_copula: str = "independence"
    relative_noise: float = DEFAULT_RELATIVE_NOISE
    seed: int = 0

    def validate(self):
        if self.d < 2:
            raise ValueError("synthetic data needs d >= 2 targets")
        if self.n < 1:
            raise ValueError("n must be positive")
        if self.p < 2:
            raise ValueError("p must be at least 2 (the mean uses x0*x1)")
        if self.relative_noise <= 0:
            raise ValueError("relative_noise must be positive")
        family, param = parse_noise_copula(self.noise_copula)
        if family == "gaussian" and param <= -1.0 / (self.d - 1):
            raise ValueError(f"equicorrelation {param} is not positive definite for d={self.d}")
        return self


def true_mean(X, d):
    """f0(X) as an n x d matrix"""
    X = np.atleast_2d(X)
    p = X.shape[1]
    interaction = 5.0 * X[:, 0] * X[:, 1]
    return np.column_stack([10.0 * X[:, j % p] + interaction + j for j in range(d)])


def _positive_stable(alpha, count, rng):
    """Positive alpha-stable draws with Laplace transform exp(-t^alpha)"""
    theta = rng.uniform(0.0, np.pi, size=count)
    w = rng.exponential(size=count)
    return (np.sin(alpha * theta) / np.sin(theta) ** (1.0 / alpha)
            * (np.sin((1.0 - alpha) * theta) / w) ** ((1.0 - alpha) / alpha))


def sample_noise_copula(family, param, count, d, rng):
    """count x d draws in (0,1)^d from an exchangeable noise copula"""
    if family == "independence" or (family == "gumbel" and param == 1.0):
        return rng.uniform(size=(count, d))
    if family == "gaussian":
        corr = np.full((d, d), param)
        np.fill_diagonal(corr, 1.0)
        z = rng.standard_normal(size=(count, d)) @ np.linalg.cholesky(corr).T
        return stats.norm.cdf(z)
    if family == "gumbel":
        # Marshall-Olkin: U_j = psi(E_j / S), psi(t) = exp(-t^(1/theta)), S positive stable
        alpha = 1.0 / param
        frailty = _positive_stable(alpha, count, rng)
        e = rng.exponential(size=(count, d))
        return np.exp(-((e / frailty[:, None]) ** alpha))
    raise ValueError(f"unknown noise copula: {family}")


def generate(spec):
    """(X, Y) with X ~ U[0,1]^p and Y = f0(X) + copula-structured heteroscedastic noise"""
    spec.validate()
    family, param = parse_noise_copula(spec.noise_copula)
    rng = np.random.default_rng(spec.seed)
    X = rng.uniform(size=(spec.n, spec.p))
    mean = true_mean(X, spec.d)
    w = np.clip(sample_noise_copula(family, param, spec.n, spec.d, rng), _UNIT_CLIP, 1.0 - _UNIT_CLIP)
    noise = stats.norm.ppf(w) * np.abs(mean) * spec.relative_noise
    return X, mean + noise


@dataclass
class CsvColumns:
    features: list
    targets: list


def load_csv(path, target_columns):
    """Read a numeric CSV; named target columns form Y in the given order, the rest form X"""
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise CsvFormatError(f"{path}: empty file")
    header = [name.strip() for name in rows[0]]
    body = [row for row in rows[1:] if row]
    if not body:
        raise CsvFormatError(f"{path}: no data rows")

    for name in target_columns:
        if name not in header:
            raise CsvFormatError(f"{path}: missing column {name!r}")
    target_idx = [header.index(name) for name in target_columns]
    feature_idx = [j for j in range(len(header)) if j not in target_idx]

    values = np.empty((len(body), len(header)))
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise CsvFormatError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
        for c, cell in enumerate(row):
            try:
                values[r - 2, c] = float(cell)
            except ValueError:
                raise CsvFormatError(
                    f"{path}: non-numeric cell at row {r}, column {header[c]!r}: {cell!r}"
                )
            if not np.isfinite(values[r - 2, c]):
                raise CsvFormatError(
                    f"{path}: non-finite cell at row {r}, column {header[c]!r}: {cell!r}"
                )

    columns = CsvColumns([header[j] for j in feature_idx], list(target_columns))
    logger.debug("loaded %s: %d rows, %d features, %d targets",
                 path, len(body), len(feature_idx), len(target_idx))
    return values[:, feature_idx], values[:, target_idx], columns


def write_csv(path, X, Y):
    """Write features x0..x{p-1} followed by targets y0..y{d-1}"""
    X = np.atleast_2d(X)
    Y = np.atleast_2d(Y)
    header = [f"x{j}" for j in range(X.shape[1])] + [f"y{j}" for j in range(Y.shape[1])]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(header)
        for row in np.hstack([X, Y]):
            writer.writerow([repr(float(v)) for v in row])
    return header
