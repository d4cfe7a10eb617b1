"""Bivariate pair copulas: the building blocks of the vine.

Every family exposes the same surface: cdf, logpdf, the h-function (conditional CDF of the first
argument given the second) and its inverse, sampling and a plain-dict form for persistence.
Parametric families are fit by Kendall-tau inversion; the kernel family is a probit-transformation
KDE. Gumbel and Clayton may be rotated by 180 degrees to capture the opposite tail.
"""
import logging

import numpy as np
from scipy import integrate, optimize, special, stats

from config import (
    DEFAULT_FAMILY_SET,
    MIN_PAIR_OBSERVATIONS,
    MIN_TKDE_OBSERVATIONS,
    TKDE_GRID_LIMIT,
    TKDE_GRID_SIZE,
)

logger = logging.getLogger(__name__)

PARAMETRIC_FAMILIES = ("independence", "gaussian", "gumbel", "clayton", "frank")
ROTATABLE_FAMILIES = ("gumbel", "clayton")
THETA_CAP = 50.0
_EPS = 1e-12
_CHUNK = 4096


def _clip(u):
    return np.clip(u, _EPS, 1.0 - _EPS)


def _as_float(result, like):
    return float(result) if np.ndim(like) == 0 else result


def aic(loglik, param_count):
    """Akaike information criterion 2k - 2 loglik"""
    return 2.0 * param_count - 2.0 * loglik


def kendall_tau(x, y):
    """Tie-corrected Kendall tau-b; NaN when a column is constant"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if np.ptp(x) == 0.0 or np.ptp(y) == 0.0:
        return float("nan")
    tau, _ = stats.kendalltau(x, y)
    return float(tau)


def bivariate_normal_cdf(x, y, rho):
    """Standard bivariate normal CDF through Owen's T function; vectorized, deterministic"""
    x, y = np.broadcast_arrays(np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64))
    if rho == 0.0:
        return special.ndtr(x) * special.ndtr(y)
    root = np.sqrt(1.0 - rho * rho)
    # Owen's formula divides by x and y; a tiny offset keeps the limits of T(0, +-inf) exact
    xs = np.where(np.abs(x) < 1e-12, 1e-12, x)
    ys = np.where(np.abs(y) < 1e-12, 1e-12, y)
    with np.errstate(over="ignore", invalid="ignore"):
        t_x = special.owens_t(xs, (ys - rho * xs) / (xs * root))
        t_y = special.owens_t(ys, (xs - rho * ys) / (ys * root))
    beta = np.where(xs * ys < 0.0, 0.5, 0.0)
    value = 0.5 * special.ndtr(xs) + 0.5 * special.ndtr(ys) - t_x - t_y - beta
    # Infinite arguments collapse to the marginal or to zero
    value = np.where(np.isneginf(x) | np.isneginf(y), 0.0, value)
    value = np.where(np.isposinf(x), special.ndtr(y), value)
    value = np.where(np.isposinf(y), special.ndtr(x), value)
    return np.clip(value, 0.0, 1.0)


def _bisect(func, p, lo=_EPS, hi=1.0 - _EPS, iterations=60):
    """Vectorized bisection for increasing func(x) = p on [lo, hi]"""
    p = np.asarray(p, dtype=np.float64)
    left = np.full(p.shape, lo)
    right = np.full(p.shape, hi)
    for _ in range(iterations):
        mid = 0.5 * (left + right)
        below = func(mid) < p
        left = np.where(below, mid, left)
        right = np.where(below, right, mid)
    return 0.5 * (left + right)


class BivariatePairCopula:
    """Base pair copula; subclasses implement the unrotated family formulas"""
    family = None
    param_count = 0

    def __init__(self, theta=None, rotation=0):
        if rotation not in (0, 180):
            raise ValueError(f"unsupported rotation: {rotation}")
        self.theta = theta
        self.rotation = rotation
        self.loglik = 0.0
        self.aic = 0.0
        self.nobs = 0

    # Family hooks work on clipped interior arrays
    def _cdf(self, u, v):
        raise NotImplementedError

    def _logpdf(self, u, v):
        raise NotImplementedError

    def _hfunc(self, u, v):
        raise NotImplementedError

    def _hinv(self, p, v):
        raise NotImplementedError

    @property
    def name(self):
        if self.rotation:
            return f"{self.family}-r{self.rotation}"
        return self.family

    def cdf(self, u, v):
        """C(u, v) with the boundary conditions enforced exactly"""
        uu, vv = np.broadcast_arrays(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
        out = np.empty(uu.shape, dtype=np.float64)
        low = (uu <= 0.0) | (vv <= 0.0)
        top_u = (uu >= 1.0) & ~low
        top_v = (vv >= 1.0) & ~low & ~top_u
        inner = ~(low | top_u | top_v)
        out[low] = 0.0
        out[top_u] = vv[top_u]
        out[top_v] = uu[top_v]
        if np.any(inner):
            ui, vi = _clip(uu[inner]), _clip(vv[inner])
            if self.rotation == 180:
                out[inner] = ui + vi - 1.0 + self._cdf(1.0 - ui, 1.0 - vi)
            else:
                out[inner] = self._cdf(ui, vi)
        return _as_float(np.clip(out, 0.0, 1.0), uu)

    def logpdf(self, u, v):
        uu, vv = np.broadcast_arrays(_clip(np.asarray(u, dtype=np.float64)), _clip(np.asarray(v, dtype=np.float64)))
        if self.rotation == 180:
            out = self._logpdf(1.0 - uu, 1.0 - vv)
        else:
            out = self._logpdf(uu, vv)
        return _as_float(out, uu)

    def pdf(self, u, v):
        return np.exp(self.logpdf(u, v))

    def hfunc(self, u, v):
        """P(U <= u | V = v), the derivative of C(u, v) in v"""
        uu, vv = np.broadcast_arrays(_clip(np.asarray(u, dtype=np.float64)), _clip(np.asarray(v, dtype=np.float64)))
        if self.rotation == 180:
            out = 1.0 - self._hfunc(1.0 - uu, 1.0 - vv)
        else:
            out = self._hfunc(uu, vv)
        return _as_float(np.clip(out, 0.0, 1.0), uu)

    def hinv(self, p, v):
        """Inverse of the h-function in its first argument"""
        pp, vv = np.broadcast_arrays(_clip(np.asarray(p, dtype=np.float64)), _clip(np.asarray(v, dtype=np.float64)))
        if self.rotation == 180:
            out = 1.0 - self._hinv(1.0 - pp, 1.0 - vv)
        else:
            out = self._hinv(pp, vv)
        return _as_float(np.clip(out, _EPS, 1.0 - _EPS), pp)

    def flipped(self):
        """The same copula with its arguments swapped; exchangeable families return self"""
        return self

    def simulate(self, count, rng):
        """count x 2 draws by conditional inversion"""
        v = rng.uniform(size=count)
        p = rng.uniform(size=count)
        return np.column_stack([self.hinv(p, v), v])

    def kendall_tau(self):
        raise NotImplementedError

    def to_dict(self):
        return {
            "family": self.family,
            "theta": self.theta,
            "rotation": self.rotation,
            "loglik": self.loglik,
            "aic": self.aic,
            "nobs": self.nobs,
        }

    def __repr__(self):
        return f"{type(self).__name__}(theta={self.theta}, rotation={self.rotation}, aic={self.aic:.3f})"


class IndependencePair(BivariatePairCopula):
    family = "independence"
    param_count = 0

    def _cdf(self, u, v):
        return u * v

    def _logpdf(self, u, v):
        return np.zeros(np.shape(u))

    def _hfunc(self, u, v):
        return u

    def _hinv(self, p, v):
        return p

    def kendall_tau(self):
        return 0.0


class GaussianPair(BivariatePairCopula):
    family = "gaussian"
    param_count = 1

    def __init__(self, theta, rotation=0):
        theta = float(np.clip(theta, -0.9999, 0.9999))
        super().__init__(theta, 0)

    @classmethod
    def theta_from_tau(cls, tau):
        return float(np.sin(np.pi * tau / 2.0))

    def _cdf(self, u, v):
        return bivariate_normal_cdf(special.ndtri(u), special.ndtri(v), self.theta)

    def _logpdf(self, u, v):
        rho = self.theta
        x, y = special.ndtri(u), special.ndtri(v)
        one_minus = 1.0 - rho * rho
        return -0.5 * np.log(one_minus) - (rho * rho * (x * x + y * y) - 2.0 * rho * x * y) / (2.0 * one_minus)

    def _hfunc(self, u, v):
        rho = self.theta
        return special.ndtr((special.ndtri(u) - rho * special.ndtri(v)) / np.sqrt(1.0 - rho * rho))

    def _hinv(self, p, v):
        rho = self.theta
        return special.ndtr(special.ndtri(p) * np.sqrt(1.0 - rho * rho) + rho * special.ndtri(v))

    def kendall_tau(self):
        return 2.0 * np.arcsin(self.theta) / np.pi


class ClaytonPair(BivariatePairCopula):
    """Lower-tail dependence; its 180-degree rotation has upper-tail dependence"""
    family = "clayton"
    param_count = 1

    def __init__(self, theta, rotation=0):
        super().__init__(float(min(theta, THETA_CAP)), rotation)

    @classmethod
    def theta_from_tau(cls, tau):
        if not tau > 0.0:
            return None
        return 2.0 * tau / (1.0 - tau)

    def _cdf(self, u, v):
        t = self.theta
        return np.maximum(u ** (-t) + v ** (-t) - 1.0, 1.0) ** (-1.0 / t)

    def _logpdf(self, u, v):
        t = self.theta
        base = u ** (-t) + v ** (-t) - 1.0
        return np.log1p(t) - (1.0 + t) * (np.log(u) + np.log(v)) - (2.0 + 1.0 / t) * np.log(base)

    def _hfunc(self, u, v):
        t = self.theta
        base = u ** (-t) + v ** (-t) - 1.0
        return v ** (-t - 1.0) * base ** (-1.0 - 1.0 / t)

    def _hinv(self, p, v):
        t = self.theta
        inner = (p * v ** (t + 1.0)) ** (-t / (1.0 + t)) + 1.0 - v ** (-t)
        return np.maximum(inner, 1.0) ** (-1.0 / t)

    def kendall_tau(self):
        return self.theta / (self.theta + 2.0)


class GumbelPair(BivariatePairCopula):
    """Upper-tail dependence; its 180-degree rotation has lower-tail dependence"""
    family = "gumbel"
    param_count = 1

    def __init__(self, theta, rotation=0):
        super().__init__(float(np.clip(theta, 1.0, THETA_CAP)), rotation)

    @classmethod
    def theta_from_tau(cls, tau):
        if not tau >= 0.0:
            return None
        return 1.0 / (1.0 - tau)

    def _parts(self, u, v):
        t = self.theta
        x, y = -np.log(u), -np.log(v)
        total = x ** t + y ** t
        return x, y, total

    def _cdf(self, u, v):
        _, _, total = self._parts(u, v)
        return np.exp(-total ** (1.0 / self.theta))

    def _logpdf(self, u, v):
        t = self.theta
        x, y, total = self._parts(u, v)
        a = total ** (1.0 / t)
        return (-a + (t - 1.0) * (np.log(x) + np.log(y)) - np.log(u) - np.log(v)
                + (1.0 / t - 2.0) * np.log(total) + np.log(a + t - 1.0))

    def _hfunc(self, u, v):
        t = self.theta
        _, y, total = self._parts(u, v)
        a = total ** (1.0 / t)
        return np.exp(-a) * total ** (1.0 / t - 1.0) * y ** (t - 1.0) / v

    def _hinv(self, p, v):
        return _bisect(lambda u: self._hfunc(u, v), p)

    def kendall_tau(self):
        return 1.0 - 1.0 / self.theta


def _debye1(theta):
    if theta == 0.0:
        return 1.0
    value, _ = integrate.quad(lambda t: t / np.expm1(t) if t != 0.0 else 1.0, 0.0, theta)
    return value / theta


def frank_tau(theta):
    """Kendall tau of the Frank copula"""
    if theta == 0.0:
        return 0.0
    return 1.0 - 4.0 / theta * (1.0 - _debye1(theta))


class FrankPair(BivariatePairCopula):
    """Radially symmetric, no tail dependence, either sign of dependence"""
    family = "frank"
    param_count = 1

    def __init__(self, theta, rotation=0):
        super().__init__(float(np.clip(theta, -THETA_CAP, THETA_CAP)), 0)

    @classmethod
    def theta_from_tau(cls, tau):
        if not np.isfinite(tau) or tau == 0.0 or abs(tau) >= 1.0:
            return None
        if tau > 0.0:
            lo, hi = 1e-8, THETA_CAP
        else:
            lo, hi = -THETA_CAP, -1e-8
        if (frank_tau(lo) - tau) * (frank_tau(hi) - tau) > 0.0:
            return hi if tau > 0.0 else lo
        return optimize.brentq(lambda th: frank_tau(th) - tau, lo, hi, xtol=1e-10)

    def _terms(self, u, v):
        t = self.theta
        return np.expm1(-t * u), np.expm1(-t * v), np.expm1(-t)

    def _cdf(self, u, v):
        a, b, d = self._terms(u, v)
        return -np.log1p(a * b / d) / self.theta

    def _logpdf(self, u, v):
        t = self.theta
        a, b, d = self._terms(u, v)
        return np.log(-t * d) - t * (u + v) - 2.0 * np.log(np.abs(d + a * b))

    def _hfunc(self, u, v):
        a, b, d = self._terms(u, v)
        return a * np.exp(-self.theta * v) / (d + a * b)

    def _hinv(self, p, v):
        t = self.theta
        _, b, d = self._terms(p, v)
        a = p * d / (np.exp(-t * v) - p * b)
        return -np.log1p(a) / t

    def kendall_tau(self):
        return frank_tau(self.theta)


class TkdePair(BivariatePairCopula):
    """Probit-transformation kernel density copula.

    Kernel centres are the probit pseudo-observations standardized and shrunk so the kernel mixture
    has unit marginal variance; the copula density is the mixture density divided by the
    standard-normal densities at the probit point.
    """
    family = "tkde"

    def __init__(self, centers):
        super().__init__(None, 0)
        self.centers = np.asarray(centers, dtype=np.float64)
        self.kde = stats.gaussian_kde(self.centers.T)
        self.bandwidth = self.kde.covariance
        cov = self.bandwidth
        self._cond_slope = cov[0, 1] / cov[1, 1]
        self._cond_sd = np.sqrt(max(cov[0, 0] - cov[0, 1] ** 2 / cov[1, 1], 1e-300))
        self._marg_sd = np.sqrt(cov[1, 1])
        self._grid = None
        self.effective_params = 0.0

    @classmethod
    def from_pseudo(cls, u_pairs):
        n = len(u_pairs)
        margin = 1.0 / (2.0 * (n + 1.0))
        z = special.ndtri(np.clip(u_pairs, margin, 1.0 - margin))
        sd = z.std(axis=0, ddof=1)
        sd[sd == 0.0] = 1.0
        # Scott factor for two dimensions is n^(-1/6); the mixture adds its square to the variance
        factor_sq = n ** (-1.0 / 3.0)
        centers = (z - z.mean(axis=0)) / sd / np.sqrt(1.0 + factor_sq)
        return cls(centers)

    @property
    def param_count(self):
        return self.effective_params

    def _kernel_at(self, diffs):
        return stats.multivariate_normal(mean=np.zeros(2), cov=self.bandwidth).pdf(diffs)

    def loo_fit_statistics(self, u_pairs):
        """Leave-one-out log-likelihood and the smoother trace at the fitting points"""
        n = len(self.centers)
        z = special.ndtri(_clip(u_pairs))
        dens = self.kde.evaluate(z.T)
        self_kernel = np.atleast_1d(self._kernel_at(z - self.centers))
        loo = np.maximum((n * dens - self_kernel) / (n - 1.0), 1e-300)
        loglik = float(np.sum(np.log(loo) - stats.norm.logpdf(z).sum(axis=1)))
        trace = float(np.sum(self_kernel / np.maximum(n * dens, 1e-300)))
        return loglik, min(trace, n / 2.0)

    def _logpdf(self, u, v):
        z = np.stack([special.ndtri(u).ravel(), special.ndtri(v).ravel()])
        out = self.kde.logpdf(z) - stats.norm.logpdf(z).sum(axis=0)
        return out.reshape(np.shape(u))

    def _cdf(self, u, v):
        x, y = special.ndtri(u).ravel(), special.ndtri(v).ravel()
        cov = self.bandwidth
        s1, s2 = np.sqrt(cov[0, 0]), np.sqrt(cov[1, 1])
        rho = cov[0, 1] / (s1 * s2)
        out = np.empty(x.shape)
        for start in range(0, len(x), 256):
            stop = start + 256
            xs = (x[start:stop, None] - self.centers[None, :, 0]) / s1
            ys = (y[start:stop, None] - self.centers[None, :, 1]) / s2
            out[start:stop] = bivariate_normal_cdf(xs, ys, rho).mean(axis=1)
        return out.reshape(np.shape(u))

    def _conditional_z(self, z1, z2):
        """Mixture conditional CDF of the first probit coordinate given the second"""
        out = np.empty(z1.shape)
        for start in range(0, len(z1), _CHUNK):
            stop = start + _CHUNK
            a, b = z1[start:stop, None], z2[start:stop, None]
            logw = stats.norm.logpdf(b, loc=self.centers[None, :, 1], scale=self._marg_sd)
            weights = special.softmax(logw, axis=1)
            means = self.centers[None, :, 0] + self._cond_slope * (b - self.centers[None, :, 1])
            out[start:stop] = np.sum(weights * special.ndtr((a - means) / self._cond_sd), axis=1)
        return out

    def _hfunc(self, u, v):
        """Conditional CDF of the kernel mixture in probit space.

        A proper CDF in u for every v, but not exactly dC/dv of `_cdf`: that derivative carries the
        ratio of the mixture's second marginal density to the standard normal one, which this drops.
        The gap is a few 1e-2 at n=60 and shrinks as n grows.
        """
        out = self._conditional_z(special.ndtri(u).ravel(), special.ndtri(v).ravel())
        return out.reshape(np.shape(u))

    def _h_grid(self):
        if self._grid is None:
            zgrid = np.linspace(-TKDE_GRID_LIMIT, TKDE_GRID_LIMIT, TKDE_GRID_SIZE)
            rows = np.empty((TKDE_GRID_SIZE, TKDE_GRID_SIZE))
            for j, zv in enumerate(zgrid):
                rows[j] = self._conditional_z(zgrid, np.full(TKDE_GRID_SIZE, zv))
            self._grid = (zgrid, np.maximum.accumulate(rows, axis=1))
        return self._grid

    def _hinv(self, p, v):
        zgrid, table = self._h_grid()
        shape = np.shape(p)
        p, v = p.ravel(), v.ravel()
        size = len(zgrid)
        step = zgrid[1] - zgrid[0]
        pos = (np.clip(special.ndtri(v), zgrid[0], zgrid[-1]) - zgrid[0]) / step
        j0 = np.clip(np.floor(pos).astype(int), 0, size - 2)
        frac = (pos - j0)[:, None]
        out = np.empty(p.shape)
        for start in range(0, len(p), _CHUNK):
            sl = slice(start, start + _CHUNK)
            rows = (1.0 - frac[sl]) * table[j0[sl]] + frac[sl] * table[j0[sl] + 1]
            target = p[sl, None]
            k = np.clip(np.sum(rows < target, axis=1), 1, size - 1)
            idx = np.arange(len(k))
            lo, hi = rows[idx, k - 1], rows[idx, k]
            gap = hi - lo
            w = np.where(gap > 0.0, (p[sl] - lo) / np.where(gap > 0.0, gap, 1.0), 0.5)
            out[sl] = zgrid[k - 1] + np.clip(w, 0.0, 1.0) * step
        return special.ndtr(out).reshape(shape)

    def flipped(self):
        twin = TkdePair(self.centers[:, ::-1])
        twin.loglik, twin.aic, twin.nobs = self.loglik, self.aic, self.nobs
        twin.effective_params = self.effective_params
        return twin

    def kendall_tau(self):
        sample = self.centers
        return kendall_tau(sample[:, 0], sample[:, 1])

    def to_dict(self):
        data = super().to_dict()
        data["centers"] = self.centers.tolist()
        data["effective_params"] = self.effective_params
        return data


_FAMILY_CLASSES = {
    "independence": IndependencePair,
    "gaussian": GaussianPair,
    "gumbel": GumbelPair,
    "clayton": ClaytonPair,
    "frank": FrankPair,
}


# Placeholder parameters for a family that failed its support check; never evaluated
_REJECTED_THETA = {"gaussian": 0.0, "gumbel": 1.0, "clayton": 1e-6, "frank": 1e-6}


def _rejected(family, rotation=0):
    pair = _FAMILY_CLASSES[family](_REJECTED_THETA[family], rotation)
    pair.loglik = -np.inf
    pair.aic = np.inf
    return pair


def _record_fit(pair, u_pairs):
    pair.nobs = len(u_pairs)
    pair.loglik = float(np.sum(pair.logpdf(u_pairs[:, 0], u_pairs[:, 1])))
    pair.aic = aic(pair.loglik, pair.param_count)
    return pair


def fit_pair_parametric(u_pairs, family, rotation=0):
    """Fit one parametric family by Kendall-tau inversion, then score it by exact log-likelihood"""
    u_pairs = np.asarray(u_pairs, dtype=np.float64)
    if family not in _FAMILY_CLASSES:
        raise ValueError(f"unknown parametric family: {family}")
    if len(u_pairs) < MIN_PAIR_OBSERVATIONS:
        raise ValueError(f"pair copula fitting needs at least {MIN_PAIR_OBSERVATIONS} observations")

    if family == "independence":
        pair = IndependencePair()
        pair.nobs = len(u_pairs)
        return pair

    tau = kendall_tau(u_pairs[:, 0], u_pairs[:, 1])
    cls = _FAMILY_CLASSES[family]
    theta = cls.theta_from_tau(tau) if np.isfinite(tau) else None
    if theta is None:
        logger.debug("family %s rejected: tau=%.4f outside its support", family, tau)
        return _rejected(family, rotation)
    return _record_fit(cls(theta, rotation), u_pairs)


def fit_pair_tkde(u_pairs):
    """Probit-transformation KDE pair copula with leave-one-out likelihood and smoother-trace AIC"""
    u_pairs = np.asarray(u_pairs, dtype=np.float64)
    if len(u_pairs) < MIN_TKDE_OBSERVATIONS:
        raise ValueError(f"kernel pair copula needs at least {MIN_TKDE_OBSERVATIONS} observations")
    pair = TkdePair.from_pseudo(u_pairs)
    loglik, trace = pair.loo_fit_statistics(u_pairs)
    pair.nobs = len(u_pairs)
    pair.loglik = loglik
    pair.effective_params = trace
    pair.aic = aic(loglik, trace)
    return pair


def h_function(pair, u, v):
    """Conditional CDF of U given V = v under the pair copula"""
    return pair.hfunc(u, v)


def is_degenerate(u_pairs):
    return np.ptp(u_pairs[:, 0]) == 0.0 or np.ptp(u_pairs[:, 1]) == 0.0


def select_pair(u_pairs, family_set=DEFAULT_FAMILY_SET):
    """Fit every candidate family (and rotation) and keep the one with minimal AIC"""
    u_pairs = np.asarray(u_pairs, dtype=np.float64)
    if is_degenerate(u_pairs):
        pair = IndependencePair()
        pair.nobs = len(u_pairs)
        return pair

    candidates = []
    for family in family_set:
        try:
            if family == "tkde":
                if len(u_pairs) >= MIN_TKDE_OBSERVATIONS:
                    candidates.append(fit_pair_tkde(u_pairs))
            elif family in ROTATABLE_FAMILIES:
                candidates.append(fit_pair_parametric(u_pairs, family, rotation=0))
                candidates.append(fit_pair_parametric(u_pairs, family, rotation=180))
            else:
                candidates.append(fit_pair_parametric(u_pairs, family))
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as e:
            logger.debug("family %s could not be fit: %s", family, e)

    finite = [c for c in candidates if np.isfinite(c.aic)]
    if not finite:
        pair = IndependencePair()
        pair.nobs = len(u_pairs)
        return pair
    best = min(finite, key=lambda c: c.aic)
    logger.debug("selected pair %s (aic=%.3f) among %d candidates", best.name, best.aic, len(finite))
    return best


def pair_from_dict(data):
    """Rebuild a pair copula from its persisted form"""
    family = data["family"]
    if family == "tkde":
        pair = TkdePair(np.asarray(data["centers"], dtype=np.float64))
        pair.effective_params = data.get("effective_params", 0.0)
    elif family == "independence":
        pair = IndependencePair()
    else:
        pair = _FAMILY_CLASSES[family](data["theta"], data.get("rotation", 0))
    pair.loglik = data.get("loglik", 0.0)
    pair.aic = data.get("aic", 0.0)
    pair.nobs = data.get("nobs", 0)
    return pair
