"""Moments, goodness of fit, covariance gates and rate fits."""

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import ndtr

from .errors import InsufficientPoints, NonPositiveValue, ShapeMismatch, TooFewSamples

KS_TERMS = 100


@dataclass
class Moments:
    """Mean ``(G, 3)``, covariance ``(3G, 3G)`` and their standard errors.

    Block ``(i, j)`` of ``covariance`` is ``Cov(D(t_i), D(t_j))``.
    """

    mean: np.ndarray
    mean_se: np.ndarray
    covariance: np.ndarray
    covariance_se: np.ndarray
    sample_size: int

    def block(self, i, j):
        return self.covariance[3 * i:3 * i + 3, 3 * j:3 * j + 3]


def empirical_moments(samples, ddof=1):
    """Sample moments of an ``(M, G, 3)`` array or an :class:`Ensemble`.

    Reductions are correctly rounded sums (``math.fsum``), so permuting the
    samples does not change the result. Covariance standard errors use
    the normal-theory formula ``sqrt((c_ii c_jj + c_ij^2) / (M - 1))``.
    ``ddof=0`` gives population moments (used when the samples are an
    exhaustive, equally weighted enumeration).
    """
    samples = getattr(samples, "samples", samples)
    samples = np.asarray(samples, dtype=float)
    M = samples.shape[0]
    if M < 2:
        raise TooFewSamples(f"need at least 2 samples, got {M}")
    X = samples.reshape(M, -1)
    d = X.shape[1]
    mean = np.array([math.fsum(X[:, i]) / M for i in range(d)])
    Xc = X - mean
    cov = np.empty((d, d))
    for i in range(d):
        for j in range(i, d):
            cov[i, j] = cov[j, i] = math.fsum(Xc[:, i] * Xc[:, j]) / (M - ddof)
    diag = np.diag(cov)
    cov_se = np.sqrt((np.outer(diag, diag) + cov ** 2) / (M - 1))
    mean_se = np.sqrt(diag / M)
    shape = samples.shape[1:]
    return Moments(mean.reshape(shape), mean_se.reshape(shape), cov, cov_se, M)


def kolmogorov_sf(x, terms=KS_TERMS):
    """Survival function of the Kolmogorov distribution, ``P(sup|B| > x)``."""
    if x <= 0.2:
        # the alternating series has not converged here; the true value is 1 - O(1e-21)
        return 1.0
    k = np.arange(1, terms + 1)
    s = 2.0 * math.fsum((-1.0) ** (k - 1) * np.exp(-2.0 * k ** 2 * x * x))
    return min(max(s, 0.0), 1.0)


@dataclass
class GofResult:
    statistic: float
    p_value: float
    sample_size: int
    null_sigma: float
    degenerate: bool = False


def ks_gof(sample, null_sigma):
    """One-sample Kolmogorov-Smirnov test against ``Normal(0, null_sigma^2)``.

    The p-value is the asymptotic Kolmogorov tail at ``sqrt(N) * D``. A
    zero-variance sample is flagged ``degenerate`` rather than rejected.
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    N = x.size
    if N < 20:
        raise TooFewSamples(f"KS test needs at least 20 points, got {N}")
    if not null_sigma > 0:
        raise ValueError("null_sigma must be positive")
    cdf = ndtr(x / null_sigma)
    i = np.arange(1, N + 1)
    stat = float(max(np.max(i / N - cdf), np.max(cdf - (i - 1) / N)))
    return GofResult(stat, kolmogorov_sf(math.sqrt(N) * stat), int(N), float(null_sigma),
                     bool(np.all(x == x[0])))


@dataclass
class RateFit:
    ns: list
    values: list
    slope: float
    intercept: float
    r_squared: float


def rate_fit(ns, values):
    """Least-squares line through ``(log n, log value)``."""
    ns = np.asarray(ns, dtype=float)
    v = np.asarray(values, dtype=float)
    if ns.size < 4 or v.size != ns.size:
        raise InsufficientPoints(f"need >= 4 matching points, got {ns.size} and {v.size}")
    if np.any(np.diff(ns) <= 0) or np.any(ns <= 0):
        raise InsufficientPoints("ns must be positive and strictly increasing")
    if np.any(~(v > 0)):
        raise NonPositiveValue("rate fit needs strictly positive values")
    x, y = np.log(ns), np.log(v)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return RateFit(ns.astype(int).tolist(), v.tolist(), float(slope), float(intercept), r2)


@dataclass
class CovarianceReport:
    t_grid: list
    oracle: np.ndarray
    empirical: np.ndarray
    standard_errors: np.ndarray
    pass_matrix: np.ndarray
    standardized: np.ndarray
    worst_deviation: float
    k_sigma: float

    @property
    def all_pass(self):
        return bool(np.all(self.pass_matrix))


def covariance_comparison(empirical, oracle, standard_errors, k_sigma=4.0, t_grid=()):
    """Entrywise gate ``|empirical - oracle| <= k_sigma * SE``."""
    e = np.asarray(empirical, dtype=float)
    o = np.asarray(oracle, dtype=float)
    se = np.asarray(standard_errors, dtype=float)
    if e.shape != o.shape or e.shape != se.shape:
        raise ShapeMismatch(f"shapes differ: {e.shape}, {o.shape}, {se.shape}")
    if not k_sigma > 0:
        raise ValueError("k_sigma must be positive")
    diff = np.abs(e - o)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(diff == 0, 0.0, diff / se)
    passed = diff <= k_sigma * se
    return CovarianceReport(list(t_grid), o, e, se, passed, z,
                            float(np.max(z)) if z.size else 0.0, float(k_sigma))
