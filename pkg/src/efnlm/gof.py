"""Sample moments and Kolmogorov-Smirnov machinery.

Moments use 1/n central normalization (non-excess kurtosis). K-S p-values
use the asymptotic Kolmogorov series with Stephens' small-sample factor;
exact small-sample null distributions are out of scope.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSample


@dataclass(frozen=True)
class MomentSummary:
    mean: float
    variance: float
    skewness: float
    kurtosis: float


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n: int
    n2: int = 0


def sample_moments(xs):
    """Mean, 1/n variance, skewness m3/m2^1.5 and kurtosis m4/m2^2."""
    xs = np.asarray(xs, dtype=float)
    if xs.size < 2:
        raise DegenerateSample("need at least two observations")
    mean = float(np.mean(xs))
    c = xs - mean
    m2 = float(np.mean(c**2))
    if m2 == 0.0:
        raise DegenerateSample("sample has zero variance")
    m3 = float(np.mean(c**3))
    m4 = float(np.mean(c**4))
    return MomentSummary(mean, m2, m3 / m2**1.5, m4 / m2**2)


def kolmogorov_pvalue(d, n_effective):
    """Asymptotic tail probability Q(lambda) with Stephens' correction."""
    if d <= 0.0:
        return 1.0
    sn = np.sqrt(n_effective)
    lam = (sn + 0.12 + 0.11 / sn) * d
    if lam < 0.01:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 1000):
        term = np.exp(-2.0 * k * k * lam * lam)
        total += sign * term
        if term < 1e-12:
            break
        sign = -sign
    return float(min(1.0, max(0.0, 2.0 * total)))


def ks_one_sample(xs, cdf):
    """Supremum distance between the sample ECDF and a continuous CDF."""
    xs = np.sort(np.asarray(xs, dtype=float))
    n = xs.size
    f = np.asarray(cdf(xs), dtype=float)
    i = np.arange(1, n + 1)
    d = float(np.max(np.maximum(np.abs(i / n - f), np.abs((i - 1) / n - f))))
    return KsResult(statistic=d, p_value=kolmogorov_pvalue(d, n), n=n)


def ks_two_sample(xs, ys):
    """Supremum distance between two ECDFs, evaluated at pooled points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    n, m = xs.size, ys.size
    pooled = np.unique(np.concatenate([xs, ys]))
    fx = np.searchsorted(np.sort(xs), pooled, side="right") / n
    fy = np.searchsorted(np.sort(ys), pooled, side="right") / m
    d = float(np.max(np.abs(fx - fy)))
    n_eff = n * m / (n + m)
    return KsResult(statistic=d, p_value=kolmogorov_pvalue(d, n_eff), n=n, n2=m)


def ks_statistics_rows(matrix, cdf):
    """Row-wise one-sample K-S statistics for a replications x n matrix."""
    xs = np.sort(np.asarray(matrix, dtype=float), axis=1)
    n = xs.shape[1]
    f = cdf(xs)
    i = np.arange(1, n + 1)
    return np.max(np.maximum(np.abs(i / n - f), np.abs((i - 1) / n - f)), axis=1)
