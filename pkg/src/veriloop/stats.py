"""Self-contained statistical kernel.

Implements the handful of procedures the evaluation pipeline needs without
reaching for a numerics stack: medians, the Kruskal-Wallis rank test with
midrank tie handling and tie correction, the chi-square survival function
via the regularized incomplete gamma function, the standard normal
distribution function, and the Shapiro-Wilk normality test using the
Royston polynomial approximation.

All functions are pure and reentrant.
"""

from __future__ import annotations

import math
from statistics import NormalDist
from typing import Iterable, NamedTuple, Sequence

from .errors import EngineError

_STD_NORMAL = NormalDist()


class StatsError(EngineError):
    pass


class EmptySample(StatsError):
    pass


class DegenerateSample(StatsError):
    pass


class TooFewGroups(StatsError):
    pass


class NegativeStatistic(StatsError):
    pass


class SampleSizeOutOfRange(StatsError):
    pass


class KWResult(NamedTuple):
    H: float
    df: int
    p_value: float


class SWResult(NamedTuple):
    W: float
    p_value: float


def median(values: Sequence[float]) -> float:
    """Middle order statistic; for even counts, the mean of the two middle values."""
    if not values:
        raise EmptySample("median of an empty sample")
    ordered = sorted(values)
    n = len(ordered)
    mid = n // 2
    if n % 2 == 1:
        return ordered[mid]
    return (ordered[mid - 1] + ordered[mid]) / 2.0


def midranks(values: Sequence[float]) -> list[float]:
    """Ranks 1..n with tied values receiving the mean of their rank span."""
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    n = len(values)
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        # positions i..j (0-based) share ranks i+1..j+1
        shared = (i + j + 2) / 2.0
        for k in range(i, j + 1):
            ranks[order[k]] = shared
        i = j + 1
    return ranks


def kruskal_wallis(groups: Sequence[Sequence[float]]) -> KWResult:
    """Kruskal-Wallis H test over k independent groups.

    H is computed from rank sums over the pooled sample,

        H = 12 / (N (N + 1)) * sum R_j^2 / n_j  -  3 (N + 1),

    using midranks for ties, then divided by the tie correction

        C = 1 - sum(t^3 - t) / (N^3 - N)

    over tie-group sizes t. The p-value refers H to a chi-square
    distribution with k - 1 degrees of freedom.
    """
    k = len(groups)
    if k < 2:
        raise TooFewGroups(f"need at least 2 groups, got {k}")
    for g in groups:
        if len(g) == 0:
            raise EmptySample("every group must contain at least one value")
    pooled: list[float] = []
    for g in groups:
        pooled.extend(g)
    n_total = len(pooled)
    if n_total < 3:
        raise EmptySample(f"pooled sample must have at least 3 values, got {n_total}")
    for v in pooled:
        if not math.isfinite(v):
            raise StatsError(f"non-finite sample value: {v!r}")
    first = pooled[0]
    if all(v == first for v in pooled):
        raise DegenerateSample("all pooled values are identical")

    ranks = midranks(pooled)
    h = 0.0
    offset = 0
    for g in groups:
        rank_sum = sum(ranks[offset : offset + len(g)])
        h += rank_sum * rank_sum / len(g)
        offset += len(g)
    h = 12.0 / (n_total * (n_total + 1)) * h - 3.0 * (n_total + 1)

    # tie correction over runs of equal pooled values
    tie_sum = 0
    for t in _tie_counts(pooled):
        tie_sum += t * t * t - t
    correction = 1.0 - tie_sum / float(n_total**3 - n_total)
    h /= correction
    h = max(h, 0.0)  # guard sub-epsilon negatives from identical rank sums

    df = k - 1
    return KWResult(h, df, chi_square_sf(h, df))


def _tie_counts(values: Iterable[float]) -> Iterable[int]:
    ordered = sorted(values)
    i = 0
    n = len(ordered)
    while i < n:
        j = i
        while j + 1 < n and ordered[j + 1] == ordered[i]:
            j += 1
        yield j - i + 1
        i = j + 1


def chi_square_sf(x: float, df: int) -> float:
    """Survival function of the chi-square distribution.

    Equals Q(df/2, x/2), the regularized upper incomplete gamma function,
    evaluated by the lower series for x < df/2 + 1 and by a modified Lentz
    continued fraction otherwise. Absolute error is well under 5e-7 over
    the ranges this pipeline uses.
    """
    if x < 0:
        raise NegativeStatistic(f"chi-square statistic must be >= 0, got {x}")
    if df < 1:
        raise StatsError(f"degrees of freedom must be >= 1, got {df}")
    if x == 0.0:
        return 1.0
    return _upper_regularized_gamma(df / 2.0, x / 2.0)


_GAMMA_EPS = 1e-15
_GAMMA_ITMAX = 500


def _upper_regularized_gamma(a: float, x: float) -> float:
    if x < a + 1.0:
        return min(1.0, max(0.0, 1.0 - _lower_gamma_series(a, x)))
    return min(1.0, max(0.0, _upper_gamma_cf(a, x)))


def _lower_gamma_series(a: float, x: float) -> float:
    # P(a, x) = x^a e^-x / Gamma(a) * sum_{k>=0} x^k / (a (a+1) ... (a+k))
    log_prefix = a * math.log(x) - x - math.lgamma(a)
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_GAMMA_ITMAX):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(log_prefix)


def _upper_gamma_cf(a: float, x: float) -> float:
    # Q(a, x) via the continued fraction of Legendre (modified Lentz).
    tiny = 1e-300
    b = x + 1.0 - a
    c = 1.0 / tiny
    d = 1.0 / b
    frac = d
    for i in range(1, _GAMMA_ITMAX + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < tiny:
            d = tiny
        c = b + an / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return math.exp(a * math.log(x) - x - math.lgamma(a)) * frac


def normal_cdf(z: float) -> float:
    """Standard normal distribution function via the complementary error function."""
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


# Royston (1995) polynomial coefficients, smallest degree last.
_SW_C1 = (-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0)
_SW_C2 = (-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0)
_SW_C3 = (-0.0006714, 0.0250540, -0.39978, 0.54400)
_SW_C4 = (-0.0020322, 0.0627670, -0.77857, 1.38220)
_SW_C5 = (0.0038915, -0.0837510, -0.31082, -1.58610)
_SW_C6 = (0.0030302, -0.0826760, -0.48030)
_SW_G = (0.459, -2.273)


def _polyval(coeffs: Sequence[float], x: float) -> float:
    acc = 0.0
    for c in coeffs:
        acc = acc * x + c
    return acc


def shapiro_wilk(values: Sequence[float]) -> SWResult:
    """Shapiro-Wilk normality test, Royston approximation.

    W is the squared correlation between the ordered sample and expected
    normal order-statistic weights built from Blom scores
    m_i = Phi^-1((i - 3/8) / (n + 1/4)) with the two extreme weights
    polynomial-corrected. The p-value transforms W to an approximately
    standard normal deviate: exactly for n = 3, via a shifted log-gamma
    fit for 4 <= n <= 11, and via a lognormal fit for n >= 12.

    Supports 3 <= n <= 5000.
    """
    n = len(values)
    if n < 3 or n > 5000:
        raise SampleSizeOutOfRange(f"sample size must be in [3, 5000], got {n}")
    for v in values:
        if not math.isfinite(v):
            raise StatsError(f"non-finite sample value: {v!r}")
    x = sorted(values)
    if x[0] == x[-1]:
        raise DegenerateSample("all sample values are identical")

    weights = _sw_weights(n)
    mean = math.fsum(x) / n
    ssd = math.fsum((v - mean) ** 2 for v in x)
    numerator = math.fsum(w * v for w, v in zip(weights, x))
    w_stat = numerator * numerator / ssd
    w_stat = min(w_stat, 1.0)

    if n == 3:
        # exact distribution for the minimal sample size
        p = 6.0 / math.pi * (math.asin(math.sqrt(w_stat)) - math.asin(math.sqrt(0.75)))
        return SWResult(w_stat, min(1.0, max(0.0, p)))

    one_minus_w = 1.0 - w_stat
    if one_minus_w <= 0.0:
        return SWResult(w_stat, 1.0)
    y = math.log(one_minus_w)
    if n <= 11:
        gamma = _polyval(_SW_G, n)
        if y >= gamma:
            return SWResult(w_stat, 1e-99)
        y = -math.log(gamma - y)
        mu = _polyval(_SW_C3, n)
        sigma = math.exp(_polyval(_SW_C4, n))
    else:
        log_n = math.log(n)
        mu = _polyval(_SW_C5, log_n)
        sigma = math.exp(_polyval(_SW_C6, log_n))
    z = (y - mu) / sigma
    return SWResult(w_stat, min(1.0, max(0.0, 1.0 - normal_cdf(z))))


def _sw_weights(n: int) -> list[float]:
    """Antisymmetric weight vector a_1..a_n for the W statistic."""
    if n == 3:
        r = math.sqrt(0.5)
        return [-r, 0.0, r]
    m = [_STD_NORMAL.inv_cdf((i - 0.375) / (n + 0.25)) for i in range(1, n + 1)]
    ssq = math.fsum(v * v for v in m)
    rsn = 1.0 / math.sqrt(n)
    # polynomial-corrected extreme weights (upper tail; lower is mirrored)
    a_n = _polyval(_SW_C1, rsn) + m[-1] / math.sqrt(ssq)
    if n > 5:
        a_n1 = _polyval(_SW_C2, rsn) + m[-2] / math.sqrt(ssq)
        phi = (ssq - 2.0 * m[-1] ** 2 - 2.0 * m[-2] ** 2) / (
            1.0 - 2.0 * a_n * a_n - 2.0 * a_n1 * a_n1
        )
        core = range(2, n - 2)
    else:
        a_n1 = None
        phi = (ssq - 2.0 * m[-1] ** 2) / (1.0 - 2.0 * a_n * a_n)
        core = range(1, n - 1)
    scale = math.sqrt(phi)
    weights = [0.0] * n
    for i in core:
        weights[i] = m[i] / scale
    weights[-1] = a_n
    weights[0] = -a_n
    if a_n1 is not None:
        weights[-2] = a_n1
        weights[1] = -a_n1
    return weights
