"""Special functions and statistics used by the experiments.

Everything here is a pure function of its arguments. Angles are in degrees
throughout, matching the report axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError

_LENTZ_EPS = 1e-14
_LENTZ_TINY = 1e-300
_LENTZ_MAX_ITER = 300


@dataclass
class AngleSampleSet:
    """A bag of pairwise angles (degrees) with a label for reporting."""

    angles: np.ndarray
    label: str = ""

    def __post_init__(self) -> None:
        self.angles = np.asarray(self.angles, dtype=np.float64)
        if self.angles.size and (
            self.angles.min() < 0.0 or self.angles.max() > 180.0
        ):
            raise InputError("angles must lie in [0, 180] degrees")

    def __len__(self) -> int:
        return int(self.angles.size)


class ExponentialFit(NamedTuple):
    rate: float
    ks_distance: float


def _betacf(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta, modified Lentz iteration."""
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _LENTZ_TINY:
        d = _LENTZ_TINY
    d = 1.0 / d
    h = d
    for m in range(1, _LENTZ_MAX_ITER + 1):
        m2 = 2 * m
        # even step
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        h *= d * c
        # odd step
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _LENTZ_TINY:
            d = _LENTZ_TINY
        c = 1.0 + aa / c
        if abs(c) < _LENTZ_TINY:
            c = _LENTZ_TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _LENTZ_EPS:
            return h
    raise InputError(
        f"incomplete beta continued fraction did not converge for "
        f"a={a}, b={b}, x={x} within {_LENTZ_MAX_ITER} iterations"
    )


def reg_inc_beta(x: float, a: float, b: float) -> float:
    """Regularized incomplete beta function I_x(a, b).

    Continued-fraction evaluation; accurate to ~1e-12 absolute over the
    parameter ranges exercised here. Satisfies I_0 = 0, I_1 = 1 and the
    symmetry I_x(a, b) = 1 - I_{1-x}(b, a).
    """
    if not (a > 0.0 and b > 0.0):
        raise InputError(f"a and b must be positive, got a={a}, b={b}")
    if not (0.0 <= x <= 1.0):
        raise InputError(f"x must be in [0, 1], got x={x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    ln_front = (
        math.lgamma(a + b)
        - math.lgamma(a)
        - math.lgamma(b)
        + a * math.log(x)
        + b * math.log1p(-x)
    )
    front = math.exp(ln_front)
    # use the branch whose continued fraction converges fastest
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def cap_fraction(alpha_deg: float, n: int) -> float:
    """Fraction of the unit sphere in R^n within colatitude ``alpha_deg``.

    This is the probability that a uniformly random direction lands within
    ``alpha_deg`` degrees of a fixed reference direction. Evaluates
    0.5 * I_{sin^2(alpha)}((n-1)/2, 1/2); exactly 0.5 at the hemisphere.
    """
    if n < 2:
        raise InputError(f"dimension must be >= 2, got {n}")
    if not (0.0 < alpha_deg <= 90.0):
        raise InputError(f"alpha must be in (0, 90] degrees, got {alpha_deg}")
    if alpha_deg == 90.0:
        return 0.5
    s = math.sin(math.radians(alpha_deg))
    return 0.5 * reg_inc_beta(s * s, (n - 1) / 2.0, 0.5)


def cap_sweep(
    alphas_deg: Sequence[float], dims: Sequence[int]
) -> list[tuple[float, int, float]]:
    """Cap fractions over the Cartesian product of angles and dimensions.

    Returns rows ``(alpha_deg, dim, fraction)`` in grid order.
    """
    alphas = list(alphas_deg)
    dims = list(dims)
    if not alphas or not dims:
        raise InputError("alpha and dimension grids must be non-empty")
    return [
        (float(alpha), int(n), cap_fraction(float(alpha), int(n)))
        for alpha in alphas
        for n in dims
    ]


def angle_between(u: np.ndarray, v: np.ndarray) -> float:
    """Angle between two vectors in degrees, in [0, 180]."""
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise InputError("angle is undefined for a zero vector")
    c = float(np.dot(u, v) / (nu * nv))
    return math.degrees(math.acos(max(-1.0, min(1.0, c))))


def pairwise_angles(vectors: np.ndarray) -> np.ndarray:
    """All pairwise angles (degrees) between the rows of ``vectors``."""
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] < 2:
        raise InputError("need a 2-D array with at least two row vectors")
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise InputError("angle is undefined for a zero vector")
    unit = m / norms[:, None]
    cos = np.clip(unit @ unit.T, -1.0, 1.0)
    iu = np.triu_indices(m.shape[0], k=1)
    return np.degrees(np.arccos(cos[iu]))


def _kolmogorov_sf(lam: float) -> float:
    """Asymptotic Kolmogorov survival function Q(lambda)."""
    if lam < 1e-8:
        return 1.0
    total = 0.0
    sign = 1.0
    for k in range(1, 101):
        term = math.exp(-2.0 * (k * lam) ** 2)
        total += sign * term
        if term < 1e-16 * max(total, 1e-300):
            break
        sign = -sign
    return min(1.0, max(0.0, 2.0 * total))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.

    D is the supremum distance between the two empirical CDFs; the p-value
    uses the asymptotic Kolmogorov distribution with the usual small-sample
    correction on the effective size n_e = |a||b| / (|a|+|b|).
    """
    xa = np.sort(np.asarray(a, dtype=np.float64).ravel())
    xb = np.sort(np.asarray(b, dtype=np.float64).ravel())
    na, nb = xa.size, xb.size
    if na < 2 or nb < 2:
        raise InputError("both samples need at least 2 observations")
    pooled = np.concatenate([xa, xb])
    cdf_a = np.searchsorted(xa, pooled, side="right") / na
    cdf_b = np.searchsorted(xb, pooled, side="right") / nb
    d = float(np.max(np.abs(cdf_a - cdf_b)))
    ne = na * nb / (na + nb)
    lam = (math.sqrt(ne) + 0.12 + 0.11 / math.sqrt(ne)) * d
    return d, _kolmogorov_sf(lam)


def orr_transition_prob(s: Sequence[float], j: int) -> float:
    """Probability of an adaptive step landing on the rank-``j`` improvement.

    ``s`` holds the selection coefficients of the better parametrizations,
    ranked non-increasing; ``j`` is 1-based. The step probability is
    proportional to the coefficient: s_j / sum(s).
    """
    arr = np.asarray(s, dtype=np.float64).ravel()
    if arr.size == 0:
        raise InputError("ranked fitness sequence is empty")
    if np.any(arr <= 0.0):
        raise InputError("selection coefficients must be strictly positive")
    if np.any(np.diff(arr) > 0.0):
        raise InputError("selection coefficients must be ranked non-increasing")
    if not (1 <= j <= arr.size):
        raise InputError(f"rank j={j} out of range 1..{arr.size}")
    return float(arr[j - 1] / arr.sum())


def fit_exponential_tail(deltas: Sequence[float]) -> ExponentialFit:
    """Maximum-likelihood exponential rate for positive fitness increments.

    Returns the rate 1/mean and a one-sample KS distance of the sample
    against Exp(rate) as a goodness-of-fit measure.
    """
    x = np.sort(np.asarray(deltas, dtype=np.float64).ravel())
    if x.size < 2:
        raise InputError("need at least 2 increments")
    if np.any(x <= 0.0):
        raise InputError("increments must be strictly positive")
    rate = float(1.0 / x.mean())
    cdf = 1.0 - np.exp(-rate * x)
    n = x.size
    upper = np.arange(1, n + 1) / n - cdf
    lower = cdf - np.arange(0, n) / n
    d = float(max(upper.max(), lower.max()))
    return ExponentialFit(rate=rate, ks_distance=d)
