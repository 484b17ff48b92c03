"""Special functions, ball volumes, closed-form Gaussian entropies and
log-log fitting shared by the rest of the package.

All logarithms are natural; entropies are in nats.
"""

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .errors import ArityError, DomainError, InvalidSpecError

EULER_GAMMA = 0.57721566490153286061

_DIGAMMA_SHIFT = 10.0
# B_2, B_4, ..., B_16
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
)


class Metric(str, enum.Enum):
    """Distance on R^d used for neighbour search and ball counting."""

    EUCLIDEAN = "euclidean"
    CHEBYSHEV = "chebyshev"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise DomainError(
                f"unknown metric {value!r}; expected one of "
                f"{', '.join(m.value for m in cls)}"
            ) from None

    def distance(self, a, b):
        """Distance between two points, or row-wise between stacked points."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        # accumulate in coordinate order to match the neighbour search bit-for-bit
        acc = np.zeros(shape[:-1])
        for j in range(shape[-1]):
            t = a[..., j] - b[..., j]
            if self is Metric.CHEBYSHEV:
                acc = np.maximum(acc, np.abs(t))
            else:
                acc = acc + t * t
        if self is Metric.CHEBYSHEV:
            return acc
        return np.sqrt(acc)


@dataclass(frozen=True)
class HolderProfile:
    """Smoothness of the stationary density: Hölder exponent and norm bound."""

    alpha: float
    c_f: float

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0:
            raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if not self.c_f > 0.0:
            raise DomainError(f"c_f must be positive, got {self.c_f}")


@dataclass(frozen=True)
class MomentProfile:
    """Order ``r_mom`` such that E||X||^(d + r_mom) is finite."""

    r_mom: float

    def __post_init__(self):
        if not self.r_mom > 0.0:
            raise DomainError(f"r_mom must be positive, got {self.r_mom}")


@dataclass(frozen=True)
class MixingProfile:
    """Polynomial psi-mixing: psi(z) <= K / (1 + |z|^(1 + eps)).

    ``l_mix`` is the sum of psi over all integer lags.  When omitted it is
    replaced by the value implied by the decay envelope, which is an upper
    bound on the true sum.
    """

    k_mix: float
    eps: float
    l_mix: Optional[float] = None

    def __post_init__(self):
        if not self.eps > 0.0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if self.k_mix < 0.0:
            raise DomainError(f"k_mix must be nonnegative, got {self.k_mix}")
        if self.l_mix is None:
            object.__setattr__(self, "l_mix", psi_envelope_sum(self.k_mix, self.eps))
        elif self.l_mix < 0.0:
            raise DomainError(f"l_mix must be nonnegative, got {self.l_mix}")

    @classmethod
    def iid(cls, eps=1e6):
        """Independent data: psi vanishes identically."""
        return cls(k_mix=0.0, eps=eps, l_mix=0.0)

    def psi(self, lag):
        try:
            return self.k_mix / (1.0 + abs(lag) ** (1.0 + self.eps))
        except OverflowError:
            return 0.0


def psi_envelope_sum(k_mix, eps, n_terms=100_000):
    """Sum over all integer lags of K / (1 + |z|^(1 + eps)).

    The series is summed explicitly up to ``n_terms`` and the remainder is
    bounded by the integral of z^-(1 + eps).
    """
    if k_mix == 0.0:
        return 0.0
    z = np.arange(1, n_terms + 1, dtype=float)
    with np.errstate(over="ignore"):
        head = math.fsum(1.0 / (1.0 + z ** (1.0 + eps)))
    tail = n_terms ** (-eps) / eps
    return k_mix * (1.0 + 2.0 * (head + tail))


def digamma(x):
    """Digamma function for real x > 0.

    Shifts the argument above 10 with psi(x + 1) = psi(x) + 1/x, then sums
    the asymptotic expansion with eight Bernoulli terms.
    """
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"digamma requires a finite positive argument, got {x}")
    shift = 0.0
    while x < _DIGAMMA_SHIFT:
        shift += 1.0 / x
        x += 1.0
    inv2 = 1.0 / (x * x)
    series = 0.0
    power = inv2
    for n, b in enumerate(_BERNOULLI, start=1):
        series += b / (2 * n) * power
        power *= inv2
    return math.log(x) - 0.5 / x - series - shift


def unit_ball_volume(d, metric=Metric.EUCLIDEAN):
    """Lebesgue volume of the unit ball in R^d under ``metric``."""
    d = int(d)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    metric = Metric.parse(metric)
    if metric is Metric.CHEBYSHEV:
        return 2.0**d
    # pi^(d/2) / Gamma(d/2 + 1) via nu_d = nu_{d-2} * 2 pi / d, exact for d = 1, 2
    vol = 2.0 if d % 2 else 1.0
    for j in range(2 + d % 2, d + 1, 2):
        vol *= 2.0 * math.pi / j
    return vol


def tridiag_det(d, r):
    """Determinant of the d x d tridiagonal Toeplitz matrix with unit diagonal
    and ``r`` on both off-diagonals, by the three-term recurrence."""
    d = int(d)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    prev, cur = 1.0, 1.0  # |S_0| (empty matrix), |S_1|
    for _ in range(2, d + 1):
        prev, cur = cur, cur - r * r * prev
    return cur


def gaussian_entropy(d, r):
    """Entropy in nats of N(0, S_d) with S_d the banded matrix above."""
    det = tridiag_det(d, r)
    if not det > 0.0:
        raise InvalidSpecError(
            f"covariance with d={d}, r={r} is not positive definite (det={det})"
        )
    # d * (per-coordinate term) keeps H(d, 0) == d * H(1, 0) exact
    return d * (0.5 + 0.5 * math.log(2.0 * math.pi)) + 0.5 * math.log(det)


def gamma_tail(k, lam):
    """P(Poisson(lam) <= k - 1), equivalently P(Gamma(k, 1) > lam)."""
    k = int(k)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    lam = float(lam)
    if not lam >= 0.0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    if lam == 0.0:
        return 1.0
    log_lam = math.log(lam)
    terms = [math.exp(-lam + j * log_lam - math.lgamma(j + 1.0)) for j in range(k)]
    return min(1.0, math.fsum(terms))


class LogLogFit(NamedTuple):
    slope: float
    intercept: float


def loglog_fit(points: Sequence[Tuple[float, float]]) -> LogLogFit:
    """Unweighted least-squares line through (log x, log y)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ArityError("points must be a sequence of (x, y) pairs")
    if pts.shape[0] < 2:
        raise ArityError(f"need at least 2 points, got {pts.shape[0]}")
    if not np.all(pts > 0.0) or not np.all(np.isfinite(pts)):
        raise DomainError("log-log fit requires strictly positive finite coordinates")
    lx, ly = np.log(pts[:, 0]), np.log(pts[:, 1])
    if np.unique(pts[:, 0]).size != pts.shape[0]:
        raise DomainError("x-values must be distinct")
    cx = lx - lx.mean()
    slope = float(np.dot(cx, ly - ly.mean()) / np.dot(cx, cx))
    intercept = float(ly.mean() - slope * lx.mean())
    return LogLogFit(slope, intercept)
