"""Evaluators for the bias-rate exponent and Poisson-approximation bounds,
plus Monte-Carlo checks of the Poisson approximation for neighbour counts.

Notation follows the estimator: N other points, a ball of radius
(r / N)^(1/d) around the conditioning point, ``p`` its probability mass
under the stationary law, and W the number of points that fall inside.
"""

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Union

import numpy as np
from scipy.special import gammaln, ndtr
from scipy.stats import poisson

from .core_math import Metric, MixingProfile, MomentProfile
from .errors import ArityError, DomainError
from .processes import (
    GaussianChainSpec,
    RngSeed,
    sample_iid_gaussian,
    simulate_pinned,
    standard_normals,
)


# -- rate exponent --------------------------------------------------------------


@dataclass(frozen=True)
class RateBound:
    """Upper end of the admissible bias-rate exponents and the four terms
    whose minimum defines it."""

    theta_sup: float
    mixing_term: float
    interior_term: float
    tail_term: float
    cross_term: float
    admissible: bool

    @property
    def terms(self):
        return {
            "mixing_term": self.mixing_term,
            "interior_term": self.interior_term,
            "tail_term": self.tail_term,
            "cross_term": self.cross_term,
        }


def theta_interval(d, mixing: MixingProfile, moments: MomentProfile) -> RateBound:
    """Bias decays like log N / N^theta for any theta in (0, theta_sup).

    ``admissible`` reports whether eps > min(d, 1 + sqrt 5); the terms are
    evaluated either way.
    """
    d = int(d)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    eps, r = float(mixing.eps), float(moments.r_mom)
    mixing_term = eps / (1.0 + eps)
    interior_term = (d + r) / (d * (2.0 * d + r))
    tail_term = (d + r) / (2.0 * (2.0 * d + r))
    cross_term = eps * (d + r) / (2.0 * (2.0 * d + r) * (d + 1.0) * (2.0 + eps))
    theta = min(mixing_term, interior_term, tail_term, cross_term)
    admissible = eps > min(d, 1.0 + math.sqrt(5.0))
    return RateBound(theta, mixing_term, interior_term, tail_term, cross_term, admissible)


# -- Stein-Chen bounds ------------------------------------------------------------


def _check_prob(p):
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"probability must lie in [0, 1], got {p}")
    return p


def _check_n(n):
    if int(n) != n or n < 1:
        raise DomainError(f"N must be a positive integer, got {n}")
    return int(n)


def stein_chen_bound(mixing: MixingProfile, beta, n, p):
    """Upper bound on the total-variation distance between the conditional law
    of W and the Poisson law with the same mean:

        5 (1 + K)^2 N^(beta + 1) p^2 + (2 L + K) p,

    valid for beta in [1 / (1 + eps), 1).
    """
    lo = 1.0 / (1.0 + mixing.eps)
    if not lo <= beta < 1.0:
        raise DomainError(f"beta must lie in [{lo:g}, 1), got {beta}")
    n, p = _check_n(n), _check_prob(p)
    k, l = mixing.k_mix, mixing.l_mix
    return 5.0 * (1.0 + k) ** 2 * n ** (beta + 1.0) * p * p + (2.0 * l + k) * p


class SteinChenTerms(NamedTuple):
    b1: float
    b2: float
    b3: float

    @property
    def tv_bound(self):
        return 2.0 * (self.b1 + self.b2 + self.b3)


def window_half_width(n, beta):
    """floor(N^beta), the dependence window used for the neighbourhoods."""
    return int(math.floor(_check_n(n) ** float(beta)))


def stein_chen_terms(
    p_values,
    half_width,
    pair_probs: Union[Callable[[int, int], float], np.ndarray],
    mixing: MixingProfile,
    ball_mass,
    indices=None,
) -> SteinChenTerms:
    """The three Stein-Chen terms for indicators indexed by time.

    The neighbourhood of index j is every index within ``half_width`` of it,
    j included.  ``b1`` and ``b2`` are computed from the supplied marginal and
    pairwise hit probabilities; ``b3`` involves conditional expectations that
    counts cannot reveal, so it is reported as its analytic bound
    (2 L + K) * ball_mass.
    """
    p = np.asarray(p_values, dtype=float).reshape(-1)
    n = p.size
    idx = np.arange(n) if indices is None else np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size != n:
        raise ArityError(f"{idx.size} indices for {n} probabilities")
    if n and np.any(np.diff(idx) <= 0):
        raise DomainError("indices must be strictly increasing")
    w = int(half_width)
    if w < 0:
        raise DomainError(f"half width must be nonnegative, got {w}")

    lo = np.searchsorted(idx, idx - w, side="left")
    hi = np.searchsorted(idx, idx + w, side="right")
    csum = np.concatenate([[0.0], np.cumsum(p)])
    b1 = float(np.dot(p, csum[hi] - csum[lo]))

    if callable(pair_probs):
        b2 = math.fsum(
            float(pair_probs(j, m)) for j in range(n) for m in range(lo[j], hi[j]) if m != j
        )
    else:
        joint = np.asarray(pair_probs, dtype=float)
        if joint.shape != (n, n):
            raise ArityError(f"pair probability matrix must be {n}x{n}, got {joint.shape}")
        mask = np.abs(idx[:, None] - idx[None, :]) <= w
        np.fill_diagonal(mask, False)
        b2 = float(joint[mask].sum())

    b3 = (2.0 * mixing.l_mix + mixing.k_mix) * _check_prob(ball_mass)
    return SteinChenTerms(b1, b2, b3)


class InteriorExponents(NamedTuple):
    mixing: float
    linear: float
    smoothness: float
    decays: bool


def interior_exponents(xi, d, mixing: MixingProfile) -> InteriorExponents:
    """Exponents of N in the three interior-term bounds for split point N^xi.

    ``decays`` requires xi < eps / (2 (1 + eps)) *and* xi < 2 / (2 + d); both
    are needed for every term to vanish.
    """
    xi = float(xi)
    if not 0.0 < xi < 1.0:
        raise DomainError(f"xi must lie in (0, 1), got {xi}")
    d = int(d)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    eps = float(mixing.eps)
    first = 2.0 * xi - eps / (1.0 + eps)
    second = xi - 1.0
    third = ((2.0 + d) * xi - 2.0) / d
    decays = xi < eps / (2.0 * (1.0 + eps)) and xi < 2.0 / (2.0 + d)
    return InteriorExponents(first, second, third, decays)


def binomial_tail_bound(k, mixing: MixingProfile, beta, n, p):
    """Bound on P(k-th neighbour distance > (r/N)^(1/d) | X_i):

        k e^(k + K) N^(k (1 - beta)) exp(-N^(1 - beta) p),

    valid for beta in [1 / (2 + eps), 1).
    """
    k = int(k)
    if k < 1:
        raise DomainError(f"k must be >= 1, got {k}")
    lo = 1.0 / (2.0 + mixing.eps)
    if not lo <= beta < 1.0:
        raise DomainError(f"beta must lie in [{lo:g}, 1), got {beta}")
    n, p = _check_n(n), _check_prob(p)
    m = n ** (1.0 - beta)
    log_bound = math.log(k) + k + mixing.k_mix + k * (1.0 - beta) * math.log(n) - m * p
    return math.exp(log_bound)


# -- empirical laws of neighbour counts ----------------------------------------


@dataclass(frozen=True)
class CountHistogram:
    """Empirical law of a nonnegative integer count."""

    counts: Dict[int, int]
    total: int

    def __post_init__(self):
        counts = {int(j): int(c) for j, c in self.counts.items() if c}
        if any(j < 0 or c < 0 for j, c in counts.items()):
            raise DomainError("counts and their frequencies must be nonnegative")
        if sum(counts.values()) != self.total:
            raise ArityError(f"frequencies sum to {sum(counts.values())}, not {self.total}")
        object.__setattr__(self, "counts", dict(sorted(counts.items())))

    @classmethod
    def from_samples(cls, samples):
        samples = np.asarray(samples, dtype=np.int64).reshape(-1)
        freq = np.bincount(samples) if samples.size else np.zeros(0, np.int64)
        return cls({j: int(c) for j, c in enumerate(freq) if c}, int(samples.size))

    def merge(self, other):
        merged = dict(self.counts)
        for j, c in other.counts.items():
            merged[j] = merged.get(j, 0) + c
        return CountHistogram(merged, self.total + other.total)

    @property
    def support_max(self):
        return max(self.counts) if self.counts else 0

    def frequencies(self, length=None):
        length = self.support_max + 1 if length is None else length
        out = np.zeros(length, np.int64)
        for j, c in self.counts.items():
            if j < length:
                out[j] = c
        return out

    def pmf(self, length=None):
        return self.frequencies(length) / self.total

    def mean(self):
        return math.fsum(j * c for j, c in self.counts.items()) / self.total

    def to_csv(self, path=None):
        """CSV with columns ``j,count``; returns the text when ``path`` is None."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["j", "count"])
        for j, c in self.counts.items():
            writer.writerow([j, c])
        text = buf.getvalue()
        if path is None:
            return text
        with open(path, "w", newline="") as fh:
            fh.write(text)
        return None


def poisson_pmf(j, lam):
    j = np.asarray(j, dtype=float)
    if lam == 0.0:
        return (j == 0).astype(float)
    return np.exp(-lam + j * math.log(lam) - gammaln(j + 1.0))


def empirical_tv_to_poisson(hist: CountHistogram, lam) -> float:
    """Total-variation distance between the histogram and Poisson(lam).

    For laws on the integers this is half the L1 distance between the pmfs;
    the Poisson mass beyond the compared range is added exactly.
    """
    lam = float(lam)
    if not lam >= 0.0:
        raise DomainError(f"lambda must be nonnegative, got {lam}")
    if hist.total <= 0:
        raise ArityError("histogram is empty")
    j_max = hist.support_max + int(math.ceil(10.0 * lam))
    j = np.arange(j_max + 1)
    pois = poisson_pmf(j, lam)
    emp = hist.pmf(j_max + 1)
    tail = 0.0 if lam == 0.0 else float(poisson.sf(j_max, lam))
    tv = 0.5 * (math.fsum(np.abs(emp - pois)) + tail)
    return min(1.0, max(0.0, tv))


def tv_standard_error(hist: CountHistogram, lam=None, n_boot=200, seed=RngSeed(0)):
    """Bootstrap standard error of :func:`empirical_tv_to_poisson`.

    With ``lam`` None the Poisson mean is re-estimated in every resample,
    matching a TV computed against the empirical mean.
    """
    rng = np.random.Generator(seed.bit_generator())
    length = hist.support_max + 1
    pmf = hist.pmf(length)
    stats = np.empty(n_boot)
    for b in range(n_boot):
        freq = rng.multinomial(hist.total, pmf)
        boot = CountHistogram({j: int(c) for j, c in enumerate(freq) if c}, hist.total)
        stats[b] = empirical_tv_to_poisson(boot, boot.mean() if lam is None else lam)
    return float(stats.std(ddof=1))


def marginal_ball_mass(spec: GaussianChainSpec, center, radius, metric=Metric.EUCLIDEAN,
                       n_mc=1_000_000, seed=RngSeed(0, 1 << 32)):
    """Stationary probability of the open ball B(center, radius).

    Exact for d = 1; otherwise a Monte-Carlo estimate from ``n_mc`` iid draws.
    """
    center = np.asarray(center, dtype=float).reshape(-1)
    if center.size != spec.dim:
        raise ArityError(f"center has {center.size} coordinates, expected {spec.dim}")
    if radius <= 0.0:
        return 0.0
    if spec.dim == 1:
        c = float(center[0])
        return float(ndtr(c + radius) - ndtr(c - radius))
    draws = sample_iid_gaussian(spec.dim, spec.band, n_mc, seed).points
    dist = Metric.parse(metric).distance(draws, center)
    return float(np.count_nonzero(dist < radius) / n_mc)


class CountExperiment(NamedTuple):
    histogram: CountHistogram
    lambda_hat: float
    radius: float


def neighbor_count_experiment(
    spec: GaussianChainSpec,
    pin_value,
    n,
    radius_rule,
    replicates=100_000,
    seed=RngSeed(0),
    metric=Metric.EUCLIDEAN,
) -> CountExperiment:
    """Empirical law of W given X_i = pin_value.

    Each replicate simulates N + 1 states pinned at the middle index (its own
    substream: replicate index), and counts the other N states in the open
    ball of radius (radius_rule / N)^(1/d) around the pin.
    """
    n = _check_n(n)
    if replicates < 1:
        raise DomainError(f"replicates must be >= 1, got {replicates}")
    if radius_rule < 0:
        raise DomainError(f"radius rule must be nonnegative, got {radius_rule}")
    metric = Metric.parse(metric)
    pin = np.asarray(pin_value, dtype=float).reshape(-1)
    if pin.size != spec.dim:
        raise ArityError(f"pin value has {pin.size} coordinates, expected {spec.dim}")
    radius = (radius_rule / n) ** (1.0 / spec.dim)
    if radius == 0.0:
        return CountExperiment(CountHistogram({0: replicates}, replicates), 0.0, 0.0)

    length = n + 1
    pin_index = length // 2
    block = max(1, 4_000_000 // (length * spec.dim))
    hist = CountHistogram({}, 0)
    for lo in range(0, replicates, block):
        reps = range(lo, min(replicates, lo + block))
        noise = np.stack([standard_normals(seed.substream(m), (length, spec.dim)) for m in reps])
        paths = simulate_pinned(spec, noise, pin_index, pin)
        inside = metric.distance(paths, pin) < radius
        inside[:, pin_index] = False
        hist = hist.merge(CountHistogram.from_samples(inside.sum(axis=1)))
    return CountExperiment(hist, hist.mean(), radius)


# -- tables -------------------------------------------------------------------


def bound_table_csv(rows, path=None):
    """Two-column ``parameter,value`` CSV of named quantities."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["parameter", "value"])
    for name, value in rows:
        writer.writerow([name, repr(value) if isinstance(value, float) else value])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return None
