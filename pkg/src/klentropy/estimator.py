"""Kozachenko-Leonenko entropy estimator, the known-density plug-in
estimator, and mutual information built from three entropy estimates."""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core_math import Metric, digamma, unit_ball_volume
from .errors import ArityError, DomainError
from .neighbors import as_dataset, knn_distances


@dataclass(frozen=True)
class EstimatorConfig:
    k: int = 1
    metric: Metric = Metric.EUCLIDEAN

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise DomainError(f"k must be a positive integer, got {self.k}")
        object.__setattr__(self, "k", int(self.k))
        object.__setattr__(self, "metric", Metric.parse(self.metric))


@dataclass(frozen=True)
class EntropyEstimate:
    value: float
    n_points: int
    per_point_terms: Optional[np.ndarray] = None


def kl_entropy(data, config=EstimatorConfig(), keep_terms=False, method="tree"):
    """Kozachenko-Leonenko k-NN estimate of differential entropy in nats.

    With N + 1 points, rho_i the distance from point i to its k-th nearest
    neighbour and nu_d the unit-ball volume, the estimate is the mean of

        log Y_i = log N + d log rho_i + log nu_d - digamma(k).

    Note the factor is N (the number of *other* points), not N + 1.
    """
    data = as_dataset(data)
    rho = knn_distances(data, config.k, config.metric, method=method).distances
    n_other = data.n_points - 1
    offset = math.log(n_other) + math.log(unit_ball_volume(data.dim, config.metric)) - digamma(config.k)
    terms = offset + data.dim * np.log(rho)
    # fsum is correctly rounded, hence independent of point order and thread schedule
    value = math.fsum(terms) / terms.size
    return EntropyEstimate(value, data.n_points, terms if keep_terms else None)


def plug_in_entropy(data, log_density: Callable[[np.ndarray], float]) -> float:
    """Negative mean log-density over the sample; needs the true density."""
    data = as_dataset(data)
    vals = np.array([float(log_density(x)) for x in data.points])
    bad = np.flatnonzero(~np.isfinite(vals))
    if bad.size:
        raise DomainError(f"log-density is not finite at index {int(bad[0])}")
    return -math.fsum(vals) / vals.size


def mutual_information(data_x, data_y, config=EstimatorConfig(), method="tree"):
    """I(X; Y) = H(X) + H(Y) - H(X, Y), each term by :func:`kl_entropy`."""
    x = as_dataset(data_x)
    y = as_dataset(data_y)
    if x.n_points != y.n_points:
        raise ArityError(f"length mismatch: {x.n_points} vs {y.n_points} points")
    # canonical column order so that swapping X and Y changes no floating-point operation
    if (y.dim, y.points.tobytes()) < (x.dim, x.points.tobytes()):
        x, y = y, x
    joint = np.hstack([x.points, y.points])
    hx = kl_entropy(x, config, method=method).value
    hy = kl_entropy(y, config, method=method).value
    hxy = kl_entropy(joint, config, method=method).value
    return hx + hy - hxy
