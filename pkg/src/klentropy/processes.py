"""Samplers for the stationary Gaussian Markov chain with banded marginal
covariance, its iid counterpart, and chains pinned at a fixed state.

The chain has marginal N(0, S) with S tridiagonal (unit diagonal, ``band``
off the diagonal) and lag-one cross-covariance ``temporal * I``, so that

    X[t+1] | X[t] ~ N(temporal * S^-1 X[t],  S - temporal^2 S^-1).

The pair law is symmetric in (X[t], X[t+1]), so the chain is reversible and
the same kernel also runs it backwards in time.

Random numbers: every (seed, stream) pair owns an independent Philox
stream; normals come from uniforms on the open unit interval pushed through
the inverse normal CDF.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import ndtri

from .errors import ArityError, DecompositionError, DomainError, InvalidSpecError
from .neighbors import Dataset, as_dataset

_UINT64_MAX = (1 << 64) - 1
_TWO_POW_M53 = 2.0**-53


@dataclass(frozen=True)
class RngSeed:
    """64-bit seed plus a substream index; together they fix a sample path."""

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _UINT64_MAX:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise DomainError(f"stream must be nonnegative, got {self.stream}")

    def bit_generator(self):
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Philox(ss)

    def substream(self, stream):
        return RngSeed(self.seed, stream)


def standard_normals(seed, shape):
    """Standard normal array of ``shape`` drawn from ``seed``'s stream.

    Each variate consumes one 64-bit word; the top 53 bits give a uniform
    on (0, 1) which is mapped through the inverse normal CDF.
    """
    bitgen = seed.bit_generator() if isinstance(seed, RngSeed) else seed
    size = int(np.prod(shape, dtype=np.int64))
    raw = bitgen.random_raw(size) if size else np.empty(0, np.uint64)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_POW_M53
    return ndtri(u).reshape(shape)


def build_sigma(d, r):
    """d x d tridiagonal Toeplitz matrix: ones on the diagonal, r beside it."""
    d = int(d)
    if d < 1:
        raise DomainError(f"dimension must be >= 1, got {d}")
    sigma = np.eye(d)
    idx = np.arange(d - 1)
    sigma[idx, idx + 1] = r
    sigma[idx + 1, idx] = r
    return sigma


def cholesky(matrix):
    """Lower-triangular L with L @ L.T == matrix.

    Raises :class:`DecompositionError` if the matrix is not symmetric
    positive definite.
    """
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ArityError(f"expected a square matrix, got shape {m.shape}")
    if not np.allclose(m, m.T, rtol=0.0, atol=1e-12):
        raise DecompositionError("matrix is not symmetric")
    try:
        return np.linalg.cholesky(m)
    except np.linalg.LinAlgError as exc:
        raise DecompositionError(f"matrix is not positive definite: {exc}") from None


def _matvec(mat, x):
    """``x @ mat.T`` over the last axis, summed in a fixed coordinate order.

    Elementwise ufuncs keep results identical whatever the batch shape or
    BLAS threading.
    """
    out = x[..., 0:1] * mat[:, 0]
    for j in range(1, mat.shape[1]):
        out += x[..., j : j + 1] * mat[:, j]
    return out


@dataclass(frozen=True)
class GaussianChainSpec:
    """Stationary Gaussian chain: dimension, band parameter r and temporal
    correlation rho.  Construction fails unless both the marginal and the
    transition covariance are positive definite."""

    dim: int
    band: float
    temporal: float
    sigma: np.ndarray = field(init=False, repr=False, compare=False)
    sigma_chol: np.ndarray = field(init=False, repr=False, compare=False)
    mean_matrix: np.ndarray = field(init=False, repr=False, compare=False)
    transition_cov: np.ndarray = field(init=False, repr=False, compare=False)
    transition_chol: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidSpecError(f"dim must be a positive integer, got {self.dim}")
        object.__setattr__(self, "dim", int(self.dim))
        for name in ("band", "temporal"):
            v = float(getattr(self, name))
            if not -1.0 < v < 1.0:
                raise InvalidSpecError(f"{name} must lie in (-1, 1), got {v}")
            object.__setattr__(self, name, v)
        sigma = build_sigma(self.dim, self.band)
        try:
            chol = cholesky(sigma)
        except DecompositionError as exc:
            raise InvalidSpecError(f"marginal covariance: {exc}") from None
        sigma_inv = cho_solve((chol, True), np.eye(self.dim))
        sigma_inv = 0.5 * (sigma_inv + sigma_inv.T)
        trans_cov = sigma - self.temporal**2 * sigma_inv
        trans_cov = 0.5 * (trans_cov + trans_cov.T)
        try:
            trans_chol = cholesky(trans_cov)
        except DecompositionError as exc:
            raise InvalidSpecError(f"transition covariance: {exc}") from None
        for name, value in (
            ("sigma", sigma),
            ("sigma_chol", chol),
            ("mean_matrix", self.temporal * sigma_inv),
            ("transition_cov", trans_cov),
            ("transition_chol", trans_chol),
        ):
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    def step(self, state, noise):
        """One transition; also valid backwards in time by reversibility."""
        return _matvec(self.mean_matrix, state) + _matvec(self.transition_chol, noise)

    def stationary(self, noise):
        return _matvec(self.sigma_chol, noise)


def simulate_chains(spec, noise):
    """Run independent stationary chains from pre-drawn standard normals.

    ``noise`` has shape (..., length, d); row 0 seeds the stationary start
    and row t drives the transition into state t.
    """
    noise = np.asarray(noise, dtype=float)
    out = np.empty_like(noise)
    out[..., 0, :] = spec.stationary(noise[..., 0, :])
    for t in range(1, noise.shape[-2]):
        out[..., t, :] = spec.step(out[..., t - 1, :], noise[..., t, :])
    return out


def simulate_pinned(spec, noise, pin_index, pin_values):
    """Chains conditioned on X[pin_index] = pin_values, from pre-drawn normals.

    States after the pin are run forward, states before it backward.  Row
    ``pin_index`` of ``noise`` is unused.
    """
    noise = np.asarray(noise, dtype=float)
    length = noise.shape[-2]
    out = np.empty_like(noise)
    out[..., pin_index, :] = pin_values
    for t in range(pin_index + 1, length):
        out[..., t, :] = spec.step(out[..., t - 1, :], noise[..., t, :])
    for t in range(pin_index - 1, -1, -1):
        out[..., t, :] = spec.step(out[..., t + 1, :], noise[..., t, :])
    return out


def _check_length(length):
    if int(length) != length or length < 1:
        raise ArityError(f"length must be a positive integer, got {length}")
    return int(length)


def sample_stationary_chain(spec, length, seed):
    """``length`` consecutive states, the first drawn exactly from N(0, S)."""
    length = _check_length(length)
    noise = standard_normals(seed, (length, spec.dim))
    return Dataset(simulate_chains(spec, noise))


def sample_iid_gaussian(d, r, length, seed):
    """``length`` independent draws from N(0, S_d)."""
    length = _check_length(length)
    spec = GaussianChainSpec(d, r, 0.0)
    noise = standard_normals(seed, (length, spec.dim))
    return Dataset(spec.stationary(noise))


def sample_pinned_chain(spec, length, pin_index, pin_value, seed):
    """A chain of ``length`` states conditioned on X[pin_index] == pin_value."""
    length = _check_length(length)
    if not 0 <= pin_index < length:
        raise ArityError(f"pin index {pin_index} out of range [0, {length})")
    pin = np.asarray(pin_value, dtype=float).reshape(-1)
    if pin.size != spec.dim:
        raise ArityError(f"pin value has {pin.size} coordinates, expected {spec.dim}")
    noise = standard_normals(seed, (length, spec.dim))
    return Dataset(simulate_pinned(spec, noise, int(pin_index), pin))


def dataset_to_csv(data, path=None):
    """CSV with header ``x0,...,x{d-1}`` and one row per time index.

    Floats are written with ``repr`` so values round-trip exactly.  Returns
    the text when ``path`` is None.
    """
    data = as_dataset(data)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([f"x{j}" for j in range(data.dim)])
    for row in data.points:
        writer.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is None:
        return text
    with open(path, "w", newline="") as fh:
        fh.write(text)
    return None


def dataset_from_csv(path):
    """Read a dataset written by :func:`dataset_to_csv` (header row required)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ArityError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if not body:
        raise ArityError(f"{path}: no data rows")
    ragged = [i for i, r in enumerate(body, start=2) if len(r) != len(header)]
    if ragged:
        raise ArityError(f"{path}: line {ragged[0]} does not match the {len(header)}-column header")
    try:
        values = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise DomainError(f"{path}: {exc}") from None
    if values.ndim != 2 or values.shape[1] != len(header):
        raise ArityError(f"{path}: rows do not match the {len(header)}-column header")
    return Dataset(values)
