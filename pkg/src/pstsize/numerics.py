"""Distribution functions and the seeded random substrate shared by all models.

CDFs and quantiles are thin, validated wrappers around ``scipy.special``;
random variates come from numpy's counter-based Philox generator keyed by
``numpy.random.SeedSequence`` so that every ``(seed, substream_index)`` pair
names its own reproducible stream.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import ConfigurationError, DomainError

__all__ = [
    "RandomStream",
    "McEstimate",
    "std_normal_cdf",
    "std_normal_quantile",
    "student_t_cdf",
    "student_t_quantile",
    "sample_normal",
    "sample_gamma",
    "sample_chi_square",
    "run_bernoulli_mc",
    "BLOCK_SIZE",
]

# Replications per independently keyed block. Fixed so that results do not
# depend on how blocks are spread over workers.
BLOCK_SIZE = 1 << 16

_UINT64_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class RandomStream:
    """Immutable handle on one reproducible random sequence.

    Two streams with the same ``seed`` and ``substream_index`` produce the
    same draws; different indices give independent streams.
    """

    seed: int
    substream_index: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) <= _UINT64_MAX:
            raise DomainError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.substream_index) < 0:
            raise DomainError(f"substream_index must be >= 0, got {self.substream_index}")

    def generator(self, block: int | None = None) -> np.random.Generator:
        """Fresh generator positioned at the start of this stream (or one of its blocks)."""
        key = (int(self.substream_index),) if block is None else (int(self.substream_index), int(block))
        seq = np.random.SeedSequence(int(self.seed), spawn_key=key)
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, index: int) -> "RandomStream":
        return RandomStream(self.seed, index)


StreamLike = Union[RandomStream, np.random.Generator]


def _rng(stream: StreamLike) -> np.random.Generator:
    if isinstance(stream, np.random.Generator):
        return stream
    if isinstance(stream, RandomStream):
        return stream.generator()
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(stream).__name__}")


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo estimate of a probability with its binomial standard error."""

    estimate: float
    std_error: float
    replications: int
    successes: int

    @classmethod
    def from_counts(cls, successes: int, replications: int) -> "McEstimate":
        if replications < 1:
            raise ConfigurationError("replications must be positive", field="reps")
        p = successes / replications
        return cls(p, math.sqrt(p * (1.0 - p) / replications), replications, successes)


def _check_finite(x, name="x"):
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} must be finite")
    return arr


def _check_prob(p, name="p"):
    arr = np.asarray(p, dtype=float)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError(f"{name} must lie strictly inside (0, 1)")
    return arr


def _out(arr):
    return float(arr) if np.ndim(arr) == 0 else arr


def std_normal_cdf(x):
    """Standard normal CDF, scalar or elementwise."""
    return _out(special.ndtr(_check_finite(x)))


def std_normal_quantile(p):
    """Inverse of :func:`std_normal_cdf` on (0, 1)."""
    return _out(special.ndtri(_check_prob(p)))


def _check_df(nu):
    arr = np.asarray(nu, dtype=float)
    if not np.all(arr > 0.0) or np.any(np.isnan(arr)):
        raise DomainError("degrees of freedom must be positive")
    return arr


def student_t_cdf(nu, x):
    """CDF of Student's t with (possibly non-integral) ``nu`` degrees of freedom."""
    return _out(special.stdtr(_check_df(nu), _check_finite(x)))


def student_t_quantile(nu, p):
    """p-quantile of Student's t with ``nu`` degrees of freedom.

    Real-valued ``nu`` is accepted; the posterior degrees of freedom
    ``2 * alpha`` are rarely integral.
    """
    nu = _check_df(nu)
    p = _check_prob(p)
    q = special.stdtrit(nu, p)
    # stdtrit can return a tiny nonzero value at the median
    q = np.where(p == 0.5, 0.0, q)
    return _out(q)


def _check_count(count):
    if int(count) != count or count < 1:
        raise DomainError(f"count must be a positive integer, got {count}")
    return int(count)


def sample_normal(stream: StreamLike, mean: float, sd: float, count: int) -> np.ndarray:
    if not sd > 0:
        raise DomainError(f"sd must be positive, got {sd}")
    return mean + sd * _rng(stream).standard_normal(_check_count(count))


def sample_gamma(stream: StreamLike, shape: float, rate: float, count: int) -> np.ndarray:
    """Gamma variates parameterized by shape and rate (mean ``shape / rate``)."""
    if not (shape > 0 and rate > 0):
        raise DomainError(f"gamma shape and rate must be positive, got {shape}, {rate}")
    return _rng(stream).standard_gamma(shape, _check_count(count)) / rate


def sample_chi_square(stream: StreamLike, df: int, count: int) -> np.ndarray:
    if not df >= 1:
        raise DomainError(f"chi-square df must be >= 1, got {df}")
    return 2.0 * _rng(stream).standard_gamma(0.5 * df, _check_count(count))


def run_bernoulli_mc(
    kernel: Callable[[np.random.Generator, int], int],
    stream: RandomStream,
    reps: int,
    workers: int = 1,
    min_reps: int = 1000,
) -> McEstimate:
    """Estimate a success probability by splitting ``reps`` into keyed blocks.

    ``kernel(rng, size)`` simulates ``size`` replications and returns the
    number of successes. Block ``b`` always draws from ``stream.generator(b)``,
    so the estimate is identical for every ``workers`` value.
    """
    if int(reps) != reps or reps < min_reps:
        raise ConfigurationError(f"reps must be an integer >= {min_reps}, got {reps}", field="reps")
    reps = int(reps)
    n_blocks = -(-reps // BLOCK_SIZE)
    sizes = [BLOCK_SIZE] * (n_blocks - 1) + [reps - BLOCK_SIZE * (n_blocks - 1)]

    def one(b):
        return int(kernel(stream.generator(b), sizes[b]))

    if workers <= 1 or n_blocks == 1:
        successes = sum(one(b) for b in range(n_blocks))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            successes = sum(pool.map(one, range(n_blocks)))
    return McEstimate.from_counts(successes, reps)
