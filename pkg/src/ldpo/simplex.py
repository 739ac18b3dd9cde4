"""Geometry and sampling on the probability simplex.

A weight vector lives on the simplex when every entry is nonnegative and the
entries sum to one. Everything here funnels construction through
:func:`validate`, so any `SimplexVector` in circulation satisfies those
invariants. Sampling takes an explicit `numpy.random.Generator`, which keeps
every draw reproducible from its seed and lets each worker own its stream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .errors import (
    EmptyVectorError,
    IndexOutOfRangeError,
    InvalidConcentrationError,
    NegativeWeightError,
    NotNormalizedError,
)

# Entries above -NEGATIVE_TOL are treated as floating-point leakage and
# clamped to zero; anything more negative is rejected.
NEGATIVE_TOL = 1e-12
# |sum - 1| must be within SUM_TOL before renormalization.
SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SimplexVector:
    """A point on the probability simplex (nonnegative weights, unit sum).

    Construct via :func:`validate` or the samplers below; the stored array is
    read-only so instances can be shared freely across threads.
    """

    weights: np.ndarray

    @property
    def m(self) -> int:
        """Number of preference dimensions."""
        return int(self.weights.shape[0])

    def __len__(self) -> int:
        return self.m

    def __getitem__(self, k: int) -> float:
        return float(self.weights[k])

    def __iter__(self) -> Iterator[float]:
        return iter(self.weights.tolist())

    def tolist(self) -> list[float]:
        return self.weights.tolist()

    def __repr__(self) -> str:
        return f"SimplexVector({self.weights.tolist()!r})"


def validate(weights: Sequence[float] | np.ndarray) -> SimplexVector:
    """Check simplex membership and return the canonicalized vector.

    Entries in [-1e-12, 0) are clamped to zero, then the vector is
    renormalized so the sum is exactly one in working precision.

    Raises:
        EmptyVectorError: zero-length input.
        NegativeWeightError: an entry below -1e-12.
        NotNormalizedError: non-finite entries, or sum off by more than 1e-9.
    """
    arr = np.array(weights, dtype=float).reshape(-1)
    if arr.size == 0:
        raise EmptyVectorError("weight vector must have at least one entry")
    if not np.all(np.isfinite(arr)):
        raise NotNormalizedError(f"weights contain non-finite entries: {arr.tolist()}")
    if np.any(arr < -NEGATIVE_TOL):
        raise NegativeWeightError(f"negative weight {arr.min():.3e} below -{NEGATIVE_TOL:g}")
    np.clip(arr, 0.0, None, out=arr)
    total = arr.sum()
    if abs(total - 1.0) > SUM_TOL:
        raise NotNormalizedError(f"weights sum to {total!r}, expected 1 within {SUM_TOL:g}")
    arr /= total
    arr.setflags(write=False)
    return SimplexVector(arr)


def one_hot(m: int, k: int) -> SimplexVector:
    """The vertex of the m-simplex with all mass on coordinate k."""
    if m < 1:
        raise EmptyVectorError(f"m must be >= 1, got {m}")
    if not 0 <= k < m:
        raise IndexOutOfRangeError(f"coordinate {k} outside [0, {m})")
    arr = np.zeros(m)
    arr[k] = 1.0
    return validate(arr)


def uniform_weights(m: int) -> SimplexVector:
    """The barycenter (1/m, ..., 1/m)."""
    if m < 1:
        raise EmptyVectorError(f"m must be >= 1, got {m}")
    return validate(np.full(m, 1.0 / m))


@dataclass(frozen=True, eq=False)
class DirichletParams:
    """Concentration parameters for Dirichlet sampling; all must be > 0."""

    alpha: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.alpha, dtype=float).reshape(-1)
        if arr.size == 0:
            raise EmptyVectorError("alpha must have at least one entry")
        if not np.all(np.isfinite(arr)) or np.any(arr <= 0.0):
            raise InvalidConcentrationError(f"alpha entries must be finite and > 0, got {arr.tolist()}")
        arr.setflags(write=False)
        object.__setattr__(self, "alpha", arr)

    @property
    def m(self) -> int:
        return int(self.alpha.shape[0])


def sample_dirichlet(params: DirichletParams, rng: np.random.Generator) -> SimplexVector:
    """One Dirichlet draw; deterministic for a fixed generator state."""
    return validate(rng.dirichlet(params.alpha))


def sample_uniform(m: int, rng: np.random.Generator) -> SimplexVector:
    """Uniform draw over the simplex, realized as Dirichlet with unit concentration."""
    if m < 1:
        raise EmptyVectorError(f"m must be >= 1, got {m}")
    return sample_dirichlet(DirichletParams(np.ones(m)), rng)


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # first coordinate descending, so the full listing starts at the
    # (1, 0, ..., 0) vertex and ends at (0, ..., 0, 1)
    if parts == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _compositions(total - head, parts - 1):
            yield (head,) + tail


def grid(m: int, resolution: int) -> list[SimplexVector]:
    """All simplex points with coordinates that are multiples of 1/resolution.

    Enumerates every way to split `resolution` units across m coordinates;
    the count is C(resolution + m - 1, m - 1). Ordering is deterministic
    (first coordinate descending), so downstream tables are stable.
    """
    if m < 1:
        raise EmptyVectorError(f"m must be >= 1, got {m}")
    if resolution < 1:
        raise ValueError(f"resolution must be >= 1, got {resolution}")
    points = [validate(np.array(c, dtype=float) / resolution) for c in _compositions(resolution, m)]
    assert len(points) == math.comb(resolution + m - 1, m - 1)
    return points
