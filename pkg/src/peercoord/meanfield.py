"""Weighted neighborhood statistics.

A neighborhood of states {s_m} with weights {w_m} is summarized by the
weighted mean mu = sum(w s) / sum(w), the weighted variance
sigma2 = sum(w (s - mu)^2) / sum(w), and the total weight W = sum(w).
States may be vectors; statistics are componentwise under a shared weight.

The incremental single-point update and the two-set parallel merge are the
weighted forms of Welford's online algorithm, so message-passing aggregation
never needs the raw state sets.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import EmptyInput, EmptyPartition, InvalidParams, LengthMismatch, NonPositiveWeight


def _as_vector(s) -> np.ndarray:
    v = np.atleast_1d(np.asarray(s, dtype=float))
    if v.ndim != 1:
        raise ValueError(f"state must be scalar or 1-d, got shape {v.shape}")
    return v


@dataclass(frozen=True)
class MeanFieldStats:
    """Immutable (mean, variance, total weight, count) summary of a weighted set."""

    mean: np.ndarray
    var: np.ndarray
    weight: float
    count: int

    def __post_init__(self):
        object.__setattr__(self, "mean", _as_vector(self.mean))
        object.__setattr__(self, "var", _as_vector(self.var))
        if self.count > 0 and self.weight <= 0:
            raise NonPositiveWeight(f"non-empty stats need positive weight, got {self.weight}")
        if self.count > 0 and np.any(self.var < -1e-12):
            raise ValueError(f"negative variance {self.var}")

    @property
    def dim(self) -> int:
        return len(self.mean)

    @property
    def is_empty(self) -> bool:
        return self.count == 0

    @property
    def max_var(self) -> float:
        """Largest componentwise variance; the scalar used by bound diagnostics."""
        return float(np.max(self.var))

    def scaled(self, factor: float) -> "MeanFieldStats":
        """Same distributional summary at `factor` times the total weight.

        Mean and variance are invariant under uniform weight scaling; only
        the influence in later merges changes.
        """
        if self.is_empty:
            return self
        if factor <= 0:
            raise NonPositiveWeight(f"scale factor must be positive, got {factor}")
        return MeanFieldStats(self.mean, self.var, self.weight * factor, self.count)

    def to_wire(self) -> bytes:
        """Fixed-size wire record: dim, mean vector, variance vector, weight, count."""
        dim = self.dim if not self.is_empty else 1
        mean = np.zeros(dim) if self.is_empty else self.mean
        var = np.zeros(dim) if self.is_empty else self.var
        return struct.pack(
            f"<I{dim}d{dim}ddQ", dim, *mean.tolist(), *var.tolist(), self.weight, self.count
        )

    @staticmethod
    def from_wire(payload: bytes) -> "MeanFieldStats":
        (dim,) = struct.unpack_from("<I", payload)
        vals = struct.unpack_from(f"<{dim}d{dim}ddQ", payload, 4)
        mean = np.array(vals[:dim])
        var = np.array(vals[dim:2 * dim])
        weight, count = vals[2 * dim], int(vals[2 * dim + 1])
        if count == 0:
            return empty_stats(dim)
        return MeanFieldStats(mean, var, weight, count)


def empty_stats(dim: int = 1) -> MeanFieldStats:
    """Identity element for merge."""
    return MeanFieldStats(np.zeros(dim), np.zeros(dim), 0.0, 0)


@dataclass(frozen=True)
class PartitionedStats:
    """Per-subgroup statistics: list of (subgroup size, MeanFieldStats)."""

    per_group: tuple

    def __post_init__(self):
        for size, _stats in self.per_group:
            if size < 1:
                raise ValueError(f"subgroup size must be >= 1, got {size}")

    @property
    def merged(self) -> MeanFieldStats:
        out = empty_stats(self.per_group[0][1].dim if self.per_group else 1)
        for _size, st in self.per_group:
            out = merge(out, st)
        return out


@dataclass(frozen=True)
class BoundParams:
    """Smoothness constant and minimum weight entering the error bounds."""

    L2: float = 1.0
    w_min: float = 1.0

    def __post_init__(self):
        if self.L2 <= 0 or self.w_min <= 0:
            raise InvalidParams(f"L2 and w_min must be positive, got {self.L2}, {self.w_min}")


def aggregate(states, weights) -> MeanFieldStats:
    """Batch weighted mean/variance over states (scalars or equal-length vectors)."""
    states = list(states)
    weights = list(weights)
    if not states:
        raise EmptyInput("no states to aggregate")
    if len(states) != len(weights):
        raise LengthMismatch(f"{len(states)} states vs {len(weights)} weights")
    w = np.asarray(weights, dtype=float)
    if np.any(w <= 0):
        raise NonPositiveWeight("all weights must be positive")
    vecs = np.stack([_as_vector(s) for s in states])
    total = float(w.sum())
    mean = (w[:, None] * vecs).sum(axis=0) / total
    var = (w[:, None] * (vecs - mean) ** 2).sum(axis=0) / total
    return MeanFieldStats(mean, np.maximum(var, 0.0), total, len(states))


def welford_update(prior: MeanFieldStats, s, w: float) -> MeanFieldStats:
    """Add one weighted point to existing statistics.

    mu' = mu + (w/W')(s - mu);  sigma2' = (W/W') sigma2 + (w/W')(s - mu)(s - mu')
    with W' = W + w. Equals the batch aggregate over the extended set.
    """
    if w <= 0:
        raise NonPositiveWeight(f"point weight must be positive, got {w}")
    s = _as_vector(s)
    if prior.is_empty:
        return MeanFieldStats(s, np.zeros_like(s), float(w), 1)
    new_weight = prior.weight + w
    delta = s - prior.mean
    mean = prior.mean + (w / new_weight) * delta
    var = (prior.weight / new_weight) * prior.var + (w / new_weight) * delta * (s - mean)
    return MeanFieldStats(mean, np.maximum(var, 0.0), new_weight, prior.count + 1)


def merge(a: MeanFieldStats, b: MeanFieldStats) -> MeanFieldStats:
    """Combine two disjoint summaries; commutative and associative.

    The empty summary is the identity. Uses the parallel variance merge:
    the pooled sum of squared deviations is M_a + M_b + delta^2 W_a W_b / W.
    """
    if a.is_empty:
        return b
    if b.is_empty:
        return a
    total = a.weight + b.weight
    delta = b.mean - a.mean
    mean = a.mean + delta * (b.weight / total)
    m2 = a.var * a.weight + b.var * b.weight + delta**2 * (a.weight * b.weight / total)
    return MeanFieldStats(mean, np.maximum(m2 / total, 0.0), total, a.count + b.count)


def error_bounds(
    full: MeanFieldStats,
    neighborhood_size: int,
    partitioned: PartitionedStats | None,
    p: BoundParams,
) -> tuple[float, float | None]:
    """Diagnostic bounds on the reward error of summarizing a neighborhood.

    single = (L2 / 2 w_min) * |N| * sigma2 over the whole neighborhood;
    partitioned = (L2 / 2 w_min) * sum_p |N^(p)| * sigma2^(p). Under uniform
    weights the partitioned form is never larger (between-group variance is
    non-negative), and is strictly smaller when subgroup means differ.
    Vector states use the largest componentwise variance.
    """
    if neighborhood_size < 1:
        raise InvalidParams(f"neighborhood_size must be >= 1, got {neighborhood_size}")
    scale = p.L2 / (2.0 * p.w_min)
    single = scale * neighborhood_size * (0.0 if full.is_empty else full.max_var)
    if partitioned is None:
        return single, None
    part = scale * sum(size * st.max_var for size, st in partitioned.per_group)
    return single, part


def variance_decomposition(partitioned: PartitionedStats) -> tuple[float, float, float]:
    """Law of total variance over a weighted partition.

    within = sum_p (W_p/W) sigma2_p, between = sum_p (W_p/W)(mu_p - mu)^2,
    and within + between = total exactly. Vector states reduce via the
    largest-variance component of the pooled summary.
    """
    if not partitioned.per_group:
        raise EmptyPartition("no groups")
    pooled = partitioned.merged
    total_weight = pooled.weight
    comp = int(np.argmax(pooled.var))
    within = sum(
        (st.weight / total_weight) * float(st.var[comp]) for _s, st in partitioned.per_group
    )
    between = sum(
        (st.weight / total_weight) * float((st.mean[comp] - pooled.mean[comp]) ** 2)
        for _s, st in partitioned.per_group
    )
    return within, between, float(pooled.var[comp])
