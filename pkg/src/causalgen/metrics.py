"""Evaluation metrics and nonparametric statistics for technique comparison.

Covers per-session violation counts, violation series over execution
intervals, compression-based suite diversity (test set diameter over
inputs), and the Friedman test with Dunn post-hoc pairwise comparisons.
"""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.stats import rankdata

from .citest import chi2_sf
from .engine import SessionReport

__all__ = [
    "MetricError",
    "ComparisonMatrix",
    "violations",
    "efficiency_series",
    "ncd",
    "tsd_i",
    "FriedmanResult",
    "friedman",
    "DunnResult",
    "dunn",
]

COMPRESSION_LEVEL = 9


class MetricError(ValueError):
    """Raised for malformed metric inputs."""


@dataclass(frozen=True)
class ComparisonMatrix:
    """Blocks-by-techniques matrix of a metric, one row per repetition."""

    techniques: tuple[str, ...]
    blocks: np.ndarray

    def __init__(self, techniques: Sequence[str], blocks):
        techniques = tuple(techniques)
        arr = np.asarray(blocks, dtype=float)
        if arr.ndim != 2:
            raise MetricError("blocks must be a 2d matrix")
        n, k = arr.shape
        if k < 2 or len(techniques) != k:
            raise MetricError("need >= 2 techniques matching the column count")
        if n < 2:
            raise MetricError("need >= 2 repetition blocks")
        if len(set(techniques)) != k:
            raise MetricError("duplicate technique names")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "techniques", techniques)
        object.__setattr__(self, "blocks", arr)

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def n_techniques(self) -> int:
        return self.blocks.shape[1]

    def column(self, technique: str) -> np.ndarray:
        try:
            return self.blocks[:, self.techniques.index(technique)]
        except ValueError:
            raise MetricError(f"unknown technique {technique!r}") from None


def violations(report: SessionReport, include_bootstrap: bool = False) -> int:
    """Count of violating records; searched executions only by default."""
    return report.violations(include_bootstrap)


def efficiency_series(report: SessionReport, interval: int) -> list[int]:
    """Violations per consecutive execution-index interval, search phase.

    With interval 5 and violations at search indices 3 and 7 the series is
    [1, 1].  A trailing partial interval still contributes an entry.
    """
    if interval < 1:
        raise MetricError("interval must be >= 1")
    searched = report.search_records()
    n_bins = math.ceil(len(searched) / interval)
    series = [0] * n_bins
    for i, rec in enumerate(searched):
        if rec.violation:
            series[i // interval] += 1
    return series


def _compressed_size(payload: bytes) -> int:
    return len(zlib.compress(payload, COMPRESSION_LEVEL))


def ncd(x: bytes, y: bytes, compressor: Callable[[bytes], int] | None = None) -> float:
    """Normalized compression distance between two byte strings.

    (C(xy) - min(C(x), C(y))) / max(C(x), C(y)) with C the compressed size
    under one fixed general-purpose compressor, so values are stable across
    runs.
    """
    if not x or not y:
        raise MetricError("ncd needs non-empty byte strings")
    c = compressor or _compressed_size
    cx, cy, cxy = c(x), c(y), c(x + y)
    return (cxy - min(cx, cy)) / max(cx, cy)


def _encode_test(test: Sequence[str]) -> bytes:
    if not test:
        raise MetricError("cannot encode an empty test")
    return ",".join(str(label) for label in test).encode()


def tsd_i(suite: Sequence[Sequence[str]], compressor: Callable[[bytes], int] | None = None) -> float:
    """Test set diameter over inputs: multiset compression diversity.

    Each test is one comma-joined label string in fixed variable order; the
    suite concatenates the sorted encodings newline-separated, making the
    value invariant to suite ordering.  The multiset distance is
    (C(all) - min_t C(t)) / max_t C(all without t).
    """
    if len(suite) < 2:
        raise MetricError("tsd_i needs a suite of at least 2 tests")
    c = compressor or _compressed_size
    encoded = sorted(_encode_test(t) for t in suite)
    whole = c(b"\n".join(encoded))
    singles = [c(e) for e in encoded]
    leave_one_out = [
        c(b"\n".join(encoded[:i] + encoded[i + 1:])) for i in range(len(encoded))
    ]
    return (whole - min(singles)) / max(leave_one_out)


@dataclass(frozen=True)
class FriedmanResult:
    """Friedman rank test over a blocks-by-techniques matrix."""

    statistic: float
    dof: int
    p_value: float
    mean_ranks: tuple[float, ...]


def friedman(matrix: ComparisonMatrix) -> FriedmanResult:
    """Friedman chi-squared with mid-rank ties and tie correction.

    A matrix whose blocks are each entirely tied (all columns equal) has an
    undefined rank variance; it degenerates to statistic 0 and p = 1.
    """
    blocks = matrix.blocks
    n, k = blocks.shape
    ranks = np.vstack([rankdata(row) for row in blocks])
    mean_ranks = ranks.mean(axis=0)
    statistic = 12.0 * n / (k * (k + 1)) * float(
        np.sum((mean_ranks - (k + 1) / 2.0) ** 2)
    )
    # tie correction: per block, sum of t^3 - t over tie groups
    tie_sum = 0.0
    for row in blocks:
        _, counts = np.unique(row, return_counts=True)
        tie_sum += float(np.sum(counts.astype(float) ** 3 - counts))
    correction = 1.0 - tie_sum / (n * k * (k * k - 1))
    if correction <= 0.0:
        return FriedmanResult(0.0, k - 1, 1.0, tuple(float(r) for r in mean_ranks))
    statistic /= correction
    return FriedmanResult(
        statistic=statistic,
        dof=k - 1,
        p_value=chi2_sf(statistic, k - 1),
        mean_ranks=tuple(float(r) for r in mean_ranks),
    )


@dataclass(frozen=True)
class DunnResult:
    """Pairwise Dunn comparisons after a Friedman test."""

    techniques: tuple[str, ...]
    z: np.ndarray
    p_raw: np.ndarray
    p_adjusted: np.ndarray
    adjustment: str

    def pair(self, a: str, b: str) -> tuple[float, float, float]:
        """(z, raw p, adjusted p) for an ordered technique pair."""
        i = self.techniques.index(a)
        j = self.techniques.index(b)
        return float(self.z[i, j]), float(self.p_raw[i, j]), float(self.p_adjusted[i, j])


def _holm(p_values: np.ndarray) -> np.ndarray:
    """Holm step-down adjustment with enforced monotonicity."""
    m = p_values.shape[0]
    order = np.argsort(p_values, kind="stable")
    adjusted = np.empty(m)
    running = 0.0
    for rank, idx in enumerate(order):
        running = max(running, (m - rank) * p_values[idx])
        adjusted[idx] = min(running, 1.0)
    return adjusted


def dunn(matrix: ComparisonMatrix, adjustment: str = "holm") -> DunnResult:
    """Pairwise z tests on Friedman mean ranks.

    z = (mean rank a - mean rank b) / sqrt(k(k+1) / 6N); two-sided p from
    the normal distribution, then the chosen multiplicity adjustment.
    """
    if adjustment not in ("holm", "bonferroni", "none"):
        raise MetricError(f"unknown adjustment {adjustment!r}")
    blocks = matrix.blocks
    n, k = blocks.shape
    ranks = np.vstack([rankdata(row) for row in blocks])
    mean_ranks = ranks.mean(axis=0)
    se = math.sqrt(k * (k + 1) / (6.0 * n))

    z = np.zeros((k, k))
    p_raw = np.ones((k, k))
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    flat = np.empty(len(pairs))
    for idx, (i, j) in enumerate(pairs):
        zij = (mean_ranks[i] - mean_ranks[j]) / se
        pij = math.erfc(abs(zij) / math.sqrt(2.0))
        z[i, j], z[j, i] = zij, -zij
        p_raw[i, j] = p_raw[j, i] = min(pij, 1.0)
        flat[idx] = min(pij, 1.0)

    if adjustment == "none":
        adjusted_flat = flat
    elif adjustment == "bonferroni":
        adjusted_flat = np.minimum(flat * len(pairs), 1.0)
    else:
        adjusted_flat = _holm(flat)

    p_adjusted = np.ones((k, k))
    for idx, (i, j) in enumerate(pairs):
        p_adjusted[i, j] = p_adjusted[j, i] = adjusted_flat[idx]

    z.setflags(write=False)
    p_raw.setflags(write=False)
    p_adjusted.setflags(write=False)
    return DunnResult(
        techniques=matrix.techniques,
        z=z,
        p_raw=p_raw,
        p_adjusted=p_adjusted,
        adjustment=adjustment,
    )
