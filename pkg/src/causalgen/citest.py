"""Conditional independence testing on categorical data.

The default test is the likelihood-ratio G statistic computed per
configuration of the conditioning set, with degrees of freedom adjusted for
zero margins and a minimum-count guard against sparse configurations.  A
Pearson chi-square variant sits behind the same interface.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import gammaincc

from .data import Dataset

__all__ = ["CITestResult", "chi2_sf", "g2_test", "ci_test"]

# a conditioning-set configuration enters the statistic only when its total
# count reaches this multiple of the contingency cell count
MIN_COUNT_MULTIPLIER = 5


@dataclass(frozen=True)
class CITestResult:
    """Outcome of one conditional independence test.

    configs_used counts the conditioning-set configurations that passed the
    minimum-count guard; zero means the verdict rests on no evidence at all.
    """

    statistic: float
    dof: int
    p_value: float
    independent: bool
    configs_used: int


def chi2_sf(x: float, k: int) -> float:
    """Upper-tail probability of the chi-square distribution with k dof.

    Computed through the regularized upper incomplete gamma function.
    """
    if x < 0:
        raise ValueError("statistic must be non-negative")
    if k < 1:
        raise ValueError("degrees of freedom must be >= 1")
    return float(gammaincc(k / 2.0, x / 2.0))


def _config_tables(
    data: Dataset, x: str, y: str, given: Sequence[str]
) -> np.ndarray:
    """Contingency counts with shape (n_z_configs, |x|, |y|)."""
    cx = data.column(x)
    cy = data.column(y)
    kx = data.variable(x).cardinality
    ky = data.variable(y).cardinality
    z_index = np.zeros(data.n_rows, dtype=np.int64)
    n_cfg = 1
    for name in given:
        col = data.column(name)
        card = data.variable(name).cardinality
        z_index = z_index * card + col
        n_cfg *= card
    flat = (z_index * kx + cx) * ky + cy
    counts = np.bincount(flat, minlength=n_cfg * kx * ky)
    return counts.reshape(n_cfg, kx, ky).astype(float)


def g2_test(
    data: Dataset,
    x: str,
    y: str,
    given: Sequence[str] = (),
    alpha: float = 0.01,
    method: str = "g2",
) -> CITestResult:
    """Test x independent of y given a set of conditioning variables.

    The statistic sums over conditioning configurations with enough data;
    degrees of freedom drop (rows-with-data - 1) * (cols-with-data - 1) per
    configuration.  Zero degrees of freedom force an independent verdict.
    """
    given = tuple(given)
    if x == y:
        raise ValueError("x and y must differ")
    if x in given or y in given:
        raise ValueError("conditioning set may not contain x or y")
    if len(set(given)) != len(given):
        raise ValueError("conditioning set has duplicates")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    if method not in ("g2", "pearson"):
        raise ValueError(f"unknown test method {method!r}")

    tables = _config_tables(data, x, y, given)
    kx, ky = tables.shape[1], tables.shape[2]
    min_total = MIN_COUNT_MULTIPLIER * kx * ky

    statistic = 0.0
    dof = 0
    used = 0
    for table in tables:
        total = table.sum()
        if total <= 0:
            continue
        if total < min_total:
            continue
        used += 1
        rows = table.sum(axis=1)
        cols = table.sum(axis=0)
        r_nz = int((rows > 0).sum())
        c_nz = int((cols > 0).sum())
        dof += max(r_nz - 1, 0) * max(c_nz - 1, 0)
        expected = np.outer(rows, cols) / total
        if method == "g2":
            mask = table > 0
            statistic += 2.0 * float(
                (table[mask] * np.log(table[mask] / expected[mask])).sum()
            )
        else:
            mask = expected > 0
            statistic += float(
                ((table[mask] - expected[mask]) ** 2 / expected[mask]).sum()
            )

    if dof <= 0:
        return CITestResult(
            statistic=0.0, dof=0, p_value=1.0, independent=True, configs_used=used
        )
    p = chi2_sf(statistic, dof)
    return CITestResult(
        statistic=statistic,
        dof=dof,
        p_value=p,
        independent=p > alpha,
        configs_used=used,
    )


def ci_test(
    data: Dataset,
    x: str,
    y: str,
    given: Sequence[str] = (),
    alpha: float = 0.01,
    method: str = "g2",
) -> CITestResult:
    """Alias making the method choice explicit at call sites."""
    return g2_test(data, x, y, given, alpha=alpha, method=method)
