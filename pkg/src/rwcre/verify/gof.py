"""Goodness-of-fit statistics: one-sample KS and pooled Pearson chi-square."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import stats

from .oracle import Pmf

MIN_EXPECTED = 5.0


@dataclass
class GofReport:
    statistic: float
    p_value: float
    n: int
    target: str
    dof: int | None = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError(f"p-value {self.p_value} outside [0, 1]")

    def to_dict(self) -> dict:
        out = {"statistic": self.statistic, "p_value": self.p_value, "n": self.n,
               "target": self.target}
        if self.dof is not None:
            out["dof"] = self.dof
        out.update(self.extra)
        return out


def ks_statistic(samples, cdf: Callable) -> float:
    """Sup distance between the empirical CDF of ``samples`` and ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    n = x.size
    if n == 0:
        raise ValueError("KS statistic needs at least one sample")
    try:
        F = np.asarray(cdf(x), dtype=np.float64)
        if F.shape != x.shape:
            raise TypeError
    except (TypeError, ValueError):
        F = np.array([float(cdf(v)) for v in x])
    i = np.arange(1, n + 1)
    return float(max(np.max(np.abs(i / n - F)), np.max(np.abs((i - 1) / n - F))))


def ks_pvalue(statistic: float, n: int) -> float:
    """Asymptotic Kolmogorov tail probability ``Q(sqrt(n) D)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    lam = math.sqrt(n) * statistic
    if lam <= 0:
        return 1.0
    if lam < 1.18:
        # Jacobi-transformed series converges fast for small lambda
        c = -(math.pi**2) / (8 * lam * lam)
        s = math.fsum(math.exp(c * (2 * k - 1) ** 2) for k in range(1, 30))
        q = 1.0 - math.sqrt(2 * math.pi) / lam * s
    else:
        q = 2 * math.fsum((-1) ** (k - 1) * math.exp(-2 * k * k * lam * lam) for k in range(1, 100))
    return min(1.0, max(0.0, q))


def normal_cdf(x):
    return stats.norm.cdf(x)


def counts_from_samples(samples) -> dict[int, int]:
    values, counts = np.unique(np.asarray(samples, dtype=np.int64), return_counts=True)
    return {int(v): int(c) for v, c in zip(values, counts)}


def _pool(expected: list[float], observed: list[int]) -> tuple[list[float], list[int]]:
    exp_cells, obs_cells = [], []
    e_acc = 0.0
    o_acc = 0
    for e, o in zip(expected, observed):
        e_acc += e
        o_acc += o
        if e_acc >= MIN_EXPECTED:
            exp_cells.append(e_acc)
            obs_cells.append(o_acc)
            e_acc, o_acc = 0.0, 0
    if e_acc > 0 or o_acc > 0:
        if exp_cells:
            exp_cells[-1] += e_acc
            obs_cells[-1] += o_acc
        else:
            exp_cells.append(e_acc)
            obs_cells.append(o_acc)
    return exp_cells, obs_cells


def chi_square_gof(counts: Mapping[int, int], exact: Pmf, target: str = "exact pmf") -> GofReport:
    """Pearson chi-square of observed ``counts`` against ``exact``.

    Cells are pooled left to right until each holds an expected count of at
    least 5.  An observation at a point of zero probability rejects outright.
    """
    probs = exact.as_dict()
    total = sum(int(c) for c in counts.values())
    if total == 0:
        raise ValueError("no observations")
    outside = sum(int(c) for x, c in counts.items() if probs.get(int(x), 0) == 0)
    if outside == total:
        raise ValueError("observed support does not overlap the target pmf")
    support = [x for x in exact.support if probs[x] > 0]
    expected = [total * float(probs[x]) for x in support]
    observed = [int(counts.get(x, 0)) for x in support]
    exp_cells, obs_cells = _pool(expected, observed)
    dof = len(exp_cells) - 1
    if dof < 1:
        raise ValueError("all cells pooled away; increase the sample size")
    if outside:
        stat, p = math.inf, 0.0
    else:
        stat = math.fsum((o - e) ** 2 / e for o, e in zip(obs_cells, exp_cells))
        p = float(stats.chi2.sf(stat, dof))
    return GofReport(stat, p, total, target, dof, {"cells": len(exp_cells), "impossible": outside})
