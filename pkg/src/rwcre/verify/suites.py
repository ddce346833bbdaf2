"""Limit-law checks on rescaled paths: marginal law, FDD covariance, flatness."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..rng import bootstrap_generator
from ..theory import limit_cov
from .gof import GofReport, ks_pvalue, ks_statistic, normal_cdf

MIN_REPLICAS = 1000
N_BOOTSTRAP = 200
GRID_EPS = 1e-12


def _check_replicas(r: int, min_replicas: int) -> None:
    if r < min_replicas:
        raise ValueError(f"need at least {min_replicas} replicas, got {r}")


def verify_marginal(samples, min_replicas: int = MIN_REPLICAS) -> GofReport:
    """KS test of the rescaled endpoint against the standard normal."""
    x = np.asarray(samples, dtype=np.float64).ravel()
    _check_replicas(x.size, min_replicas)
    d = ks_statistic(x, normal_cdf)
    report = GofReport(d, ks_pvalue(d, x.size), x.size, "N(0,1)",
                       extra={"mean": float(np.mean(x)), "variance": float(np.var(x, ddof=1))})
    report.samples = x
    return report


@dataclass
class FddReport:
    """Empirical vs limiting covariance of the rescaled path on a time grid."""

    grid: np.ndarray
    regime: str
    n: int
    cov: np.ndarray
    cov_se: np.ndarray
    target_cov: np.ndarray
    corr: np.ndarray
    corr_se: np.ndarray
    target_corr: np.ndarray
    increment_corr: list = field(default_factory=list)

    @property
    def max_cov_error(self) -> float:
        return float(np.max(np.abs(self.cov - self.target_cov)))

    @property
    def max_corr_error(self) -> float:
        diff = np.abs(self.corr - self.target_corr)
        return float(np.nanmax(diff)) if np.isfinite(diff).any() else float("nan")

    @property
    def max_increment_corr(self) -> float:
        if not self.increment_corr:
            return 0.0
        return float(max(abs(c["corr"]) for c in self.increment_corr))

    def to_dict(self) -> dict:
        def mat(a):
            return [[None if not np.isfinite(v) else float(v) for v in row] for row in a]

        return {"grid": [float(t) for t in self.grid], "regime": self.regime, "n": self.n,
                "cov": mat(self.cov), "cov_se": mat(self.cov_se),
                "target_cov": mat(self.target_cov), "corr": mat(self.corr),
                "corr_se": mat(self.corr_se), "target_corr": mat(self.target_corr),
                "max_cov_error": self.max_cov_error, "max_corr_error": self.max_corr_error,
                "increment_corr": self.increment_corr}


def _corr(cov: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.diag(cov))
    with np.errstate(invalid="ignore", divide="ignore"):
        return cov / np.outer(sd, sd)


def _check_grid(grid: np.ndarray, regime: str, a: float | None) -> None:
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("grid must be a non-empty 1-d sequence")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly increasing")
    lo = 0.0
    if regime == "R2":
        if a is None or not 0 < a <= 1:
            raise ValueError("R2 needs a in (0, 1]")
        lo = a
    if grid[0] < lo - GRID_EPS or grid[-1] > 1 + GRID_EPS:
        raise ValueError(f"grid must lie in [{lo}, 1]")


def verify_fdd(values, grid, regime: str, beta: float | None = None, a: float | None = None,
               n_boot: int = N_BOOTSTRAP, seed: int = 0,
               min_replicas: int = MIN_REPLICAS) -> FddReport:
    """Compare the covariance of ``(X_t1, ..., X_tm)`` with the limit process.

    ``values`` has one row per replica and one column per grid time.
    Standard errors come from ``n_boot`` replica-bootstrap resamples on a
    dedicated counter-based stream.  For R1 the correlation between
    ``X_t`` and ``X_s - X_t`` is reported for consecutive grid pairs.
    """
    grid = np.asarray(grid, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    _check_grid(grid, regime, a)
    if x.shape[1] != grid.size:
        raise ValueError("values must have one column per grid point")
    r = x.shape[0]
    _check_replicas(r, min_replicas)

    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=1))
    target = np.array([[limit_cov(t, s, regime, beta, a) for s in grid] for t in grid])
    corr = _corr(cov)
    target_corr = _corr(target)

    rng = bootstrap_generator(seed)
    boots_cov = np.empty((n_boot,) + cov.shape)
    boots_corr = np.empty_like(boots_cov)
    for b in range(n_boot):
        idx = rng.integers(0, r, size=r)
        c = np.atleast_2d(np.cov(x[idx], rowvar=False, ddof=1))
        boots_cov[b] = c
        boots_corr[b] = _corr(c)
    cov_se = boots_cov.std(axis=0, ddof=1) if n_boot > 1 else np.full(cov.shape, np.nan)
    corr_se = boots_corr.std(axis=0, ddof=1) if n_boot > 1 else np.full(cov.shape, np.nan)

    increments = []
    if regime == "R1":
        for i in range(grid.size - 1):
            first, inc = x[:, i], x[:, i + 1] - x[:, i]
            if np.std(first) == 0 or np.std(inc) == 0:
                continue
            c = float(np.corrcoef(first, inc)[0, 1])
            increments.append({"t": float(grid[i]), "s": float(grid[i + 1]), "corr": c,
                               "se": float(np.sqrt((1 - c * c) ** 2 / (r - 1)))})
    return FddReport(grid, regime, r, cov, cov_se, target, corr, corr_se, target_corr, increments)


@dataclass
class FlatnessSummary:
    a: float
    n: int | None
    median: float
    p90: float
    sup_gaps: np.ndarray = field(repr=False)

    def to_dict(self) -> dict:
        return {"a": self.a, "n": self.n, "median": self.median, "p90": self.p90,
                "replicas": int(self.sup_gaps.size)}


def verify_flatness(values, grid, a: float, n: int | None = None) -> FlatnessSummary:
    """Median and 90th percentile of ``max_{t in grid, t >= a} |X_t - X_a|``."""
    grid = np.asarray(grid, dtype=np.float64)
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if not 0 < a <= 1:
        raise ValueError("a must lie in (0, 1]")
    hits = np.flatnonzero(np.abs(grid - a) <= GRID_EPS)
    if hits.size == 0 or abs(grid.max() - 1.0) > GRID_EPS:
        raise ValueError("grid must contain a and 1 to cover [a, 1]")
    window = grid >= a - GRID_EPS
    gaps = np.max(np.abs(x[:, window] - x[:, hits[0]][:, None]), axis=1)
    return FlatnessSummary(float(a), n, float(np.median(gaps)), float(np.percentile(gaps, 90)), gaps)


def strictly_decreasing(medians) -> bool:
    m = list(medians)
    return len(m) >= 2 and all(b < a for a, b in zip(m, m[1:]))
