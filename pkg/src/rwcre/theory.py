"""Closed-form limit targets: Kesten law of the Sinai limit, chi_n, covariances."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cooling import CoolingSchedule
from .env import ResamplingRule, log_rho_moments

DEFAULT_K = 64
SERIES_TOL = 1e-12
MAX_K = 1 << 22


def _rates(K: int) -> tuple[np.ndarray, np.ndarray]:
    odd = 2.0 * np.arange(K) + 1.0
    return odd, odd * odd * math.pi**2 / 8.0


def _density_sum(ax: float, K: int) -> float:
    odd, rates = _rates(K)
    signs = np.where(np.arange(K) % 2 == 0, 1.0, -1.0)
    return 2.0 / math.pi * math.fsum(signs / odd * np.exp(-rates * ax))


def kesten_density(x, K: int = DEFAULT_K):
    """Density of the Sinai limit variable, evaluated as a truncated series.

    Starting from ``K`` terms the truncation doubles until two successive
    partial sums agree to 1e-12; only small ``|x|`` needs more than the
    default.  ``x = 0`` returns the exact value 1/2.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if np.ndim(x):
        return np.array([kesten_density(float(v), K) for v in np.ravel(x)]).reshape(np.shape(x))
    ax = abs(float(x))
    if ax == 0.0:
        return 0.5
    k = K
    prev = _density_sum(ax, k)
    while k < MAX_K:
        cur = _density_sum(ax, 2 * k)
        k *= 2
        if abs(cur - prev) <= SERIES_TOL:
            return cur
        prev = cur
    return prev


def kesten_partial_sum(x: float, K: int) -> float:
    """Plain K-term partial sum, without adaptive refinement."""
    return _density_sum(abs(float(x)), K)


def kesten_cdf(x, K: int = DEFAULT_K):
    """CDF by term-wise integration of the density series.

    Uses ``sum (-1)^k / ((2k+1) a_k) = pi/4`` so that for ``x >= 0``
    ``F(x) = 1 - (2/pi) sum (-1)^k exp(-a_k x) / ((2k+1) a_k)``, which leaves
    only exponentially small terms away from the origin.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if np.ndim(x):
        return np.array([kesten_cdf(float(v), K) for v in np.ravel(x)]).reshape(np.shape(x))
    x = float(x)
    if x < 0:
        return 1.0 - kesten_cdf(-x, K)
    if x == 0:
        return 0.5
    k = K
    while True:
        odd, rates = _rates(k)
        signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
        terms = signs * np.exp(-rates * x) / (odd * rates)
        # alternating series: error is below the first omitted term
        last = math.exp(-((2 * k + 1) ** 2) * math.pi**2 / 8.0 * x) / ((2 * k + 1) ** 3 * math.pi**2 / 8.0)
        if last <= 1e-17 or k >= MAX_K:
            break
        k *= 2
    val = 1.0 - 2.0 / math.pi * math.fsum(terms)
    return min(1.0, max(0.0, val))


def sigma_V_sq(K: int = DEFAULT_K) -> float:
    """Variance of the Sinai limit variable: ``(4096/pi^7) sum (-1)^k/(2k+1)^7``."""
    if K < 1:
        raise ValueError("K must be >= 1")
    k = np.arange(K)
    terms = np.where(k % 2 == 0, 1.0, -1.0) / (2.0 * k + 1.0) ** 7
    return 4096.0 / math.pi**7 * math.fsum(terms)


@dataclass(frozen=True)
class ScalingConstants:
    """Constants entering chi_n: ``sigma_mu_sq``, ``sigma_V_sq`` and the regime.

    ``regime`` is ``"R1"`` (polynomial, needs ``B`` and ``beta``) or ``"R2"``
    (exponential, needs ``C``).
    """

    sigma_mu_sq: float
    sigma_V_sq: float
    regime: str
    B: float = 1.0
    beta: float = 2.0
    C: float = 1.0

    def __post_init__(self):
        if not (self.sigma_mu_sq > 0 and self.sigma_V_sq > 0):
            raise ValueError("scaling constants must be strictly positive")
        if self.regime == "R1":
            if not (self.B > 0 and self.beta > 1):
                raise ValueError("R1 needs B > 0 and beta > 1")
        elif self.regime == "R2":
            if not self.C > 0:
                raise ValueError("R2 needs C > 0")
        else:
            raise ValueError(f"unknown regime {self.regime!r}")

    @property
    def block_scale(self) -> float:
        """``(sigma_mu^2 sigma_V)^2``, the prefactor of Var(Y_j) / log^4 T_j."""
        return self.sigma_mu_sq**2 * self.sigma_V_sq

    @classmethod
    def from_model(cls, rule: ResamplingRule, schedule: CoolingSchedule) -> "ScalingConstants":
        _, var = log_rho_moments(rule)
        if schedule.kind == "polynomial":
            return cls(var, sigma_V_sq(), "R1", B=schedule.params["B"], beta=schedule.params["beta"])
        if schedule.kind == "exponential":
            return cls(var, sigma_V_sq(), "R2", C=schedule.params["C"])
        raise ValueError(f"no closed-form chi_n for a {schedule.kind} schedule")


def chi_n(consts: ScalingConstants, n: float) -> float:
    """Variance scale of the centered walk at time ``n``."""
    if n < 2:
        raise ValueError("chi_n needs n >= 2")
    L = math.log(n)
    if consts.regime == "R1":
        b = consts.beta
        return consts.block_scale * ((b - 1) / b) ** 4 * (n / consts.B) ** (1 / b) * L**4
    return consts.block_scale * L**5 / (5 * consts.C**5)


def limit_cov(t: float, s: float, regime: str, beta: float | None = None, a: float | None = None) -> float:
    """Covariance of the limit process at times ``t`` and ``s``.

    R1: ``min(t, s)**(1/beta)``.  R2: identically 1 on ``[a, 1]**2``.
    """
    if regime == "R1":
        if beta is None or not beta > 1:
            raise ValueError("R1 covariance needs beta > 1")
        if not (0 <= t <= 1 and 0 <= s <= 1):
            raise ValueError("times must lie in [0, 1]")
        return min(t, s) ** (1 / beta)
    if regime == "R2":
        lo = 0.0 if a is None else a
        if a is not None and not 0 < a <= 1:
            raise ValueError("a must lie in (0, 1]")
        if not (lo <= t <= 1 and lo <= s <= 1) or (a is None and (t <= 0 or s <= 0)):
            raise ValueError("times must lie in [a, 1]")
        return 1.0
    raise ValueError(f"unknown regime {regime!r}")


def block_variance_target(T: float, sigma_mu_sq: float, sigma_V_sq_value: float) -> float:
    """Asymptotic variance ``(sigma_mu^2 sigma_V)^2 log^4 T`` of a block of length T."""
    if T < 2:
        raise ValueError("block length must be >= 2")
    return sigma_mu_sq**2 * sigma_V_sq_value * math.log(T) ** 4


def increment_var_target(t: float, s: float, chi_n_value: float, beta: float) -> float:
    """Limit variance ``chi_n (s^(1/beta) - t^(1/beta))`` of X_{sn} - X_{tn}."""
    if not 0 <= t < s <= 1:
        raise ValueError("need 0 <= t < s <= 1")
    return chi_n_value * (s ** (1 / beta) - t ** (1 / beta))
