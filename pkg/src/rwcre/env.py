"""Resampling rules and lazily materialized random environments."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from numba import njit
from scipy import integrate, special

from .rng import MAX_BLOCK, MAX_REPLICA, env_uniforms

DEFAULT_RECURRENCE_TOL = 1e-9
WEIGHT_TOL = 1e-12

# kernel encodings of the rule variant
KIND_DISCRETE = 0
KIND_BETA = 1
KIND_FORCED = 2


def _as_number(v):
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, (Fraction, int)):
        return Fraction(v)
    return float(v)


@dataclass(frozen=True)
class ResamplingRule:
    """Marginal law of a single site's right-jump probability.

    Use the constructors :meth:`two_point`, :meth:`finite_support` and
    :meth:`symmetric_beta`.  Support values given as ``Fraction`` (or strings
    such as ``"1/3"``) are kept exact, which the enumeration oracle relies on.
    """

    kind: str
    values: tuple = ()
    weights: tuple = ()
    shape: float = 0.0
    _arrays: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.kind in ("two-point", "finite-support"):
            if not self.values or len(self.values) != len(self.weights):
                raise ValueError("values and weights must be non-empty and of equal length")
            for v in self.values:
                if not 0 < v < 1:
                    raise ValueError(f"support value {v} not in (0, 1)")
            for w in self.weights:
                if not w > 0:
                    raise ValueError(f"weight {w} is not positive")
            total = sum(self.weights)
            if abs(float(total) - 1.0) > WEIGHT_TOL:
                raise ValueError(f"weights sum to {float(total)!r}, not 1")
            vals = np.array([float(v) for v in self.values])
            cum = np.cumsum([float(w) for w in self.weights])
            cum[-1] = 1.0
            arrays = (KIND_DISCRETE, vals, cum, 0.0)
        elif self.kind == "symmetric-beta":
            if not (self.shape > 0 and math.isfinite(self.shape)):
                raise ValueError(f"beta shape must be positive and finite, got {self.shape}")
            arrays = (KIND_BETA, np.zeros(1), np.ones(1), float(self.shape))
        else:
            raise ValueError(f"unknown rule kind {self.kind!r}")
        object.__setattr__(self, "_arrays", arrays)

    @classmethod
    def two_point(cls, p=Fraction(1, 3)) -> "ResamplingRule":
        p = _as_number(p)
        return cls("two-point", (p, 1 - p), (Fraction(1, 2), Fraction(1, 2)))

    @classmethod
    def finite_support(cls, values: Sequence, weights: Sequence) -> "ResamplingRule":
        return cls("finite-support", tuple(_as_number(v) for v in values),
                   tuple(_as_number(w) for w in weights))

    @classmethod
    def symmetric_beta(cls, a: float) -> "ResamplingRule":
        return cls("symmetric-beta", shape=float(a))

    @property
    def is_discrete(self) -> bool:
        return self.kind != "symmetric-beta"

    @property
    def is_exact(self) -> bool:
        """True when every support value and weight is a rational number."""
        return self.is_discrete and all(
            isinstance(v, Fraction) for v in self.values + self.weights)

    def kernel_arrays(self):
        """(kind code, values, cumulative weights, shape) for the numba kernels."""
        return self._arrays

    def to_dict(self) -> dict:
        if self.kind == "symmetric-beta":
            return {"kind": self.kind, "a": self.shape}
        out = {"kind": self.kind, "values": [str(v) for v in self.values],
               "weights": [str(w) for w in self.weights]}
        if self.kind == "two-point":
            out = {"kind": self.kind, "p": str(self.values[0])}
        return out


def _log_rho(v) -> float:
    if isinstance(v, Fraction):
        q = (1 - v) / v
        # log of the ratio >= 1, negated for its reciprocal, so pairs cancel exactly;
        # q - 1 is exact, so log1p keeps full precision near q = 1
        if q >= 1:
            return math.log1p(float(q - 1))
        return -math.log1p(float(1 / q - 1))
    return math.log1p(-v) - math.log(v)


def log_rho_moments(rule: ResamplingRule) -> tuple[float, float]:
    """Mean and variance of ``log rho = log((1 - w) / w)`` under the rule."""
    if rule.is_discrete:
        logs = [_log_rho(v) for v in rule.values]
        ws = [float(w) for w in rule.weights]
        mean = math.fsum(w * l for w, l in zip(ws, logs))
        var = math.fsum(w * (l - mean) ** 2 for w, l in zip(ws, logs))
        return mean, var
    # L = log rho has density exp(a L) / (1 + e^L)^(2a) / B(a, a); E[L] = 0 by symmetry
    a = rule.shape
    log_norm = special.betaln(a, a)

    def density(x):
        return math.exp(a * x - 2 * a * np.logaddexp(0.0, x) - log_norm)

    second, _ = integrate.quad(lambda x: x * x * density(x), 0, np.inf,
                               epsabs=0, epsrel=1e-12, limit=200)
    return 0.0, 2 * second


def mean_omega(rule: ResamplingRule):
    """E[omega(0)]; exact ``Fraction`` for exact discrete rules."""
    if rule.kind == "symmetric-beta":
        return Fraction(1, 2)
    if rule.is_exact:
        return sum(w * v for v, w in zip(rule.values, rule.weights))
    return math.fsum(float(w) * float(v) for v, w in zip(rule.values, rule.weights))


@dataclass(frozen=True)
class RecurrenceCheck:
    accepted: bool
    reason: str = ""

    def __bool__(self):
        return self.accepted


def validate_recurrent(rule: ResamplingRule, tol: float = DEFAULT_RECURRENCE_TOL) -> RecurrenceCheck:
    """Accept the rule only in the recurrent (Sinai) regime."""
    mean, var = log_rho_moments(rule)
    if not math.isfinite(mean) or abs(mean) > tol:
        return RecurrenceCheck(False, f"nonzero drift: E[log rho] = {mean:.6g}")
    if not math.isfinite(var):
        return RecurrenceCheck(False, "infinite variance of log rho")
    if var <= 0:
        return RecurrenceCheck(False, "zero variance of log rho")
    return RecurrenceCheck(True)


@njit(cache=True)
def _std_normal(seed, replica, block, site, sub):
    u0, u1 = env_uniforms(seed, replica, block, site, sub)
    return math.sqrt(-2.0 * math.log(1.0 - u0)) * math.cos(2.0 * math.pi * u1)


@njit(cache=True)
def _gamma(seed, replica, block, site, sub, a):
    # Marsaglia-Tsang; a < 1 boosted through Gamma(a + 1) * U^(1/a)
    boost = 1.0
    shape = a
    if a < 1.0:
        u, _ = env_uniforms(seed, replica, block, site, sub)
        sub += 1
        boost = (1.0 - u) ** (1.0 / a)
        shape = a + 1.0
    d = shape - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    while True:
        z = _std_normal(seed, replica, block, site, sub)
        _, u = env_uniforms(seed, replica, block, site, sub + 1)
        sub += 2
        v = 1.0 + c * z
        if v <= 0.0:
            continue
        v = v * v * v
        if u > 0.0 and math.log(u) < 0.5 * z * z + d - d * v + d * math.log(v):
            return d * v * boost, sub


@njit(cache=True)
def draw_omega(seed, replica, block, site, kind, values, cum, shape):
    """Environment value at (block, site): a pure function of its arguments."""
    if kind == KIND_DISCRETE:
        u, _ = env_uniforms(seed, replica, block, site, 0)
        for j in range(cum.shape[0]):
            if u < cum[j]:
                return values[j]
        return values[cum.shape[0] - 1]
    if kind == KIND_FORCED:
        return values[0]
    # beta(a, a) as G1 / (G1 + G2); redraw in the (astronomically rare) event of 0 or 1
    sub = 0
    while True:
        g1, sub = _gamma(seed, replica, block, site, sub, shape)
        g2, sub = _gamma(seed, replica, block, site, sub, shape)
        w = g1 / (g1 + g2)
        if 0.0 < w < 1.0:
            return w


class Environment:
    """Environment of one (replica, cooling block), materialized on demand.

    ``omega_at`` is keyed purely by ``(seed, replica, block, site)``; the
    cache only avoids recomputation.
    """

    def __init__(self, rule: ResamplingRule, seed: int, replica: int, block: int):
        if not 0 <= replica <= MAX_REPLICA:
            raise ValueError(f"replica id {replica} out of range")
        if not 0 <= block <= MAX_BLOCK:
            raise ValueError(f"block index {block} out of range")
        self.rule = rule
        self.seed = int(seed)
        self.replica = int(replica)
        self.block = int(block)
        self._cache: dict[int, float] = {}

    def omega_at(self, site: int) -> float:
        site = int(site)
        try:
            return self._cache[site]
        except KeyError:
            pass
        kind, values, cum, shape = self.rule.kernel_arrays()
        w = float(draw_omega(self.seed, self.replica, self.block, site, kind, values, cum, shape))
        self._cache[site] = w
        return w

    @property
    def realized(self) -> dict[int, float]:
        return dict(self._cache)
