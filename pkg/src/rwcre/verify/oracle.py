"""Exact annealed laws of short walks, in rational arithmetic."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb

from ..cooling import CoolingSchedule
from ..env import ResamplingRule

DEFAULT_CAP = 12
ENV_ENUM_CAP = 7


class CapExceeded(ValueError):
    pass


@dataclass(frozen=True)
class Pmf:
    support: tuple
    probs: tuple

    def __post_init__(self):
        if len(self.support) != len(self.probs) or not self.support:
            raise ValueError("support and probabilities must be non-empty and aligned")
        if list(self.support) != sorted(set(self.support)):
            raise ValueError("support must be sorted and unique")
        if len({x % 2 for x in self.support}) > 1:
            raise ValueError("support mixes parities")
        if any(p < 0 for p in self.probs):
            raise ValueError("negative probability")
        if abs(float(sum(self.probs)) - 1.0) > 1e-12:
            raise ValueError("probabilities do not sum to 1")

    @classmethod
    def from_dict(cls, d: dict) -> "Pmf":
        keys = sorted(x for x, p in d.items() if p != 0)
        return cls(tuple(keys), tuple(d[x] for x in keys))

    def as_dict(self) -> dict:
        return dict(zip(self.support, self.probs))

    def total(self):
        return sum(self.probs)

    def mean(self):
        return sum(x * p for x, p in zip(self.support, self.probs))

    def __getitem__(self, x):
        return self.as_dict().get(x, 0)


def _exact_values(rule: ResamplingRule) -> tuple[tuple, tuple]:
    if not rule.is_discrete:
        raise ValueError("exact laws need a finite-support rule")
    return (tuple(Fraction(v) for v in rule.values),
            tuple(Fraction(w) for w in rule.weights))


def srw_pmf(n: int, p) -> Pmf:
    """Law of ``2 Binomial(n, p) - n``; exact when ``p`` is a Fraction."""
    if not 0 < p < 1:
        raise ValueError("p must lie in (0, 1)")
    q = 1 - p
    support = tuple(2 * k - n for k in range(n + 1))
    probs = tuple(comb(n, k) * p**k * q ** (n - k) for k in range(n + 1))
    return Pmf(support, probs)


def exact_block_pmf(rule: ResamplingRule, m: int, cap: int = DEFAULT_CAP) -> Pmf:
    """Annealed law of ``Z_m`` in a single fresh environment.

    Sums over all ``2**m`` step sequences.  The annealed weight of a path
    factorizes over sites: a site left ``b`` times to the left and ``a``
    times to the right contributes ``E[w**a (1-w)**b]``.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if m > cap:
        raise CapExceeded(f"block length {m} exceeds the oracle cap {cap}")
    values, weights = _exact_values(rule)
    return _block_pmf(values, weights, m)


@lru_cache(maxsize=256)
def _block_pmf(values: tuple, weights: tuple, m: int) -> Pmf:
    @lru_cache(maxsize=None)
    def moment(a: int, b: int) -> Fraction:
        return sum(w * v**a * (1 - v) ** b for v, w in zip(values, weights))

    out: dict[int, Fraction] = {}
    right: dict[int, int] = {}
    left: dict[int, int] = {}

    def walk(x: int, steps: int, weight: Fraction):
        if steps == m:
            out[x] = out.get(x, 0) + weight
            return
        a, b = right.get(x, 0), left.get(x, 0)
        base = moment(a, b)
        right[x] = a + 1
        walk(x + 1, steps + 1, weight * moment(a + 1, b) / base)
        right[x] = a
        left[x] = b + 1
        walk(x - 1, steps + 1, weight * moment(a, b + 1) / base)
        left[x] = b

    walk(0, 0, Fraction(1))
    return Pmf.from_dict(out)


def exact_block_pmf_by_environment(rule: ResamplingRule, m: int, cap: int = ENV_ENUM_CAP) -> Pmf:
    """Same law as :func:`exact_block_pmf`, by averaging quenched laws.

    Enumerates every assignment of the sites ``-(m-1)..(m-1)`` and runs the
    forward recursion of the quenched walk on each.  Cost grows like
    ``s**(2m-1) m**2``, hence the low cap.
    """
    if m > cap:
        raise CapExceeded(f"block length {m} exceeds the environment-enumeration cap {cap}")
    values, weights = _exact_values(rule)
    if m == 0:
        return Pmf((0,), (Fraction(1),))
    sites = range(-(m - 1), m)
    out: dict[int, Fraction] = {}
    for choice in itertools.product(range(len(values)), repeat=len(sites)):
        w_env = Fraction(1)
        for c in choice:
            w_env *= weights[c]
        omega = {x: values[c] for x, c in zip(sites, choice)}
        dist = {0: Fraction(1)}
        for _ in range(m):
            nxt: dict[int, Fraction] = {}
            for x, p in dist.items():
                nxt[x + 1] = nxt.get(x + 1, 0) + p * omega[x]
                nxt[x - 1] = nxt.get(x - 1, 0) + p * (1 - omega[x])
            dist = nxt
        for x, p in dist.items():
            out[x] = out.get(x, 0) + w_env * p
    return Pmf.from_dict(out)


def convolve(a: Pmf, b: Pmf) -> Pmf:
    out: dict[int, object] = {}
    for x, p in zip(a.support, a.probs):
        for y, q in zip(b.support, b.probs):
            out[x + y] = out.get(x + y, 0) + p * q
    return Pmf.from_dict(out)


def block_lengths(schedule: CoolingSchedule, n: int) -> list[int]:
    """Lengths of the independent pieces of ``X_n``: ``T_1..T_k(n)`` and the remainder."""
    k = schedule.k_of_n(n)
    lengths = [schedule.gap(j) for j in range(1, k + 1)]
    rem, _ = schedule.remainders(n)
    if rem:
        lengths.append(rem)
    return lengths


def exact_walk_pmf(rule: ResamplingRule, schedule: CoolingSchedule, n: int,
                   cap: int = DEFAULT_CAP) -> Pmf:
    """Annealed law of ``X_n``: blocks are independent, so convolve their laws."""
    lengths = block_lengths(schedule, n)
    too_long = [t for t in lengths if t > cap]
    if too_long:
        raise CapExceeded(f"block of length {max(too_long)} exceeds the oracle cap {cap}")
    pmf = Pmf((0,), (Fraction(1),))
    for t in lengths:
        pmf = convolve(pmf, exact_block_pmf(rule, t, cap))
    return pmf
