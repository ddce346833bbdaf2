"""Cooling schedules: resampling times tau(k), gaps T_k and their inverse k(n)."""

from __future__ import annotations

import bisect
import math
from pathlib import Path
from typing import Sequence

import numpy as np

TIME_MAX = 2**63 - 1


class CoolingSchedule:
    """Strictly increasing resampling times with ``tau(0) = 0`` and ``tau(k) >= k``.

    Variants:

    * ``polynomial(B, beta)``: ``tau(k) = max(tau(k-1) + 1, k, floor(B k**beta))``
    * ``exponential(C)``: gaps ``T_k = max(1, round(exp(C k)))``
    * ``unit()``: ``tau(k) = k`` (resample before every step)
    * ``explicit(times)``: a finite, user-supplied table

    The table is memoized and grown on demand; :meth:`extend_to` fills it
    eagerly before handing it to worker kernels.
    """

    def __init__(self, kind: str, **params):
        self.kind = kind
        self.params = params
        self._tau = [0]
        if kind == "polynomial":
            if not params["B"] > 0:
                raise ValueError("B must be positive")
            if not params["beta"] > 1:
                raise ValueError("beta must exceed 1")
        elif kind == "exponential":
            if not params["C"] > 0:
                raise ValueError("C must be positive")
        elif kind == "explicit":
            times = [int(t) for t in params["times"]]
            if times and times[0] == 0:
                times = times[1:]
            if not times:
                raise ValueError("explicit schedule needs at least one resampling time")
            prev = 0
            for k, t in enumerate(times, start=1):
                if t <= prev:
                    raise ValueError(f"explicit times must be strictly increasing (entry {k})")
                if t < k:
                    raise ValueError(f"explicit tau({k}) = {t} violates tau(k) >= k")
                if t > TIME_MAX:
                    raise OverflowError(f"tau({k}) = {t} exceeds the 64-bit time range")
                prev = t
            self._tau.extend(times)
            self.params = {"times": tuple(times)}
        elif kind != "unit":
            raise ValueError(f"unknown schedule kind {kind!r}")

    @classmethod
    def polynomial(cls, B: float = 1.0, beta: float = 2.0) -> "CoolingSchedule":
        return cls("polynomial", B=float(B), beta=float(beta))

    @classmethod
    def exponential(cls, C: float = 1.0) -> "CoolingSchedule":
        return cls("exponential", C=float(C))

    @classmethod
    def unit(cls) -> "CoolingSchedule":
        return cls("unit")

    @classmethod
    def explicit(cls, times: Sequence[int]) -> "CoolingSchedule":
        return cls("explicit", times=list(times))

    @classmethod
    def from_file(cls, path) -> "CoolingSchedule":
        lines = Path(path).read_text().split()
        return cls.explicit([int(tok) for tok in lines])

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params.items() if k != "times")
        return f"CoolingSchedule.{self.kind}({args})"

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        out.update({k: (list(v) if isinstance(v, tuple) else v) for k, v in self.params.items()})
        return out

    def _next(self, k: int) -> int:
        prev = self._tau[-1]
        if self.kind == "polynomial":
            B, beta = self.params["B"], self.params["beta"]
            try:
                raw = math.floor(B * float(k) ** beta)
            except OverflowError:
                raise OverflowError(f"tau({k}) overflows the time range") from None
            return max(prev + 1, k, raw)
        if self.kind == "exponential":
            try:
                gap = max(1, math.floor(math.exp(self.params["C"] * k) + 0.5))
            except OverflowError:
                raise OverflowError(f"tau({k}) overflows the time range") from None
            return prev + gap
        if self.kind == "unit":
            return k
        raise IndexError(f"explicit schedule has no tau({k}); table ends at k={len(self._tau) - 1}")

    def _grow(self, k: int) -> None:
        while len(self._tau) <= k:
            nxt = self._next(len(self._tau))
            if nxt > TIME_MAX:
                raise OverflowError(f"tau({len(self._tau)}) = {nxt} exceeds the 64-bit time range")
            self._tau.append(nxt)

    def tau(self, k: int) -> int:
        if k < 0:
            raise ValueError("k must be non-negative")
        self._grow(k)
        return self._tau[k]

    def gap(self, k: int) -> int:
        """``T_k = tau(k) - tau(k-1)`` for ``k >= 1``."""
        if k < 1:
            raise ValueError("gap index must be >= 1")
        return self.tau(k) - self.tau(k - 1)

    def extend_to(self, n: int) -> None:
        """Grow the table until it contains the first resampling time after ``n``."""
        if self.kind == "unit":
            self._grow(n + 1)
            return
        while self._tau[-1] <= n:
            self._grow(len(self._tau))

    def k_of_n(self, n: int) -> int:
        """Index of the last resampling at or before time ``n``."""
        if n < 0:
            raise ValueError("n must be non-negative")
        if self.kind == "unit":
            return n
        self.extend_to(n)
        return bisect.bisect_right(self._tau, n) - 1

    def remainders(self, n: int) -> tuple[int, int]:
        """``(n - tau(k(n)), tau(k(n) + 1) - n)``."""
        k = self.k_of_n(n)
        return n - self.tau(k), self.tau(k + 1) - n

    def table(self, n: int) -> np.ndarray:
        """``tau(0..k(n)+1)`` as int64, enough to drive a walk of ``n`` steps."""
        k = self.k_of_n(n)
        self._grow(k + 1)
        return np.array(self._tau[: k + 2], dtype=np.int64)
