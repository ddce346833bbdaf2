"""RWCRE trajectories: simulation kernel, block decomposition and rescaled paths."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np
from numba import njit, prange

from .cooling import CoolingSchedule
from .env import KIND_FORCED, ResamplingRule, draw_omega
from .rng import MAX_BLOCK, MAX_REPLICA, check_seed, step_uniform_pair

if "NUMBA_THREADING_LAYER" not in os.environ:
    # the TBB probe warns on older TBB builds; workqueue is always available
    numba.config.THREADING_LAYER = "workqueue"


@njit(cache=True)
def _walk(seed, replica, n, taus, kind, values, cum, shape, times, out,
          omega_buf, stamp_buf, epoch):
    """Run one replica for ``n`` steps, writing X at each entry of ``times``.

    ``omega_buf``/``stamp_buf`` are indexed by ``x + n``; a cached value is
    valid only while its stamp equals the current (replica, block) epoch, so
    refreshing the environment costs O(1).
    """
    m = times.shape[0]
    ptr = 0
    while ptr < m and times[ptr] == 0:
        out[ptr] = 0
        ptr += 1
    x = 0
    k = 0
    epoch += 1
    next_refresh = taus[1]
    u_pair = (0.0, 0.0)
    for i in range(n):
        if i == next_refresh:
            k += 1
            next_refresh = taus[k + 1]
            epoch += 1
        idx = x + n
        if stamp_buf[idx] != epoch:
            omega_buf[idx] = draw_omega(seed, replica, k, x, kind, values, cum, shape)
            stamp_buf[idx] = epoch
        if i & 1 == 0:
            u_pair = step_uniform_pair(seed, replica, i >> 1)
            u = u_pair[0]
        else:
            u = u_pair[1]
        if u < omega_buf[idx]:
            x += 1
        else:
            x -= 1
        while ptr < m and times[ptr] == i + 1:
            out[ptr] = x
            ptr += 1
    return epoch


@njit(cache=True, parallel=True)
def _walk_many(seed, replicas, n, taus, kind, values, cum, shape, times, out, n_chunks):
    n_rep = replicas.shape[0]
    for c in prange(n_chunks):
        lo = (c * n_rep) // n_chunks
        hi = ((c + 1) * n_rep) // n_chunks
        if lo == hi:
            continue
        omega_buf = np.empty(2 * n + 1, dtype=np.float64)
        stamp_buf = np.zeros(2 * n + 1, dtype=np.int64)
        epoch = 0
        for r in range(lo, hi):
            epoch = _walk(seed, replicas[r], n, taus, kind, values, cum, shape,
                          times, out[r], omega_buf, stamp_buf, epoch)


def _rule_arrays(rule: ResamplingRule | None, force_omega: float | None):
    if force_omega is not None:
        if not 0 <= force_omega <= 1:
            raise ValueError("forced omega must lie in [0, 1]")
        return KIND_FORCED, np.array([float(force_omega)]), np.ones(1), 0.0
    return rule.kernel_arrays()


def simulate_samples(rule: ResamplingRule, schedule: CoolingSchedule, n: int, seed: int,
                     replicas: Sequence[int] | np.ndarray, times: Sequence[int] | np.ndarray,
                     workers: int = 1, force_omega: float | None = None) -> np.ndarray:
    """Positions ``X_t`` for each replica (rows) at each requested time (columns).

    Each row is a pure function of ``(rule, schedule, seed, replica)``; the
    horizon ``n`` only bounds the work, so a shorter run is a prefix of a
    longer one.  ``workers`` sets how replicas are partitioned into chunks and
    does not affect the values.
    """
    seed = check_seed(seed)
    n = int(n)
    if n < 0:
        raise ValueError("n must be non-negative")
    replicas = np.ascontiguousarray(replicas, dtype=np.int64)
    if replicas.size and (replicas.min() < 0 or replicas.max() > MAX_REPLICA):
        raise ValueError("replica ids must fit in 32 bits")
    times = np.asarray(times, dtype=np.int64)
    order = np.argsort(times, kind="stable")
    sorted_times = np.ascontiguousarray(times[order])
    if sorted_times.size and (sorted_times[0] < 0 or sorted_times[-1] > n):
        raise ValueError("sample times must lie in [0, n]")
    taus = schedule.table(max(n - 1, 0))
    if taus.shape[0] - 2 > MAX_BLOCK:
        raise OverflowError("too many cooling blocks for the environment key space")
    kind, values, cum, shape = _rule_arrays(rule, force_omega)
    out = np.zeros((replicas.shape[0], sorted_times.shape[0]), dtype=np.int64)
    n_chunks = max(1, int(workers))
    threads = min(n_chunks, numba.config.NUMBA_NUM_THREADS)
    previous = numba.get_num_threads()
    numba.set_num_threads(threads)
    try:
        _walk_many(np.uint64(seed), replicas, n, taus, kind, values, cum, shape,
                   sorted_times, out, n_chunks)
    finally:
        numba.set_num_threads(previous)
    result = np.empty_like(out)
    result[:, order] = out
    return result


@dataclass(frozen=True)
class Trajectory:
    positions: np.ndarray
    replica: int
    schedule: CoolingSchedule

    @property
    def n(self) -> int:
        return self.positions.shape[0] - 1


def simulate(rule: ResamplingRule, schedule: CoolingSchedule, n: int, seed: int,
             replica: int = 0, force_omega: float | None = None) -> Trajectory:
    """Full path ``X_0..X_n`` of one replica.

    ``force_omega`` replaces the environment by a constant (test hook).
    """
    pos = simulate_samples(rule, schedule, n, seed, [replica], np.arange(n + 1),
                           force_omega=force_omega)[0]
    return Trajectory(pos, int(replica), schedule)


@dataclass(frozen=True)
class BlockIncrements:
    """``X_n = sum(blocks) + remainder``; ``complement`` is ``X_{tau(k(n)+1)} - X_n`` if known."""

    blocks: np.ndarray
    remainder: int
    complement: int | None = None
    gaps: np.ndarray | None = None


def decompose(traj: Trajectory, schedule: CoolingSchedule | None = None,
              n: int | None = None) -> BlockIncrements:
    schedule = schedule or traj.schedule
    n = traj.n if n is None else int(n)
    if n < 0 or n > traj.n:
        raise ValueError(f"horizon {n} outside the trajectory's range [0, {traj.n}]")
    k = schedule.k_of_n(n)
    taus = np.array([schedule.tau(j) for j in range(k + 2)], dtype=np.int64)
    x = traj.positions
    blocks = x[taus[1:k + 1]] - x[taus[:k]]
    remainder = int(x[n] - x[taus[k]])
    complement = int(x[taus[k + 1]] - x[n]) if taus[k + 1] <= traj.n else None
    return BlockIncrements(blocks, remainder, complement, np.diff(taus[:k + 1]))


def center(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pointwise replica mean and its standard error.

    Sums are taken per column with ``math.fsum`` over the fixed replica order,
    so the result does not depend on how the rows were produced.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    r = samples.shape[0]
    if r == 0:
        raise ValueError("cannot center an empty collection of trajectories")
    if r < 2:
        raise ValueError("centering needs at least two replicas")
    mean = np.array([math.fsum(col) / r for col in samples.T])
    dev = samples - mean
    var = np.array([math.fsum(col) / (r - 1) for col in dev.T * dev.T])
    return mean, np.sqrt(var / r)


def grid_times(grid: Sequence[float], n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Integer times needed to interpolate the rescaled path on ``grid``.

    Returns ``(lower, upper, frac)`` with ``lower = floor(t n)``,
    ``upper = min(lower + 1, n)`` and ``frac = t n - lower``.
    """
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size and (grid.min() < 0 or grid.max() > 1):
        raise ValueError("grid must lie inside [0, 1]")
    tn = grid * n
    lower = np.floor(tn).astype(np.int64)
    frac = tn - lower
    upper = np.minimum(lower + 1, n)
    return lower, upper, frac


@dataclass(frozen=True)
class ScaledPath:
    grid: np.ndarray
    values: np.ndarray
    chi: float


def interpolate(centered: np.ndarray, times: np.ndarray, grid: Sequence[float], n: int,
                chi: float) -> np.ndarray:
    """Piecewise-linear rescaled path on ``grid`` from centered samples at ``times``.

    ``centered`` is (replicas, len(times)) or 1-d; every ``floor(t n)`` and
    ``floor(t n) + 1`` must appear in ``times``.
    """
    if not chi > 0:
        raise ValueError("chi must be positive")
    centered = np.asarray(centered, dtype=np.float64)
    lower, upper, frac = grid_times(grid, n)
    lookup = {int(t): j for j, t in enumerate(np.asarray(times))}
    try:
        lo = [lookup[int(t)] for t in lower]
        hi = [lookup[int(t)] for t in upper]
    except KeyError as exc:
        raise ValueError(f"time {exc.args[0]} missing from samples") from None
    a = centered[..., lo]
    b = centered[..., hi]
    return (a + frac * (b - a)) / math.sqrt(chi)


def scaled_path(traj: Trajectory, centering: np.ndarray | None, chi: float,
                grid: Sequence[float]) -> ScaledPath:
    """``X^n_t`` of one trajectory on ``grid``; ``centering`` is E[X_i] for i = 0..n."""
    x = traj.positions.astype(np.float64)
    if centering is not None:
        x = x - np.asarray(centering, dtype=np.float64)
    grid = np.asarray(grid, dtype=np.float64)
    values = interpolate(x, np.arange(traj.n + 1), grid, traj.n, chi)
    return ScaledPath(grid, values, float(chi))
