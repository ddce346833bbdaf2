"""Counter-based random numbers (Philox4x32-10) keyed by simulation coordinates.

Every random number used by the simulator is a pure function of
``(seed, replica, purpose, block, index)``.  Nothing carries state between
draws, so results do not depend on evaluation order or on how replicas are
split across workers.

Counter layout (four 32-bit words, key = 64-bit seed)::

    env draws:  (zigzag(site), sub-draw, purpose << 28 | block, replica)
    step draws: (pair index lo, pair index hi, purpose << 28, replica)
"""

import numpy as np
from numba import njit

PHILOX_M0 = np.uint64(0xD2511F53)
PHILOX_M1 = np.uint64(0xCD9E8D57)
PHILOX_W0 = np.uint64(0x9E3779B9)
PHILOX_W1 = np.uint64(0xBB67AE85)
MASK32 = np.uint64(0xFFFFFFFF)
SHIFT32 = np.uint64(32)

TAG_ENV = 1
TAG_STEP = 2
TAG_BOOTSTRAP = 3

MAX_BLOCK = (1 << 28) - 1
MAX_REPLICA = (1 << 32) - 1


@njit(cache=True, inline="always")
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Ten-round Philox4x32 on uint64-held 32-bit words."""
    for r in range(10):
        if r > 0:
            k0 = (k0 + PHILOX_W0) & MASK32
            k1 = (k1 + PHILOX_W1) & MASK32
        p0 = PHILOX_M0 * c0
        p1 = PHILOX_M1 * c2
        hi0 = p0 >> SHIFT32
        lo0 = p0 & MASK32
        hi1 = p1 >> SHIFT32
        lo1 = p1 & MASK32
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
    return c0, c1, c2, c3


@njit(cache=True, inline="always")
def _to_unit(a, b):
    # 53-bit float in [0, 1) from two 32-bit words
    hi = a >> np.uint64(5)
    lo = b >> np.uint64(6)
    return (float(hi) * 67108864.0 + float(lo)) * (1.0 / 9007199254740992.0)


@njit(cache=True, inline="always")
def _zigzag(site):
    if site >= 0:
        return np.uint64(2 * site)
    return np.uint64(-2 * site - 1)


@njit(cache=True)
def env_uniforms(seed, replica, block, site, sub):
    """Two independent U[0,1) values for environment coordinate (block, site)."""
    s = np.uint64(seed)
    c2 = (np.uint64(TAG_ENV) << np.uint64(28)) | np.uint64(block)
    r0, r1, r2, r3 = philox4x32(
        _zigzag(site) & MASK32, np.uint64(sub) & MASK32, c2,
        np.uint64(replica) & MASK32, s & MASK32, s >> SHIFT32)
    return _to_unit(r0, r1), _to_unit(r2, r3)


@njit(cache=True)
def step_uniform_pair(seed, replica, pair):
    """Uniforms for steps ``2*pair`` and ``2*pair + 1`` of one replica."""
    s = np.uint64(seed)
    q = np.uint64(pair)
    c2 = np.uint64(TAG_STEP) << np.uint64(28)
    r0, r1, r2, r3 = philox4x32(
        q & MASK32, q >> SHIFT32, c2, np.uint64(replica) & MASK32,
        s & MASK32, s >> SHIFT32)
    return _to_unit(r0, r1), _to_unit(r2, r3)


def step_uniform(seed: int, replica: int, i: int) -> float:
    """Uniform consumed by step ``i`` (time i -> i+1) of a replica."""
    u0, u1 = step_uniform_pair(seed, replica, i >> 1)
    return u1 if i & 1 else u0


def bootstrap_generator(seed: int, purpose: int = 0) -> np.random.Generator:
    """numpy Generator on a Philox stream disjoint from the walk streams."""
    key = np.array([seed & 0xFFFFFFFFFFFFFFFF, (TAG_BOOTSTRAP << 32) | (purpose & 0xFFFFFFFF)],
                   dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def check_seed(seed: int) -> int:
    seed = int(seed)
    if not 0 <= seed < 1 << 64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return seed
