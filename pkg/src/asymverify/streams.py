"""Counter-based random streams.

Every random choice in the simulator is a pure function of a 64-bit key and
a counter: ``draw(key, i) = splitmix64_mix(key + (i + 1) * GOLDEN)``. Keys for
a trial or a validator are derived by folding identifiers into a master
seed, so results never depend on execution order. The numpy versions are
bit-identical to the scalar ones and exist for batched oracle sweeps.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB

# domain tags keep tamper placement and validator sampling on separate streams
DOMAIN_TAMPER = 1
DOMAIN_ASSIGN = 2


def mix64(z: int) -> int:
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


def derive_key(seed: int, *words: int) -> int:
    """Fold ``words`` into ``seed``; distinct word tuples give unrelated keys."""
    h = mix64(seed)
    for w in words:
        h = mix64(h ^ ((w + GOLDEN) & MASK64))
    return h


def draw(key: int, counter: int) -> int:
    return mix64(key + (counter + 1) * GOLDEN)


def partial_shuffle(key: int, n: int, size: int) -> list[int]:
    """First ``size`` entries of a Fisher-Yates shuffle of ``range(n)``.

    Uses ``draw(key, i) % (n - i)``; the modulo bias is below n / 2**64.
    """
    if not 0 <= size <= n:
        raise ValueError(f"cannot draw {size} distinct items from {n}")
    perm = list(range(n))
    for i in range(size):
        j = i + draw(key, i) % (n - i)
        perm[i], perm[j] = perm[j], perm[i]
    return perm[:size]


# numpy twins. uint64 array arithmetic wraps modulo 2**64, which is what we want.

def _u64(x) -> np.ndarray:
    # 0-d operands become numpy scalars, whose wraparound raises warnings
    return np.atleast_1d(np.asarray(x, dtype=np.uint64))


def mix64_np(z: np.ndarray) -> np.ndarray:
    z = _u64(z)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def derive_key_np(seed: int, *words) -> np.ndarray:
    h = mix64_np(_u64(seed))
    for w in words:
        w = _u64(w)
        h = mix64_np(h ^ (w + np.uint64(GOLDEN)))
    return h


def draw_np(keys: np.ndarray, counter: int) -> np.ndarray:
    offset = np.uint64(((counter + 1) * GOLDEN) & MASK64)
    return mix64_np(_u64(keys) + offset)


def partial_shuffle_np(keys: np.ndarray, n: int, size: int) -> np.ndarray:
    """Row-wise :func:`partial_shuffle`; returns an ``(len(keys), size)`` array."""
    keys = _u64(keys).ravel()
    rows = np.arange(keys.size)
    perm = np.tile(np.arange(n, dtype=np.int64), (keys.size, 1))
    for i in range(size):
        j = i + (draw_np(keys, i) % np.uint64(n - i)).astype(np.int64)
        tmp = perm[rows, i].copy()
        perm[rows, i] = perm[rows, j]
        perm[rows, j] = tmp
    return perm[:, :size]
