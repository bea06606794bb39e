"""Independent reference computations used to derive frozen test values.

Nothing here imports the package under test.
"""

import itertools
import struct
from fractions import Fraction


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for byte in data:
        h ^= byte
        h = (h * 0x100000001B3) % 2**64
    return h


def encode(model_id: str, seed: int, context) -> bytes:
    return model_id.encode("utf-8") + struct.pack("<Q", seed) + b"".join(struct.pack("<I", t) for t in context)


def slow_next_token(model_id, seed, vocab, context):
    return fnv1a_64(encode(model_id, seed, context)) % vocab


def slow_generate(model_id, seed, vocab, prompt, m):
    ctx = list(prompt)
    out = []
    for _ in range(m):
        t = slow_next_token(model_id, seed, vocab, ctx)
        out.append(t)
        ctx.append(t)
    return out


def enumerate_single_fail(k, f, r) -> Fraction:
    """Fraction of r-subsets of k segments that avoid all f tampered ones."""
    tampered = set(range(f))
    subsets = list(itertools.combinations(range(k), r))
    safe = sum(1 for s in subsets if tampered.isdisjoint(s))
    return Fraction(safe, len(subsets))


def simple_ols(xs, ys):
    """Closed-form intercept and slope in exact rational arithmetic."""
    xs = [Fraction(x) for x in xs]
    ys = [Fraction(y) for y in ys]
    n = len(xs)
    mx, my = sum(xs) / n, sum(ys) / n
    slope = sum((x - mx) * (y - my) for x, y in zip(xs, ys)) / sum((x - mx) ** 2 for x in xs)
    return my - slope * mx, slope
