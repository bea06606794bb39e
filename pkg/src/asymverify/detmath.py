"""Detection probability for distributed segment auditing.

``q`` validators each check ``r`` distinct segments, drawn uniformly without
replacement from ``k``. With ``f`` tampered segments, one validator misses
everything with probability ``C(k-f, r) / C(k, r)`` and the audit as a whole
detects tampering with probability ``1 - miss**q``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping

from .exceptions import UnreachableTargetError


@dataclass(frozen=True, order=True)
class AuditParams:
    k: int
    f: int
    r: int
    q: int

    def __post_init__(self):
        _check(self.k, self.f, self.r)
        if self.q < 1:
            raise ValueError(f"need q >= 1, got q={self.q}")

    def to_dict(self) -> dict:
        return {"k": self.k, "f": self.f, "r": self.r, "q": self.q}


def _check(k: int, f: int, r: int) -> None:
    if k < 1:
        raise ValueError(f"need k >= 1, got k={k}")
    if not 0 <= f <= k:
        raise ValueError(f"need 0 <= f <= k, got f={f}, k={k}")
    if not 1 <= r <= k:
        raise ValueError(f"need 1 <= r <= k, got r={r}, k={k}")


def p_single_fail(k: int, f: int, r: int) -> float:
    """Probability that one validator's ``r`` picks all avoid the tampered segments.

    Evaluated as ``prod_{i<r} (k-f-i)/(k-i)`` rather than via factorials.
    """
    _check(k, f, r)
    if r > k - f:
        return 0.0
    p = 1.0
    for i in range(r):
        p *= (k - f - i) / (k - i)
    return p


def p_single_fail_exact(k: int, f: int, r: int) -> Fraction:
    _check(k, f, r)
    return Fraction(math.comb(k - f, r), math.comb(k, r))


def p_detect(k: int, f: int, r: int, q: int) -> float:
    if q < 1:
        raise ValueError(f"need q >= 1, got q={q}")
    return 1.0 - p_single_fail(k, f, r) ** q


def p_detect_exact(k: int, f: int, r: int, q: int) -> Fraction:
    if q < 1:
        raise ValueError(f"need q >= 1, got q={q}")
    return 1 - p_single_fail_exact(k, f, r) ** q


def min_validators(k: int, f: int, r: int, target: float) -> int:
    """Smallest ``q`` with ``p_detect(k, f, r, q) >= target``."""
    if not 0.0 < target < 1.0:
        raise ValueError("target must lie strictly between 0 and 1")
    if r <= 0:
        raise UnreachableTargetError("validators that check nothing never detect anything")
    if f == 0:
        raise UnreachableTargetError("nothing to detect when f = 0")
    miss = p_single_fail(k, f, r)
    if miss == 0.0:
        return 1
    q = max(1, math.ceil(math.log1p(-target) / math.log(miss)))
    # the logarithm can land one off either way near exact boundaries
    while q > 1 and p_detect(k, f, r, q - 1) >= target:
        q -= 1
    while p_detect(k, f, r, q) < target:
        q += 1
    return q


@dataclass(frozen=True)
class SweepRow:
    k: int
    f: int
    r: int
    q: int
    p_detect: float


def _grid_params(grid) -> list[AuditParams]:
    if isinstance(grid, Mapping):
        axes = [list(grid.get(name, ())) for name in ("k", "f", "r", "q")]
        if any(not axis for axis in axes):
            return []
        return [AuditParams(*combo) for combo in itertools.product(*axes)]
    return [p if isinstance(p, AuditParams) else AuditParams(*p) for p in grid]


def sweep(params_grid: Mapping[str, Iterable[int]] | Iterable[AuditParams]) -> list[SweepRow]:
    """Exact detection probability over a grid, sorted by (k, f, r, q).

    ``params_grid`` is either a mapping of axis name to values (expanded as a
    Cartesian product) or an iterable of :class:`AuditParams`.
    """
    params = sorted(set(_grid_params(params_grid)))
    return [SweepRow(p.k, p.f, p.r, p.q, p_detect(p.k, p.f, p.r, p.q)) for p in params]
