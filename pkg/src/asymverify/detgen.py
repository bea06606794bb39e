"""Deterministic autoregressive reference generator.

The generator is a 64-bit FNV-1a hash chain: the next token is the digest of
``model_id || seed || context`` reduced modulo the vocabulary size. The
byte layout is fixed so that any implementation reproduces the same tokens:

* UTF-8 bytes of ``model_id``
* ``seed`` as 8 bytes little-endian
* each context token id as 4 bytes little-endian

FNV-1a is a streaming hash, so generation extends a running digest by one
token at a time instead of rehashing the whole context per step.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence, Union

from .exceptions import CapExceededError

FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
MASK64 = (1 << 64) - 1
_COIN_BITS = 53

ROLES = ("prompt", "output", "context")


def fnv1a64(data: bytes, state: int = FNV_OFFSET) -> int:
    """FNV-1a over ``data``, continuing from ``state``."""
    h = state
    for b in data:
        h = ((h ^ b) * FNV_PRIME) & MASK64
    return h


def _extend(h: int, token: int) -> int:
    # unrolled 4-byte little-endian update; this is the generator's hot loop
    h = ((h ^ (token & 0xFF)) * FNV_PRIME) & MASK64
    h = ((h ^ ((token >> 8) & 0xFF)) * FNV_PRIME) & MASK64
    h = ((h ^ ((token >> 16) & 0xFF)) * FNV_PRIME) & MASK64
    return ((h ^ ((token >> 24) & 0xFF)) * FNV_PRIME) & MASK64


@dataclass(frozen=True)
class ModelConfig:
    """Identity of a deterministic generator.

    Two configs are interchangeable for verification iff all fields are equal,
    which is exactly dataclass equality.
    """

    model_id: str
    seed: int
    vocab_size: int
    max_output: int = 4096

    def __post_init__(self):
        if not isinstance(self.model_id, str):
            raise TypeError("model_id must be a string")
        if not 0 <= self.seed <= MASK64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        if self.vocab_size > 1 << 32:
            raise ValueError("token ids are encoded in 4 bytes; vocab_size must be <= 2**32")
        if self.max_output < 1:
            raise ValueError("max_output must be positive")

    def to_dict(self) -> dict:
        return {
            "model_id": self.model_id,
            "seed": self.seed,
            "vocab_size": self.vocab_size,
            "max_output": self.max_output,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(d["model_id"], int(d["seed"]), int(d["vocab_size"]), int(d.get("max_output", 4096)))


@dataclass(frozen=True)
class TokenSequence:
    """Immutable run of token ids tagged with its role."""

    tokens: tuple[int, ...] = ()
    role: str = "context"

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(int(t) for t in self.tokens))
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}, got {self.role!r}")
        if any(t < 0 for t in self.tokens):
            raise ValueError("token ids must be non-negative")

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return TokenSequence(self.tokens[item], self.role)
        return self.tokens[item]

    def __add__(self, other: "TokenLike") -> "TokenSequence":
        return TokenSequence(self.tokens + tuple(_ids(other)), "context")

    def check_vocab(self, vocab_size: int) -> None:
        for i, t in enumerate(self.tokens):
            if t >= vocab_size:
                raise ValueError(f"token {t} at position {i} outside vocabulary of size {vocab_size}")


TokenLike = Union[TokenSequence, Sequence[int]]


def _ids(seq: TokenLike) -> tuple[int, ...]:
    if isinstance(seq, TokenSequence):
        return seq.tokens
    return tuple(int(t) for t in seq)


def as_sequence(seq: TokenLike, role: str = "context") -> TokenSequence:
    if isinstance(seq, TokenSequence):
        return seq
    return TokenSequence(tuple(seq), role)


@dataclass(frozen=True)
class DriftSpec:
    """Per-token divergence of a validator running on a mismatched stack."""

    flip_probability: float
    drift_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.flip_probability <= 1.0:
            raise ValueError("flip_probability must lie in [0, 1]")
        if not 0 <= self.drift_seed <= MASK64:
            raise ValueError("drift_seed must be a 64-bit unsigned integer")

    def to_dict(self) -> dict:
        return {"flip_probability": self.flip_probability, "drift_seed": self.drift_seed}


@lru_cache(maxsize=256)
def _config_state(config: ModelConfig) -> int:
    h = fnv1a64(config.model_id.encode("utf-8"))
    return fnv1a64(config.seed.to_bytes(8, "little"), h)


def _absorb(h: int, tokens: Iterable[int]) -> int:
    for t in tokens:
        h = _extend(h, t)
    return h


def context_digest(config: ModelConfig, context: TokenLike) -> int:
    """Digest of the encoded ``(model_id, seed, context)`` triple."""
    return _absorb(_config_state(config), _ids(context))


def _check_context(config: ModelConfig, context: TokenLike) -> tuple[int, ...]:
    ids = _ids(context)
    for i, t in enumerate(ids):
        if not 0 <= t < config.vocab_size:
            raise ValueError(f"token {t} at position {i} outside vocabulary of size {config.vocab_size}")
    return ids


def next_token(config: ModelConfig, context: TokenLike) -> int:
    ids = _check_context(config, context)
    return context_digest(config, ids) % config.vocab_size


def _drift_flips(digest: int, drift: DriftSpec) -> bool:
    coin = fnv1a64(drift.drift_seed.to_bytes(8, "little"), digest)
    return (coin % (1 << _COIN_BITS)) / (1 << _COIN_BITS) < drift.flip_probability


def drifted_next_token(config: ModelConfig, drift: DriftSpec, context: TokenLike) -> int:
    """Next token as produced on a drifting stack.

    The flip coin is the context digest extended by the 8-byte little-endian
    ``drift_seed``; a flip yields ``(token + 1) mod vocab_size`` so it is
    always observable.
    """
    ids = _check_context(config, context)
    digest = context_digest(config, ids)
    tok = digest % config.vocab_size
    if _drift_flips(digest, drift):
        tok = (tok + 1) % config.vocab_size
    return tok


def _check_cap(config: ModelConfig, m: int) -> None:
    if m > config.max_output:
        raise CapExceededError(f"requested {m} tokens but max_output is {config.max_output}")


def iter_tokens(config: ModelConfig, context: TokenLike, drift: DriftSpec | None = None):
    """Yield an unbounded deterministic continuation of ``context``.

    Each yielded token is fed back into the running digest, so this is the
    autoregressive loop itself. Callers stop consuming when they have enough.
    """
    ids = _check_context(config, context)
    h = context_digest(config, ids)
    vocab = config.vocab_size
    while True:
        tok = h % vocab
        if drift is not None and _drift_flips(h, drift):
            tok = (tok + 1) % vocab
        yield tok
        h = _extend(h, tok)


def continue_from(config: ModelConfig, context: TokenLike, m: int) -> TokenSequence:
    """Regenerate ``m`` tokens following ``context``; ``m == 0`` gives an empty sequence."""
    if m < 0:
        raise ValueError("m must be non-negative")
    _check_cap(config, m)
    if m == 0:
        _check_context(config, context)
        return TokenSequence((), "output")
    it = iter_tokens(config, context)
    return TokenSequence(tuple(next(it) for _ in range(m)), "output")


def generate(config: ModelConfig, prompt: TokenLike, m: int) -> TokenSequence:
    """Generate ``m >= 1`` output tokens for ``prompt``."""
    if m < 1:
        raise ValueError("m must be at least 1")
    return continue_from(config, prompt, m)
