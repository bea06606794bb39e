"""Targeted validation: regenerate a token range from its preceding context
on an identical model and compare it with the claim.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .detgen import DriftSpec, ModelConfig, _absorb, _config_state, _extend, iter_tokens
from .exceptions import SpanRangeError
from .seqlab import ClaimedOutput

MATCH = "match"
MISMATCH = "mismatch"


@dataclass(frozen=True)
class CostLedger:
    """Work done by a validator, counted in tokens.

    ``prefill_tokens`` is context fed to the model; ``decode_tokens`` is
    tokens regenerated. Decoding is the expensive phase.
    """

    prefill_tokens: int = 0
    decode_tokens: int = 0

    def __post_init__(self):
        if self.prefill_tokens < 0 or self.decode_tokens < 0:
            raise ValueError("ledger counts must be non-negative")

    def __add__(self, other: "CostLedger") -> "CostLedger":
        return CostLedger(self.prefill_tokens + other.prefill_tokens, self.decode_tokens + other.decode_tokens)

    def to_dict(self) -> dict:
        return {"prefill_tokens": self.prefill_tokens, "decode_tokens": self.decode_tokens}

    @classmethod
    def from_dict(cls, d: dict) -> "CostLedger":
        return cls(d["prefill_tokens"], d["decode_tokens"])


@dataclass(frozen=True)
class VerificationOutcome:
    verdict: str
    first_mismatch: Optional[int]
    checked_span: tuple[int, int]
    cost: CostLedger

    def __post_init__(self):
        start, end = self.checked_span
        if self.verdict == MISMATCH:
            if self.first_mismatch is None or not start <= self.first_mismatch < end:
                raise ValueError("a mismatch must carry a position inside the checked span")
        elif self.verdict == MATCH:
            if self.first_mismatch is not None:
                raise ValueError("a match cannot carry a mismatch position")
        else:
            raise ValueError(f"unknown verdict {self.verdict!r}")
        if self.cost.decode_tokens > end - start:
            raise ValueError("decoded more tokens than the span holds")

    @property
    def matched(self) -> bool:
        return self.verdict == MATCH

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "first_mismatch": self.first_mismatch,
            "checked_span": list(self.checked_span),
            "cost": self.cost.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationOutcome":
        return cls(d["verdict"], d["first_mismatch"], tuple(d["checked_span"]), CostLedger.from_dict(d["cost"]))


def _check_span(claim: ClaimedOutput, span: tuple[int, int]) -> tuple[int, int]:
    start, end = int(span[0]), int(span[1])
    if not 0 <= start < end <= claim.m:
        raise SpanRangeError(f"span ({start}, {end}) invalid for output of length {claim.m}")
    return start, end


def _replay(config: ModelConfig, claim: ClaimedOutput, span, drift: Optional[DriftSpec]) -> VerificationOutcome:
    start, end = _check_span(claim, span)
    claimed = claim.tokens.tokens
    # context X ++ Y[:start]; regenerated tokens are compared as they arrive
    context = claim.prompt.tokens + claimed[:start]
    regen = iter_tokens(config, context, drift)
    decoded = 0
    first = None
    for pos in range(start, end):
        tok = next(regen)
        decoded += 1
        if tok != claimed[pos]:
            first = pos
            break
    cost = CostLedger(claim.n + start, decoded)
    if first is None:
        return VerificationOutcome(MATCH, None, (start, end), cost)
    return VerificationOutcome(MISMATCH, first, (start, end), cost)


def verify_span(config: ModelConfig, claim: ClaimedOutput, span: tuple[int, int]) -> VerificationOutcome:
    """Check ``claim.tokens[start:end]`` by regeneration, stopping at the first mismatch."""
    return _replay(config, claim, span, None)


def verify_segment(config: ModelConfig, claim: ClaimedOutput, seg_index: int) -> VerificationOutcome:
    try:
        span = claim.segmentation.span(seg_index)
    except IndexError as exc:
        raise SpanRangeError(str(exc)) from None
    return _replay(config, claim, span, None)


def verify_token(config: ModelConfig, claim: ClaimedOutput, j: int) -> VerificationOutcome:
    return _replay(config, claim, (j, j + 1), None)


def verify_with_drift(config: ModelConfig, drift: DriftSpec, claim: ClaimedOutput,
                      span: tuple[int, int]) -> VerificationOutcome:
    """As :func:`verify_span`, but the validator's model drifts per ``drift``."""
    return _replay(config, claim, span, drift)


def replay_divergence(config: ModelConfig, claim: ClaimedOutput) -> list[int]:
    """Positions ``p`` where ``claim.tokens[p]`` is not what ``config`` predicts
    from the claimed prefix ``X ++ Y[:p]``.

    A span fails :func:`verify_span` exactly when it contains one of these.
    """
    claim.prompt.check_vocab(config.vocab_size)
    h = _absorb(_config_state(config), claim.prompt.tokens)
    bad = []
    for p, tok in enumerate(claim.tokens.tokens):
        if h % config.vocab_size != tok:
            bad.append(p)
        h = _extend(h, tok)
    return bad
