"""Segmentation of claimed outputs and adversarial tampering.

Segment indices are 0-based throughout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional, Union

from . import streams
from .detgen import ModelConfig, TokenLike, TokenSequence, _ids, continue_from, generate
from .exceptions import ConfigurationError, InvalidPartitionError, PayloadSizeError, SchemaError

FULL_REPLACEMENT = "full_replacement"
SEGMENT_INJECTION = "segment_injection"
STRATEGIES = (FULL_REPLACEMENT, SEGMENT_INJECTION)

CLAIM_SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class Segmentation:
    total_len: int
    k: int
    spans: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.spans) != self.k:
            raise InvalidPartitionError("span count must equal k")
        pos = 0
        for start, end in self.spans:
            if start != pos or end <= start:
                raise InvalidPartitionError(f"spans must be contiguous and non-empty at {start}")
            pos = end
        if pos != self.total_len:
            raise InvalidPartitionError("spans must cover the whole output")
        sizes = [e - s for s, e in self.spans]
        if sizes and max(sizes) - min(sizes) > 1:
            raise InvalidPartitionError("segment sizes may differ by at most one token")

    def span(self, index: int) -> tuple[int, int]:
        if not 0 <= index < self.k:
            raise IndexError(f"segment index {index} out of range for k={self.k}")
        return self.spans[index]

    def segment_of(self, position: int) -> int:
        for i, (s, e) in enumerate(self.spans):
            if s <= position < e:
                return i
        raise IndexError(f"position {position} outside output of length {self.total_len}")

    def slices(self, tokens: TokenLike) -> list[tuple[int, ...]]:
        ids = _ids(tokens)
        return [ids[s:e] for s, e in self.spans]


def segment(m: int, k: int) -> Segmentation:
    """Split ``m`` tokens into ``k`` near-equal spans, larger spans first."""
    if k < 1 or k > m:
        raise InvalidPartitionError(f"need 1 <= k <= m, got k={k}, m={m}")
    base, extra = divmod(m, k)
    spans = []
    start = 0
    for i in range(k):
        size = base + 1 if i < extra else base
        spans.append((start, start + size))
        start += size
    return Segmentation(m, k, tuple(spans))


@dataclass(frozen=True)
class AltModel:
    """Replacement tokens come from a different (typically cheaper) generator."""

    config: ModelConfig


@dataclass(frozen=True)
class FixedPayload:
    """Replacement tokens are a fixed injected payload, truncated per span."""

    tokens: TokenSequence


ReplacementSource = Union[AltModel, FixedPayload]


@dataclass(frozen=True)
class TamperPlan:
    strategy: str
    tampered_indices: frozenset[int]
    replacement_source: ReplacementSource

    def __post_init__(self):
        object.__setattr__(self, "tampered_indices", frozenset(int(i) for i in self.tampered_indices))
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if not self.tampered_indices:
            raise ValueError("a tamper plan must touch at least one segment")

    @property
    def f(self) -> int:
        return len(self.tampered_indices)

    def check(self, seg: Segmentation) -> None:
        if any(not 0 <= i < seg.k for i in self.tampered_indices):
            raise ConfigurationError(f"tampered indices {sorted(self.tampered_indices)} invalid for k={seg.k}")
        if self.strategy == FULL_REPLACEMENT and self.f != seg.k:
            raise ConfigurationError("full_replacement must cover every segment")

    def to_dict(self) -> dict:
        src = self.replacement_source
        if isinstance(src, AltModel):
            source = {"alt_model": src.config.to_dict()}
        else:
            source = {"fixed_payload": list(src.tokens.tokens)}
        return {
            "strategy": self.strategy,
            "tampered_indices": sorted(self.tampered_indices),
            "replacement_source": source,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TamperPlan":
        src = d["replacement_source"]
        if "alt_model" in src:
            source: ReplacementSource = AltModel(ModelConfig.from_dict(src["alt_model"]))
        else:
            source = FixedPayload(TokenSequence(tuple(src["fixed_payload"]), "context"))
        return cls(d["strategy"], frozenset(d["tampered_indices"]), source)


@dataclass(frozen=True)
class ClaimedOutput:
    """An (X, Y) pair put up for audit.

    ``ground_truth_tamper`` is simulator bookkeeping; validators never read it.
    """

    prompt: TokenSequence
    claimed_config: ModelConfig
    tokens: TokenSequence
    segmentation: Segmentation
    ground_truth_tamper: Optional[TamperPlan] = None

    def __post_init__(self):
        if self.segmentation.total_len != len(self.tokens):
            raise ConfigurationError(
                f"segmentation covers {self.segmentation.total_len} tokens but output has {len(self.tokens)}"
            )

    @property
    def n(self) -> int:
        return len(self.prompt)

    @property
    def m(self) -> int:
        return len(self.tokens)

    def to_dict(self) -> dict:
        d = {
            "schema_version": CLAIM_SCHEMA_VERSION,
            "prompt": list(self.prompt.tokens),
            "claimed_config": self.claimed_config.to_dict(),
            "m": self.m,
            "tokens": list(self.tokens.tokens),
            "segmentation": {"k": self.segmentation.k, "spans": [list(s) for s in self.segmentation.spans]},
        }
        if self.ground_truth_tamper is not None:
            d["simulator_only"] = {"ground_truth_tamper": self.ground_truth_tamper.to_dict()}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "ClaimedOutput":
        if d.get("schema_version") != CLAIM_SCHEMA_VERSION:
            raise SchemaError(f"unsupported claim schema_version {d.get('schema_version')!r}")
        tokens = d["tokens"]
        if len(tokens) != d["m"]:
            # a truncated claim has no defined verdict; refuse it outright
            raise SchemaError(f"claim declares m={d['m']} but carries {len(tokens)} tokens")
        seg_d = d["segmentation"]
        seg = Segmentation(len(tokens), seg_d["k"], tuple(tuple(s) for s in seg_d["spans"]))
        plan = None
        if "simulator_only" in d:
            plan = TamperPlan.from_dict(d["simulator_only"]["ground_truth_tamper"])
        config = ModelConfig.from_dict(d["claimed_config"])
        out = TokenSequence(tuple(tokens), "output")
        out.check_vocab(config.vocab_size)
        return cls(TokenSequence(tuple(d["prompt"]), "prompt"), config, out, seg, plan)

    @classmethod
    def from_json(cls, text: str) -> "ClaimedOutput":
        return cls.from_dict(json.loads(text))


def honest_claim(config: ModelConfig, prompt: TokenLike, m: int, k: int) -> ClaimedOutput:
    """Generate an untampered claim of ``m`` tokens split into ``k`` segments."""
    prompt = TokenSequence(_ids(prompt), "prompt")
    return ClaimedOutput(prompt, config, generate(config, prompt, m), segment(m, k))


def sample_tamper_indices(k: int, f: int, rng_seed: int) -> frozenset[int]:
    """Uniform ``f``-subset of ``range(k)``, deterministic in ``rng_seed``."""
    if k < 1 or not 1 <= f <= k:
        raise ValueError(f"need 1 <= f <= k, got f={f}, k={k}")
    return frozenset(streams.partial_shuffle(rng_seed, k, f))


def _replacement_tokens(claim: ClaimedOutput, plan: TamperPlan) -> tuple[int, ...]:
    """Candidate replacement for the whole output; only tampered spans are used."""
    src = plan.replacement_source
    vocab = claim.claimed_config.vocab_size
    if isinstance(src, AltModel):
        alt = src.config
        if alt.max_output < claim.m:
            alt = replace(alt, max_output=claim.m)
        # an alt model with a larger vocabulary still has to emit in-range ids
        return tuple(t % vocab for t in generate(alt, claim.prompt.tokens, claim.m).tokens)
    payload = src.tokens.tokens
    out = list(claim.tokens.tokens)
    for i in plan.tampered_indices:
        s, e = claim.segmentation.span(i)
        if len(payload) < e - s:
            raise PayloadSizeError(f"payload of {len(payload)} tokens cannot fill segment {i} of {e - s} tokens")
        out[s:e] = [t % vocab for t in payload[: e - s]]
    return tuple(out)


def apply_tamper(honest: ClaimedOutput, plan: TamperPlan, reanchor: bool = False) -> ClaimedOutput:
    """Replace the planned segments, guaranteeing each one actually changes.

    By default the replacement is spliced in and every other token is left
    as is, so only the tampered spans differ from ``honest``. Because each
    token depends on the whole prefix, a splice also breaks replay of the
    honest segments that follow it. With ``reanchor=True`` the adversary
    instead regenerates every untampered segment after a tampered one from
    the altered prefix with the claimed model, so exactly the planned
    segments fail replay (the strongest adversary for a given ``f``).
    """
    if honest.ground_truth_tamper is not None:
        raise ConfigurationError("claim is already tampered")
    plan.check(honest.segmentation)
    vocab = honest.claimed_config.vocab_size
    source = _replacement_tokens(honest, plan)
    out = list(honest.tokens.tokens)
    dirty = False
    for i, (s, e) in enumerate(honest.segmentation.spans):
        if i not in plan.tampered_indices:
            if reanchor and dirty:
                ctx = honest.prompt.tokens + tuple(out[:s])
                out[s:e] = continue_from(honest.claimed_config, ctx, e - s).tokens
            continue
        if reanchor and dirty:
            expected = list(continue_from(honest.claimed_config, honest.prompt.tokens + tuple(out[:s]), e - s))
        else:
            expected = out[s:e]
        piece = list(source[s:e])
        if piece == expected:
            # forced difference: f must count detectably bad segments
            piece[0] = (piece[0] + 1) % vocab
        out[s:e] = piece
        dirty = True
    return replace(honest, tokens=TokenSequence(tuple(out), "output"), ground_truth_tamper=plan)


def diff_positions(a: TokenLike, b: TokenLike) -> list[int]:
    a, b = _ids(a), _ids(b)
    if len(a) != len(b):
        raise ValueError("sequences differ in length")
    return [i for i, (x, y) in enumerate(zip(a, b)) if x != y]


def default_alt_model(config: ModelConfig) -> ModelConfig:
    """A distinct generator standing in for a cheaper substitute model."""
    return ModelConfig(config.model_id + "-alt", streams.derive_key(config.seed, 0xA17), config.vocab_size,
                       config.max_output)


__all__ = [
    "AltModel",
    "ClaimedOutput",
    "FixedPayload",
    "FULL_REPLACEMENT",
    "SEGMENT_INJECTION",
    "Segmentation",
    "TamperPlan",
    "apply_tamper",
    "default_alt_model",
    "diff_positions",
    "honest_claim",
    "sample_tamper_indices",
    "segment",
]
