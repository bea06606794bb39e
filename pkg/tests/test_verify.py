import random
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from asymverify.detgen import DriftSpec, ModelConfig, TokenSequence, next_token
from asymverify.exceptions import SpanRangeError
from asymverify.seqlab import SEGMENT_INJECTION, AltModel, TamperPlan, apply_tamper, default_alt_model, honest_claim
from asymverify.verify import (
    MATCH,
    MISMATCH,
    CostLedger,
    VerificationOutcome,
    replay_divergence,
    verify_segment,
    verify_span,
    verify_token,
    verify_with_drift,
)

from oracles import slow_next_token


def _tamper(claim, cfg, indices, reanchor=False):
    plan = TamperPlan(SEGMENT_INJECTION, indices, AltModel(default_alt_model(cfg)))
    return apply_tamper(claim, plan, reanchor=reanchor)


def test_honest_spans_match(claim_792, ref_config):
    rng = random.Random(0)
    for _ in range(30):
        s = rng.randrange(792)
        e = rng.randrange(s + 1, 793)
        out = verify_span(ref_config, claim_792, (s, e))
        assert out.verdict == MATCH and out.first_mismatch is None


def test_last_50_tokens_ledger(claim_792, ref_config):
    out = verify_span(ref_config, claim_792, (742, 792))
    assert out.matched
    assert out.cost == CostLedger(prefill_tokens=len(claim_792.prompt) + 742, decode_tokens=50)


def test_full_output_costs_full_generation(claim_792, ref_config):
    assert verify_span(ref_config, claim_792, (0, 792)).cost.decode_tokens == 792


def test_tampered_segment_first_mismatch(claim_792, ref_config):
    bad = _tamper(claim_792, ref_config, {3})
    s, e = bad.segmentation.span(3)
    first_diff = next(p for p in range(s, e) if bad.tokens[p] != claim_792.tokens[p])
    out = verify_span(ref_config, bad, (s, e))
    assert out.verdict == MISMATCH
    assert out.first_mismatch == first_diff
    # early exit: decoded up to and including the mismatch
    assert out.cost.decode_tokens == first_diff - s + 1


def test_verify_segment_on_tampered_claim(claim_792, ref_config):
    bad = _tamper(claim_792, ref_config, {3, 11}, reanchor=True)
    assert not verify_segment(ref_config, bad, 3).matched
    assert not verify_segment(ref_config, bad, 11).matched
    # before the first tampered segment the claim is untouched
    assert verify_segment(ref_config, bad, 0).matched
    assert verify_segment(ref_config, bad, 5).matched
    assert verify_segment(ref_config, bad, 19).matched


@given(st.frozensets(st.integers(0, 9), min_size=1, max_size=4), st.integers(0, 2**32))
def test_segment_completeness_reanchored(indices, seed):
    cfg = ModelConfig("c", seed, 50257)
    honest = honest_claim(cfg, [seed % 50257], 50, 10)
    bad = _tamper(honest, cfg, indices, reanchor=True)
    for i in range(10):
        assert (not verify_segment(cfg, bad, i).matched) == (i in indices)


def test_verify_token(claim_792, ref_config):
    assert verify_token(ref_config, claim_792, 100).matched
    toks = list(claim_792.tokens.tokens)
    toks[100] = (toks[100] + 1) % ref_config.vocab_size
    bad = replace(claim_792, tokens=TokenSequence(tuple(toks), "output"))
    out = verify_token(ref_config, bad, 100)
    assert out.verdict == MISMATCH and out.first_mismatch == 100
    assert out.cost.decode_tokens == 1


def test_verify_token_zero_uses_prompt_only(claim_792, ref_config):
    out = verify_token(ref_config, claim_792, 0)
    assert out.cost.prefill_tokens == len(claim_792.prompt)
    assert claim_792.tokens[0] == slow_next_token("ref", 0, 50257, list(claim_792.prompt))


@pytest.mark.parametrize("span", [(-1, 3), (5, 5), (10, 4), (700, 793)])
def test_bad_spans(claim_792, ref_config, span):
    with pytest.raises(SpanRangeError):
        verify_span(ref_config, claim_792, span)


def test_bad_token_and_segment_index(claim_792, ref_config):
    with pytest.raises(SpanRangeError):
        verify_token(ref_config, claim_792, 792)
    with pytest.raises(SpanRangeError):
        verify_segment(ref_config, claim_792, 20)


def test_wrong_model_fails(claim_792):
    other = ModelConfig("ref", 1, 50257, 4096)
    assert not verify_span(other, claim_792, (0, 10)).matched


def test_first_mismatch_is_minimal_divergence(claim_792, ref_config):
    bad = _tamper(claim_792, ref_config, {2, 6})
    bad_pos = replay_divergence(ref_config, bad)
    out = verify_span(ref_config, bad, (0, 792))
    assert out.first_mismatch == min(bad_pos)


def test_replay_divergence_against_slow_oracle(ref_config):
    honest = honest_claim(ref_config, [4, 5], 40, 4)
    bad = _tamper(honest, ref_config, {1})
    ctx = list(bad.prompt.tokens)
    expected = []
    for p, tok in enumerate(bad.tokens):
        if slow_next_token("ref", 0, 50257, ctx) != tok:
            expected.append(p)
        ctx.append(tok)
    assert replay_divergence(ref_config, bad) == expected


def test_outcome_invariants():
    with pytest.raises(ValueError):
        VerificationOutcome(MISMATCH, None, (0, 5), CostLedger(0, 1))
    with pytest.raises(ValueError):
        VerificationOutcome(MISMATCH, 5, (0, 5), CostLedger(0, 1))
    with pytest.raises(ValueError):
        VerificationOutcome(MATCH, 2, (0, 5), CostLedger(0, 5))
    with pytest.raises(ValueError):
        VerificationOutcome(MATCH, None, (0, 5), CostLedger(0, 6))
    out = VerificationOutcome(MISMATCH, 3, (0, 5), CostLedger(7, 4))
    assert VerificationOutcome.from_dict(out.to_dict()) == out


def test_drift_zero_matches_plain(claim_792, ref_config):
    for span in [(0, 50), (300, 390), (791, 792)]:
        assert verify_with_drift(ref_config, DriftSpec(0.0, 1), claim_792, span) == \
            verify_span(ref_config, claim_792, span)


def test_drift_one_fails_at_span_start(claim_792, ref_config):
    out = verify_with_drift(ref_config, DriftSpec(1.0, 1), claim_792, (120, 170))
    assert out.verdict == MISMATCH and out.first_mismatch == 120


def test_drift_false_mismatch_rate(ref_config):
    # 1000 disjoint 50-token spans; P(mismatch) = 1 - 0.98**50 ~ 0.6358
    eps = 0.02
    drift = DriftSpec(eps, 31337)
    hits = 0
    for i in range(20):
        c = honest_claim(ref_config, [i], 2500, 50)
        hits += sum(not verify_with_drift(ref_config, drift, c, (s, s + 50)).matched for s in range(0, 2500, 50))
    p = 1 - (1 - eps) ** 50
    assert abs(hits / 1000 - p) <= 3 * (p * (1 - p) / 1000) ** 0.5
