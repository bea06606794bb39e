import itertools
from collections import Counter

import pytest

from asymverify.detgen import ModelConfig
from asymverify.detmath import AuditParams
from asymverify.exceptions import ConfigurationError
from asymverify.seqlab import (
    FULL_REPLACEMENT,
    AltModel,
    TamperPlan,
    apply_tamper,
    default_alt_model,
    honest_claim,
    sample_tamper_indices,
)
from asymverify.simnet import (
    FULL,
    ORACLE,
    draw_assignment,
    oracle_detections,
    point_seed,
    run_experiment,
    run_trial,
    tamper_seed,
    tampered_claim,
)


@pytest.fixture(scope="module")
def template():
    return honest_claim(ModelConfig("sim", 3, 50257), [9, 8, 7], 200, 20)


def test_assignment_full_set():
    for seed in range(5):
        assert draw_assignment(7, 7, 0, seed, 3).chosen_segments == frozenset(range(7))


def test_assignment_reproducible():
    a = draw_assignment(20, 3, 4, 123, 77)
    assert a == draw_assignment(20, 3, 4, 123, 77)
    assert len(a.chosen_segments) == 3
    assert draw_assignment(20, 3, 5, 123, 77).rng_seed != a.rng_seed


def test_assignment_pairs_uniform():
    # 10 pairs from k=5; each ~ Binomial(10000, 0.1): sd 30
    counts = Counter(tuple(sorted(draw_assignment(5, 2, 0, 1, t).chosen_segments)) for t in range(10_000))
    assert set(counts) == set(itertools.combinations(range(5), 2))
    assert all(abs(c - 1000) <= 90 for c in counts.values())


def test_assignment_invalid():
    with pytest.raises(ValueError):
        draw_assignment(5, 6, 0, 0, 0)


def test_honest_never_detected(template):
    for t in range(20):
        for mode in (ORACLE, FULL):
            out = run_trial(template, AuditParams(20, 0, 3, 5), 1, t, mode)
            assert not out.detected and not out.rejected and not out.broadcasts


def test_full_replacement_always_detected(template):
    cfg = template.claimed_config
    bad = apply_tamper(template, TamperPlan(FULL_REPLACEMENT, range(20), AltModel(default_alt_model(cfg))))
    for t in range(10):
        for mode in (ORACLE, FULL):
            assert run_trial(bad, AuditParams(20, 20, 1, 1), 5, t, mode).detected


def test_trial_records_broadcast_and_cost(template):
    params = AuditParams(20, 2, 4, 10)
    claim = tampered_claim(template, params, 9, 0)
    out = run_trial(claim, params, 9, 0, FULL)
    assert out.detected
    assert {b.validator_id for b in out.broadcasts} == out.detecting_validators
    assert all(b.segment_index in claim.ground_truth_tamper.tampered_indices for b in out.broadcasts)
    assert out.total_cost.decode_tokens > 0
    assert len(out.per_validator_outcomes) == 10
    assert all(len(v) == 4 for v in out.per_validator_outcomes)


def test_oracle_mode_costs_nothing(template):
    params = AuditParams(20, 2, 1, 3)
    out = run_trial(tampered_claim(template, params, 1, 0), params, 1, 0, ORACLE)
    assert out.total_cost.decode_tokens == 0


def test_trial_configuration_errors(template):
    with pytest.raises(ConfigurationError):
        run_trial(template, AuditParams(10, 0, 1, 1), 0, 0)
    with pytest.raises(ConfigurationError):
        run_trial(template, AuditParams(20, 2, 1, 1), 0, 0)
    with pytest.raises(ConfigurationError):
        run_trial(template, AuditParams(20, 0, 1, 1), 0, 0, "fast")


def test_paired_full_and_oracle_agree(template):
    params = AuditParams(20, 2, 2, 10)
    full = run_experiment(template, params, 150, 42, FULL, keep_trials=True)
    oracle = run_experiment(template, params, 150, 42, ORACLE, keep_trials=True)
    assert [o.detected for o in full.outcomes] == [o.detected for o in oracle.outcomes]


def test_vectorized_oracle_matches_scalar(template):
    for params in (AuditParams(20, 2, 1, 7), AuditParams(20, 5, 3, 4), AuditParams(20, 20, 1, 1)):
        scalar = run_experiment(template, params, 300, 7, ORACLE, keep_trials=True)
        fast = oracle_detections(params, 300, 7)
        assert fast.tolist() == [o.detected for o in scalar.outcomes]


def test_experiment_statistics():
    params = AuditParams(20, 2, 1, 10)
    rep = run_experiment(honest_claim(ModelConfig("s", 0, 1000), [1], 20, 20), params, 10_000, 2024)
    assert rep.exact_detect == pytest.approx(0.6513215599)
    assert rep.abs_error <= rep.three_sigma
    assert rep.three_sigma == pytest.approx(3 * (0.6513215599 * 0.3486784401 / 10_000) ** 0.5)


def test_single_trial(template):
    rep = run_experiment(template, AuditParams(20, 2, 1, 1), 1, 0)
    assert rep.empirical_detect in (0.0, 1.0)


def test_reports_reproducible(template):
    params = AuditParams(20, 2, 2, 3)
    a = run_experiment(template, params, 500, 99).to_json()
    assert a == run_experiment(template, params, 500, 99).to_json()
    a = run_experiment(template, params, 30, 99, FULL, keep_trials=True).to_json(include_trials=True)
    assert a == run_experiment(template, params, 30, 99, FULL, keep_trials=True).to_json(include_trials=True)


def test_trial_order_independence():
    params = AuditParams(20, 2, 2, 6)
    whole = oracle_detections(params, 400, 5)
    # re-running any single trial in isolation gives the same verdict
    for t in (0, 17, 399):
        assert oracle_detections(params, t + 1, 5)[t] == whole[t]


def test_validator_exchangeability():
    # P(a given validator detects) must not depend on its id: 1 - 6/8 = 0.25
    trials = 4000
    rates = []
    for v in range(4):
        hits = 0
        for t in range(trials):
            bad = sample_tamper_indices(8, 2, tamper_seed(11, t))
            hits += bool(draw_assignment(8, 1, v, 11, t).chosen_segments & bad)
        rates.append(hits / trials)
    sd = (0.25 * 0.75 / trials) ** 0.5
    assert all(abs(r - 0.25) <= 3 * sd for r in rates)


def test_point_seeds_differ():
    seeds = {point_seed(0, AuditParams(20, 2, r, q)) for r in range(1, 5) for q in range(1, 21)}
    assert len(seeds) == 80


def test_experiment_errors(template):
    with pytest.raises(ValueError):
        run_experiment(template, AuditParams(20, 2, 1, 1), 0, 0)
    with pytest.raises(ConfigurationError):
        run_experiment(template, AuditParams(10, 2, 1, 1), 5, 0)
    bad = tampered_claim(template, AuditParams(20, 2, 1, 1), 0, 0)
    with pytest.raises(ConfigurationError):
        run_experiment(bad, AuditParams(20, 2, 1, 1), 5, 0)
