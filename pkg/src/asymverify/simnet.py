"""Monte Carlo simulation of one generator audited by ``q`` validators.

Randomness is counter-based: tamper placement for trial ``t`` is keyed by
``(master_seed, TAMPER, t)`` and validator ``v``'s picks by
``(master_seed, ASSIGN, t, v)``. Trials can therefore run in any order, or
all at once in the vectorized oracle path, with identical results.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import streams
from .detmath import AuditParams, p_detect
from .exceptions import ConfigurationError
from .seqlab import (
    FULL_REPLACEMENT,
    SEGMENT_INJECTION,
    AltModel,
    ClaimedOutput,
    ReplacementSource,
    TamperPlan,
    apply_tamper,
    default_alt_model,
    sample_tamper_indices,
)
from .verify import CostLedger, VerificationOutcome, verify_segment

ORACLE = "oracle"
FULL = "full"
MODES = (ORACLE, FULL)


@dataclass(frozen=True)
class ValidatorAssignment:
    validator_id: int
    chosen_segments: frozenset[int]
    rng_seed: int


def assignment_key(master_seed: int, trial_id: int, validator_id: int) -> int:
    return streams.derive_key(master_seed, streams.DOMAIN_ASSIGN, trial_id, validator_id)


def tamper_seed(master_seed: int, trial_id: int) -> int:
    return streams.derive_key(master_seed, streams.DOMAIN_TAMPER, trial_id)


def point_seed(master_seed: int, params: AuditParams) -> int:
    """Seed for one grid point, so points in a sweep are independent experiments."""
    return streams.derive_key(master_seed, params.k, params.f, params.r, params.q)


def draw_assignment(k: int, r: int, validator_id: int, master_seed: int, trial_id: int) -> ValidatorAssignment:
    """Uniform ``r``-subset of ``range(k)`` via a partial Fisher-Yates shuffle."""
    if not 1 <= r <= k:
        raise ValueError(f"need 1 <= r <= k, got r={r}, k={k}")
    key = assignment_key(master_seed, trial_id, validator_id)
    return ValidatorAssignment(validator_id, frozenset(streams.partial_shuffle(key, k, r)), key)


@dataclass(frozen=True)
class BroadcastEvent:
    """A validator announcing a mismatch so the others reject the claim."""

    validator_id: int
    segment_index: int
    first_mismatch: Optional[int] = None

    def to_dict(self) -> dict:
        return {"validator_id": self.validator_id, "segment_index": self.segment_index,
                "first_mismatch": self.first_mismatch}


@dataclass(frozen=True)
class TrialOutcome:
    trial_id: int
    detected: bool
    detecting_validators: frozenset[int]
    per_validator_outcomes: tuple[tuple[VerificationOutcome, ...], ...]
    total_cost: CostLedger
    broadcasts: tuple[BroadcastEvent, ...] = ()
    assignments: tuple[ValidatorAssignment, ...] = ()

    def __post_init__(self):
        if self.detected != bool(self.detecting_validators):
            raise ValueError("detected must hold exactly when some validator detected")

    @property
    def rejected(self) -> bool:
        # consensus rejection follows from any broadcast mismatch
        return self.detected

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "detected": self.detected,
            "rejected": self.rejected,
            "detecting_validators": sorted(self.detecting_validators),
            "assignments": [sorted(a.chosen_segments) for a in self.assignments],
            "per_validator_outcomes": [[o.to_dict() for o in outs] for outs in self.per_validator_outcomes],
            "total_cost": self.total_cost.to_dict(),
            "broadcasts": [b.to_dict() for b in self.broadcasts],
        }


def _claim_f(claim: ClaimedOutput) -> int:
    return 0 if claim.ground_truth_tamper is None else claim.ground_truth_tamper.f


def run_trial(claim: ClaimedOutput, params: AuditParams, master_seed: int, trial_id: int,
              mode: str = ORACLE) -> TrialOutcome:
    """Run one audit round of ``params.q`` validators against ``claim``.

    ``full`` mode regenerates every chosen segment with the claimed model;
    ``oracle`` mode intersects the picks with the ground-truth tampered set
    and records no regeneration cost.
    """
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if claim.segmentation.k != params.k:
        raise ConfigurationError(f"claim has k={claim.segmentation.k} segments, params say k={params.k}")
    if _claim_f(claim) != params.f:
        raise ConfigurationError(f"claim has {_claim_f(claim)} tampered segments, params say f={params.f}")
    tampered = frozenset() if claim.ground_truth_tamper is None else claim.ground_truth_tamper.tampered_indices

    assignments = []
    per_validator = []
    detecting = set()
    broadcasts = []
    cost = CostLedger()
    for v in range(params.q):
        a = draw_assignment(params.k, params.r, v, master_seed, trial_id)
        assignments.append(a)
        outcomes = []
        for seg in sorted(a.chosen_segments):
            if mode == FULL:
                out = verify_segment(claim.claimed_config, claim, seg)
                outcomes.append(out)
                cost = cost + out.cost
                bad, where = not out.matched, out.first_mismatch
            else:
                bad, where = seg in tampered, None
            if bad:
                detecting.add(v)
                broadcasts.append(BroadcastEvent(v, seg, where))
        per_validator.append(tuple(outcomes))
    return TrialOutcome(trial_id, bool(detecting), frozenset(detecting), tuple(per_validator), cost,
                        tuple(broadcasts), tuple(assignments))


def oracle_detections(params: AuditParams, trials: int, master_seed: int) -> np.ndarray:
    """Vectorized oracle verdicts for trials ``0..trials-1``.

    Bit-identical to calling :func:`run_trial` in oracle mode on claims
    tampered at :func:`tamper_seed`-placed segments.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    k, f, r, q = params.k, params.f, params.r, params.q
    if f == 0:
        return np.zeros(trials, dtype=bool)
    trial_ids = np.arange(trials, dtype=np.uint64)
    tkeys = streams.derive_key_np(master_seed, streams.DOMAIN_TAMPER, trial_ids)
    bad = streams.partial_shuffle_np(tkeys, k, f)
    mask = np.zeros((trials, k), dtype=bool)
    np.put_along_axis(mask, bad, True, axis=1)
    vkeys = streams.derive_key_np(master_seed, streams.DOMAIN_ASSIGN, trial_ids[:, None],
                                  np.arange(q, dtype=np.uint64)[None, :])
    picks = streams.partial_shuffle_np(vkeys, k, r).reshape(trials, q * r)
    return np.take_along_axis(mask, picks, axis=1).any(axis=1)


def three_sigma(p: float, trials: int) -> float:
    return 3.0 * math.sqrt(p * (1.0 - p) / trials)


@dataclass
class SimulationReport:
    params: AuditParams
    trials: int
    detected_count: int
    exact_detect: float
    master_seed: int
    mode: str
    outcomes: Optional[list[TrialOutcome]] = field(default=None, repr=False)

    @property
    def empirical_detect(self) -> float:
        return self.detected_count / self.trials

    @property
    def abs_error(self) -> float:
        return abs(self.empirical_detect - self.exact_detect)

    @property
    def three_sigma(self) -> float:
        return three_sigma(self.exact_detect, self.trials)

    @property
    def within_3sigma(self) -> bool:
        # slack absorbs rounding when the exact value is 0 or 1
        return self.abs_error <= self.three_sigma + 1e-12

    def to_dict(self, include_trials: bool = False) -> dict:
        d = {
            "params": self.params.to_dict(),
            "trials": self.trials,
            "mode": self.mode,
            "master_seed": self.master_seed,
            "detected_count": self.detected_count,
            "empirical_detect": self.empirical_detect,
            "exact_detect": self.exact_detect,
            "abs_error": self.abs_error,
            "three_sigma": self.three_sigma,
            "within_3sigma": self.within_3sigma,
        }
        if include_trials and self.outcomes is not None:
            d["outcomes"] = [o.to_dict() for o in self.outcomes]
        return d

    def to_json(self, include_trials: bool = False) -> str:
        return json.dumps(self.to_dict(include_trials), sort_keys=True)


def tampered_claim(template: ClaimedOutput, params: AuditParams, master_seed: int, trial_id: int,
                   source: Optional[ReplacementSource] = None) -> ClaimedOutput:
    """The claim a trial audits: ``template`` with ``f`` freshly placed bad segments.

    Tampering is re-anchored so that exactly the placed segments fail replay,
    which is the event the closed-form detection probability counts.
    """
    if params.f == 0:
        return template
    if source is None:
        source = AltModel(default_alt_model(template.claimed_config))
    idx = sample_tamper_indices(params.k, params.f, tamper_seed(master_seed, trial_id))
    strategy = FULL_REPLACEMENT if params.f == params.k else SEGMENT_INJECTION
    return apply_tamper(template, TamperPlan(strategy, idx, source), reanchor=True)


def run_experiment(claim_template: ClaimedOutput, params: AuditParams, trials: int, master_seed: int,
                   mode: str = ORACLE, source: Optional[ReplacementSource] = None,
                   keep_trials: bool = False) -> SimulationReport:
    """Run ``trials`` independent audits and compare with the exact probability.

    Oracle mode without ``keep_trials`` takes the vectorized path; everything
    else builds each tampered claim and calls :func:`run_trial`.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if mode not in MODES:
        raise ConfigurationError(f"mode must be one of {MODES}")
    if claim_template.ground_truth_tamper is not None:
        raise ConfigurationError("claim template must be honest; tampering is placed per trial")
    if claim_template.segmentation.k != params.k:
        raise ConfigurationError(f"template has k={claim_template.segmentation.k}, params say k={params.k}")

    outcomes = None
    if mode == ORACLE and not keep_trials:
        detected = int(oracle_detections(params, trials, master_seed).sum())
    else:
        outcomes = []
        for t in range(trials):
            claim = tampered_claim(claim_template, params, master_seed, t, source)
            outcomes.append(run_trial(claim, params, master_seed, t, mode))
        detected = sum(o.detected for o in outcomes)
    exact = p_detect(params.k, params.f, params.r, params.q)
    return SimulationReport(params, trials, detected, exact, master_seed, mode,
                            outcomes if keep_trials else None)
