"""Asymmetric verification of deterministic autoregressive outputs.

A validator checks a claimed output by regenerating a few randomly chosen
segments on an identical model and comparing tokens; many validators
sampling independently catch tampering with a probability that has a
closed form.
"""

__version__ = "0.1.0"

from .bench import CostModel, LinearCostRegressor, MeasurementRow, effort_ratio, estimate, fit, load_rows
from .detgen import (
    DriftSpec,
    ModelConfig,
    TokenSequence,
    continue_from,
    drifted_next_token,
    generate,
    next_token,
)
from .detmath import AuditParams, min_validators, p_detect, p_detect_exact, p_single_fail, p_single_fail_exact, sweep
from .seqlab import (
    AltModel,
    ClaimedOutput,
    FixedPayload,
    Segmentation,
    TamperPlan,
    apply_tamper,
    honest_claim,
    sample_tamper_indices,
    segment,
)
from .simnet import SimulationReport, TrialOutcome, draw_assignment, run_experiment, run_trial
from .verify import CostLedger, VerificationOutcome, verify_segment, verify_span, verify_token, verify_with_drift

__all__ = [
    "AltModel",
    "AuditParams",
    "ClaimedOutput",
    "CostLedger",
    "CostModel",
    "DriftSpec",
    "FixedPayload",
    "LinearCostRegressor",
    "MeasurementRow",
    "ModelConfig",
    "Segmentation",
    "SimulationReport",
    "TamperPlan",
    "TokenSequence",
    "TrialOutcome",
    "VerificationOutcome",
    "apply_tamper",
    "continue_from",
    "draw_assignment",
    "drifted_next_token",
    "effort_ratio",
    "estimate",
    "fit",
    "generate",
    "honest_claim",
    "load_rows",
    "min_validators",
    "next_token",
    "p_detect",
    "p_detect_exact",
    "p_single_fail",
    "p_single_fail_exact",
    "run_experiment",
    "run_trial",
    "sample_tamper_indices",
    "segment",
    "sweep",
    "verify_segment",
    "verify_span",
    "verify_token",
    "verify_with_drift",
]
