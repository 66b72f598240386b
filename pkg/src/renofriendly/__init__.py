"""Reno-friendly AIMD: closed forms, a round-based fluid simulator and loss-assignment chains."""

from .core import AimdParams, BufferPolicy, CcaKind, FlowGroup, LinkConfig, Scenario, ScenarioError, validate_scenario
from .friendliness import ai_factor, multi_loss_outcome_probs, reno_friendly_ai, single_loss_hit_probs

__all__ = [
    "AimdParams",
    "BufferPolicy",
    "CcaKind",
    "FlowGroup",
    "LinkConfig",
    "Scenario",
    "ScenarioError",
    "validate_scenario",
    "ai_factor",
    "reno_friendly_ai",
    "single_loss_hit_probs",
    "multi_loss_outcome_probs",
]
