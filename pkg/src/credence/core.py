"""Belief state, the log-odds update rule, and the stance transform.

An agent's belief about a proposition is a single log-odds value L.
Active argument records contribute additively: each record adds
``p * ln(1 + s * gamma)`` where p is polarity, s is strength, and gamma
is the anchoring weight for seed records or the uptake weight for
everything else.  Stance is the bounded readout ``S = 2*sigmoid(L) - 1``,
which equals ``tanh(L/2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .exceptions import ConfigError, ContractError

# Mapped Likert endpoints are +-1 and have infinite log-odds; priors are
# clipped here before inversion.
STANCE_CLIP = 0.995


class Role(str, Enum):
    SEED = "seed"
    SELF = "self"
    OPPONENT = "opponent"


@dataclass(frozen=True)
class UAProfile:
    """Uptake/anchoring control pair.

    uptake weights non-seed evidence, anchoring weights seed records (or
    the scaled initial log-odds in replay).  confirmation_asymmetry is
    stored for config compatibility but must be 0.0: no update equation
    gives it meaning.
    """

    uptake: float
    anchoring: float
    confirmation_asymmetry: float = 0.0

    def __post_init__(self):
        if self.uptake < 0.0 or self.anchoring < 0.0:
            raise ConfigError(
                f"uptake and anchoring must be >= 0, got ({self.uptake}, {self.anchoring})"
            )
        if self.confirmation_asymmetry != 0.0:
            raise ConfigError(
                f"confirmation_asymmetry must be 0.0, got {self.confirmation_asymmetry}"
            )


def stance_from_log_odds(log_odds: float) -> float:
    """Map log-odds to stance in [-1, 1]; equals 2*sigmoid(L) - 1."""
    return math.tanh(log_odds / 2.0)


def log_odds_from_stance(stance: float) -> float:
    """Inverse of the stance transform; requires |S| < 1."""
    if abs(stance) >= 1.0:
        raise ContractError(f"|stance| must be < 1 before inversion, got {stance}")
    return math.log((1.0 + stance) / (1.0 - stance))


def clip_stance(stance: float, bound: float = STANCE_CLIP) -> float:
    return max(-bound, min(bound, stance))


@dataclass(frozen=True)
class BeliefState:
    log_odds: float
    stance: float

    @classmethod
    def from_log_odds(cls, log_odds: float) -> "BeliefState":
        return cls(log_odds=log_odds, stance=stance_from_log_odds(log_odds))

    @classmethod
    def zero(cls) -> "BeliefState":
        return cls(log_odds=0.0, stance=0.0)


def record_weight(role, profile: UAProfile) -> float:
    """Anchoring for seed records, uptake for debate/received records."""
    return profile.anchoring if role == Role.SEED else profile.uptake


def record_contribution(record, profile: UAProfile) -> float:
    """Log-odds contribution of one record: p * ln(1 + s * gamma)."""
    return record.polarity * math.log1p(record.strength * record_weight(record.role, profile))


def _check_record(record) -> None:
    if not record.active:
        raise ContractError("compute_log_odds received an archived record; pre-filter to the active set")
    if not 0.0 <= record.strength <= 1.0:
        raise ContractError(f"record strength {record.strength} outside [0, 1]")
    if record.polarity not in (-1, 1):
        raise ContractError(f"record polarity {record.polarity} not in {{-1, +1}}")


def compute_log_odds(active_records, profile: UAProfile) -> float:
    """Batch recompute of L over the full active set (insertion order)."""
    total = 0.0
    for record in active_records:
        _check_record(record)
        total += record_contribution(record, profile)
    return total


def update_incremental(
    state: BeliefState,
    new_record,
    profile: UAProfile,
    archival_occurred: bool = False,
) -> BeliefState:
    """Add one new active record's contribution to an existing state.

    Only valid when nothing was archived or replaced since the last
    update; otherwise the caller must recompute from the active set.
    """
    if archival_occurred:
        raise ContractError("archival occurred since last update; use compute_log_odds")
    _check_record(new_record)
    return BeliefState.from_log_odds(state.log_odds + record_contribution(new_record, profile))


def init_prior_from_stance(
    initial_stance: float, profile: UAProfile, clip_bound: float = STANCE_CLIP
) -> BeliefState:
    """Replay prior: anchoring-scaled log-odds of the clipped initial stance."""
    log_odds = profile.anchoring * log_odds_from_stance(clip_stance(initial_stance, clip_bound))
    return BeliefState.from_log_odds(log_odds)
