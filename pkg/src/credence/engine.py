"""Per-message update loop and the audit trace.

For every incoming message the engine extracts candidates, scores them,
runs conflict resolution, stores the records, recomputes the belief
state from the active set, and (for its own turns) composes a response
from a stance instruction plus retrieved memory.  Every sub-step emits a
trace event; the trace alone reconstructs the final belief state.
"""

from __future__ import annotations

import bisect
import json
from dataclasses import dataclass, field
from typing import Optional

from .core import (
    BeliefState,
    Role,
    UAProfile,
    compute_log_odds,
    record_contribution,
    stance_from_log_odds,
)
from .exceptions import ContractError, TraceVerificationError
from .extraction import ExtractorPort, Message
from .judgement import (
    ArgumentRecord,
    CandidateArgument,
    ScorerPort,
    embed_claim,
    ingest_record,
    score_strength,
)
from .memory import MemoryStore, RetrievalContext

DEFAULT_BIN_LABELS = (
    "argue strongly against the proposition",
    "argue firmly against the proposition",
    "argue against the proposition",
    "lean against the proposition",
    "voice mild reservations about the proposition",
    "voice mild support for the proposition",
    "lean toward the proposition",
    "argue for the proposition",
    "argue firmly for the proposition",
    "argue strongly for the proposition",
)


class GeneratorPort:
    """Response generator interface."""

    def generate(self, stance_instruction: str, retrieved: RetrievalContext, history: list[Message]) -> str:
        raise NotImplementedError


class TemplateGenerator(GeneratorPort):
    """Deterministic generator for model-free runs.

    Emits the stance instruction followed by the retrieved claims in the
    scripted-claim grammar, so a listening agent can re-extract them.
    Strengths are printed with enough digits to round-trip.
    """

    def generate(self, stance_instruction: str, retrieved: RetrievalContext, history: list[Message]) -> str:
        lines = [stance_instruction]
        for record in retrieved.records:
            sign = "+" if record.polarity > 0 else "-"
            lines.append(f"CLAIM {sign}{record.strength:.17f}: {record.claim}")
        return "\n".join(lines)


@dataclass
class EngineConfig:
    extractor: ExtractorPort
    scorer: ScorerPort
    generator: Optional[GeneratorPort] = None
    theta: float = 0.80
    theta_self: float = 0.50
    k: int = 5
    history_window: int = 6
    bin_labels: tuple = DEFAULT_BIN_LABELS


@dataclass
class TraceEvent:
    seq: int
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps({"seq": self.seq, "kind": self.kind, "payload": self.payload}, ensure_ascii=False)


@dataclass
class AgentState:
    agent_id: str
    topic: str
    profile: UAProfile
    config: EngineConfig
    memory: MemoryStore = field(default_factory=MemoryStore)
    belief: BeliefState = field(default_factory=BeliefState.zero)
    history: list = field(default_factory=list)
    trace: list = field(default_factory=list)
    last_order: int = -1

    def next_order(self) -> int:
        return self.last_order + 1

    def emit(self, kind: str, **payload) -> TraceEvent:
        event = TraceEvent(seq=len(self.trace), kind=kind, payload=payload)
        self.trace.append(event)
        return event


# Left-closed bin edges 0.2*j - 1; comparing against these doubles keeps
# the edges in their upper bin, which division by 0.2 would not.
_BIN_EDGES = tuple(0.2 * j - 1.0 for j in range(1, 10))


def stance_to_instruction(stance: float, labels: tuple = DEFAULT_BIN_LABELS) -> tuple[int, str]:
    """Left-closed 10-bin stance map over [-1, 1]; S=+1 clamps to bin 9."""
    if not -1.0 <= stance <= 1.0:
        raise ContractError(f"stance {stance} outside [-1, 1]")
    bin_index = bisect.bisect_right(_BIN_EDGES, stance)
    return bin_index, labels[bin_index]


def ingest_candidate(agent: AgentState, candidate: CandidateArgument) -> ArgumentRecord:
    """Score, resolve, and store one candidate; emits scored/resolved/stored."""
    scorer = agent.config.scorer
    if candidate.strength_hint is not None and hasattr(scorer, "register"):
        scorer.register(agent.topic, candidate.claim, candidate.strength_hint)
    strength = score_strength(candidate, agent.topic, scorer)
    agent.emit("scored", claim=candidate.claim, strength=strength, role=candidate.role.value)

    record = ArgumentRecord(
        claim=candidate.claim.strip(),
        polarity=candidate.polarity,
        strength=strength,
        role=candidate.role,
        embedding=embed_claim(candidate.claim),
    )
    outcome = ingest_record(agent.memory, record, agent.config.theta, agent.config.theta_self)
    if outcome.warning:
        agent.emit("warning", message=outcome.warning)
    # Only a superseded pre-existing record goes here; a losing new record
    # is announced through its own stored event (active=False).
    archived_id = outcome.superseded.id if outcome.superseded is not None else None
    agent.emit(
        "resolved",
        kept_new=outcome.kept_new,
        similarity=outcome.similarity,
        archived_id=archived_id,
    )
    agent.emit("stored", **_stored_payload(record, agent.profile))
    return record


def _stored_payload(record: ArgumentRecord, profile: UAProfile) -> dict:
    return {
        "id": record.id,
        "claim": record.claim,
        "polarity": record.polarity,
        "strength": record.strength,
        "role": record.role.value,
        "active": record.active,
        "contribution": record_contribution(record, profile),
    }


def refresh_belief(agent: AgentState) -> TraceEvent:
    """Full recompute over the active set, with before/after in the trace."""
    before = agent.belief
    log_odds = compute_log_odds(agent.memory.active_records(), agent.profile)
    agent.belief = BeliefState.from_log_odds(log_odds)
    return agent.emit(
        "updated",
        L_before=before.log_odds,
        L_after=agent.belief.log_odds,
        S_before=before.stance,
        S_after=agent.belief.stance,
    )


def process_message(agent: AgentState, incoming: Message) -> list[TraceEvent]:
    """The per-message loop: extract, judge, store, update, record history."""
    if incoming.order <= agent.last_order:
        raise ContractError(
            f"message order {incoming.order} does not exceed last processed order {agent.last_order}"
        )
    start = len(agent.trace)

    warnings: list[str] = []
    candidates = agent.config.extractor.extract(agent.topic, incoming, on_warning=warnings.append)
    for message in warnings:
        agent.emit("warning", message=message)
    agent.emit("extracted", count=len(candidates), claims=[c.claim for c in candidates])

    for candidate in candidates:
        ingest_candidate(agent, candidate)

    refresh_belief(agent)
    agent.history.append(incoming)
    if len(agent.history) > agent.config.history_window:
        del agent.history[: len(agent.history) - agent.config.history_window]
    agent.last_order = incoming.order
    return agent.trace[start:]


def compose_response(agent: AgentState) -> tuple[Message, list[TraceEvent]]:
    """Retrieve context, build the stance instruction, invoke the generator."""
    if agent.config.generator is None:
        raise ContractError("agent has no generator port configured")
    start = len(agent.trace)
    retrieved = agent.memory.retrieve(agent.config.k)
    agent.emit(
        "retrieved",
        k_plus=retrieved.k_plus,
        k_minus=retrieved.k_minus,
        ids=[r.id for r in retrieved.records],
    )
    bin_index, label = stance_to_instruction(agent.belief.stance, agent.config.bin_labels)
    text = agent.config.generator.generate(label, retrieved, agent.history)
    agent.emit("composed", bin=bin_index, label=label)
    message = Message(text=text, author_role="self", order=agent.next_order())
    return message, agent.trace[start:]


def take_turn(agent: AgentState) -> str:
    """Compose a message and feed it back through the agent's own
    extract-judge path, so self-arguments enter memory."""
    message, _ = compose_response(agent)
    process_message(agent, message)
    return message.text


# ---------------------------------------------------------------------------
# Trace serialisation and verification


def write_trace(path, events: list[TraceEvent]) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for event in events:
            handle.write(event.to_json() + "\n")


def read_trace(path) -> list[TraceEvent]:
    events = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
                events.append(TraceEvent(seq=row["seq"], kind=row["kind"], payload=row["payload"]))
            except (ValueError, KeyError) as exc:
                raise TraceVerificationError(f"unreadable trace line {line_number}: {exc}") from exc
    return events


def verify_trace(events: list[TraceEvent], tolerance: float = 1e-12) -> BeliefState:
    """Replay stored contributions and confirm every recorded update.

    Raises TraceVerificationError at the first divergent event.
    """
    contributions: dict[int, float] = {}
    active: dict[int, bool] = {}
    previous_seq = -1
    current = BeliefState.zero()
    for event in events:
        if event.seq <= previous_seq:
            raise TraceVerificationError(
                f"non-increasing sequence number {event.seq}", seq=event.seq
            )
        previous_seq = event.seq
        payload = event.payload
        if event.kind == "stored":
            contributions[payload["id"]] = payload["contribution"]
            active[payload["id"]] = payload["active"]
        elif event.kind == "resolved":
            archived = payload.get("archived_id")
            if archived is not None:
                active[archived] = False
        elif event.kind == "updated":
            expected = 0.0
            for record_id in sorted(contributions):
                if active.get(record_id):
                    expected += contributions[record_id]
            if abs(payload["L_before"] - current.log_odds) > tolerance:
                raise TraceVerificationError(
                    f"event {event.seq}: L_before {payload['L_before']} != replayed {current.log_odds}",
                    seq=event.seq,
                )
            if abs(payload["L_after"] - expected) > tolerance:
                raise TraceVerificationError(
                    f"event {event.seq}: L_after {payload['L_after']} != replayed {expected}",
                    seq=event.seq,
                )
            if abs(payload["S_after"] - stance_from_log_odds(expected)) > tolerance:
                raise TraceVerificationError(
                    f"event {event.seq}: S_after inconsistent with L_after", seq=event.seq
                )
            current = BeliefState.from_log_odds(expected)
    return current
