"""Observed-evidence replay and uptake/anchoring calibration.

Each case starts from a mapped Likert prior, replays its received
evidence chronologically through the same judgement filter used by the
engine, and is scored against the observed final stance.  Calibration
grid-searches (u, a) per held-out fold and is compared with a no-change
baseline and a one-coefficient net-evidence linear baseline.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import (
    STANCE_CLIP,
    Role,
    UAProfile,
    clip_stance,
    init_prior_from_stance,
    log_odds_from_stance,
    stance_from_log_odds,
)
from .exceptions import ContractError
from .extraction import ExtractorPort, Message
from .judgement import ArgumentRecord, ScorerPort, embed_claim, resolve_conflict
from .memory import MemoryStore

logger = logging.getLogger(__name__)

# Calibration grids used by the replay protocol.
DEFAULT_U_GRID = (0.005, 0.01, 0.02, 0.035, 0.05, 0.075, 0.1, 0.15, 0.2, 0.3, 0.4, 0.6, 0.8)
DEFAULT_A_GRID = (0.02, 0.05, 0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.6, 0.8, 1.0, 1.2, 1.5)

SUBGROUP_LABELS = ("aligned", "opposed", "weak_signal", "stable")


@dataclass
class EvidenceItem:
    """One received item: either pre-extracted (claim, polarity,
    strength) or raw text to be routed through an extractor port."""

    claim: Optional[str] = None
    polarity: Optional[int] = None
    strength: Optional[float] = None
    text: Optional[str] = None

    def __post_init__(self):
        if self.text is None:
            if self.claim is None or self.polarity not in (-1, 1):
                raise ContractError(f"pre-extracted item needs claim and polarity, got {self!r}")


@dataclass
class ReplayCase:
    participant: str
    group: str
    topic: str
    initial_likert: int
    final_likert: Optional[int] = None
    final_stance: Optional[float] = None
    evidence: list = field(default_factory=list)

    def __post_init__(self):
        if self.initial_likert not in range(1, 7):
            raise ContractError(f"initial_likert {self.initial_likert} outside 1..6")
        if self.final_likert is None and self.final_stance is None:
            raise ContractError("case needs final_likert or final_stance")
        if self.final_likert is not None and self.final_likert not in range(1, 7):
            raise ContractError(f"final_likert {self.final_likert} outside 1..6")

    @property
    def initial_stance(self) -> float:
        return likert_to_stance(self.initial_likert)

    @property
    def observed_final(self) -> float:
        if self.final_stance is not None:
            return self.final_stance
        return likert_to_stance(self.final_likert)

    @property
    def delta(self) -> float:
        return self.observed_final - self.initial_stance


def likert_to_stance(value: int) -> float:
    """Linear map of the six-point scale onto [-1, 1]: S = (2v - 7) / 5."""
    if value not in range(1, 7):
        raise ContractError(f"Likert value {value} outside 1..6")
    return (2 * value - 7) / 5.0


@dataclass
class CalibrationGrid:
    u_values: tuple = DEFAULT_U_GRID
    a_values: tuple = DEFAULT_A_GRID

    def __post_init__(self):
        for name, values in (("u", self.u_values), ("a", self.a_values)):
            if not values or list(values) != sorted(values) or len(set(values)) != len(values):
                raise ContractError(f"{name} grid must be non-empty and strictly increasing")


def accepted_records(
    case: ReplayCase,
    theta: float,
    scorer: Optional[ScorerPort] = None,
    extractor: Optional[ExtractorPort] = None,
) -> list[ArgumentRecord]:
    """Run the case's stream through judgement (scoring plus dedup at
    theta) and return the records that stay active, in stream order."""
    store = MemoryStore()
    for index, item in enumerate(case.evidence):
        if item.text is not None:
            if extractor is None:
                raise ContractError("raw-text evidence items need an extractor port")
            message = Message(text=item.text, author_role="opponent", order=index)
            candidates = extractor.extract(case.topic, message)
        else:
            candidates = [item]
        for cand in candidates:
            claim = cand.claim
            polarity = cand.polarity
            strength = getattr(cand, "strength", None)
            if strength is None:
                strength = getattr(cand, "strength_hint", None)
            if strength is None:
                if scorer is None:
                    raise ContractError(f"no strength for item {claim!r} and no scorer configured")
                strength = scorer.score(case.topic, claim)
            strength = min(1.0, max(0.0, float(strength)))
            record = ArgumentRecord(
                claim=claim,
                polarity=polarity,
                strength=strength,
                role=Role.OPPONENT,
                embedding=embed_claim(claim),
            )
            outcome = resolve_conflict(record, store, theta)
            store.insert(record)
            if outcome.superseded is not None:
                outcome.superseded.active = False
                outcome.superseded.archived_by = record.id
    return store.active_records()


def predict_from_accepted(
    records: list[ArgumentRecord],
    initial_stance: float,
    profile: UAProfile,
    clip_bound: float = STANCE_CLIP,
) -> float:
    """Prior term (anchoring-scaled initial log-odds) plus u-weighted
    evidence over the accepted stream."""
    prior = init_prior_from_stance(initial_stance, profile, clip_bound)
    evidence = sum(r.polarity * math.log1p(r.strength * profile.uptake) for r in records)
    return stance_from_log_odds(prior.log_odds + evidence)


def replay_case(
    case: ReplayCase,
    profile: UAProfile,
    theta: float = 0.85,
    scorer: Optional[ScorerPort] = None,
    extractor: Optional[ExtractorPort] = None,
    clip_bound: float = STANCE_CLIP,
) -> float:
    """Predicted final stance for one case under one (u, a) profile."""
    records = accepted_records(case, theta, scorer, extractor)
    return predict_from_accepted(records, case.initial_stance, profile, clip_bound)


def net_evidence(
    case: ReplayCase,
    scorer: Optional[ScorerPort] = None,
    theta: float = 0.85,
    extractor: Optional[ExtractorPort] = None,
) -> float:
    """Signed sum of p*s over the records that survive the judgement filter."""
    return sum(r.polarity * r.strength for r in accepted_records(case, theta, scorer, extractor))


def fit_linear_baseline(samples) -> float:
    """Closed-form OLS for the one-coefficient model delta = beta * E."""
    num = 0.0
    den = 0.0
    for evidence, delta in samples:
        num += evidence * delta
        den += evidence * evidence
    if den == 0.0:
        logger.warning("all net-evidence values are zero; linear baseline beta = 0")
        return 0.0
    return num / den


def linear_prediction(initial_stance: float, beta: float, evidence: float) -> float:
    return max(-1.0, min(1.0, initial_stance + beta * evidence))


def assign_folds(cases: list[ReplayCase], key: str = "group", folds: int = 5, seed: int = 42) -> list[int]:
    """Deal shuffled key values round-robin into folds; cases sharing a
    key always land in the same fold."""
    if key not in ("group", "topic"):
        raise ContractError(f"fold key must be 'group' or 'topic', got {key!r}")
    keys = sorted({getattr(case, key) for case in cases})
    if len(keys) < folds:
        logger.warning("only %d distinct %s keys; using %d folds", len(keys), key, len(keys))
        folds = len(keys)
    rng = random.Random(seed)
    rng.shuffle(keys)
    fold_of_key = {value: index % folds for index, value in enumerate(keys)}
    return [fold_of_key[getattr(case, key)] for case in cases]


def classify_subgroup(case: ReplayCase, evidence: float, eps_weak: float = 0.05) -> str:
    """Outcome-conditioned diagnostic label for one case."""
    if case.delta == 0.0:
        return "stable"
    if abs(evidence) < eps_weak:
        return "weak_signal"
    if (case.delta > 0) == (evidence > 0):
        return "aligned"
    return "opposed"


@dataclass
class EvaluationResult:
    rmse: float
    mean_abs_movement: float


def evaluate(cases: list[ReplayCase], predictions) -> EvaluationResult:
    if len(cases) != len(predictions):
        raise ContractError("cases and predictions have different lengths")
    finals = np.array([c.observed_final for c in cases])
    preds = np.asarray(predictions, dtype=float)
    rmse = float(np.sqrt(np.mean((preds - finals) ** 2))) if len(cases) else 0.0
    movement = float(np.mean([abs(c.delta) for c in cases])) if len(cases) else 0.0
    return EvaluationResult(rmse=rmse, mean_abs_movement=movement)


# ---------------------------------------------------------------------------
# Grid-search calibration


@dataclass
class FoldResult:
    fold: int
    u: float
    a: float
    train_rmse: float
    heldout_rmse: float


@dataclass
class CalibrationResult:
    fold_results: list[FoldResult]
    surface: dict  # (u, a) -> pooled RMSE over all cases
    heldout_predictions: np.ndarray  # per case, from its fold's selected cell


class _PreparedCases:
    """Per-case quantities that do not depend on (u, a): prior logit,
    observed final, and the evidence term per u-grid value.

    Evidence terms and predictions use the same scalar arithmetic (and
    summation order) as replay_case, so grid cells reproduce per-case
    replays bitwise.
    """

    def __init__(self, cases, u_values, theta, scorer, extractor, clip_bound):
        self.finals = np.array([c.observed_final for c in cases])
        self.prior_logits = np.array(
            [log_odds_from_stance(clip_stance(c.initial_stance, clip_bound)) for c in cases]
        )
        self.evidence_terms = np.zeros((len(cases), len(u_values)))
        self.net_evidence = np.zeros(len(cases))
        for i, case in enumerate(cases):
            records = accepted_records(case, theta, scorer, extractor)
            for j, u in enumerate(u_values):
                self.evidence_terms[i, j] = sum(
                    r.polarity * math.log1p(r.strength * u) for r in records
                )
            self.net_evidence[i] = sum(r.polarity * r.strength for r in records)

    def predictions(self, u_index: int, a: float) -> np.ndarray:
        return np.array(
            [
                math.tanh((a * l0 + ev) / 2.0)
                for l0, ev in zip(self.prior_logits, self.evidence_terms[:, u_index])
            ]
        )


def calibrate(
    cases: list[ReplayCase],
    grid: CalibrationGrid,
    fold_ids: list[int],
    theta: float = 0.85,
    scorer: Optional[ScorerPort] = None,
    extractor: Optional[ExtractorPort] = None,
    clip_bound: float = STANCE_CLIP,
    prepared: Optional[_PreparedCases] = None,
) -> CalibrationResult:
    """Select the training-RMSE-minimising (u, a) per fold (ties prefer
    smaller u, then smaller a) and report held-out RMSE plus the pooled
    RMSE surface."""
    if not cases:
        raise ContractError("calibrate needs at least one case")
    if prepared is None:
        prepared = _PreparedCases(cases, grid.u_values, theta, scorer, extractor, clip_bound)
    fold_ids = np.asarray(fold_ids)
    finals = prepared.finals

    surface = {}
    for ui, u in enumerate(grid.u_values):
        for a in grid.a_values:
            preds = prepared.predictions(ui, a)
            surface[(u, a)] = float(np.sqrt(np.mean((preds - finals) ** 2)))

    fold_results = []
    heldout_predictions = np.full(len(cases), np.nan)
    for fold in sorted(set(fold_ids.tolist())):
        train = fold_ids != fold
        test = ~train
        if not train.any():
            train = test  # single-fold degenerate case: fit and test on the same cases
        best = None
        for ui, u in enumerate(grid.u_values):
            for a in grid.a_values:
                preds = prepared.predictions(ui, a)
                rmse = float(np.sqrt(np.mean((preds[train] - finals[train]) ** 2)))
                if best is None or rmse < best[0] - 1e-15:
                    best = (rmse, ui, u, a)
        train_rmse, ui, u, a = best
        preds = prepared.predictions(ui, a)
        heldout = float(np.sqrt(np.mean((preds[test] - finals[test]) ** 2))) if test.any() else float("nan")
        heldout_predictions[test] = preds[test]
        fold_results.append(FoldResult(fold=int(fold), u=u, a=a, train_rmse=train_rmse, heldout_rmse=heldout))
    return CalibrationResult(
        fold_results=fold_results, surface=surface, heldout_predictions=heldout_predictions
    )


# ---------------------------------------------------------------------------
# Full replay report (baselines, subgroups, surfaces)


@dataclass
class GroupSummary:
    group: str
    n: int
    mean_abs_movement: float
    no_change_rmse: float
    linear_rmse: float
    be_rmse: float

    @property
    def gain(self) -> float:
        return self.linear_rmse - self.be_rmse


@dataclass
class ReplayReport:
    cases: list
    fold_ids: list
    pooled: CalibrationResult
    group_calibrations: dict  # label -> CalibrationResult (restricted cases)
    group_summaries: list  # GroupSummary rows, "all" first
    subgroup_of_case: list  # label per case
    linear_betas: dict  # fold -> beta
    linear_predictions: np.ndarray
    no_change_predictions: np.ndarray
    surfaces: dict  # subset label -> {(u, a): rmse}


def build_replay_report(
    cases: list[ReplayCase],
    grid: CalibrationGrid,
    key: str = "group",
    folds: int = 5,
    seed: int = 42,
    theta: float = 0.85,
    scorer: Optional[ScorerPort] = None,
    extractor: Optional[ExtractorPort] = None,
    eps_weak: float = 0.05,
    clip_bound: float = STANCE_CLIP,
) -> ReplayReport:
    if not cases:
        raise ContractError("no valid replay cases")
    fold_ids = assign_folds(cases, key=key, folds=folds, seed=seed)
    prepared = _PreparedCases(cases, grid.u_values, theta, scorer, extractor, clip_bound)

    pooled = calibrate(cases, grid, fold_ids, theta, scorer, extractor, clip_bound, prepared=prepared)

    initials = np.array([c.initial_stance for c in cases])
    finals = prepared.finals
    no_change = initials.copy()

    # Linear baseline: one beta per fold, fit on training cases only.
    fold_array = np.asarray(fold_ids)
    linear_betas = {}
    linear_preds = np.zeros(len(cases))
    for fold in sorted(set(fold_ids)):
        train = fold_array != fold
        if not train.any():
            train = ~train
        beta = fit_linear_baseline(
            zip(prepared.net_evidence[train], (finals - initials)[train])
        )
        linear_betas[int(fold)] = beta
        test = fold_array == fold
        linear_preds[test] = np.clip(initials[test] + beta * prepared.net_evidence[test], -1.0, 1.0)

    subgroups = [
        classify_subgroup(case, prepared.net_evidence[i], eps_weak) for i, case in enumerate(cases)
    ]

    group_calibrations = {}
    surfaces = {"all": pooled.surface}
    summaries = [
        _summarise("all", cases, np.arange(len(cases)), pooled.heldout_predictions, no_change, linear_preds)
    ]
    for label in SUBGROUP_LABELS:
        indices = np.array([i for i, g in enumerate(subgroups) if g == label], dtype=int)
        if len(indices) == 0:
            continue
        sub_cases = [cases[i] for i in indices]
        sub_folds = [fold_ids[i] for i in indices]
        sub_prepared = _Restricted(prepared, indices)
        result = calibrate(sub_cases, grid, sub_folds, theta, scorer, extractor, clip_bound, prepared=sub_prepared)
        group_calibrations[label] = result
        surfaces[label] = result.surface
        summaries.append(
            _summarise(label, cases, indices, result.heldout_predictions, no_change, linear_preds)
        )
    return ReplayReport(
        cases=cases,
        fold_ids=fold_ids,
        pooled=pooled,
        group_calibrations=group_calibrations,
        group_summaries=summaries,
        subgroup_of_case=subgroups,
        linear_betas=linear_betas,
        linear_predictions=linear_preds,
        no_change_predictions=no_change,
        surfaces=surfaces,
    )


class _Restricted:
    """View of prepared case quantities restricted to an index subset."""

    def __init__(self, prepared: _PreparedCases, indices: np.ndarray):
        self.finals = prepared.finals[indices]
        self.prior_logits = prepared.prior_logits[indices]
        self.evidence_terms = prepared.evidence_terms[indices]
        self.net_evidence = prepared.net_evidence[indices]

    predictions = _PreparedCases.predictions


def _summarise(label, cases, indices, be_predictions, no_change, linear_preds) -> GroupSummary:
    sub_cases = [cases[i] for i in indices]
    finals = np.array([c.observed_final for c in sub_cases])
    be = np.asarray(be_predictions)
    if len(be) == len(cases):
        be = be[indices]
    return GroupSummary(
        group=label,
        n=len(sub_cases),
        mean_abs_movement=float(np.mean([abs(c.delta) for c in sub_cases])),
        no_change_rmse=float(np.sqrt(np.mean((no_change[indices] - finals) ** 2))),
        linear_rmse=float(np.sqrt(np.mean((linear_preds[indices] - finals) ** 2))),
        be_rmse=float(np.sqrt(np.nanmean((be - finals) ** 2))),
    )


# ---------------------------------------------------------------------------
# JSONL ingestion


def case_from_dict(row: dict) -> ReplayCase:
    evidence = []
    for item in row.get("evidence", []):
        if "text" in item and "claim" not in item:
            evidence.append(EvidenceItem(text=item["text"]))
        else:
            evidence.append(
                EvidenceItem(
                    claim=item["claim"],
                    polarity=int(item["polarity"]),
                    strength=item.get("strength"),
                )
            )
    return ReplayCase(
        participant=str(row["participant"]),
        group=str(row["group"]),
        topic=str(row["topic"]),
        initial_likert=int(row["initial_likert"]),
        final_likert=int(row["final_likert"]) if row.get("final_likert") is not None else None,
        final_stance=float(row["final_stance"]) if row.get("final_stance") is not None else None,
        evidence=evidence,
    )


def load_cases_jsonl(path) -> tuple[list[ReplayCase], list[tuple[int, str]]]:
    """Load cases; malformed lines are returned as (line number, error)."""
    cases = []
    errors = []
    with open(path, encoding="utf-8") as handle:
        for line_number, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                cases.append(case_from_dict(json.loads(line)))
            except (ValueError, KeyError, ContractError) as exc:
                errors.append((line_number, str(exc)))
    return cases, errors


def case_to_dict(case: ReplayCase) -> dict:
    return {
        "participant": case.participant,
        "group": case.group,
        "topic": case.topic,
        "initial_likert": case.initial_likert,
        "final_likert": case.final_likert,
        "final_stance": case.final_stance,
        "evidence": [
            {"claim": e.claim, "polarity": e.polarity, "strength": e.strength}
            if e.text is None
            else {"text": e.text}
            for e in case.evidence
        ],
    }
