"""Acceptance suite: one test per release criterion.

Each numbered test checks its criterion against an independent oracle
(re-derived arithmetic, brute-force search, or exhaustive enumeration)
rather than against the implementation's own helpers, and pins the
stated tolerance. The conftest hook prints one PASS/FAIL line per
criterion at the end of the run.
"""

import json
import math
import random
import struct
import time
from decimal import ROUND_HALF_UP, Decimal

import numpy as np
import pytest

from credence import config as config_mod
from credence.cli import main as cli_main
from credence.core import Role, UAProfile, compute_log_odds, stance_from_log_odds, update_incremental, BeliefState
from credence.engine import write_trace
from credence.judgement import ArgumentRecord, embed_claim, ingest_record
from credence.memory import MemoryStore, retrieve
from credence.replay import (
    CalibrationGrid,
    EvidenceItem,
    ReplayCase,
    assign_folds,
    build_replay_report,
    fit_linear_baseline,
    likert_to_stance,
    replay_case,
)
from credence.simulation import (
    OPEN_MINDED,
    STUBBORN,
    DebateConfig,
    SweepConfig,
    TrialStances,
    compute_metrics,
    load_scripted_claims,
    run_scripted_opponent_sweep,
    run_two_agent_debate,
)

CORPUS = load_scripted_claims(config_mod.bundled_text("seeds.txt"))
SCRIPT = [
    line
    for line in config_mod.bundled_text("opponent_con.txt").splitlines()
    if line.startswith("CLAIM")
]


def make_record(claim, polarity, strength, role):
    return ArgumentRecord(
        claim=claim, polarity=polarity, strength=strength, role=role, embedding=embed_claim(claim)
    )


def random_records(rng, count, roles=(Role.SEED, Role.SELF, Role.OPPONENT)):
    return [
        make_record(f"claim {i} {rng.random()}", rng.choice([-1, 1]), rng.random(), rng.choice(roles))
        for i in range(count)
    ]


# ---------------------------------------------------------------------------
# Shared runs: the sweep grid (criterion 3) and the profile debates
# (criterion 7) also supply the traces audited by criterion 13.


@pytest.fixture(scope="module")
def sweep_runs():
    config = SweepConfig(topic=config_mod.DEFAULT_TOPIC)
    grid = [0.2, 0.4, 0.6, 0.8, 1.0]
    started = time.perf_counter()
    by_param = {
        param: run_scripted_opponent_sweep(config, grid, param, CORPUS, SCRIPT)
        for param in ("u", "a")
    }
    return by_param, time.perf_counter() - started


@pytest.fixture(scope="module")
def debate_results():
    pairings = {
        "open/open": (OPEN_MINDED, OPEN_MINDED),
        "stubborn/open": (STUBBORN, OPEN_MINDED),
        "stubborn/stubborn": (STUBBORN, STUBBORN),
    }
    results = {}
    for name, (pro, con) in pairings.items():
        config = DebateConfig(
            topic=config_mod.DEFAULT_TOPIC,
            pro_profile=pro,
            con_profile=con,
            seeds_per_side=14,
            trials=3,
        )
        results[name] = run_two_agent_debate(config, CORPUS)
    return results


@pytest.fixture(scope="module")
def trace_files(tmp_path_factory, sweep_runs, debate_results):
    trace_dir = tmp_path_factory.mktemp("traces")
    paths = []
    by_param, _ = sweep_runs
    for param, runs in by_param.items():
        for run, agent in runs:
            path = trace_dir / f"sweep_{param}_{run.value}.jsonl"
            write_trace(path, agent.trace)
            paths.append(path)
    for name, result in debate_results.items():
        slug = name.replace("/", "-")
        for trial, (pro_trace, con_trace) in enumerate(result.traces):
            for side, events in (("pro", pro_trace), ("con", con_trace)):
                path = trace_dir / f"debate_{slug}_t{trial}_{side}.jsonl"
                write_trace(path, events)
                paths.append(path)
    return paths


# ---------------------------------------------------------------------------


def test_criterion_01_update_rule_exactness():
    rng = random.Random(101)
    started = time.perf_counter()
    for _ in range(1000):
        profile = UAProfile(uptake=rng.uniform(0.0, 1.0), anchoring=rng.uniform(0.0, 1.5))
        records = random_records(rng, rng.randint(0, 50))
        # Independent scalar oracle: plain log, explicit role weighting.
        oracle = 0.0
        for r in records:
            gamma = profile.anchoring if r.role == Role.SEED else profile.uptake
            oracle += r.polarity * math.log(1.0 + r.strength * gamma)
        log_odds = compute_log_odds(records, profile)
        assert abs(log_odds - oracle) <= 1e-10
        # Readout identity: tanh(L/2) == 2*sigmoid(L) - 1.
        sigmoid_form = 2.0 / (1.0 + math.exp(-log_odds)) - 1.0
        assert abs(stance_from_log_odds(log_odds) - sigmoid_form) <= 1e-12
    assert time.perf_counter() - started < 5.0


def test_criterion_02_batch_incremental_equivalence():
    rng = random.Random(202)
    for _ in range(200):
        profile = UAProfile(uptake=rng.uniform(0.0, 1.0), anchoring=rng.uniform(0.0, 1.5))
        records = random_records(rng, rng.randint(1, 40))
        state = BeliefState.zero()
        for record in records:
            state = update_incremental(state, record, profile)
        assert abs(state.log_odds - compute_log_odds(records, profile)) <= 1e-12


def test_criterion_03_monotone_control(sweep_runs):
    by_param, elapsed = sweep_runs
    u_finals = [run.final_stance for run, _ in by_param["u"]]
    a_finals = [run.final_stance for run, _ in by_param["a"]]
    assert all(b < a for a, b in zip(u_finals, u_finals[1:])), u_finals
    assert all(b > a for a, b in zip(a_finals, a_finals[1:])), a_finals
    assert elapsed < 1.0


def test_criterion_04_zero_weight_neutrality():
    rng = random.Random(404)
    for _ in range(100):
        seeds = random_records(rng, rng.randint(1, 8), roles=(Role.SEED,))
        received = random_records(rng, rng.randint(1, 30), roles=(Role.SELF, Role.OPPONENT))
        inert = UAProfile(uptake=0.0, anchoring=rng.uniform(0.1, 1.5))
        prior = compute_log_odds(seeds, inert)
        assert compute_log_odds(seeds + received, inert) == prior  # exact
        assert stance_from_log_odds(compute_log_odds(seeds + received, inert)) == stance_from_log_odds(prior)
    unanchored = UAProfile(uptake=0.7, anchoring=0.0)
    seeds_only = random_records(random.Random(405), 12, roles=(Role.SEED,))
    assert stance_from_log_odds(compute_log_odds(seeds_only, unanchored)) == 0.0


def test_criterion_05_dedup_semantics():
    rng = random.Random(505)
    phrases = [
        "the harbour dredging contract is overpriced",
        "school lunches should be free for all pupils",
        "the tram extension will cut commute times",
        "street lighting upgrades reduce burglaries",
        "the festival subsidy mostly benefits tourists",
    ]
    for scenario in range(500):
        theta = rng.choice([0.5, 0.7, 0.8, 0.9])
        store = MemoryStore()
        oracle = []  # (record, active) maintained by brute-force pairwise similarity
        for i in range(rng.randint(1, 25)):
            base = rng.choice(phrases)
            claim = base if rng.random() < 0.5 else f"{base} variant {rng.randrange(3)}"
            record = make_record(claim, rng.choice([-1, 1]), round(rng.random(), 6), Role.OPPONENT)

            # Oracle decision over the current active same-polarity pool.
            twin = make_record(claim, record.polarity, record.strength, record.role)
            pool = [entry for entry in oracle if entry["active"] and entry["record"].polarity == twin.polarity]
            best, best_sim = None, -1.0
            for entry in pool:
                sim = float(np.dot(twin.embedding, entry["record"].embedding))
                if sim > best_sim:
                    best, best_sim = entry, sim
            keep_new = best is None or best_sim < theta or twin.strength > best["record"].strength
            if best is not None and best_sim >= theta:
                if keep_new:
                    best["active"] = False
                else:
                    twin.active = False
            oracle.append({"record": twin, "active": twin.active})

            ingest_record(store, record, theta, threshold_self=theta)

        assert len(store) == len(oracle)
        for stored, entry in zip(store, oracle):
            assert stored.active == entry["active"], f"scenario {scenario} diverged at id {stored.id}"
        # Archived records never re-enter the active set.
        for stored in store:
            if stored.archived_by is not None:
                assert not stored.active

    # Named properties, pinned directly.
    store = MemoryStore()
    first = make_record(phrases[0], 1, 0.5, Role.OPPONENT)
    ingest_record(store, first, 0.8, 0.8)
    tie = make_record(phrases[0], 1, 0.5, Role.OPPONENT)
    ingest_record(store, tie, 0.8, 0.8)
    assert first.active and not tie.active  # idempotent duplicate; tie keeps existing
    stronger = make_record(phrases[0], 1, 0.9, Role.OPPONENT)
    ingest_record(store, stronger, 0.8, 0.8)
    assert stronger.active and not first.active  # stronger record survives
    mirrored = make_record(phrases[0], -1, 0.1, Role.OPPONENT)
    ingest_record(store, mirrored, 0.8, 0.8)
    assert mirrored.active and stronger.active  # polarity isolation


def test_criterion_06_retrieval_allocation():
    started = time.perf_counter()
    context = retrieve(MemoryStore(), 5)
    assert (context.k_plus, context.k_minus) == (3, 2)
    for plus in range(21):
        for minus in range(21):
            store = MemoryStore()
            for i in range(plus):
                store.insert(make_record(f"pro {i}", 1, 0.5, Role.OPPONENT))
            for i in range(minus):
                store.insert(make_record(f"con {i}", -1, 0.5, Role.OPPONENT))
            for k in range(1, 9):
                context = retrieve(store, k)
                assert context.k_plus + context.k_minus == k
                if plus + minus == 0:
                    assert context.k_plus == (k + 1) // 2
                else:
                    expected = int(
                        (Decimal(k) * Decimal(plus) / Decimal(plus + minus)).quantize(
                            Decimal(1), rounding=ROUND_HALF_UP
                        )
                    )
                    assert context.k_plus == expected, (plus, minus, k)
    assert time.perf_counter() - started < 1.0


def test_criterion_07_profile_ordering(debate_results):
    gaps = {}
    for name, result in debate_results.items():
        for metrics in result.per_trial_metrics:
            # Identity: reduction plus final gap returns the exact initial gap.
            assert metrics.gap_reduction + metrics.abs_final_gap == 1.5
        gaps[name] = [m.abs_final_gap for m in result.per_trial_metrics]
    for trial in range(3):
        assert gaps["stubborn/stubborn"][trial] > gaps["stubborn/open"][trial] > gaps["open/open"][trial]


def test_criterion_08_metric_arithmetic():
    constructed = TrialStances(pro_init=0.75, con_init=-0.75, pro_final=0.19, con_final=-0.19)
    summary, _ = compute_metrics([constructed])
    assert summary.gap_reduction == 1.5 - 0.38
    assert abs(summary.gap_reduction - 1.12) <= 1e-12

    rng = random.Random(808)
    for _ in range(1000):
        trial = TrialStances(
            pro_init=rng.uniform(-1, 1),
            con_init=rng.uniform(-1, 1),
            pro_final=rng.uniform(-1, 1),
            con_final=rng.uniform(-1, 1),
        )
        summary, _ = compute_metrics([trial])
        assert summary.mean_abs_shift >= abs(summary.centre_shift)


def _synthetic_cases(rng, count, profile, groups=15):
    cases = []
    for i in range(count):
        evidence = [
            EvidenceItem(
                claim=f"case {i} item {j} token {rng.random()}",
                polarity=rng.choice([-1, 1]),
                strength=round(rng.uniform(0.1, 0.95), 3),
            )
            for j in range(rng.randint(3, 9))
        ]
        case = ReplayCase(
            participant=f"p{i}",
            group=f"g{i % groups}",
            topic="synthetic",
            initial_likert=rng.randint(1, 6),
            final_stance=0.0,
            evidence=evidence,
        )
        case.final_stance = replay_case(case, profile)
        cases.append(case)
    return cases


def test_criterion_09_calibration_recovery():
    started = time.perf_counter()
    rng = random.Random(909)
    truth = UAProfile(uptake=0.15, anchoring=0.5)
    grid = CalibrationGrid()

    noiseless = _synthetic_cases(rng, 400, truth)
    report = build_replay_report(noiseless, grid)
    for fold in report.pooled.fold_results:
        assert (fold.u, fold.a) == (0.15, 0.5)
        assert fold.heldout_rmse == 0.0

    noisy = _synthetic_cases(rng, 400, truth)
    for case in noisy:
        case.final_stance = max(-1.0, min(1.0, case.final_stance + rng.gauss(0.0, 0.05)))
    assert np.mean([abs(c.delta) for c in noisy]) > 0.1
    noisy_report = build_replay_report(noisy, grid)
    fold_ids = np.asarray(noisy_report.fold_ids)
    finals = np.array([c.observed_final for c in noisy])
    initials = np.array([c.initial_stance for c in noisy])
    wins = 0
    for fold in noisy_report.pooled.fold_results:
        mask = fold_ids == fold.fold
        no_change_rmse = float(np.sqrt(np.mean((initials[mask] - finals[mask]) ** 2)))
        wins += fold.heldout_rmse < no_change_rmse
    assert wins >= 4
    assert time.perf_counter() - started < 30.0


def test_criterion_10_subgroup_discrimination():
    rng = random.Random(1010)
    aligned_truth = UAProfile(uptake=0.3, anchoring=0.5)
    grid = CalibrationGrid()
    cases = []
    for i in range(200):
        evidence = [
            EvidenceItem(
                claim=f"mixed {i} item {j} token {rng.random()}",
                polarity=rng.choice([-1, 1]),
                strength=round(rng.uniform(0.3, 0.95), 3),
            )
            for j in range(rng.randint(3, 8))
        ]
        case = ReplayCase(
            participant=f"p{i}",
            group=f"g{i % 15}",
            topic="mixed",
            initial_likert=rng.randint(1, 6),
            final_stance=0.0,
            evidence=evidence,
        )
        kind = "aligned" if i % 10 < 4 else ("stable" if i % 10 < 7 else "anti")
        net = sum(e.polarity * e.strength for e in evidence)
        if kind == "aligned":
            case.final_stance = replay_case(case, aligned_truth)
        elif kind == "stable":
            case.final_stance = case.initial_stance
        else:
            push = -0.4 if net > 0 else 0.4
            case.final_stance = max(-1.0, min(1.0, case.initial_stance + push))
        cases.append(case)

    report = build_replay_report(cases, grid)
    summaries = {s.group: s for s in report.group_summaries}

    for fold in report.group_calibrations["aligned"].fold_results:
        assert fold.u >= 0.15  # high-uptake cell
    for fold in report.group_calibrations["stable"].fold_results:
        assert fold.u == grid.u_values[0]  # grid-minimum uptake
    assert summaries["stable"].be_rmse <= 0.01
    assert summaries["aligned"].be_rmse < summaries["aligned"].linear_rmse


def test_criterion_11_linear_baseline_oracle():
    rng = random.Random(1111)
    for _ in range(100):
        samples = [
            (rng.uniform(-3, 3), rng.uniform(-2, 2)) for _ in range(rng.randint(2, 40))
        ]
        evidence = np.array([e for e, _ in samples])
        deltas = np.array([d for _, d in samples])
        numerical, *_ = np.linalg.lstsq(evidence.reshape(-1, 1), deltas, rcond=None)
        assert abs(fit_linear_baseline(samples) - float(numerical[0])) <= 1e-8


def test_criterion_12_likert_mapping():
    assert [likert_to_stance(v) for v in range(1, 7)] == [-1.0, -0.6, -0.2, 0.2, 0.6, 1.0]


def test_criterion_13_audit_soundness(trace_files, tmp_path):
    assert trace_files
    for path in trace_files:
        assert cli_main(["trace-verify", str(path)]) == 0

    # Flip one mantissa bit of one stored contribution: detection required.
    source = trace_files[0]
    lines = source.read_text().splitlines()
    for i, line in enumerate(lines):
        row = json.loads(line)
        if row["kind"] == "stored" and row["payload"].get("contribution"):
            value = row["payload"]["contribution"]
            (bits,) = struct.unpack("<Q", struct.pack("<d", value))
            (row["payload"]["contribution"],) = struct.unpack("<d", struct.pack("<Q", bits ^ (1 << 40)))
            lines[i] = json.dumps(row)
            break
    tampered = tmp_path / "tampered.jsonl"
    tampered.write_text("\n".join(lines) + "\n")
    assert cli_main(["trace-verify", str(tampered)]) == 3


def test_criterion_14_fold_cohesion_determinism():
    rng = random.Random(1414)
    for _ in range(1000):
        key_count = rng.randint(1, 30)
        keys = [f"k{n}" for n in range(key_count)]
        cases = [
            ReplayCase(
                participant=f"p{i}",
                group=rng.choice(keys),
                topic="t",
                initial_likert=3,
                final_likert=4,
            )
            for i in range(rng.randint(1, 60))
        ]
        folds = assign_folds(cases, key="group", folds=5, seed=42)
        assert folds == assign_folds(cases, key="group", folds=5, seed=42)
        fold_of = {}
        for case, fold in zip(cases, folds):
            assert fold_of.setdefault(case.group, fold) == fold
