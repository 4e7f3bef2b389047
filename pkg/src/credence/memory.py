"""Structured argument store with an active/archived partition.

Insertion order is the iteration order, ids come from a monotone
counter, and archived records stay in the store for audit. Retrieval
allocates context slots in proportion to the active pro/con composition,
never by stance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import Role
from .exceptions import ContractError
from .judgement import ArgumentRecord, embed_claim


@dataclass
class MemoryStore:
    records: list[ArgumentRecord] = field(default_factory=list)
    insertion_counter: int = 0

    def insert(self, record: ArgumentRecord) -> int:
        if record.id is not None:
            raise ContractError(f"record already has id {record.id}")
        record.id = self.insertion_counter
        record.inserted_at = self.insertion_counter
        self.insertion_counter += 1
        self.records.append(record)
        return record.id

    def active_records(self) -> list[ArgumentRecord]:
        return [r for r in self.records if r.active]

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def retrieve(self, k: int) -> "RetrievalContext":
        return retrieve(self, k)


@dataclass
class RetrievalContext:
    records: list[ArgumentRecord]
    k_plus: int
    k_minus: int


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def _top_by_strength(records: list[ArgumentRecord], limit: int) -> list[ArgumentRecord]:
    # Strength ties break toward the older (lower-id) record.
    ranked = sorted(records, key=lambda r: (-r.strength, r.id))
    return ranked[:limit]


def retrieve(store: MemoryStore, k: int) -> RetrievalContext:
    """Composition-proportional retrieval of the strongest active records."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    pro = [r for r in store.active_records() if r.polarity == 1]
    con = [r for r in store.active_records() if r.polarity == -1]
    total = len(pro) + len(con)
    if total == 0:
        # Even split; the extra slot for odd k goes to the affirmative side.
        k_plus = (k + 1) // 2
        return RetrievalContext(records=[], k_plus=k_plus, k_minus=k - k_plus)
    k_plus = _round_half_up(k * len(pro) / total)
    k_minus = k - k_plus
    chosen = _top_by_strength(pro, k_plus) + _top_by_strength(con, k_minus)
    return RetrievalContext(records=chosen, k_plus=k_plus, k_minus=k_minus)


def dump_jsonl(store: MemoryStore, path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for r in store.records:
            handle.write(
                json.dumps(
                    {
                        "id": r.id,
                        "claim": r.claim,
                        "polarity": r.polarity,
                        "strength": r.strength,
                        "role": r.role.value,
                        "active": r.active,
                        "archived_by": r.archived_by,
                        "inserted_at": r.inserted_at,
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )


def load_jsonl(path) -> MemoryStore:
    store = MemoryStore()
    with open(path, encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            record = ArgumentRecord(
                claim=row["claim"],
                polarity=row["polarity"],
                strength=row["strength"],
                role=Role(row["role"]),
                embedding=embed_claim(row["claim"]),
                active=row["active"],
                archived_by=row.get("archived_by"),
            )
            record.id = row["id"]
            record.inserted_at = row["inserted_at"]
            store.records.append(record)
            store.insertion_counter = max(store.insertion_counter, row["id"] + 1)
    return store
