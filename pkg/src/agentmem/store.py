"""Append-only JSONL persistence for the episodic and semantic memory tiers.

Layout under the workspace root:

    memory/episodic/YYYY-MM-DD.jsonl   one line per entry, per UTC day
    memory/semantic/facts.jsonl        project-shared distilled facts
    memory/cw_ledger.jsonl             cognitive-weight deltas (sidecar)
    memory/promotions.jsonl            promotion marks (sidecar)

Entry lines carry exactly: id, timestamp, session_id, agent_id, project,
content, tokens, promoted, cognitive_weight. Files are never rewritten;
mutable state (cognitive weight, promotion) lives in the sidecar ledgers and
is replayed onto entries at load time.

One store instance serialises its writers through a lock; readers get fresh
value snapshots and never touch the files' contents.
"""

from __future__ import annotations

import json
import threading
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .errors import NotFoundError, StorageError, ValidationError

SYSTEM_PREFIX = "[system]"

ENTRY_FIELDS = (
    "id",
    "timestamp",
    "session_id",
    "agent_id",
    "project",
    "content",
    "tokens",
    "promoted",
    "cognitive_weight",
)


def utc_now() -> datetime:
    return datetime.now(timezone.utc)


def parse_timestamp(value: str | datetime) -> datetime:
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    if isinstance(value, datetime):
        ts = value
    else:
        try:
            ts = datetime.fromisoformat(value.replace("Z", "+00:00"))
        except (ValueError, AttributeError) as exc:
            raise ValidationError(f"malformed timestamp: {value!r}") from exc
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc)


@dataclass
class EpisodicEntry:
    """One append-only memory record.

    ``tokens`` is the whitespace token count of the content, computed at
    construction when not supplied. ``system`` is derived from the content
    prefix and never persisted.
    """

    id: str
    timestamp: datetime
    session_id: str
    agent_id: str
    project: str
    content: str
    tokens: int = -1
    promoted: bool = False
    cognitive_weight: float = 0.0
    system: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        if self.tokens < 0:
            self.tokens = len(self.content.split())
        if not -1.0 <= self.cognitive_weight <= 1.0:
            raise ValidationError(f"cognitive_weight out of range: {self.cognitive_weight}")
        self.system = self.content.startswith(SYSTEM_PREFIX)

    def to_line(self) -> str:
        record = {
            "id": self.id,
            "timestamp": self.timestamp.isoformat(),
            "session_id": self.session_id,
            "agent_id": self.agent_id,
            "project": self.project,
            "content": self.content,
            "tokens": self.tokens,
            "promoted": self.promoted,
            "cognitive_weight": self.cognitive_weight,
        }
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, record: dict) -> "EpisodicEntry":
        return cls(
            id=str(record["id"]),
            timestamp=parse_timestamp(record["timestamp"]),
            session_id=str(record["session_id"]),
            agent_id=str(record["agent_id"]),
            project=str(record["project"]),
            content=str(record["content"]),
            tokens=int(record["tokens"]),
            promoted=bool(record["promoted"]),
            cognitive_weight=float(record["cognitive_weight"]),
        )


@dataclass
class SemanticFact:
    """Distilled subject/relation/value triple linked to its source sessions."""

    id: str
    subject: str
    relation: str
    value: str
    session_ids: frozenset[str]
    source_entry_ids: frozenset[str] = frozenset()
    created_at: datetime = field(default_factory=utc_now)

    def __post_init__(self) -> None:
        self.session_ids = frozenset(self.session_ids)
        self.source_entry_ids = frozenset(self.source_entry_ids)
        if not self.session_ids:
            raise ValidationError("session_ids must be non-empty")

    def search_text(self) -> str:
        return f"{self.subject} {self.relation} {self.value}"

    def to_line(self) -> str:
        record = {
            "id": self.id,
            "subject": self.subject,
            "relation": self.relation,
            "value": self.value,
            "session_ids": sorted(self.session_ids),
            "source_entry_ids": sorted(self.source_entry_ids),
            "created_at": self.created_at.isoformat(),
        }
        return json.dumps(record, ensure_ascii=False, separators=(",", ":"))

    @classmethod
    def from_dict(cls, record: dict) -> "SemanticFact":
        return cls(
            id=str(record["id"]),
            subject=str(record["subject"]),
            relation=str(record["relation"]),
            value=str(record["value"]),
            session_ids=frozenset(record["session_ids"]),
            source_entry_ids=frozenset(record.get("source_entry_ids", ())),
            created_at=parse_timestamp(record["created_at"]),
        )


@dataclass(frozen=True)
class CwLedgerRecord:
    entry_id: str
    delta: float
    reward: float
    applied_at: datetime

    def to_line(self) -> str:
        return json.dumps(
            {
                "entry_id": self.entry_id,
                "delta": self.delta,
                "reward": self.reward,
                "applied_at": self.applied_at.isoformat(),
            },
            separators=(",", ":"),
        )


@dataclass(frozen=True)
class PromotionRecord:
    entry_id: str
    fact_id: str
    promoted_at: datetime

    def to_line(self) -> str:
        return json.dumps(
            {
                "entry_id": self.entry_id,
                "fact_id": self.fact_id,
                "promoted_at": self.promoted_at.isoformat(),
            },
            separators=(",", ":"),
        )


@dataclass
class LoadedEntries:
    entries: list[EpisodicEntry]
    skipped: int = 0

    def __iter__(self):
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class LoadedFacts:
    facts: list[SemanticFact]
    skipped: int = 0

    def __iter__(self):
        return iter(self.facts)

    def __len__(self) -> int:
        return len(self.facts)


def _clip(value: float) -> float:
    return max(-1.0, min(1.0, value))


class MemoryStore:
    """Filesystem-backed store rooted at a workspace directory.

    Loads return fresh value objects with the cognitive-weight and promotion
    ledgers already applied; replaying a store from disk therefore always
    reproduces the in-memory view exactly.
    """

    def __init__(self, workspace: str | Path):
        self.root = Path(workspace)
        self._lock = threading.Lock()
        self._cw: dict[str, float] | None = None
        self._promoted: set[str] | None = None
        self._entry_ids: set[str] | None = None
        self._fact_ids: set[str] | None = None

    # -- paths ------------------------------------------------------------

    @property
    def memory_dir(self) -> Path:
        return self.root / "memory"

    @property
    def episodic_dir(self) -> Path:
        return self.memory_dir / "episodic"

    @property
    def facts_path(self) -> Path:
        return self.memory_dir / "semantic" / "facts.jsonl"

    @property
    def cw_ledger_path(self) -> Path:
        return self.memory_dir / "cw_ledger.jsonl"

    @property
    def promotions_path(self) -> Path:
        return self.memory_dir / "promotions.jsonl"

    def _day_path(self, timestamp: datetime) -> Path:
        day = timestamp.astimezone(timezone.utc).date().isoformat()
        return self.episodic_dir / f"{day}.jsonl"

    @staticmethod
    def _append_lines(path: Path, lines: Iterable[str]) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with path.open("a", encoding="utf-8") as handle:
                for line in lines:
                    handle.write(line + "\n")
        except OSError as exc:
            raise StorageError(f"cannot append to {path}: {exc}") from exc

    # -- episodic tier ----------------------------------------------------

    def append_entry(self, entry: EpisodicEntry) -> str:
        return self.append_entries([entry])[0]

    def append_entries(self, entries: Sequence[EpisodicEntry]) -> list[str]:
        """Append entries, one JSONL line each, grouped per UTC-day file."""
        for entry in entries:
            if not entry.project:
                raise ValidationError("entry.project must be non-empty")
            if not isinstance(entry.timestamp, datetime):
                raise ValidationError(f"malformed timestamp: {entry.timestamp!r}")
            if entry.cognitive_weight != 0.0:
                raise ValidationError("new entries must start with cognitive_weight 0")
        with self._lock:
            by_file: dict[Path, list[str]] = {}
            for entry in entries:
                by_file.setdefault(self._day_path(entry.timestamp), []).append(entry.to_line())
            for path, lines in by_file.items():
                self._append_lines(path, lines)
            if self._entry_ids is not None:
                self._entry_ids.update(e.id for e in entries)
        return [e.id for e in entries]

    def load_entries(
        self,
        project: str,
        sessions: Iterable[str] | None = None,
        agent_view: str | None = None,
    ) -> LoadedEntries:
        """Load a project's entries with ledgers applied.

        ``agent_view=None`` is the orchestrator view (all agents); passing an
        agent id restricts the result to that agent's own entries. Corrupt
        lines are skipped and counted, never fatal.
        """
        cw = self._cw_view()
        promoted = self._promoted_view()
        session_filter = frozenset(sessions) if sessions is not None else None
        entries: list[EpisodicEntry] = []
        skipped = 0
        for path in sorted(self.episodic_dir.glob("*.jsonl")):
            try:
                text = path.read_text(encoding="utf-8")
            except OSError as exc:
                raise StorageError(f"cannot read {path}: {exc}") from exc
            for line in text.splitlines():
                if not line.strip():
                    continue
                try:
                    entry = EpisodicEntry.from_dict(json.loads(line))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError):
                    skipped += 1
                    continue
                if entry.project != project:
                    continue
                if session_filter is not None and entry.session_id not in session_filter:
                    continue
                if agent_view is not None and entry.agent_id != agent_view:
                    continue
                entry.cognitive_weight = cw.get(entry.id, entry.cognitive_weight)
                entry.promoted = entry.promoted or entry.id in promoted
                entries.append(entry)
        return LoadedEntries(entries=entries, skipped=skipped)

    # -- semantic tier ----------------------------------------------------

    def append_fact(self, fact: SemanticFact) -> str:
        """Append a project-shared fact; duplicate ids are an idempotent no-op."""
        with self._lock:
            known = self._fact_ids_view()
            if fact.id in known:
                return fact.id
            self._append_lines(self.facts_path, [fact.to_line()])
            known.add(fact.id)
        return fact.id

    def fact_ids(self) -> set[str]:
        with self._lock:
            return set(self._fact_ids_view())

    def load_facts(self) -> LoadedFacts:
        facts: list[SemanticFact] = []
        skipped = 0
        if self.facts_path.exists():
            for line in self.facts_path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                try:
                    facts.append(SemanticFact.from_dict(json.loads(line)))
                except (json.JSONDecodeError, KeyError, TypeError, ValueError, ValidationError):
                    skipped += 1
        return LoadedFacts(facts=facts, skipped=skipped)

    # -- sidecar ledgers ----------------------------------------------------

    def apply_cw_delta(self, entry_id: str, delta: float, reward: float) -> float:
        """Clip-update one entry's cognitive weight via the append-only ledger."""
        with self._lock:
            if entry_id not in self._entry_ids_view():
                raise NotFoundError(f"unknown entry_id: {entry_id!r}")
            cw = self._cw_view()
            new_value = _clip(cw.get(entry_id, 0.0) + delta)
            record = CwLedgerRecord(
                entry_id=entry_id, delta=delta, reward=reward, applied_at=utc_now()
            )
            self._append_lines(self.cw_ledger_path, [record.to_line()])
            cw[entry_id] = new_value
        return new_value

    def promote(self, entry_id: str, fact_id: str) -> None:
        """Mark an entry promoted by appending to the promotions ledger."""
        with self._lock:
            if entry_id not in self._entry_ids_view():
                raise NotFoundError(f"unknown entry_id: {entry_id!r}")
            record = PromotionRecord(
                entry_id=entry_id, fact_id=fact_id, promoted_at=utc_now()
            )
            self._append_lines(self.promotions_path, [record.to_line()])
            self._promoted_view().add(entry_id)

    def promoted_entry_ids(self) -> set[str]:
        return set(self._promoted_view())

    # -- ledger replay ------------------------------------------------------

    def _cw_view(self) -> dict[str, float]:
        if self._cw is None:
            cw: dict[str, float] = {}
            if self.cw_ledger_path.exists():
                for line in self.cw_ledger_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    try:
                        record = json.loads(line)
                        entry_id = str(record["entry_id"])
                        delta = float(record["delta"])
                    except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                        continue
                    cw[entry_id] = _clip(cw.get(entry_id, 0.0) + delta)
            self._cw = cw
        return self._cw

    def _promoted_view(self) -> set[str]:
        if self._promoted is None:
            promoted: set[str] = set()
            if self.promotions_path.exists():
                for line in self.promotions_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    try:
                        promoted.add(str(json.loads(line)["entry_id"]))
                    except (json.JSONDecodeError, KeyError, TypeError):
                        continue
            self._promoted = promoted
        return self._promoted

    def _entry_ids_view(self) -> set[str]:
        if self._entry_ids is None:
            ids: set[str] = set()
            for path in sorted(self.episodic_dir.glob("*.jsonl")):
                for line in path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    try:
                        ids.add(str(json.loads(line)["id"]))
                    except (json.JSONDecodeError, KeyError, TypeError):
                        continue
            self._entry_ids = ids
        return self._entry_ids

    def _fact_ids_view(self) -> set[str]:
        if self._fact_ids is None:
            ids: set[str] = set()
            if self.facts_path.exists():
                for line in self.facts_path.read_text(encoding="utf-8").splitlines():
                    if not line.strip():
                        continue
                    try:
                        ids.add(str(json.loads(line)["id"]))
                    except (json.JSONDecodeError, KeyError, TypeError):
                        continue
            self._fact_ids = ids
        return self._fact_ids
