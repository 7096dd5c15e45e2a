"""Two-stage scoped retrieval with optional dense and hybrid ranking.

Stage 1 ranks semantic facts lexically and gathers the top distinct session
ids. Stage 2 scores episodic entries inside those sessions with the full
composite formula and returns the top k, greedily packed into a token budget.

Dense and hybrid modes re-rank the same scoped candidates: dense by cosine
similarity from an embedder, hybrid by reciprocal-rank fusion of the
composite and dense orderings.
"""

from __future__ import annotations

import hashlib
import time
from collections.abc import Sequence
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from typing import Protocol

import numpy as np

from . import lexical, scoring
from .errors import ValidationError
from .scoring import (
    Candidate,
    DecayConfig,
    ScoreBreakdown,
    TierConfig,
    Variant,
    WeightVector,
)
from .store import EpisodicEntry, SemanticFact

MODE_BM25 = "bm25"
MODE_DENSE = "dense"
MODE_HYBRID = "hybrid_rrf"
MODES = (MODE_BM25, MODE_DENSE, MODE_HYBRID)


@dataclass(frozen=True)
class RetrievalConfig:
    """Pipeline knobs; k=2 with a 600-token budget is the recommended
    operating point for small readers, the defaults below are the baseline."""

    stage1_k1: int | None = 5  # None disables scoping entirely
    stage2_k: int = 4
    token_budget: int = 300
    weights: WeightVector = field(default_factory=WeightVector.default)
    variant: Variant = Variant.RAW
    mode: str = MODE_BM25
    rrf_k: int = 60
    include_timestamps: bool = False

    def __post_init__(self) -> None:
        if self.stage1_k1 is not None and self.stage1_k1 < 1:
            raise ValidationError("stage1_k1 must be >= 1 or None")
        if self.stage2_k < 1:
            raise ValidationError("stage2_k must be >= 1")
        if self.token_budget < 1:
            raise ValidationError("token_budget must be >= 1")
        if self.rrf_k < 1:
            raise ValidationError("rrf_k must be >= 1")
        if self.mode not in MODES:
            raise ValidationError(f"mode must be one of {MODES}")
        object.__setattr__(self, "variant", Variant(self.variant))


class Embedder(Protocol):
    dimension: int

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        ...


class HashedBowEmbedder:
    """Deterministic hashed bag-of-words embedder for offline dense ranking.

    Each token hashes to a signed coordinate; vectors are L2-normalised.
    Empty texts map to a fixed unit basis vector.
    """

    def __init__(self, dimension: int = 64):
        self.dimension = dimension

    def _token_slot(self, token: str) -> tuple[int, float]:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        value = int.from_bytes(digest, "big")
        sign = 1.0 if value & 1 == 0 else -1.0
        return (value >> 1) % self.dimension, sign

    def embed(self, texts: Sequence[str]) -> list[list[float]]:
        vectors = []
        for text in texts:
            vec = np.zeros(self.dimension)
            for token in lexical.tokenize(text):
                idx, sign = self._token_slot(token)
                vec[idx] += sign
            norm = float(np.linalg.norm(vec))
            if norm == 0.0:
                vec[0] = 1.0
                norm = 1.0
            vectors.append((vec / norm).tolist())
        return vectors


@dataclass
class RankedEntry:
    entry: EpisodicEntry
    breakdown: ScoreBreakdown
    dense_similarity: float | None = None
    fused_score: float | None = None

    @property
    def score(self) -> float:
        if self.fused_score is not None:
            return self.fused_score
        if self.dense_similarity is not None:
            return self.dense_similarity
        return self.breakdown.composite


@dataclass
class RetrievalResult:
    query: str
    mode: str
    variant: Variant
    ranked: list[RankedEntry]
    scoped_session_ids: list[str]
    total_sessions: int
    sessions_searched: int
    scoping_disabled: bool
    fallback_unscoped: bool
    packed_context: str
    packed_entry_ids: list[str]
    packed_token_count: int
    latency_micros: dict[str, int]

    @property
    def sessions_ratio(self) -> float:
        if self.total_sessions == 0:
            return 0.0
        return self.sessions_searched / self.total_sessions


def build_fact_index(facts: Sequence[SemanticFact]) -> lexical.Bm25Index:
    """Facts are searchable by the subject+relation+value concatenation."""
    return lexical.build_index([(f.id, f.search_text()) for f in facts])


def stage1_scope(
    query_tokens: Sequence[str],
    facts: Sequence[SemanticFact],
    k1: int | None,
    index: lexical.Bm25Index | None = None,
) -> list[str]:
    """Walk facts in lexical-rank order, gathering distinct session ids.

    A multi-session fact contributes all its sessions at its rank. Only
    positive-scoring facts count as relevant; with k1=None every session
    backed by a positive-scoring fact is returned.
    """
    if not facts:
        return []
    if index is None:
        index = build_fact_index(facts)
    by_id = {f.id: f for f in facts}
    scoped: list[str] = []
    seen: set[str] = set()
    for fact_id, score in lexical.rank(index, query_tokens):
        if score <= 0.0:
            break
        for session_id in sorted(by_id[fact_id].session_ids):
            if session_id in seen:
                continue
            seen.add(session_id)
            scoped.append(session_id)
            if k1 is not None and len(scoped) >= k1:
                return scoped
    return scoped


def build_candidates(
    query_tokens: Sequence[str],
    entries: Sequence[EpisodicEntry],
    now: datetime,
) -> list[Candidate]:
    """Attach raw BM25 (pool statistics), age, CW, and tier to each entry."""
    index = lexical.build_index([(e.id, e.content) for e in entries])
    candidates = []
    for entry in entries:
        age = (now - entry.timestamp).total_seconds() / 86400.0
        candidates.append(
            Candidate(
                id=entry.id,
                session_id=entry.session_id,
                timestamp=entry.timestamp,
                raw_bm25=lexical.bm25_score(index, query_tokens, entry.id),
                age_days=max(0.0, age),
                cw=entry.cognitive_weight,
                tier=scoring.SEMANTIC if entry.promoted else scoring.EPISODIC,
            )
        )
    return candidates


def stage2_retrieve(
    query_tokens: Sequence[str],
    entries: Sequence[EpisodicEntry],
    cfg: RetrievalConfig,
    *,
    decay: DecayConfig | None = None,
    tiers: TierConfig | None = None,
    semantic_scope: frozenset[str] | set[str] = frozenset(),
    now: datetime | None = None,
    k: int | None = 0,
) -> list[RankedEntry]:
    """Composite-score the scoped entries and return them best-first.

    Callers must have excluded system entries already. ``k=0`` means "use
    cfg.stage2_k"; ``k=None`` returns the full ranking.
    """
    decay = decay or DecayConfig()
    tiers = tiers or TierConfig()
    if now is None:
        now = max((e.timestamp for e in entries), default=datetime.now(timezone.utc))
    candidates = build_candidates(query_tokens, entries, now)
    breakdowns = scoring.score_pool(
        candidates, cfg.weights, tiers, decay, semantic_scope, cfg.variant
    )
    order = scoring.rank_order(candidates, breakdowns)
    ranked = [RankedEntry(entries[i], breakdowns[i]) for i in order]
    if k == 0:
        k = cfg.stage2_k
    return ranked if k is None else ranked[:k]


def dense_rank(
    query: str, entries: Sequence[EpisodicEntry], embedder: Embedder
) -> list[tuple[EpisodicEntry, float]]:
    """Entries sorted by cosine similarity to the query, descending.

    Embedder failures propagate to the caller; there is no lexical fallback.
    """
    if not entries:
        return []
    vectors = embedder.embed([query] + [e.content for e in entries])
    query_vec = np.asarray(vectors[0])
    sims = [float(np.dot(query_vec, np.asarray(v))) for v in vectors[1:]]
    order = sorted(
        range(len(entries)),
        key=lambda i: (-sims[i], -entries[i].timestamp.timestamp(), entries[i].id),
    )
    return [(entries[i], sims[i]) for i in order]


def rrf_fuse(
    ranking_a: Sequence[str], ranking_b: Sequence[str], rrf_k: int = 60
) -> list[tuple[str, float]]:
    """Reciprocal-rank fusion: each item scores sum(1 / (k + rank)) over the
    rankings that contain it, rank starting at 1. Ties break by item id."""
    fused: dict[str, float] = {}
    for ranking in (ranking_a, ranking_b):
        for position, item in enumerate(ranking, start=1):
            fused[item] = fused.get(item, 0.0) + 1.0 / (rrf_k + position)
    return sorted(fused.items(), key=lambda pair: (-pair[1], pair[0]))


def pack_context(
    entries: Sequence[EpisodicEntry],
    token_budget: int,
    include_timestamps: bool = False,
) -> tuple[str, list[EpisodicEntry]]:
    """Greedily pack entries in rank order under the token budget.

    An entry that would overflow the remaining budget is skipped and the next
    one is tried; budget accounting uses each entry's stored token count.
    """
    if token_budget < 1:
        raise ValidationError("token_budget must be >= 1")
    used: list[EpisodicEntry] = []
    total = 0
    for entry in entries:
        if total + entry.tokens > token_budget:
            continue
        used.append(entry)
        total += entry.tokens
    if include_timestamps:
        lines = [f"[{e.timestamp.date().isoformat()}] {e.content}" for e in used]
    else:
        lines = [e.content for e in used]
    return "\n".join(lines), used


def oracle_context(
    gold_sessions: Sequence[tuple[str, str]],
    gold_facts: Sequence[SemanticFact],
    session_limit: int = 3,
) -> str:
    """Gold-supporting context assembled without any retrieval: up to
    ``session_limit`` gold sessions' text plus the gold facts."""
    if not gold_sessions and not gold_facts:
        raise ValidationError("no gold sessions or facts available")
    parts = [text for _, text in gold_sessions[:session_limit]]
    parts.extend(f.search_text() for f in gold_facts)
    return "\n".join(parts)


class RetrievalPipeline:
    """Immutable snapshot of one project's memory plus the scoring config.

    Construction snapshots the entry and fact sets, so retrieval concurrent
    with a consolidation pass sees either the pre-pass or post-pass tier,
    never a torn state.
    """

    def __init__(
        self,
        cfg: RetrievalConfig,
        *,
        entries: Sequence[EpisodicEntry],
        facts: Sequence[SemanticFact],
        decay: DecayConfig | None = None,
        tiers: TierConfig | None = None,
        embedder: Embedder | None = None,
        now: datetime | None = None,
    ):
        if cfg.variant is Variant.ZSCORE_EQUAL_FUSION:
            cfg = replace(cfg, weights=WeightVector.equal_fusion())
        self.cfg = cfg
        self.decay = decay or DecayConfig()
        self.tiers = tiers or TierConfig()
        self.embedder = embedder
        self.entries = [e for e in entries if not e.system]
        self.facts = list(facts)
        self.now = now or max(
            (e.timestamp for e in self.entries), default=datetime.now(timezone.utc)
        )
        self._fact_index = build_fact_index(self.facts) if self.facts else None

    @classmethod
    def from_store(
        cls,
        store,
        cfg: RetrievalConfig,
        *,
        project: str,
        agent_view: str | None = None,
        **kwargs,
    ) -> "RetrievalPipeline":
        loaded = store.load_entries(project, agent_view=agent_view)
        facts = store.load_facts()
        return cls(cfg, entries=loaded.entries, facts=facts.facts, **kwargs)

    def retrieve(self, query: str) -> RetrievalResult:
        cfg = self.cfg
        query_tokens = lexical.tokenize(query)
        total_sessions = len({e.session_id for e in self.entries})
        latency: dict[str, int] = {}

        t0 = time.perf_counter_ns()
        scoping_disabled = cfg.stage1_k1 is None
        fallback_unscoped = False
        if scoping_disabled:
            scoped: list[str] = []
            semantic_scope: frozenset[str] = frozenset()
            pool = self.entries
        elif not self.facts:
            fallback_unscoped = True
            scoped = []
            semantic_scope = frozenset()
            pool = self.entries
        else:
            scoped = stage1_scope(query_tokens, self.facts, cfg.stage1_k1, self._fact_index)
            if not scoped:
                fallback_unscoped = True
                semantic_scope = frozenset()
                pool = self.entries
            else:
                semantic_scope = frozenset(scoped)
                pool = [e for e in self.entries if e.session_id in semantic_scope]
        latency["stage1"] = (time.perf_counter_ns() - t0) // 1000

        t1 = time.perf_counter_ns()
        full_ranking = stage2_retrieve(
            query_tokens,
            pool,
            cfg,
            decay=self.decay,
            tiers=self.tiers,
            semantic_scope=semantic_scope,
            now=self.now,
            k=None,
        )
        by_id = {r.entry.id: r for r in full_ranking}
        composite_ids = [r.entry.id for r in full_ranking]

        if cfg.mode == MODE_BM25:
            ranked = full_ranking
        elif cfg.mode == MODE_DENSE:
            embedder = self._require_embedder()
            ranked = [
                RankedEntry(entry, by_id[entry.id].breakdown, dense_similarity=sim)
                for entry, sim in dense_rank(query, pool, embedder)
            ]
        else:  # hybrid: fuse the composite and dense orderings
            embedder = self._require_embedder()
            dense_ranked = dense_rank(query, pool, embedder)
            dense_sims = {e.id: sim for e, sim in dense_ranked}
            fused = rrf_fuse(composite_ids, [e.id for e, _ in dense_ranked], cfg.rrf_k)
            ranked = [
                RankedEntry(
                    by_id[cid].entry,
                    by_id[cid].breakdown,
                    dense_similarity=dense_sims.get(cid),
                    fused_score=score,
                )
                for cid, score in fused
            ]
        ranked = ranked[: cfg.stage2_k]
        latency["stage2"] = (time.perf_counter_ns() - t1) // 1000

        t2 = time.perf_counter_ns()
        context, used = pack_context(
            [r.entry for r in ranked], cfg.token_budget, cfg.include_timestamps
        )
        latency["pack"] = (time.perf_counter_ns() - t2) // 1000

        searched = total_sessions if (scoping_disabled or fallback_unscoped) else len(
            {e.session_id for e in pool}
        )
        return RetrievalResult(
            query=query,
            mode=cfg.mode,
            variant=cfg.variant,
            ranked=ranked,
            scoped_session_ids=list(scoped),
            total_sessions=total_sessions,
            sessions_searched=searched,
            scoping_disabled=scoping_disabled,
            fallback_unscoped=fallback_unscoped,
            packed_context=context,
            packed_entry_ids=[e.id for e in used],
            packed_token_count=sum(e.tokens for e in used),
            latency_micros=latency,
        )

    def _require_embedder(self) -> Embedder:
        if self.embedder is None:
            raise ValidationError(f"mode {self.cfg.mode!r} requires an embedder")
        return self.embedder
