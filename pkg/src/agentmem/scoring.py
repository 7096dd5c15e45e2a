"""Five-signal relevance scoring.

A candidate's composite score is a weighted sum of four signal values (a
reserved semantic slot, lexical BM25, recency decay, cognitive weight) plus an
additive tier bonus that acts as a tiebreaker:

    S = w_sem*phi_sem + w_bm25*phi_bm25 + w_decay*phi_decay + w_cw*phi_cw
        + w_tier*(mu - 1)

The recency signal is bypassed (forced to 1) for strong lexical matches and
for candidates whose session was selected by semantic scoping. The BM25
signal may optionally be normalised over the candidate pool; the bypass
threshold always applies to the raw score.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from datetime import datetime
from enum import Enum

from .errors import ValidationError

_SUM_TOL = 1e-9

EPISODIC = "episodic"
SEMANTIC = "semantic"
PROCEDURAL = "procedural"


@dataclass(frozen=True)
class WeightVector:
    """Scoring weights; nonnegative, summing to 1. The semantic slot is
    reserved for a future dense-similarity signal and defaults to 0."""

    w_sem: float = 0.0
    w_bm25: float = 0.35
    w_decay: float = 0.25
    w_cw: float = 0.25
    w_tier: float = 0.15

    def __post_init__(self) -> None:
        values = self.as_list()
        if any(v < 0 for v in values):
            raise ValidationError(f"weights must be nonnegative: {values}")
        total = sum(values)
        if abs(total - 1.0) > _SUM_TOL:
            raise ValidationError(f"weights must sum to 1, got {total!r}")

    @classmethod
    def default(cls) -> "WeightVector":
        return cls()

    @classmethod
    def equal_fusion(cls) -> "WeightVector":
        """Equal weight on the four live signals; semantic slot stays 0."""
        return cls(0.0, 0.25, 0.25, 0.25, 0.25)

    def as_list(self) -> list[float]:
        return [self.w_sem, self.w_bm25, self.w_decay, self.w_cw, self.w_tier]

    def without(self, signal: str) -> "WeightVector":
        """Zero one signal's weight and renormalise the rest to sum 1."""
        names = ("sem", "bm25", "decay", "cw", "tier")
        if signal not in names:
            raise ValidationError(f"unknown signal: {signal!r}")
        values = self.as_list()
        idx = names.index(signal)
        values[idx] = 0.0
        total = sum(values)
        if total <= 0:
            raise ValidationError("cannot remove the only nonzero weight")
        return WeightVector(*(v / total for v in values))


class Variant(str, Enum):
    """BM25-signal normalisation variants."""

    RAW = "raw"
    LOG1P = "log1p"
    MINMAX = "minmax"
    ZSCORE = "zscore"
    ZSCORE_EQUAL_FUSION = "zscore_equal_fusion"


# Variants computed element-wise; the rest need the whole candidate pool.
_ELEMENTWISE = {Variant.RAW, Variant.LOG1P}


class BypassReason(str, Enum):
    NONE = "none"
    BM25_THRESHOLD = "bm25_threshold"
    SEMANTIC_SCOPE = "semantic_scope"


@dataclass(frozen=True)
class DecayConfig:
    lambda_per_day: float = 0.05
    bypass_threshold: float = 2.0

    def __post_init__(self) -> None:
        if self.lambda_per_day <= 0:
            raise ValidationError("lambda_per_day must be > 0")


@dataclass(frozen=True)
class TierConfig:
    episodic: float = 1.0
    semantic: float = 1.2
    procedural: float = 1.4

    def __post_init__(self) -> None:
        if min(self.episodic, self.semantic, self.procedural) < 1.0:
            raise ValidationError("tier multipliers must be >= 1")

    def multiplier(self, tier: str) -> float:
        try:
            return {EPISODIC: self.episodic, SEMANTIC: self.semantic, PROCEDURAL: self.procedural}[tier]
        except KeyError:
            raise ValidationError(f"unknown tier: {tier!r}") from None


@dataclass(frozen=True)
class Candidate:
    """One scoring candidate with its precomputed signal inputs."""

    id: str
    session_id: str
    timestamp: datetime
    raw_bm25: float
    age_days: float
    cw: float
    tier: str = EPISODIC


@dataclass(frozen=True)
class ScoreBreakdown:
    """Per-candidate signal values and the composite they produced."""

    phi_sem: float
    phi_bm25_raw: float
    phi_bm25: float
    phi_decay: float
    phi_cw: float
    tier_bonus: float
    composite: float
    bypass_applied: bool
    bypass_reason: BypassReason

    def as_dict(self) -> dict:
        return {
            "phi_sem": self.phi_sem,
            "phi_bm25_raw": self.phi_bm25_raw,
            "phi_bm25": self.phi_bm25,
            "phi_decay": self.phi_decay,
            "phi_cw": self.phi_cw,
            "tier_bonus": self.tier_bonus,
            "composite": self.composite,
            "bypass_applied": self.bypass_applied,
            "bypass_reason": self.bypass_reason.value,
        }


def decay_signal(age_days: float, bypass: bool, cfg: DecayConfig) -> float:
    """exp(-lambda * age), forced to 1 when the bypass rule fired."""
    if age_days < 0:
        raise ValidationError(f"age_days must be nonnegative, got {age_days}")
    if bypass:
        return 1.0
    return math.exp(-cfg.lambda_per_day * age_days)


def evaluate_bypass(
    raw_bm25: float,
    session_id: str,
    semantic_scope: frozenset[str] | set[str],
    cfg: DecayConfig,
) -> tuple[bool, BypassReason]:
    """Strong lexical match (strict threshold) or scoped session bypasses decay."""
    if raw_bm25 > cfg.bypass_threshold:
        return True, BypassReason.BM25_THRESHOLD
    if session_id in semantic_scope:
        return True, BypassReason.SEMANTIC_SCOPE
    return False, BypassReason.NONE


def cw_signal(cw: float) -> float:
    """Map cognitive weight from [-1, 1] onto [0, 1]."""
    if not -1.0 <= cw <= 1.0:
        raise ValidationError(f"cognitive weight out of range: {cw}")
    return (cw + 1.0) / 2.0


def normalise_scores(raw_scores: Sequence[float], variant: Variant) -> list[float]:
    """Transform BM25 scores over one candidate pool.

    minmax maps min->0, max->1 (constant pool -> all 0.5); zscore uses the
    population standard deviation (constant pool -> all 0).
    """
    variant = Variant(variant)
    if variant is Variant.RAW:
        return list(raw_scores)
    if variant is Variant.LOG1P:
        return [math.log1p(s) for s in raw_scores]
    if not raw_scores:
        raise ValidationError("pool normalisation requires a nonempty pool")
    if variant is Variant.MINMAX:
        lo, hi = min(raw_scores), max(raw_scores)
        if hi == lo:
            return [0.5] * len(raw_scores)
        return [(s - lo) / (hi - lo) for s in raw_scores]
    # zscore and its equal-weight fusion twin share the transform; the fusion
    # variant additionally swaps in equal weights at pipeline level.
    mean = sum(raw_scores) / len(raw_scores)
    var = sum((s - mean) ** 2 for s in raw_scores) / len(raw_scores)
    std = math.sqrt(var)
    if std == 0.0:
        return [0.0] * len(raw_scores)
    return [(s - mean) / std for s in raw_scores]


def composite_score(
    candidate: Candidate,
    weights: WeightVector,
    tier_cfg: TierConfig,
    decay_cfg: DecayConfig,
    semantic_scope: frozenset[str] | set[str],
    variant: Variant = Variant.RAW,
    bm25_signal: float | None = None,
) -> ScoreBreakdown:
    """Assemble the signal vector for one candidate and combine it.

    For pool-relative variants (minmax/zscore) the caller must pass the
    pool-normalised value as ``bm25_signal``; element-wise variants are
    applied here. Bypass evaluation always uses the raw score.
    """
    variant = Variant(variant)
    if bm25_signal is None:
        if variant not in _ELEMENTWISE:
            raise ValidationError(f"variant {variant.value} needs a pool-normalised bm25_signal")
        bm25_signal = normalise_scores([candidate.raw_bm25], variant)[0]
    bypassed, reason = evaluate_bypass(
        candidate.raw_bm25, candidate.session_id, semantic_scope, decay_cfg
    )
    phi_decay = decay_signal(candidate.age_days, bypassed, decay_cfg)
    phi_cw = cw_signal(candidate.cw)
    tier_bonus = weights.w_tier * (tier_cfg.multiplier(candidate.tier) - 1.0)
    composite = (
        weights.w_sem * 0.0
        + weights.w_bm25 * bm25_signal
        + weights.w_decay * phi_decay
        + weights.w_cw * phi_cw
        + tier_bonus
    )
    return ScoreBreakdown(
        phi_sem=0.0,
        phi_bm25_raw=candidate.raw_bm25,
        phi_bm25=bm25_signal,
        phi_decay=phi_decay,
        phi_cw=phi_cw,
        tier_bonus=tier_bonus,
        composite=composite,
        bypass_applied=bypassed,
        bypass_reason=reason,
    )


def score_pool(
    candidates: Sequence[Candidate],
    weights: WeightVector,
    tier_cfg: TierConfig,
    decay_cfg: DecayConfig,
    semantic_scope: frozenset[str] | set[str],
    variant: Variant = Variant.RAW,
) -> list[ScoreBreakdown]:
    """Score a whole candidate pool, normalising BM25 over the pool."""
    if not candidates:
        return []
    signals = normalise_scores([c.raw_bm25 for c in candidates], variant)
    return [
        composite_score(c, weights, tier_cfg, decay_cfg, semantic_scope, variant, bm25_signal=s)
        for c, s in zip(candidates, signals)
    ]


def rank_order(
    candidates: Sequence[Candidate], breakdowns: Sequence[ScoreBreakdown]
) -> list[int]:
    """Indices sorted by composite desc; ties break by newer timestamp, then id."""
    return sorted(
        range(len(candidates)),
        key=lambda i: (
            -breakdowns[i].composite,
            -candidates[i].timestamp.timestamp(),
            candidates[i].id,
        ),
    )
