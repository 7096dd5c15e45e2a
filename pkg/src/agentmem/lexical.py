"""Tokenisation and raw Okapi BM25 scoring over small in-memory corpora.

Scores are left unnormalised on purpose: downstream scoring applies its own
normalisation variants, and the decay-bypass rule thresholds the raw value.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from collections.abc import Iterable, Sequence
from dataclasses import dataclass

from .errors import NotFoundError, ValidationError

DEFAULT_K1 = 1.5
DEFAULT_B = 0.75

# Word characters minus underscore: lowercased alphanumeric runs.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase and split on non-alphanumeric runs; empty tokens dropped.

    "The Eiffel Tower!" -> ["the", "eiffel", "tower"]; "k1=1.5" -> ["k1", "1", "5"].
    """
    return _TOKEN_RE.findall(text.lower())


@dataclass(frozen=True)
class Bm25Index:
    """Immutable per-corpus statistics; safe to score from many threads."""

    doc_ids: tuple[str, ...]
    doc_count: int
    avg_doc_len: float
    doc_len: dict[str, int]
    term_freqs: dict[str, Counter]
    doc_freq: dict[str, int]
    k1: float = DEFAULT_K1
    b: float = DEFAULT_B


def build_index(
    docs: Sequence[tuple[str, str]], k1: float = DEFAULT_K1, b: float = DEFAULT_B
) -> Bm25Index:
    """Index (doc_id, text) pairs. Duplicate ids are rejected."""
    doc_ids: list[str] = []
    doc_len: dict[str, int] = {}
    term_freqs: dict[str, Counter] = {}
    doc_freq: Counter = Counter()
    for doc_id, text in docs:
        if doc_id in term_freqs:
            raise ValidationError(f"duplicate doc_id: {doc_id!r}")
        tokens = tokenize(text)
        doc_ids.append(doc_id)
        doc_len[doc_id] = len(tokens)
        tf = Counter(tokens)
        term_freqs[doc_id] = tf
        for term in tf:
            doc_freq[term] += 1
    n = len(doc_ids)
    avg = sum(doc_len.values()) / n if n else 0.0
    return Bm25Index(
        doc_ids=tuple(doc_ids),
        doc_count=n,
        avg_doc_len=avg,
        doc_len=doc_len,
        term_freqs=term_freqs,
        doc_freq=dict(doc_freq),
        k1=k1,
        b=b,
    )


def idf(index: Bm25Index, term: str) -> float:
    """Nonnegative IDF: ln(1 + (N - df + 0.5) / (df + 0.5))."""
    df = index.doc_freq.get(term, 0)
    return math.log(1.0 + (index.doc_count - df + 0.5) / (df + 0.5))


def bm25_score(index: Bm25Index, query_tokens: Iterable[str], doc_id: str) -> float:
    """Raw Okapi BM25 of one document for the query terms.

    Repeated query terms count once; terms absent from the doc contribute 0.
    """
    tf = index.term_freqs.get(doc_id)
    if tf is None:
        raise NotFoundError(f"doc_id not in index: {doc_id!r}")
    dl = index.doc_len[doc_id]
    length_norm = index.k1 * (
        1.0 - index.b + (index.b * dl / index.avg_doc_len if index.avg_doc_len > 0 else 0.0)
    )
    score = 0.0
    for term in dict.fromkeys(query_tokens):
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += idf(index, term) * f * (index.k1 + 1.0) / (f + length_norm)
    return score


def rank(
    index: Bm25Index, query_tokens: Iterable[str], limit: int | None = None
) -> list[tuple[str, float]]:
    """All documents scored and sorted by (score desc, doc_id asc)."""
    terms = list(dict.fromkeys(query_tokens))
    scored = [(doc_id, bm25_score(index, terms, doc_id)) for doc_id in index.doc_ids]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return scored if limit is None else scored[:limit]
