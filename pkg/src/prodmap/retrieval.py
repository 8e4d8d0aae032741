"""BM25 index and scorer over product-title corpora.

Scores follow the classic saturating term-frequency form with length
normalization and a +1-smoothed IDF, ``ln((N - df + 0.5) / (df + 0.5) + 1)``,
which keeps every score nonnegative.  Indexes are immutable after build.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

from .dataset import ProductPair

INDEX_FORMAT = "bm25-index"
INDEX_VERSION = 1

# Lowercase, split on any non-alphanumeric character; digit runs survive as
# tokens because numeric variant tokens carry the signal in product titles.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


class RetrievalError(ValueError):
    """Invalid corpus, query, or document reference."""


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


@dataclass
class Bm25Index:
    documents: list[tuple[object, list[str]]]
    raw_texts: dict[object, str]
    document_frequencies: dict[str, int]
    average_doc_length: float
    k1: float = 1.2
    b: float = 0.75
    term_frequencies: dict[object, Counter] = field(default_factory=dict, repr=False)
    doc_lengths: dict[object, int] = field(default_factory=dict, repr=False)
    postings: dict[str, list[object]] = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.documents)

    def doc_ids(self) -> list[object]:
        return [doc_id for doc_id, _ in self.documents]


def build_index(corpus: list[tuple[object, str]], k1: float = 1.2, b: float = 0.75) -> Bm25Index:
    """Tokenize a corpus and compute exact BM25 statistics.

    ``corpus`` is a list of (doc_id, text); ids must be unique.  An empty
    corpus is allowed and simply retrieves nothing.
    """
    if k1 < 0:
        raise RetrievalError(f"k1 must be >= 0, got {k1}")
    if not 0.0 <= b <= 1.0:
        raise RetrievalError(f"b must be in [0, 1], got {b}")

    documents: list[tuple[object, list[str]]] = []
    raw_texts: dict[object, str] = {}
    term_frequencies: dict[object, Counter] = {}
    doc_lengths: dict[object, int] = {}
    postings: dict[str, list[object]] = {}
    df: Counter = Counter()

    for doc_id, text in corpus:
        if doc_id in raw_texts:
            raise RetrievalError(f"duplicate doc_id {doc_id!r}")
        tokens = tokenize(text)
        documents.append((doc_id, tokens))
        raw_texts[doc_id] = text
        term_frequencies[doc_id] = Counter(tokens)
        doc_lengths[doc_id] = len(tokens)
        for term in set(tokens):
            df[term] += 1
            postings.setdefault(term, []).append(doc_id)

    total_len = sum(doc_lengths.values())
    avgdl = total_len / len(documents) if documents else 0.0
    return Bm25Index(
        documents=documents,
        raw_texts=raw_texts,
        document_frequencies=dict(df),
        average_doc_length=avgdl,
        k1=k1,
        b=b,
        term_frequencies=term_frequencies,
        doc_lengths=doc_lengths,
        postings=postings,
    )


def idf(index: Bm25Index, term: str) -> float:
    n = len(index.documents)
    df = index.document_frequencies.get(term, 0)
    return math.log((n - df + 0.5) / (df + 0.5) + 1.0)


def bm25_score(index: Bm25Index, query: str, doc_id: object) -> float:
    """Score one document against a query, term by term.

    Query terms absent from the document contribute zero; repeated query
    terms contribute once per occurrence.
    """
    if doc_id not in index.term_frequencies:
        raise RetrievalError(f"unknown doc_id {doc_id!r}")
    tf = index.term_frequencies[doc_id]
    dl = index.doc_lengths[doc_id]
    avgdl = index.average_doc_length
    length_ratio = dl / avgdl if avgdl > 0 else 0.0
    score = 0.0
    for term in tokenize(query):
        f = tf.get(term, 0)
        if f == 0:
            continue
        score += idf(index, term) * (f * (index.k1 + 1)) / (
            f + index.k1 * (1 - index.b + index.b * length_ratio))
    return score


def retrieve_top_k(index: Bm25Index, query: str, k: int = 5) -> list[tuple[object, float]]:
    """Rank documents by descending score, ties broken by ascending doc_id.

    Equivalent to exhaustively scoring every document: candidates sharing at
    least one query term score strictly above zero, and zero-score documents
    pad the tail in id order when fewer than ``k`` candidates match.
    """
    if k < 1:
        raise RetrievalError(f"k must be >= 1, got {k}")
    candidates: set[object] = set()
    for term in set(tokenize(query)):
        candidates.update(index.postings.get(term, ()))
    scored = [(doc_id, bm25_score(index, query, doc_id)) for doc_id in candidates]
    scored.sort(key=lambda item: (-item[1], item[0]))
    if len(scored) < k:
        rest = sorted(doc_id for doc_id, _ in index.documents if doc_id not in candidates)
        scored.extend((doc_id, 0.0) for doc_id in rest[:k - len(scored)])
    return scored[:k]


def build_pair_query(pair: ProductPair) -> str:
    """Concatenate the two titles around a literal separator token."""
    return f"{pair.base_title} [SEP] {pair.compared_title}"


def build_title_corpus(pairs: list[ProductPair]) -> list[tuple[str, str]]:
    """One document per product title, ids derived from the pair id."""
    corpus: list[tuple[str, str]] = []
    for pair in pairs:
        corpus.append((f"{pair.pair_id}/base", pair.base_title))
        corpus.append((f"{pair.pair_id}/cmp", pair.compared_title))
    return corpus


def save_index(index: Bm25Index, path: str | Path) -> None:
    """Persist an index as self-describing versioned JSON."""
    payload = {
        "format": INDEX_FORMAT,
        "version": INDEX_VERSION,
        "k1": index.k1,
        "b": index.b,
        "documents": [
            {"doc_id": doc_id, "text": index.raw_texts[doc_id]}
            for doc_id, _ in index.documents
        ],
    }
    Path(path).write_text(json.dumps(payload, ensure_ascii=False), encoding="utf-8")


def load_index(path: str | Path) -> Bm25Index:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != INDEX_FORMAT:
        raise RetrievalError(f"not a {INDEX_FORMAT} file: {path}")
    if payload.get("version") != INDEX_VERSION:
        raise RetrievalError(f"unsupported index version {payload.get('version')!r}")
    corpus = [(doc["doc_id"], doc["text"]) for doc in payload["documents"]]
    return build_index(corpus, k1=payload["k1"], b=payload["b"])
