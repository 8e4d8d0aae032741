"""Shared fixtures and independent oracles used across the test suite."""

from __future__ import annotations

import math

from prodmap.dataset import ProductPair
from prodmap.parsing import render_structured_output
from prodmap.retrieval import tokenize


def canonical_pair(pair_id: str = "p-0") -> ProductPair:
    """A matched pair rich enough that all three mock judges can reach 1.0:
    shared content tokens, a brand + model code, and numeric/unit tokens."""
    return ProductPair(
        base_title="Acme X200 vitamin d3 4000iu 120 tablets",
        compared_title="Acme X200 vitamin d3 4000iu 120 tablets swiss-made",
        brand="Acme",
        pair_id=pair_id,
    )


def perfect_rollout(pair: ProductPair, gold: int) -> str:
    """A rollout whose reasoning cites only tokens shared by both titles,
    scoring 1.0 on every mock judge when the label is correct."""
    shared = [t for t in tokenize(pair.base_title)
              if t in set(tokenize(pair.compared_title))]
    return render_structured_output(" ".join(dict.fromkeys(shared)), gold)


def brute_force_bm25_scores(corpus: list[tuple[object, str]], query: str,
                            k1: float = 1.2, b: float = 0.75) -> dict[object, float]:
    """Independent evaluation of the BM25 sum for every document.

    Recomputes document frequencies, lengths, and the average length from the
    raw corpus; shares nothing with the library implementation except the
    tokenizer contract (lowercase, split on non-alphanumerics).
    """
    docs = {doc_id: tokenize(text) for doc_id, text in corpus}
    n = len(docs)
    df: dict[str, int] = {}
    for tokens in docs.values():
        for term in set(tokens):
            df[term] = df.get(term, 0) + 1
    avgdl = sum(len(tokens) for tokens in docs.values()) / n if n else 0.0

    query_terms = tokenize(query)
    scores: dict[object, float] = {}
    for doc_id, tokens in docs.items():
        dl = len(tokens)
        length_ratio = dl / avgdl if avgdl > 0 else 0.0
        score = 0.0
        for term in query_terms:
            f = tokens.count(term)
            if f == 0:
                continue
            idf = math.log((n - df.get(term, 0) + 0.5) / (df.get(term, 0) + 0.5) + 1.0)
            score += idf * (f * (k1 + 1)) / (f + k1 * (1 - b + b * length_ratio))
        scores[doc_id] = score
    return scores


def brute_force_top_k(corpus: list[tuple[object, str]], query: str, k: int,
                      k1: float = 1.2, b: float = 0.75) -> list[tuple[object, float]]:
    scores = brute_force_bm25_scores(corpus, query, k1=k1, b=b)
    ranked = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return ranked[:k]
