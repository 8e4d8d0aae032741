"""The three specialized judge agents scoring generated reasoning.

Each judge sees the two product titles plus the extracted reasoning and emits
one float in [0, 1] for its designated sub-skill: core product identity,
brand/model identifiers, or variant-conflict checking.  Judges are called at
temperature 0 regardless of generation defaults, out-of-range scores are
clamped and flagged, and empty reasoning short-circuits to 0.0 without a
backend call.  A deterministic mock judge stands in for offline tests.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .backends import CompletionBackend
from .dataset import ProductPair
from .retrieval import tokenize


class JudgeError(RuntimeError):
    """Judge invocation failed (transport or unusable response)."""


class UnparseableScoreError(JudgeError):
    """The judge response contained no numeric score."""


class JudgeKind(str, Enum):
    CORE_IDENTITY = "core_identity"
    MODEL_IDENTIFIER = "model_identifier"
    VARIANT_CONFLICT = "variant_conflict"


@dataclass(frozen=True)
class JudgeScore:
    kind: JudgeKind
    score: float
    raw_response: str
    clamped: bool = False

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"judge score must be in [0, 1], got {self.score}")


_RUBRICS = {
    JudgeKind.CORE_IDENTITY: (
        "core product identity",
        "Score whether the reasoning correctly identifies and compares the core "
        "product or category identity shared or mismatched between the two titles. "
        "Focus on the central product type and its main anchor tokens; ignore brand "
        "or model codes and variant attributes.",
    ),
    JudgeKind.MODEL_IDENTIFIER: (
        "brand and model identifiers",
        "Score whether the reasoning correctly handles brand and model identifiers: "
        "brand prefixes, model lines, and explicit model codes. It must distinguish "
        "ignorable seller or brand prefixes from true identifiers and ground every "
        "identifier comparison in tokens from the titles. Do not judge variant "
        "conflicts such as size or count differences.",
    ),
    JudgeKind.VARIANT_CONFLICT: (
        "variant attributes and conflicts",
        "Score whether the reasoning checks variant attributes and detects conflict "
        "or consistency between the titles, covering size, color, capacity, count, "
        "specification, option, bundle composition, and version.",
    ),
}


def build_judge_prompt(kind: JudgeKind, pair: ProductPair, reasoning: str) -> str:
    title, body = _RUBRICS[kind]
    return (
        "You are a strict evaluation judge for product-matching reasoning.\n"
        f"Judge exactly one sub-skill: {title}.\n"
        f"{body}\n"
        "Evaluate only this sub-skill. Penalize tokens cited in the reasoning that "
        "do not appear in either product title. If the reasoning is missing or "
        "empty, return 0.0.\n\n"
        f"Base product: {pair.base_title}\n"
        f"Compared product: {pair.compared_title}\n"
        "Reasoning:\n"
        f"{reasoning}\n\n"
        "Scoring anchors: 0.0 = missing or ungrounded, 0.5 = generic or weak, "
        "1.0 = token-grounded and correct. Intermediate values are allowed.\n"
        "Respond with a single float in [0, 1] and no explanation."
    )


_NUMBER_RE = re.compile(r"-?(?:\d+\.?\d*|\.\d+)")


def parse_judge_score(raw: str) -> tuple[float, bool]:
    """Extract the first decimal number; clamp out-of-range values and flag them."""
    match = _NUMBER_RE.search(raw)
    if match is None:
        raise UnparseableScoreError(f"no numeric score in judge response {raw!r}")
    value = float(match.group())
    clamped = value < 0.0 or value > 1.0
    return min(1.0, max(0.0, value)), clamped


def score_with_judge(kind: JudgeKind, pair: ProductPair, reasoning: str,
                     backend: CompletionBackend) -> JudgeScore:
    """Run one judge through a live or mock backend.

    Empty or whitespace reasoning returns 0.0 with no backend call.
    Unparseable responses are retried once before erroring; transport retries
    are the backend's own responsibility.
    """
    if not reasoning or not reasoning.strip():
        return JudgeScore(kind=kind, score=0.0, raw_response="", clamped=False)
    prompt = build_judge_prompt(kind, pair, reasoning)
    last_raw = ""
    for _ in range(2):
        last_raw = backend.complete(prompt, temperature=0.0)
        try:
            value, clamped = parse_judge_score(last_raw)
        except UnparseableScoreError:
            continue
        return JudgeScore(kind=kind, score=value, raw_response=last_raw, clamped=clamped)
    raise UnparseableScoreError(
        f"{kind.value} judge returned no numeric score after retry: {last_raw!r}")


def make_judge_provider(backend: CompletionBackend):
    """Adapt a backend into the (kind, pair, reasoning) -> JudgeScore callable."""
    def provider(kind: JudgeKind, pair: ProductPair, reasoning: str) -> JudgeScore:
        return score_with_judge(kind, pair, reasoning, backend)
    return provider


# --- deterministic offline judge ---------------------------------------------

# Function words plus the meta-vocabulary a reasoning trace uses *about* the
# comparison; these never count as cited evidence.
_STOPWORDS = frozenset("""
a an the and or but of for with without in on to from at by as is are was were
be been it its they them their he she we you i this that these those there
has have had do does did not no nor same different both each only also while
when then than so if all any more less one two three first second third step
steps final answer label output
title titles name names product products item items listing listings
brand brands model models variant variants attribute attributes
size sizes count counts capacity option options bundle version edition
core identity identifier identifiers spec specification
match matches matched matching mismatch mismatched conflict conflicts
consistent consistency share shared shares differ differs difference
mention mentions mentioned cite cites cited list lists listed appear appears
look looks seem seems resemble resembles similar identical equal equals
refer refers like really overall
compare compared comparison check checks checked key main token tokens word words
""".split())

_UNIT_WORDS = frozenset("""
ml l g kg mg mcg oz lb iu w kw gb tb mb mah count pack packs pcs piece pieces
tablets capsules cans pods sheets wipes bags rolls set sets x spf
""".split())

_MODEL_CODE_RE = re.compile(r"(?=.*[a-z])(?=.*\d)[a-z0-9]+")


def _citations(reasoning: str) -> list[str]:
    return [t for t in tokenize(reasoning) if t not in _STOPWORDS]


def _is_relevant(kind: JudgeKind, token: str, brand_tokens: set[str]) -> bool:
    if kind is JudgeKind.CORE_IDENTITY:
        return True  # shared-token requirement is applied by the caller
    if kind is JudgeKind.MODEL_IDENTIFIER:
        return token in brand_tokens or _MODEL_CODE_RE.fullmatch(token) is not None
    return any(ch.isdigit() for ch in token) or token in _UNIT_WORDS


def mock_judge_score(kind: JudgeKind, pair: ProductPair, reasoning: str) -> JudgeScore:
    """Deterministic stand-in for a live judge.

    Heuristic: 0.0 for empty reasoning; otherwise start at 0.5 (generic or
    weak) and rise to 1.0 when the reasoning cites at least two kind-relevant
    tokens present in the titles (tokens shared by both titles for core
    identity, brand or model-code-shaped tokens for identifiers, numeric or
    unit tokens for variants).  Each distinct cited token found in neither
    title subtracts 0.25, floored at 0.
    """
    if reasoning is None or not reasoning.strip():
        return JudgeScore(kind=kind, score=0.0, raw_response="", clamped=False)

    base_tokens = set(tokenize(pair.base_title))
    cmp_tokens = set(tokenize(pair.compared_title))
    title_tokens = base_tokens | cmp_tokens
    brand_tokens = set(tokenize(pair.brand)) if pair.brand else set()
    cited = _citations(reasoning)

    grounding = base_tokens & cmp_tokens if kind is JudgeKind.CORE_IDENTITY else title_tokens
    relevant_hits = {
        t for t in cited
        if t in grounding and _is_relevant(kind, t, brand_tokens)
    }
    hallucinated = {t for t in cited if t not in title_tokens}

    score = 1.0 if len(relevant_hits) >= 2 else 0.5
    score -= 0.25 * len(hallucinated)
    score = min(1.0, max(0.0, score))
    return JudgeScore(kind=kind, score=score, raw_response=f"{score:.2f}", clamped=False)
