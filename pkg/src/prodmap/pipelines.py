"""Inference strategies, reflective-trace synthesis, and evaluation metrics.

All single-inference strategies (zero-shot, step-by-step, entity-attribute)
and both retrieval strategies share one byte-identical base instruction block,
so measured differences come from the strategy and not the prompt phrasing.
The structured strategy uses the reasoning-then-label prompt and parser.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .backends import CompletionBackend
from .dataset import LabeledPair, ProductPair
from .optim import RolloutGroup, group_advantages
from .parsing import InvalidLabelError, parse_bare_label, parse_structured_output
from .retrieval import Bm25Index, build_index, build_pair_query, build_title_corpus, retrieve_top_k
from .reward import DEFAULT_WEIGHTS, JudgeProvider, RewardWeights, score_rollout

SINGLE_INFERENCE_STRATEGIES = ("zero_shot", "cot", "entity_attr", "reason_label")
STRATEGIES = SINGLE_INFERENCE_STRATEGIES + ("rag", "marag")


class PredictionError(RuntimeError):
    """One pair failed to produce a usable prediction."""

    def __init__(self, pair_id: str, reason: str):
        super().__init__(f"pair {pair_id!r}: {reason}")
        self.pair_id = pair_id
        self.reason = reason


class EvaluationError(ValueError):
    """A prediction refers to a pair with no gold label."""


@dataclass(frozen=True)
class Prediction:
    pair_id: str
    predicted: int
    strategy: str
    raw_output: str
    evidence: tuple[str, ...] | None = None
    intermediate: dict | None = None

    def __post_init__(self):
        if self.predicted not in (0, 1):
            raise ValueError(f"predicted label must be 0 or 1, got {self.predicted!r}")


@dataclass(frozen=True)
class EvalReport:
    tp: int
    fp: int
    fn: int
    tn: int
    accuracy: float
    precision: float
    recall: float
    f1: float
    warnings: tuple[str, ...] = ()

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def to_dict(self) -> dict:
        return {
            "tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn,
            "accuracy": self.accuracy, "precision": self.precision,
            "recall": self.recall, "f1": self.f1,
            "warnings": list(self.warnings),
        }


BASELINE_INSTRUCTIONS = """\
You are a product matching classifier. Decide whether Product A and Product B refer to the same sellable product. Output only 1 if matched, otherwise output only 0.
1. Different product family, series, or model name means 0.
2. Different variant attributes that change the sellable SKU (such as color, size, capacity, count, edition, generation, set composition, pack size) means 0.
3. Ignore only minor formatting differences, spacing, punctuation, obvious spelling noise, or packaging-only phrases.
4. If uncertain, output 0.
Output only one character: 0 or 1."""

COT_INSTRUCTION = (
    "Before answering, reason step by step through the comparison silently. "
    "Do not write the steps; still output only the single final character.")

ENTITY_ATTR_INSTRUCTION = (
    "Before answering, extract and compare the salient attributes of both products "
    "(brand, product type, specification, quantity, and option-related cues) silently. "
    "Do not write the comparison; still output only the single final character.")

STRUCTURED_PROMPT_TEMPLATE = """\
You are a product-title matching analyst.

Task: Given two product names, decide whether they refer to the same sellable product variant.
- Product A: {base}
- Product B: {compared}

Important constraints:
1. Do NOT use any external label column or hidden metadata. Decide only from the two product names.
2. Compare step by step before concluding.
3. Treat differences in model code, capacity, size, color, quantity, option, bundle composition (set/single item), edition/origin/version as potentially critical.
4. Ignore minor wording differences such as spacing, punctuation, seller prefix/brand prefix, and marketing words when core identity is still the same.
5. If core product identity or key variant conflicts, output 0.
6. If core product identity and key variant are consistent (or one side is only less specific without contradiction), output 1.

Output format (must follow exactly):
1. First, <identify the core product/category and main tokens in both names>.
2. Second, <compare brand/model line/model number and key identifiers>.
3. Third, <compare variant attributes: size/color/count/spec/option/bundle, and check for conflicts>.
4. So, the final answer is: <0 or 1>.

Label meaning:
- 1 = matched (same sellable product variant)
- 0 = not matched (different product or conflicting variant)

Expected output: <reason>evidence</reason><label>0/1</label>"""

COORDINATOR_PROMPT_TEMPLATE = """\
You are the final coordinator for a product matching decision. Two agents assessed whether the products below are the same sellable product.
Product A: {base}
Product B: {compared}
Direct agent (titles only) answered: {direct}
Evidence agent (with retrieved evidence) answered: {indirect}
Weigh both answers and decide. Output only one character: 0 or 1."""

TRACE_PROMPT_TEMPLATE = """\
You are a product-title matching analyst writing a reference explanation.
The correct final decision is already known: label {gold} ({meaning}).
Using only the two product names below, write the step-by-step evidence that justifies this label. Do NOT use any external label column or hidden metadata; reason only from the names.
Product A: {base}
Product B: {compared}
Structure the reasoning exactly as:
First, <identify the core product/category and main tokens in both names>.
Second, <compare brand/model line/model number and key identifiers>.
Third, <compare variant attributes: size/color/count/spec/option/bundle, and check for conflicts>.
So, the final answer is: {gold}.
Return only the reasoning text."""


def build_baseline_prompt(pair: ProductPair, extra_instruction: str | None = None,
                          evidence: list[str] | None = None) -> str:
    parts = [BASELINE_INSTRUCTIONS]
    if extra_instruction:
        parts.append(extra_instruction)
    if evidence is not None:
        parts.append("Evidence:" + "".join(f"\n{line}" for line in evidence))
    parts.append(f"Product A: {pair.base_title}\nProduct B: {pair.compared_title}")
    return "\n\n".join(parts)


def build_structured_prompt(pair: ProductPair) -> str:
    return STRUCTURED_PROMPT_TEMPLATE.format(
        base=pair.base_title, compared=pair.compared_title)


def build_coordinator_prompt(pair: ProductPair, direct: int, indirect: int) -> str:
    return COORDINATOR_PROMPT_TEMPLATE.format(
        base=pair.base_title, compared=pair.compared_title,
        direct=direct, indirect=indirect)


def build_trace_prompt(pair: ProductPair, gold: int) -> str:
    meaning = "matched" if gold == 1 else "not matched"
    return TRACE_PROMPT_TEMPLATE.format(
        gold=gold, meaning=meaning, base=pair.base_title, compared=pair.compared_title)


def _ask_bare_label(backend: CompletionBackend, prompt: str, pair_id: str) -> tuple[int, str]:
    """One retry on an unparseable label, then a per-pair failure."""
    raw = ""
    for _ in range(2):
        raw = backend.complete(prompt)
        try:
            return parse_bare_label(raw), raw
        except InvalidLabelError:
            continue
    raise PredictionError(pair_id, f"unparseable label after retry: {raw!r}")


def run_single_inference(pair: ProductPair, strategy: str,
                         backend: CompletionBackend) -> Prediction:
    """Zero-shot, silent step-by-step, entity-attribute, or structured inference."""
    if strategy not in SINGLE_INFERENCE_STRATEGIES:
        raise ValueError(f"unknown single-inference strategy {strategy!r}")
    if strategy == "reason_label":
        prompt = build_structured_prompt(pair)
        raw = ""
        for _ in range(2):
            raw = backend.complete(prompt)
            parsed = parse_structured_output(raw)
            if parsed.label is not None:
                return Prediction(pair_id=pair.pair_id, predicted=parsed.label,
                                  strategy=strategy, raw_output=raw)
        raise PredictionError(pair.pair_id, f"no label in structured output after retry: {raw!r}")

    extra = {"zero_shot": None, "cot": COT_INSTRUCTION,
             "entity_attr": ENTITY_ATTR_INSTRUCTION}[strategy]
    prompt = build_baseline_prompt(pair, extra_instruction=extra)
    label, raw = _ask_bare_label(backend, prompt, pair.pair_id)
    return Prediction(pair_id=pair.pair_id, predicted=label, strategy=strategy, raw_output=raw)


def run_rag(pair: ProductPair, index: Bm25Index, backend: CompletionBackend,
            k: int = 5) -> Prediction:
    """Retrieve top-k evidence for the concatenated titles and prompt with it."""
    query = build_pair_query(pair)
    hits = retrieve_top_k(index, query, k=k) if len(index) else []
    evidence = [index.raw_texts[doc_id] for doc_id, _ in hits]
    prompt = build_baseline_prompt(pair, evidence=evidence)
    label, raw = _ask_bare_label(backend, prompt, pair.pair_id)
    return Prediction(pair_id=pair.pair_id, predicted=label, strategy="rag",
                      raw_output=raw, evidence=tuple(evidence))


def run_multi_agent_rag(pair: ProductPair, index: Bm25Index,
                        backend: CompletionBackend, k: int = 5) -> Prediction:
    """Direct agent (titles only) + evidence agent (retrieval-augmented); the
    coordinator is invoked only when the two disagree."""
    direct_prompt = build_baseline_prompt(pair)
    direct, direct_raw = _ask_bare_label(backend, direct_prompt, pair.pair_id)

    indirect_pred = run_rag(pair, index, backend, k=k)
    indirect = indirect_pred.predicted

    intermediate = {"direct": direct, "indirect": indirect}
    if direct == indirect:
        return Prediction(pair_id=pair.pair_id, predicted=direct, strategy="marag",
                          raw_output=direct_raw, evidence=indirect_pred.evidence,
                          intermediate=intermediate)

    coord_prompt = build_coordinator_prompt(pair, direct, indirect)
    final, coord_raw = _ask_bare_label(backend, coord_prompt, pair.pair_id)
    intermediate["coordinator"] = final
    return Prediction(pair_id=pair.pair_id, predicted=final, strategy="marag",
                      raw_output=coord_raw, evidence=indirect_pred.evidence,
                      intermediate=intermediate)


def synthesize_reasoning_trace(pair: ProductPair, gold: int,
                               backend: CompletionBackend) -> str:
    """Reverse-generate a reasoning trace for a known label, blinded to
    everything except the two titles."""
    if gold not in (0, 1):
        raise ValueError(f"gold label must be 0 or 1, got {gold!r}")
    return backend.complete(build_trace_prompt(pair, gold)).strip()


def evaluate(predictions: list[Prediction], gold: dict[str, int]) -> EvalReport:
    """Confusion counts and accuracy/precision/recall/F1.

    Zero denominators yield 0 with a named warning so reports always render.
    """
    tp = fp = fn = tn = 0
    for pred in predictions:
        if pred.pair_id not in gold:
            raise EvaluationError(f"no gold label for pair_id {pred.pair_id!r}")
        g = gold[pred.pair_id]
        if pred.predicted == 1 and g == 1:
            tp += 1
        elif pred.predicted == 1 and g == 0:
            fp += 1
        elif pred.predicted == 0 and g == 1:
            fn += 1
        else:
            tn += 1

    warnings: list[str] = []

    def _ratio(num: int, denom: int, name: str) -> float:
        if denom == 0:
            warnings.append(f"{name}_zero_denominator")
            return 0.0
        return num / denom

    total = tp + fp + fn + tn
    accuracy = _ratio(tp + tn, total, "accuracy")
    precision = _ratio(tp, tp + fp, "precision")
    recall = _ratio(tp, tp + fn, "recall")
    if precision + recall > 0:
        f1 = 2 * precision * recall / (precision + recall)
    else:
        warnings.append("f1_zero_denominator")
        f1 = 0.0
    return EvalReport(tp=tp, fp=fp, fn=fn, tn=tn, accuracy=accuracy,
                      precision=precision, recall=recall, f1=f1,
                      warnings=tuple(warnings))


def score_rollout_batch(items, judge_provider: JudgeProvider,
                        weights: RewardWeights = DEFAULT_WEIGHTS) -> list[RolloutGroup]:
    """Score every rollout of every item and attach group-relative advantages.

    ``items`` is an iterable of (pair, gold, rollout_texts).  This is the
    single entry point external trainers call; the scoring service wraps it
    unchanged so in-process and over-the-wire results are identical.
    """
    groups: list[RolloutGroup] = []
    for pair, gold, rollouts in items:
        rollouts = list(rollouts)
        if not rollouts:
            raise ValueError(f"empty rollout list for pair {pair.pair_id!r}")
        breakdowns = [score_rollout(pair, text, gold, judge_provider, weights)
                      for text in rollouts]
        rewards = [b.reward for b in breakdowns]
        groups.append(RolloutGroup(
            input_id=pair.pair_id, rollouts=rollouts, rewards=rewards,
            advantages=group_advantages(rewards), breakdowns=breakdowns))
    return groups


@dataclass(frozen=True)
class FailureRecord:
    pair_id: str
    reason: str


@dataclass
class EvalRun:
    report: EvalReport
    predictions: list[Prediction]
    failures: list[FailureRecord] = field(default_factory=list)

    @property
    def failure_rate(self) -> float:
        attempted = len(self.predictions) + len(self.failures)
        return len(self.failures) / attempted if attempted else 0.0


def run_eval(data: list[LabeledPair], strategy: str, backend: CompletionBackend,
             index: Bm25Index | None = None, k: int = 5) -> EvalRun:
    """Predict every pair under one strategy and evaluate against gold labels.

    Per-pair failures are excluded from the metrics but collected and counted.
    For the retrieval strategies, the index defaults to one built over all
    product titles in the supplied data.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r} (choose from {STRATEGIES})")
    if strategy in ("rag", "marag") and index is None:
        index = build_index(build_title_corpus([lp.pair for lp in data]))

    predictions: list[Prediction] = []
    failures: list[FailureRecord] = []
    for lp in data:
        try:
            if strategy == "rag":
                pred = run_rag(lp.pair, index, backend, k=k)
            elif strategy == "marag":
                pred = run_multi_agent_rag(lp.pair, index, backend, k=k)
            else:
                pred = run_single_inference(lp.pair, strategy, backend)
        except PredictionError as exc:
            failures.append(FailureRecord(pair_id=exc.pair_id, reason=exc.reason))
            continue
        predictions.append(pred)

    gold = {lp.pair.pair_id: lp.label for lp in data}
    report = evaluate(predictions, gold)
    return EvalRun(report=report, predictions=predictions, failures=failures)
