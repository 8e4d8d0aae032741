"""Composite rewards: verifiable format/correctness signals plus judge scores.

Two forms are exposed.  The training default is the normalized weighted mean
of format compliance, label correctness, and the mean judge score (default
weights 1, 2, 1), which stays in [0, 1].  The unnormalized four-term form
``sum(lambda_i * s_i)`` over (verifiable, core, identifier, variant) is kept
with free weighting coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .dataset import ProductPair
from .judges import JudgeKind, JudgeScore
from .parsing import ParsedOutput, format_score, parse_structured_output


@dataclass(frozen=True)
class RewardWeights:
    format: float = 1.0
    correctness: float = 2.0
    judge: float = 1.0

    def __post_init__(self):
        if self.format < 0 or self.correctness < 0 or self.judge < 0:
            raise ValueError("reward weights must be nonnegative")
        if self.total() <= 0:
            raise ValueError("reward weights must not all be zero")

    def total(self) -> float:
        return self.format + self.correctness + self.judge


DEFAULT_WEIGHTS = RewardWeights()

JudgeProvider = Callable[[JudgeKind, ProductPair, str], JudgeScore]


@dataclass(frozen=True)
class RewardBreakdown:
    """Component scores for one rollout plus the aggregated normalized reward."""

    s_fmt: int
    s_cls: int
    judge_scores: tuple[JudgeScore, JudgeScore, JudgeScore]
    s_judge: float
    reward: float

    def to_dict(self) -> dict:
        return {
            "s_fmt": self.s_fmt,
            "s_cls": self.s_cls,
            "s_judge": self.s_judge,
            "reward": self.reward,
            "judge_scores": {
                "core": self.judge_scores[0].score,
                "identifier": self.judge_scores[1].score,
                "variant": self.judge_scores[2].score,
            },
            "judge_clamped": [js.clamped for js in self.judge_scores],
        }


def correctness_score(parsed: ParsedOutput, gold: int) -> int:
    """1 iff a label was extracted and equals the gold label; no label scores 0."""
    if gold not in (0, 1):
        raise ValueError(f"gold label must be 0 or 1, got {gold!r}")
    return 1 if parsed.label is not None and parsed.label == gold else 0


def aggregate_reward(s_fmt: float, s_cls: float, s_judge: float,
                     weights: RewardWeights = DEFAULT_WEIGHTS) -> float:
    """Normalized reward: weighted mean of the three component scores."""
    for name, value in (("s_fmt", s_fmt), ("s_cls", s_cls), ("s_judge", s_judge)):
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"{name} must be in [0, 1], got {value}")
    return (weights.format * s_fmt + weights.correctness * s_cls
            + weights.judge * s_judge) / weights.total()


def four_term_reward(s_ver: float, s_core: float, s_id: float, s_var: float,
                     lambdas) -> float:
    """Unnormalized reward: weighted sum over verifiable + three judge components."""
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) != 4:
        raise ValueError(f"expected 4 weighting coefficients, got {len(lambdas)}")
    if any(l < 0 for l in lambdas):
        raise ValueError("weighting coefficients must be nonnegative")
    components = (s_ver, s_core, s_id, s_var)
    for value in components:
        if not 0.0 <= value <= 1.0:
            raise ValueError(f"component scores must be in [0, 1], got {value}")
    return sum(l * s for l, s in zip(lambdas, components))


def score_rollout(pair: ProductPair, rollout_text: str, gold: int,
                  judge_provider: JudgeProvider,
                  weights: RewardWeights = DEFAULT_WEIGHTS) -> RewardBreakdown:
    """Score one rollout: parse, check format and correctness, run the judges.

    Correctness uses the best-effort extracted label even when the format is
    invalid; the two signals are independent components.  Empty extracted
    reasoning gives all three judges 0.0 without invoking the provider.
    Provider failures propagate; they never silently become reward 0.
    """
    if gold not in (0, 1):
        raise ValueError(f"gold label must be 0 or 1, got {gold!r}")
    parsed = parse_structured_output(rollout_text)
    s_fmt = format_score(parsed)
    s_cls = correctness_score(parsed, gold)
    reasoning = parsed.reasoning or ""
    if not reasoning.strip():
        scores = tuple(JudgeScore(kind=kind, score=0.0, raw_response="", clamped=False)
                       for kind in JudgeKind)
    else:
        scores = tuple(judge_provider(kind, pair, reasoning) for kind in JudgeKind)
    s_judge = (scores[0].score + scores[1].score + scores[2].score) / 3.0
    reward = aggregate_reward(s_fmt, s_cls, s_judge, weights)
    return RewardBreakdown(s_fmt=s_fmt, s_cls=s_cls, judge_scores=scores,
                           s_judge=s_judge, reward=reward)
