"""Numerical core: group-relative advantages, policy-gradient losses, low-rank
update math, a tabular softmax policy for gradient verification, and the
hashed bag-of-words logistic baseline.

No autodiff framework is used; the handful of losses here carry hand-derived
analytic gradients that are verified against central finite differences.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .retrieval import tokenize

ADVANTAGE_EPS = 1e-8
FEATURE_DIM = 2 ** 15


@dataclass
class RolloutGroup:
    """One input with K rollouts, their rewards, and optional trainer state.

    Log-probabilities are per-rollout sums over output tokens.  Advantages are
    treated as constants with respect to differentiation.
    """

    input_id: str
    rollouts: list[str]
    rewards: list[float]
    logprobs: list[float] | None = None
    old_logprobs: list[float] | None = None
    advantages: list[float] | None = None
    breakdowns: list | None = None

    def __post_init__(self):
        k = len(self.rollouts)
        if k < 1:
            raise ValueError("a rollout group needs at least one rollout")
        for name in ("rewards", "logprobs", "old_logprobs", "advantages", "breakdowns"):
            value = getattr(self, name)
            if value is not None and len(value) != k:
                raise ValueError(f"{name} must have length {k}, got {len(value)}")

    @property
    def k(self) -> int:
        return len(self.rollouts)


def group_advantages(rewards, normalize_std: bool = True) -> list[float]:
    """Group-relative advantages: center on the group mean, optionally divide
    by the population standard deviation plus a small epsilon.

    Zero-variance groups (all rewards identical) yield all-zero advantages.
    """
    rewards = list(rewards)
    k = len(rewards)
    if k < 1:
        raise ValueError("cannot compute advantages for an empty group")
    if all(r == rewards[0] for r in rewards):
        return [0.0] * k
    mean = sum(rewards) / k
    devs = [r - mean for r in rewards]
    if not normalize_std:
        return devs
    std = math.sqrt(sum(d * d for d in devs) / k)
    return [d / (std + ADVANTAGE_EPS) for d in devs]


def grpo_loss(groups: list[RolloutGroup]) -> float:
    """Negative mean over groups of the advantage-weighted log-likelihood,
    averaged over the K rollouts within each group."""
    if not groups:
        raise ValueError("no rollout groups given")
    total = 0.0
    for g in groups:
        if g.advantages is None or g.logprobs is None:
            raise ValueError(f"group {g.input_id!r} is missing advantages or logprobs")
        total += sum(a * lp for a, lp in zip(g.advantages, g.logprobs)) / g.k
    return -total / len(groups)


def clipped_grpo_loss(groups: list[RolloutGroup], clip: float = 0.1) -> float:
    """Ratio-clipped variant: with rho = exp(logp - old_logp), each rollout
    contributes min(rho * A, clamp(rho, 1-clip, 1+clip) * A)."""
    if not groups:
        raise ValueError("no rollout groups given")
    if clip < 0:
        raise ValueError(f"clip must be >= 0, got {clip}")
    lo, hi = 1.0 - clip, 1.0 + clip
    total = 0.0
    for g in groups:
        if g.advantages is None or g.logprobs is None:
            raise ValueError(f"group {g.input_id!r} is missing advantages or logprobs")
        if g.old_logprobs is None:
            raise ValueError(f"group {g.input_id!r} is missing old_logprobs")
        inner = 0.0
        for a, lp, old in zip(g.advantages, g.logprobs, g.old_logprobs):
            rho = math.exp(lp - old)
            clamped = min(hi, max(lo, rho))
            inner += min(rho * a, clamped * a)
        total += inner / g.k
    return -total / len(groups)


def nll_loss(token_logprobs) -> float:
    """Negative sum of token log-probabilities over all examples and positions."""
    sequences = [list(seq) for seq in token_logprobs]
    if not any(sequences):
        raise ValueError("need at least one token log-probability")
    return -sum(lp for seq in sequences for lp in seq)


# --- low-rank update math ------------------------------------------------------

@dataclass(frozen=True)
class LoraFactors:
    """Low-rank factors for an additive update (alpha / rank) * B @ A."""

    A: np.ndarray  # (rank, k)
    B: np.ndarray  # (d, rank)
    alpha: float
    rank: int

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError(f"rank must be >= 1, got {self.rank}")
        if self.A.ndim != 2 or self.B.ndim != 2:
            raise ValueError("A and B must be 2-D matrices")
        if self.A.shape[0] != self.rank or self.B.shape[1] != self.rank:
            raise ValueError(
                f"factor shapes {self.B.shape} x {self.A.shape} do not match rank {self.rank}")


def lora_apply(W: np.ndarray, factors: LoraFactors) -> np.ndarray:
    """Dense adapted projection: W + (alpha / rank) * B @ A."""
    W = np.asarray(W, dtype=float)
    d, k = W.shape
    if factors.B.shape[0] != d or factors.A.shape[1] != k:
        raise ValueError(
            f"factors for a {factors.B.shape[0]}x{factors.A.shape[1]} target "
            f"cannot be applied to a {d}x{k} matrix")
    return W + (factors.alpha / factors.rank) * (factors.B @ factors.A)


# --- tabular softmax policy ----------------------------------------------------

class ToyPolicy:
    """Softmax policy over a finite output vocabulary given a finite context set.

    Parameters are a flat vector of logits, one row per context.  Both the
    log-probability and its exact gradient are available in closed form, which
    makes the policy-gradient losses checkable against finite differences.
    """

    def __init__(self, n_contexts: int, n_outputs: int, params=None):
        if n_contexts < 1 or n_outputs < 2:
            raise ValueError("need at least one context and two outputs")
        self.n_contexts = n_contexts
        self.n_outputs = n_outputs
        if params is None:
            self.params = np.zeros(n_contexts * n_outputs)
        else:
            self.params = np.asarray(params, dtype=float).reshape(n_contexts * n_outputs).copy()

    def logits(self, context: int) -> np.ndarray:
        return self.params.reshape(self.n_contexts, self.n_outputs)[context]

    def distribution(self, context: int) -> np.ndarray:
        z = self.logits(context)
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum()

    def logprob(self, context: int, output: int) -> float:
        z = self.logits(context)
        m = z.max()
        return float(z[output] - (m + math.log(np.exp(z - m).sum())))

    def logprob_grad(self, context: int, output: int) -> np.ndarray:
        """d log pi(output | context) / d params, flat."""
        grad = np.zeros_like(self.params)
        probs = self.distribution(context)
        row = context * self.n_outputs
        grad[row:row + self.n_outputs] = -probs
        grad[row + output] += 1.0
        return grad

    def sample(self, context: int, rng) -> int:
        return int(rng.choice(self.n_outputs, p=self.distribution(context)))


@dataclass(frozen=True)
class ToyRolloutPlan:
    """A frozen rollout group for the toy policy: sampled outputs plus the
    advantages (constants) and optional behavior-policy log-probs."""

    context: int
    outputs: tuple[int, ...]
    advantages: tuple[float, ...]
    old_logprobs: tuple[float, ...] | None = None


def toy_grpo_loss_and_grad(params, shape: tuple[int, int], plans,
                           clip: float | None = None):
    """GRPO loss over a ToyPolicy and its analytic parameter gradient.

    With ``clip`` set, the ratio-clipped form is used; a rollout's gradient is
    zero wherever the clipped branch is active (positive advantages above the
    band, negative advantages below it).
    """
    n_contexts, n_outputs = shape
    policy = ToyPolicy(n_contexts, n_outputs, params)
    loss = 0.0
    grad = np.zeros_like(policy.params)
    for plan in plans:
        k = len(plan.outputs)
        inner = 0.0
        ginner = np.zeros_like(grad)
        for idx, (v, a) in enumerate(zip(plan.outputs, plan.advantages)):
            lp = policy.logprob(plan.context, v)
            glp = policy.logprob_grad(plan.context, v)
            if clip is None:
                inner += a * lp
                ginner += a * glp
            else:
                old = plan.old_logprobs[idx]
                rho = math.exp(lp - old)
                lo, hi = 1.0 - clip, 1.0 + clip
                clamped = min(hi, max(lo, rho))
                inner += min(rho * a, clamped * a)
                active = (a >= 0 and rho <= hi) or (a < 0 and rho >= lo)
                if active:
                    ginner += a * rho * glp
        loss += inner / k
        grad += ginner / k
    n = len(plans)
    return -loss / n, -grad / n


def toy_nll_loss_and_grad(params, shape: tuple[int, int], sequences):
    """Autoregressive NLL over (context, output) token sequences and its gradient."""
    n_contexts, n_outputs = shape
    policy = ToyPolicy(n_contexts, n_outputs, params)
    loss = 0.0
    grad = np.zeros_like(policy.params)
    for seq in sequences:
        for c, v in seq:
            loss -= policy.logprob(c, v)
            grad -= policy.logprob_grad(c, v)
    return loss, grad


# --- logistic baseline ----------------------------------------------------------

@dataclass
class LogisticHead:
    """Linear classifier head: match probability sigmoid(w . h + b)."""

    w: np.ndarray
    b: float

    def decision_values(self, features) -> np.ndarray:
        X = np.asarray(features, dtype=float)
        return X @ self.w + self.b

    def predict_proba(self, features) -> np.ndarray:
        return _sigmoid(self.decision_values(features))

    def predict(self, features) -> np.ndarray:
        return (self.predict_proba(features) >= 0.5).astype(int)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_and_grad(params, features, labels):
    """Mean binary cross-entropy of a flat (w, b) vector and its gradient.

    Computed via the softplus identity log(1 + e^z) - y*z for stability.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    params = np.asarray(params, dtype=float)
    w, b = params[:-1], params[-1]
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z))
    d = (_sigmoid(z) - y) / len(y)
    grad = np.concatenate([X.T @ d, [d.sum()]])
    return loss, grad


def bce_mean_loss(head: LogisticHead, features, labels) -> float:
    params = np.concatenate([head.w, [head.b]])
    loss, _ = logistic_loss_and_grad(params, features, labels)
    return loss


def train_logistic_head(features, labels, epochs: int, learning_rate: float,
                        init: LogisticHead | None = None) -> LogisticHead:
    """Full-batch gradient descent on the mean binary cross-entropy.

    Starts from a zero-initialized head (initial prediction 0.5 everywhere)
    unless ``init`` is given; the decision threshold is 0.5.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("features must be a non-empty 2-D array")
    if len(X) != len(y):
        raise ValueError(f"got {len(X)} feature rows but {len(y)} labels")
    if not np.all(np.isin(y, (0.0, 1.0))):
        raise ValueError("labels must be 0 or 1")
    if epochs < 0:
        raise ValueError(f"epochs must be >= 0, got {epochs}")

    if init is None:
        params = np.zeros(X.shape[1] + 1)
    else:
        params = np.concatenate([init.w, [init.b]]).astype(float)
    for _ in range(epochs):
        _, grad = logistic_loss_and_grad(params, X, y)
        params = params - learning_rate * grad
    return LogisticHead(w=params[:-1].copy(), b=float(params[-1]))


def _accumulate_hashed(vec: np.ndarray, tokens) -> None:
    dim = vec.shape[0]
    for token in tokens:
        h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")
        sign = 1.0 if (h >> 62) & 1 else -1.0
        vec[h % dim] += sign


def hash_features(text: str, dim: int = FEATURE_DIM) -> np.ndarray:
    """Signed hashed bag-of-words vector; deterministic across processes."""
    vec = np.zeros(dim)
    _accumulate_hashed(vec, tokenize(text))
    return vec


def pair_features(pair, dim: int = FEATURE_DIM) -> np.ndarray:
    """Cross-encoded analogue of a pooled pair embedding: side-tagged hashed tokens."""
    vec = np.zeros(dim)
    _accumulate_hashed(vec, (f"a:{t}" for t in tokenize(pair.base_title)))
    _accumulate_hashed(vec, (f"b:{t}" for t in tokenize(pair.compared_title)))
    return vec


# --- gradient verification -------------------------------------------------------

def finite_diff_check(loss_and_grad, params, h: float = 1e-5) -> float:
    """Max relative error between central finite differences and the analytic
    gradient, with per-coordinate denominator max(|analytic|, 1e-8).

    ``loss_and_grad`` maps a flat parameter vector to (loss, gradient).
    """
    params = np.asarray(params, dtype=float)
    loss0, grad = loss_and_grad(params)
    grad = np.asarray(grad, dtype=float)
    if not math.isfinite(loss0) or not np.all(np.isfinite(grad)):
        raise ValueError("loss or gradient is not finite at the given parameters")
    worst = 0.0
    for i in range(params.size):
        up = params.copy()
        up[i] += h
        down = params.copy()
        down[i] -= h
        f_up, _ = loss_and_grad(up)
        f_down, _ = loss_and_grad(down)
        if not (math.isfinite(f_up) and math.isfinite(f_down)):
            raise ValueError("loss is not finite near the given parameters")
        numeric = (f_up - f_down) / (2.0 * h)
        err = abs(numeric - grad[i]) / max(abs(grad[i]), 1e-8)
        worst = max(worst, err)
    return worst


def gradcheck_suite(h: float = 1e-5, seed: int = 0) -> dict[str, float]:
    """Run the full finite-difference suite; returns max relative error per loss."""
    rng = np.random.default_rng(seed)
    n_contexts = n_outputs = 4
    k = 4
    shape = (n_contexts, n_outputs)
    params0 = rng.normal(0.0, 0.5, n_contexts * n_outputs)

    # Distinct outputs and well-separated rewards per group: with duplicate
    # outputs the zero-sum advantages can cancel and leave a near-zero
    # gradient coordinate, where the 1e-8 denominator floor amplifies
    # finite-difference noise into a spurious failure.
    plans = []
    for c in range(n_contexts):
        outputs = tuple(int(v) for v in rng.permutation(n_outputs)[:k])
        rewards = [0.1, 0.4, 0.7, 1.0][:k]
        rng.shuffle(rewards)
        plans.append(ToyRolloutPlan(
            context=c, outputs=outputs, advantages=tuple(group_advantages(rewards))))

    errors = {}
    errors["grpo"] = finite_diff_check(
        lambda p: toy_grpo_loss_and_grad(p, shape, plans), params0, h=h)

    # For the clipped form, pin old log-probs near the current ones so the
    # ratios sit strictly inside the clip band.
    base_policy = ToyPolicy(n_contexts, n_outputs, params0)
    clipped_plans = []
    for plan in plans:
        old = tuple(
            base_policy.logprob(plan.context, v) + float(rng.uniform(-0.02, 0.02))
            for v in plan.outputs)
        clipped_plans.append(ToyRolloutPlan(
            context=plan.context, outputs=plan.outputs,
            advantages=plan.advantages, old_logprobs=old))
    errors["clipped_grpo"] = finite_diff_check(
        lambda p: toy_grpo_loss_and_grad(p, shape, clipped_plans, clip=0.1), params0, h=h)

    sequences = []
    for _ in range(3):
        length = int(rng.integers(2, 5))
        sequences.append([
            (int(rng.integers(0, n_contexts)), int(rng.integers(0, n_outputs)))
            for _ in range(length)])
    errors["nll"] = finite_diff_check(
        lambda p: toy_nll_loss_and_grad(p, shape, sequences), params0, h=h)

    X = rng.normal(size=(10, 3))
    y = rng.integers(0, 2, 10).astype(float)
    head0 = rng.normal(0.0, 0.5, 4)
    errors["logistic_bce"] = finite_diff_check(
        lambda p: logistic_loss_and_grad(p, X, y), head0, h=h)
    return errors


# --- named hyperparameter presets (recorded, not enforced) ------------------------

@dataclass(frozen=True)
class TrainingPreset:
    learning_rate: float
    batch_size: int
    lora_rank: int
    lora_alpha: float
    epochs: int
    rollouts_per_input: int | None = None
    clip: float | None = None
    adapter_dropout: float | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


PEFT_PRESET = TrainingPreset(
    learning_rate=1e-5, batch_size=4, lora_rank=32, lora_alpha=64.0, epochs=5)

RL_PRESET = TrainingPreset(
    learning_rate=5e-5, batch_size=4, lora_rank=32, lora_alpha=64.0, epochs=1,
    rollouts_per_input=4, clip=0.1, adapter_dropout=0.05)
