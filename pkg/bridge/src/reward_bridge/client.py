"""Synchronous batched client for the POST /v1/score endpoint.

The bridge is a pure relay: it validates shapes before any network call,
sends one request per training step, and returns the service's rewards (and
optionally advantages) unchanged and in order.  It never re-scores locally.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import requests


class BridgeError(RuntimeError):
    """Base error for bridge failures."""


class TransportError(BridgeError):
    """The service was unreachable after retries."""


class CapacityError(BridgeError):
    """The service kept answering 503 (over capacity) through every retry."""


class ServiceError(BridgeError):
    """The service rejected the request (4xx) or its judge backend failed (502)."""

    def __init__(self, status_code: int, message: str):
        super().__init__(f"service returned {status_code}: {message}")
        self.status_code = status_code


@dataclass(frozen=True)
class BridgeConfig:
    service_url: str
    timeout: float = 30.0
    retry_count: int = 3
    default_weights: tuple[float, float, float] | None = None

    def __post_init__(self):
        if not self.service_url:
            raise ValueError("service_url must be non-empty")
        if self.retry_count < 0:
            raise ValueError(f"retry_count must be >= 0, got {self.retry_count}")

    @classmethod
    def from_env(cls) -> "BridgeConfig":
        weights_raw = os.environ.get("REWARD_BRIDGE_WEIGHTS")
        weights = None
        if weights_raw:
            parts = [float(p) for p in weights_raw.split(",")]
            if len(parts) != 3:
                raise ValueError("REWARD_BRIDGE_WEIGHTS must be three comma-separated numbers")
            weights = tuple(parts)
        return cls(
            service_url=os.environ.get("REWARD_BRIDGE_URL", ""),
            timeout=float(os.environ.get("REWARD_BRIDGE_TIMEOUT", "30")),
            retry_count=int(os.environ.get("REWARD_BRIDGE_RETRIES", "3")),
            default_weights=weights,
        )


def _validate(pairs, rollouts) -> None:
    if len(pairs) != len(rollouts):
        raise ValueError(
            f"got {len(pairs)} pairs but {len(rollouts)} rollout lists")
    for i, (pair, texts) in enumerate(zip(pairs, rollouts)):
        if len(pair) != 3:
            raise ValueError(f"pair {i} must be (base_title, compared_title, gold)")
        if pair[2] not in (0, 1):
            raise ValueError(f"pair {i}: gold label must be 0 or 1, got {pair[2]!r}")
        if not texts:
            raise ValueError(f"pair {i}: rollout list must be non-empty")


class RewardBridge:
    def __init__(self, config: BridgeConfig, session: requests.Session | None = None):
        self.config = config
        self.session = session or requests.Session()

    def _post(self, body: dict) -> dict:
        url = self.config.service_url.rstrip("/") + "/v1/score"
        last_transport: Exception | None = None
        saw_capacity = False
        for attempt in range(self.config.retry_count + 1):
            try:
                resp = self.session.post(url, json=body, timeout=self.config.timeout)
            except requests.RequestException as exc:
                last_transport = exc
            else:
                if resp.status_code == 200:
                    return resp.json()
                if resp.status_code == 503:
                    saw_capacity = True
                else:
                    raise ServiceError(resp.status_code, resp.text)
            if attempt < self.config.retry_count:
                time.sleep(0.1 * (2 ** attempt))
        if saw_capacity:
            raise CapacityError(
                f"service over capacity after {self.config.retry_count + 1} attempts")
        raise TransportError(
            f"service unreachable after {self.config.retry_count + 1} attempts: "
            f"{last_transport}")

    def reward_fn(self, pairs, rollouts, weights=None, return_advantages: bool = False):
        """Score per-pair rollout lists; returns per-pair reward lists.

        ``pairs`` is a list of (base_title, compared_title, gold); ``rollouts``
        the matching per-pair lists of rollout texts.  With
        ``return_advantages`` the service's group-relative advantages are
        returned as a second value for trainers that do not compute their own
        baseline.
        """
        pairs = list(pairs)
        rollouts = [list(r) for r in rollouts]
        _validate(pairs, rollouts)

        body = {
            "items": [
                {"pair": {"base_title": base, "compared_title": compared},
                 "gold": gold, "rollouts": texts}
                for (base, compared, gold), texts in zip(pairs, rollouts)
            ]
        }
        weights = weights if weights is not None else self.config.default_weights
        if weights is not None:
            fmt, cls, judge = weights
            body["weights"] = {"format": fmt, "correctness": cls, "judge": judge}

        data = self._post(body)
        items = data.get("items")
        if not isinstance(items, list) or len(items) != len(pairs):
            raise BridgeError(
                f"service returned {len(items) if isinstance(items, list) else 'no'} "
                f"items for {len(pairs)} pairs")
        rewards = []
        advantages = []
        for i, (item, texts) in enumerate(zip(items, rollouts)):
            if len(item["rewards"]) != len(texts):
                raise BridgeError(
                    f"item {i}: expected {len(texts)} rewards, got {len(item['rewards'])}")
            rewards.append(item["rewards"])
            advantages.append(item["advantages"])
        if return_advantages:
            return rewards, advantages
        return rewards


def reward_fn(pairs, rollouts, config: BridgeConfig | None = None, **kwargs):
    """Module-level convenience: build a bridge (from the environment when no
    config is given) and score one batch."""
    bridge = RewardBridge(config or BridgeConfig.from_env())
    return bridge.reward_fn(pairs, rollouts, **kwargs)
