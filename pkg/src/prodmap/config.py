"""Run configuration: service settings, judge backend wiring, eval backends.

Config files are plain JSON.  Credentials never live in config files; the
HTTP backend reads its API key from the environment variable it is told about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ChatBackend, MockBackend, OracleBackend
from .dataset import LabeledPair
from .optim import PEFT_PRESET, RL_PRESET
from .reward import RewardWeights


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


@dataclass
class ServiceConfig:
    listen_address: str = "127.0.0.1:8500"
    mock_mode: bool = True
    judge_backend: ChatBackend | None = None
    weights: RewardWeights = field(default_factory=RewardWeights)
    concurrency_cap: int = 8
    request_timeout: float = 60.0

    def __post_init__(self):
        if self.concurrency_cap < 1:
            raise ConfigError(f"concurrency_cap must be >= 1, got {self.concurrency_cap}")
        if not self.mock_mode and self.judge_backend is None:
            raise ConfigError("a judge backend is required unless mock_mode is set")

    def host_port(self) -> tuple[str, int]:
        host, _, port = self.listen_address.partition(":")
        return host or "127.0.0.1", int(port or 8500)


_BACKEND_KEYS = ("endpoint", "model_name", "temperature", "top_p",
                 "max_output_tokens", "timeout", "max_retries",
                 "max_in_flight", "api_key_env")


def _chat_backend_from_dict(raw: dict) -> ChatBackend:
    unknown = set(raw) - set(_BACKEND_KEYS)
    if unknown:
        raise ConfigError(f"unknown judge backend keys: {sorted(unknown)}")
    if "endpoint" not in raw or "model_name" not in raw:
        raise ConfigError("judge backend config needs 'endpoint' and 'model_name'")
    return ChatBackend(**raw)


def load_service_config(path: str | Path) -> ServiceConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    known = {"listen_address", "mock_mode", "judge_backend", "weights",
             "concurrency_cap", "request_timeout", "training_presets"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown service config keys: {sorted(unknown)}")
    kwargs: dict = {}
    for key in ("listen_address", "mock_mode", "concurrency_cap", "request_timeout"):
        if key in raw:
            kwargs[key] = raw[key]
    if raw.get("judge_backend"):
        kwargs["judge_backend"] = _chat_backend_from_dict(raw["judge_backend"])
    if raw.get("weights"):
        kwargs["weights"] = RewardWeights(**raw["weights"])
    return ServiceConfig(**kwargs)


def service_config_template() -> dict:
    """A fully populated config document, including the recorded training presets."""
    return {
        "listen_address": "127.0.0.1:8500",
        "mock_mode": True,
        "judge_backend": None,
        "weights": {"format": 1.0, "correctness": 2.0, "judge": 1.0},
        "concurrency_cap": 8,
        "request_timeout": 60.0,
        "training_presets": {
            "peft": PEFT_PRESET.to_dict(),
            "rl": RL_PRESET.to_dict(),
        },
    }


def load_eval_backend(path: str | Path, data: list[LabeledPair] | None = None):
    """Build the inference backend for the eval CLI from a JSON config.

    Modes: ``http`` (live chat backend), ``mock`` (scripted table plus
    optional default response), ``oracle`` (answers with the gold label of
    the pair found in the prompt; requires the dataset).
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    mode = raw.get("mode")
    if mode == "http":
        return _chat_backend_from_dict({k: v for k, v in raw.items() if k != "mode"})
    if mode == "mock":
        return MockBackend(responses=raw.get("responses"), default=raw.get("default_response"))
    if mode == "oracle":
        if data is None:
            raise ConfigError("oracle backend needs the dataset it answers about")
        return OracleBackend(data)
    raise ConfigError(f"unknown backend mode {mode!r} (expected http, mock, or oracle)")
