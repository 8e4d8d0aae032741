"""Chat-completion backends: live HTTP, scripted mock, and a dataset oracle.

The wire protocol is chat-completion-style HTTP+JSON: a single user message in,
plain text out.  Mock backends are keyed by prompt hash so tests can script
exact responses; in mock mode nothing touches the network.
"""

from __future__ import annotations

import hashlib
import re
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Protocol

import requests

from .dataset import LabeledPair
from .parsing import render_structured_output
from .retrieval import tokenize


class BackendError(RuntimeError):
    """Transport or protocol failure after retries, or a missing mock script."""


class CompletionBackend(Protocol):
    def complete(self, prompt: str, *, temperature: float | None = None) -> str: ...


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


@dataclass
class ChatBackend:
    """HTTP chat backend configuration and transport.

    Decoding defaults follow the generation setup used everywhere in this
    project: temperature 0.7, top-p 0.95, at most 1024 output tokens.
    Credentials come from the environment variable named by ``api_key_env``.
    """

    endpoint: str
    model_name: str
    temperature: float = 0.7
    top_p: float = 0.95
    max_output_tokens: int = 1024
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 8
    api_key_env: str = "PRODMAP_API_KEY"
    _gate: threading.BoundedSemaphore = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 <= self.top_p <= 1.0:
            raise ValueError(f"top_p must be in [0, 1], got {self.top_p}")
        if self.temperature < 0:
            raise ValueError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_in_flight < 1:
            raise ValueError(f"max_in_flight must be >= 1, got {self.max_in_flight}")
        object.__setattr__(self, "_gate", threading.BoundedSemaphore(self.max_in_flight))

    def complete(self, prompt: str, *, temperature: float | None = None) -> str:
        payload = {
            "model": self.model_name,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.temperature if temperature is None else temperature,
            "top_p": self.top_p,
            "max_tokens": self.max_output_tokens,
        }
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        last_error: Exception | None = None
        with self._gate:
            for attempt in range(self.max_retries + 1):
                try:
                    resp = requests.post(
                        self.endpoint, json=payload, headers=headers, timeout=self.timeout)
                    resp.raise_for_status()
                    data = resp.json()
                    return data["choices"][0]["message"]["content"]
                except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                    last_error = exc
                    if attempt < self.max_retries:
                        time.sleep(0.2 * (2 ** attempt))
        raise BackendError(
            f"chat backend {self.endpoint} failed after "
            f"{self.max_retries + 1} attempts: {last_error}")


class MockBackend:
    """Offline backend scripted from a response table keyed by prompt hash.

    A scripted value may be a string (returned every time) or a list of
    strings consumed call by call, the last one repeating.  Unscripted prompts
    fall through to ``rule`` and then ``default``; with neither, completion
    raises so tests never silently improvise.
    """

    def __init__(self, responses: dict[str, str | list[str]] | None = None,
                 default: str | None = None,
                 rule: Callable[[str], str | None] | None = None):
        self.responses: dict[str, str | list[str]] = dict(responses or {})
        self.default = default
        self.rule = rule
        self.calls: list[str] = []
        self._cursor: dict[str, int] = {}

    def script(self, prompt: str, response: str | list[str]) -> None:
        self.responses[prompt_key(prompt)] = response

    def complete(self, prompt: str, *, temperature: float | None = None) -> str:
        self.calls.append(prompt)
        key = prompt_key(prompt)
        if key in self.responses:
            value = self.responses[key]
            if isinstance(value, str):
                return value
            idx = min(self._cursor.get(key, 0), len(value) - 1)
            self._cursor[key] = idx + 1
            return value[idx]
        if self.rule is not None:
            out = self.rule(prompt)
            if out is not None:
                return out
        if self.default is not None:
            return self.default
        raise BackendError("mock backend has no scripted response for this prompt")


class OracleBackend:
    """Mock backend that answers with the gold label of the pair named in the
    prompt's ``Product A:`` / ``Product B:`` lines (falling back to a substring
    scan for prompts without them).

    Prompts that expect the structured format (they mention the ``<reason>``
    tag) get a reasoning trace citing tokens shared by the two titles; all
    other prompts get the bare label character.
    """

    _PRODUCT_A = re.compile(r"Product A: (.*)")
    _PRODUCT_B = re.compile(r"Product B: (.*)")

    def __init__(self, data: list[LabeledPair]):
        self.data = list(data)
        self.calls: list[str] = []

    def _find(self, prompt: str) -> LabeledPair:
        match_a = self._PRODUCT_A.search(prompt)
        match_b = self._PRODUCT_B.search(prompt)
        if match_a and match_b:
            base, compared = match_a.group(1).strip(), match_b.group(1).strip()
            for lp in self.data:
                if lp.pair.base_title == base and lp.pair.compared_title == compared:
                    return lp
        # Substring scan covers prompt layouts without the Product A/B lines.
        for lp in self.data:
            if lp.pair.base_title in prompt and lp.pair.compared_title in prompt:
                return lp
        raise BackendError("oracle backend found no known pair in the prompt")

    def complete(self, prompt: str, *, temperature: float | None = None) -> str:
        self.calls.append(prompt)
        lp = self._find(prompt)
        if "<reason>" in prompt:
            shared = [t for t in tokenize(lp.pair.base_title)
                      if t in set(tokenize(lp.pair.compared_title))]
            reasoning = " ".join(dict.fromkeys(shared)) or lp.pair.base_title.lower()
            return render_structured_output(reasoning, lp.label)
        return str(lp.label)
