"""Chat-completion backends.

One live HTTP client speaks the common chat-completions wire protocol
(POST {endpoint}/chat/completions, bearer auth, first choice's message
content). Two deterministic stand-ins make the whole optimization loop
testable offline: a scripted backend replays canned replies in order, and a
heuristic backend reads the prompt it is given and proposes allocations by
mutating the best one seen so far. Credentials are read from the
environment at call time and are never stored or logged.
"""

from __future__ import annotations

import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import requests

__all__ = [
    "CompletionRequest",
    "BackendDescriptor",
    "BackendError",
    "AuthenticationError",
    "RetriesExhaustedError",
    "ScriptExhaustedError",
    "PromptUnparseableError",
    "LiveBackend",
    "ScriptedBackend",
    "HeuristicBackend",
    "create_backend",
    "complete",
]

DEFAULT_CREDENTIAL_ENV = "OPENAI_API_KEY"


class BackendError(Exception):
    """Base class for completion failures."""


class AuthenticationError(BackendError):
    """Credential missing or rejected; retrying cannot help."""


class RetriesExhaustedError(BackendError):
    """Transient failures persisted beyond the retry budget."""


class ScriptExhaustedError(BackendError):
    """The scripted backend ran out of canned replies."""


class PromptUnparseableError(BackendError):
    """The heuristic backend could not read the prompt structure."""


@dataclass(frozen=True)
class CompletionRequest:
    """One chat-completion call: texts plus sampling and transport knobs."""

    user_text: str
    system_text: str = ""
    model_id: str = "gpt-4o-mini"
    temperature: float = 1.0
    max_output_tokens: int | None = None
    request_timeout_s: float = 60.0

    def __post_init__(self) -> None:
        if not self.user_text:
            raise ValueError("user_text must be non-empty")
        if not self.request_timeout_s > 0:
            raise ValueError("request_timeout_s must be > 0")


@dataclass(frozen=True)
class BackendDescriptor:
    """Declarative backend selection, safe to serialize into run manifests.

    Live backends name the environment variable holding the credential; the
    secret itself never lives on this object.
    """

    kind: str  # "live" | "scripted" | "heuristic"
    endpoint: str = ""
    credential_env: str = DEFAULT_CREDENTIAL_ENV
    script_path: str = ""
    seed: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("live", "scripted", "heuristic"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if self.kind == "live" and (not self.endpoint or not self.credential_env):
            raise ValueError("live backend needs an endpoint and a credential env var name")
        if self.kind == "scripted" and not self.script_path:
            raise ValueError("scripted backend needs a script path")
        if self.kind == "heuristic" and self.seed is None:
            raise ValueError("heuristic backend needs a seed")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "endpoint": self.endpoint,
            "credential_env": self.credential_env,
            "script_path": self.script_path,
            "seed": self.seed,
        }


class LiveBackend:
    """HTTP chat-completion client with bounded retries.

    Timeouts, connection drops, HTTP 429 and 5xx are retried up to
    `max_retries` times with exponential backoff starting at 1 s. Auth
    failures are surfaced immediately. At most `max_in_flight` requests run
    concurrently.
    """

    def __init__(
        self,
        endpoint: str,
        credential_env: str = DEFAULT_CREDENTIAL_ENV,
        max_retries: int = 3,
        backoff_start_s: float = 1.0,
        max_in_flight: int = 4,
        post=None,
        sleep=None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.credential_env = credential_env
        self.max_retries = max_retries
        self.backoff_start_s = backoff_start_s
        self._post = post if post is not None else requests.post
        self._sleep = sleep if sleep is not None else time.sleep
        self._gate = threading.BoundedSemaphore(max_in_flight)

    def _payload(self, req: CompletionRequest) -> dict:
        messages = []
        if req.system_text:
            messages.append({"role": "system", "content": req.system_text})
        messages.append({"role": "user", "content": req.user_text})
        payload = {
            "model": req.model_id,
            "messages": messages,
            "temperature": req.temperature,
        }
        if req.max_output_tokens is not None:
            payload["max_tokens"] = req.max_output_tokens
        return payload

    def complete(self, req: CompletionRequest) -> str:
        token = os.environ.get(self.credential_env)
        if not token:
            raise AuthenticationError(
                f"environment variable {self.credential_env} is not set"
            )
        url = f"{self.endpoint}/chat/completions"
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
        payload = self._payload(req)
        last_failure = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(self.backoff_start_s * 2 ** (attempt - 1))
            try:
                with self._gate:
                    response = self._post(
                        url, headers=headers, json=payload, timeout=req.request_timeout_s
                    )
            except (requests.Timeout, requests.ConnectionError) as exc:
                last_failure = f"transport error: {type(exc).__name__}"
                continue
            status = getattr(response, "status_code", 0)
            if status in (401, 403):
                raise AuthenticationError(f"endpoint rejected the credential (HTTP {status})")
            if status == 429 or 500 <= status < 600:
                last_failure = f"HTTP {status}"
                continue
            if status != 200:
                raise BackendError(f"unexpected HTTP {status} from completion endpoint")
            try:
                return response.json()["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendError(f"malformed completion response: {exc}") from exc
        raise RetriesExhaustedError(
            f"gave up after {self.max_retries + 1} attempts; last failure: {last_failure}"
        )


class ScriptedBackend:
    """Replays canned replies in order; one reply per call."""

    def __init__(self, responses):
        self._responses = list(responses)
        self._cursor = 0

    @classmethod
    def from_file(cls, path) -> "ScriptedBackend":
        """Load replies from a plain-text file, separated by lines that
        contain only '---'."""
        text = Path(path).read_text()
        chunks, current = [], []
        for line in text.splitlines():
            if line.strip() == "---":
                chunks.append("\n".join(current))
                current = []
            else:
                current.append(line)
        chunks.append("\n".join(current))
        return cls(chunk.strip("\n") for chunk in chunks)

    def complete(self, req: CompletionRequest) -> str:
        if self._cursor >= len(self._responses):
            raise ScriptExhaustedError(
                f"script exhausted after {len(self._responses)} replies"
            )
        reply = self._responses[self._cursor]
        self._cursor += 1
        return reply


_SERVER_ROW_RE = re.compile(r"^[ \t]*server[ \t]+(\d+):((?:[ \t]+\S+)+)[ \t]*$", re.MULTILINE)
_PROPOSE_RE = re.compile(r"Propose exactly (\d+)")
_OBSERVATION_RE = re.compile(
    r"allocation\s*:\s*\[([^\]\n]*)\]\s*->\s*([0-9.eE+\-]+)", re.IGNORECASE
)


def _prompt_sections(text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: list[str] | None = None
    for line in text.splitlines():
        if line.startswith("## "):
            current = sections.setdefault(line[3:].strip(), [])
        elif current is not None:
            current.append(line)
    return {title: "\n".join(body) for title, body in sections.items()}


class HeuristicBackend:
    """Deterministic prompt-reading stand-in for a language model.

    Reads the problem dimensions, the requested candidate count, and the
    observation history straight out of the prompt, then proposes
    allocations: with probability 0.5 a single-user mutation of the best
    observation so far, otherwise a fresh uniform draw. Crude, but enough
    exploration/exploitation to drive the loop to the optimum on small
    problems, which is exactly what offline end-to-end tests need.
    """

    def __init__(self, seed: int):
        self.seed = seed
        self._rng = np.random.default_rng(seed)

    def complete(self, req: CompletionRequest) -> str:
        sections = _prompt_sections(req.user_text)
        try:
            parameter_body = sections["Network parameters"]
            history_body = sections["Previous solutions"]
            instruction_body = sections["Instructions"]
        except KeyError as exc:
            raise PromptUnparseableError(f"prompt is missing section {exc}") from exc

        rows = _SERVER_ROW_RE.findall(parameter_body)
        if not rows:
            raise PromptUnparseableError("no latency rows found in the prompt")
        num_servers = len(rows)
        num_users = len(rows[0][1].split())

        count_match = _PROPOSE_RE.search(instruction_body)
        if not count_match:
            raise PromptUnparseableError("could not find the requested candidate count")
        count = int(count_match.group(1))

        best: list[int] | None = None
        best_value = float("inf")
        for body, value_text in _OBSERVATION_RE.findall(history_body):
            try:
                servers = [int(p.strip()) for p in body.split(",")]
                value = float(value_text)
            except ValueError:
                continue
            if len(servers) == num_users and value < best_value:
                best, best_value = servers, value

        lines = []
        for _ in range(count):
            if best is not None and self._rng.random() < 0.5:
                candidate = list(best)
                user = int(self._rng.integers(num_users))
                candidate[user] = int(self._rng.integers(1, num_servers + 1))
            else:
                candidate = [int(s) + 1 for s in self._rng.integers(0, num_servers, num_users)]
            lines.append("Allocation: [" + ", ".join(map(str, candidate)) + "]")
        return "\n".join(lines)


def create_backend(descriptor: BackendDescriptor):
    """Instantiate the stateful backend a descriptor declares."""
    if descriptor.kind == "live":
        return LiveBackend(descriptor.endpoint, credential_env=descriptor.credential_env)
    if descriptor.kind == "scripted":
        return ScriptedBackend.from_file(descriptor.script_path)
    return HeuristicBackend(seed=descriptor.seed)


def complete(backend, req: CompletionRequest) -> str:
    """Run one completion against a backend instance or a descriptor.

    Descriptors are materialized on the fly; note that scripted backends are
    stateful, so loops should create the instance once via create_backend.
    """
    if isinstance(backend, BackendDescriptor):
        backend = create_backend(backend)
    return backend.complete(req)
