"""Model backends: a live chat-completions client and a deterministic replay.

The replay backend plays back an authored script of assistant turns keyed by
agent name, which makes every episode — and the whole pipeline — a pure
function of its inputs. It never fabricates a turn: an exhausted script is an
infrastructure fault, not a model response.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InfraError, ReplayExhaustedError


@dataclass
class ToolCall:
    name: str
    args: dict


@dataclass
class AssistantTurn:
    content: str = ""
    tool_calls: list[ToolCall] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0


class ModelBackend:
    """Interface: one assistant turn per call, optionally with tool calls."""

    mode = "abstract"

    def complete(
        self,
        agent_name: str,
        messages: list[dict],
        tool_schemas: dict[str, dict] | None = None,
    ) -> AssistantTurn:
        raise NotImplementedError


class ReplayBackend(ModelBackend):
    """Plays back scripted assistant turns, in order, per agent name."""

    mode = "replay"

    def __init__(self, script: dict[str, list[dict]]):
        self._queues = {name: list(turns) for name, turns in script.items()}
        self._cursor = {name: 0 for name in script}

    @classmethod
    def from_file(cls, path: Path | str) -> "ReplayBackend":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise ConfigError(f"replay script must be an object keyed by agent name: {path}")
        return cls(data)

    def complete(self, agent_name, messages, tool_schemas=None) -> AssistantTurn:
        queue = self._queues.get(agent_name)
        index = self._cursor.get(agent_name, 0)
        if queue is None or index >= len(queue):
            raise ReplayExhaustedError(
                f"replay script exhausted for agent {agent_name!r} at turn {index}"
            )
        self._cursor[agent_name] = index + 1
        turn = queue[index]
        calls = [
            ToolCall(name=c["name"], args=dict(c.get("args", {})))
            for c in turn.get("tool_calls", [])
        ]
        return AssistantTurn(content=turn.get("content", ""), tool_calls=calls)


class HttpBackend(ModelBackend):
    """Chat-completions client with native function calling."""

    mode = "http"

    def __init__(
        self,
        endpoint: str,
        model: str,
        credential_env_var: str,
        temperature: float = 0.0,
        retries: int = 3,
        timeout: int = 300,
    ):
        self.endpoint = endpoint
        self.model = model
        self.credential_env_var = credential_env_var
        self.temperature = temperature
        self.retries = retries
        self.timeout = timeout

    def _headers(self) -> dict:
        key = os.environ.get(self.credential_env_var)
        if not key:
            raise ConfigError(
                f"credential environment variable {self.credential_env_var} is not set"
            )
        return {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def complete(self, agent_name, messages, tool_schemas=None) -> AssistantTurn:
        import requests

        body: dict = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        }
        if tool_schemas:
            body["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": name,
                        "description": schema["description"],
                        "parameters": schema["parameters"],
                    },
                }
                for name, schema in sorted(tool_schemas.items())
            ]

        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                resp = requests.post(
                    self.endpoint, json=body, headers=self._headers(), timeout=self.timeout
                )
                if resp.status_code >= 500:
                    raise InfraError(f"backend returned {resp.status_code}")
                resp.raise_for_status()
                return self._parse(resp.json())
            except (InfraError, requests.RequestException) as exc:
                last_error = exc
                if attempt < self.retries:
                    time.sleep(2**attempt)
        raise InfraError(f"backend unreachable after {self.retries + 1} attempts: {last_error}")

    @staticmethod
    def _parse(data: dict) -> AssistantTurn:
        message = data["choices"][0]["message"]
        calls = []
        for call in message.get("tool_calls") or []:
            fn = call.get("function", {})
            try:
                args = json.loads(fn.get("arguments") or "{}")
            except json.JSONDecodeError:
                args = {}
            calls.append(ToolCall(name=fn.get("name", ""), args=args))
        usage = data.get("usage", {})
        return AssistantTurn(
            content=message.get("content") or "",
            tool_calls=calls,
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


def single_completion(
    backend: ModelBackend, agent_name: str, system: str, user: str
) -> AssistantTurn:
    """One-shot prompt/response exchange (no tools)."""
    return backend.complete(
        agent_name,
        [{"role": "system", "content": system}, {"role": "user", "content": user}],
    )
