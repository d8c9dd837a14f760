"""Agent episodes: prompt rendering, bounded tool-call loops, transcripts.

An episode is one agent working one task: system prompt, task message, then
alternating assistant turns and tool results until the agent replies without
a tool call or the turn budget runs out. Tool problems flow back to the agent
as result text so it can self-repair; only infrastructure faults abort.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ModelBackend
from .errors import InfraError, TemplateError, ToolMatrixError
from .index import Component
from .prompts import PLACEHOLDER_NAMES, TEMPLATES
from .tools import TOOL_SCHEMAS, TOOLS

AGENT_TOOL_MATRIX: dict[str, frozenset[str]] = {
    "Planner": frozenset(
        {
            "find_code_component",
            "read_documentation",
            "str_replace_editor",
            "read_code_components",
            "read_dependencies",
        }
    ),
    "Translator": frozenset(
        {
            "cargo_check",
            "find_code_component",
            "read_documentation",
            "str_replace_editor",
            "unsafe_detect",
            "read_code_components",
            "cargo_fix",
        }
    ),
    "Synthesizer": frozenset(
        {"cargo_check", "find_code_component", "str_replace_editor", "cargo_fix"}
    ),
    "TestTranslator": frozenset(
        {
            "cargo_test_no_run",
            "copy_test",
            "find_code_component",
            "str_replace_editor",
            "cargo_nextest_list",
            "get_crate_name",
        }
    ),
    "RequirementRefiner": frozenset(
        {
            "cargo_check",
            "find_code_component",
            "read_documentation",
            "str_replace_editor",
            "unsafe_detect",
            "cargo_fix",
        }
    ),
    "ExecutionRevisor": frozenset(
        {
            "cargo_check",
            "cargo_single_test",
            "cargo_test_no_run",
            "find_code_component",
            "str_replace_editor",
        }
    ),
}

DEFAULT_MAX_TURNS = {
    "Planner": 40,
    "Translator": 120,
    "Synthesizer": 40,
    "TestTranslator": 120,
    "RequirementRefiner": 80,
    "ExecutionRevisor": 40,
}


@dataclass
class AgentSpec:
    """One agent's identity: prompt template, tool set, turn budget."""

    name: str
    system_prompt: str
    tools: frozenset[str]
    max_turns: int

    def __post_init__(self):
        row = AGENT_TOOL_MATRIX.get(self.name)
        if row is None:
            raise ToolMatrixError(f"unknown agent name: {self.name}")
        if frozenset(self.tools) != row:
            extra = sorted(frozenset(self.tools) - row)
            missing = sorted(row - frozenset(self.tools))
            raise ToolMatrixError(
                f"tool set for {self.name} must match its registration row "
                f"(extra: {extra}, missing: {missing})"
            )
        if self.max_turns < 1:
            raise ToolMatrixError(f"max_turns must be positive for {self.name}")


def agent_spec(name: str, max_turns: int | None = None) -> AgentSpec:
    """Standard spec for a named agent, with the matrix row and template."""
    return AgentSpec(
        name=name,
        system_prompt=TEMPLATES[name],
        tools=AGENT_TOOL_MATRIX[name],
        max_turns=max_turns or DEFAULT_MAX_TURNS[name],
    )


@dataclass
class EpisodeDeps:
    """Shared state a tool set operates on during one episode."""

    c_repo_root: Path
    rust_repo_root: Path
    docs_root: Path
    components: dict[str, Component] = field(default_factory=dict)
    graph_path: Path | None = None
    workspace_root: Path | None = None
    counters: dict[str, int] = field(default_factory=dict)
    current_test_name: str | None = None
    source_code: str | None = None
    search_engine: str = "auto"


@dataclass
class Turn:
    role: str  # system | user | assistant | tool
    content: str
    tool_name: str | None = None
    tool_args: dict | None = None


@dataclass
class Transcript:
    agent_name: str
    turns: list[Turn] = field(default_factory=list)
    prompt_tokens: int = 0
    completion_tokens: int = 0
    wall_time: float = 0.0
    outcome: str = "final"  # final | turn_limit

    def final_text(self) -> str:
        for turn in reversed(self.turns):
            if turn.role == "assistant":
                return turn.content
        return ""


_PLACEHOLDER = re.compile(r"\{(" + "|".join(PLACEHOLDER_NAMES) + r")\}")


def render_prompt(spec: AgentSpec, bindings: dict[str, str]) -> str:
    """Substitute the known placeholders; any unbound one is an error."""

    def _sub(m: re.Match) -> str:
        name = m.group(1)
        if name not in bindings:
            raise TemplateError(f"missing binding for placeholder {{{name}}}")
        return str(bindings[name])

    return _PLACEHOLDER.sub(_sub, spec.system_prompt)


def _dispatch(name: str, args: dict, spec: AgentSpec, deps: EpisodeDeps) -> str:
    if name not in spec.tools or name not in TOOLS:
        return f"unknown tool: {name}"
    try:
        return TOOLS[name](deps, **args).text
    except InfraError:
        raise
    except TypeError as exc:
        return f"Error: invalid arguments for {name}: {exc}"
    except Exception as exc:  # agent-repairable fault, never a crash
        return f"Tool fault: {type(exc).__name__}: {exc}"


def run_episode(
    spec: AgentSpec,
    deps: EpisodeDeps,
    task: str,
    backend: ModelBackend,
    bindings: dict[str, str] | None = None,
) -> Transcript:
    """Run one bounded episode and return its full transcript."""
    for root, label in ((deps.c_repo_root, "c_repo_root"), (deps.rust_repo_root, "rust_repo_root")):
        if not Path(root).is_dir():
            raise InfraError(f"episode {label} does not exist: {root}")

    system = render_prompt(spec, bindings or {})
    transcript = Transcript(agent_name=spec.name)
    transcript.turns.append(Turn(role="system", content=system))
    transcript.turns.append(Turn(role="user", content=task))
    messages: list[dict] = [
        {"role": "system", "content": system},
        {"role": "user", "content": task},
    ]
    schemas = {name: TOOL_SCHEMAS[name] for name in spec.tools}

    started = time.monotonic()
    call_counter = 0
    for _ in range(spec.max_turns):
        reply = backend.complete(spec.name, messages, schemas)
        transcript.prompt_tokens += reply.prompt_tokens
        transcript.completion_tokens += reply.completion_tokens

        if not reply.tool_calls:
            transcript.turns.append(Turn(role="assistant", content=reply.content))
            messages.append({"role": "assistant", "content": reply.content})
            transcript.outcome = "final"
            break

        call_ids = []
        assistant_msg: dict = {"role": "assistant", "content": reply.content, "tool_calls": []}
        for i, call in enumerate(reply.tool_calls):
            call_counter += 1
            call_id = f"call_{call_counter}"
            call_ids.append(call_id)
            transcript.turns.append(
                Turn(
                    role="assistant",
                    content=reply.content if i == 0 else "",
                    tool_name=call.name,
                    tool_args=call.args,
                )
            )
            assistant_msg["tool_calls"].append(
                {
                    "id": call_id,
                    "type": "function",
                    "function": {"name": call.name, "arguments": json.dumps(call.args)},
                }
            )
        messages.append(assistant_msg)

        for call, call_id in zip(reply.tool_calls, call_ids):
            result_text = _dispatch(call.name, call.args, spec, deps)
            transcript.turns.append(
                Turn(role="tool", content=result_text, tool_name=call.name)
            )
            messages.append(
                {
                    "role": "tool",
                    "tool_call_id": call_id,
                    "name": call.name,
                    "content": result_text,
                }
            )
    else:
        transcript.outcome = "turn_limit"

    transcript.wall_time = time.monotonic() - started
    return transcript


def save_transcript(transcript: Transcript, path: Path | str) -> None:
    """Persist turns as JSON Lines, one turn per line, stable key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for turn in transcript.turns:
            row: dict = {"role": turn.role, "content": turn.content}
            if turn.tool_name is not None:
                row["tool_name"] = turn.tool_name
            if turn.tool_args is not None:
                row["tool_args"] = turn.tool_args
            fh.write(json.dumps(row, sort_keys=True) + "\n")
