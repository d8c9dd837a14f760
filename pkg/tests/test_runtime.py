"""Agent episode loop, tool-matrix conformance, prompt rendering."""

from __future__ import annotations

import pytest

from migrust.backends import ReplayBackend
from migrust.errors import InfraError, TemplateError, ToolMatrixError
from migrust.runtime import (
    AGENT_TOOL_MATRIX,
    AgentSpec,
    EpisodeDeps,
    agent_spec,
    render_prompt,
    run_episode,
    save_transcript,
)
from migrust.tools import TOOLS

from conftest import write_tree


@pytest.fixture
def deps(tmp_path) -> EpisodeDeps:
    c_repo = write_tree(tmp_path / "c", {"main.c": "int main(void) { return 0; }\n"})
    rust = tmp_path / "rust"
    write_tree(rust, {"src/lib.rs": "pub fn f() {}\n"})
    docs = tmp_path / "docs"
    docs.mkdir()
    return EpisodeDeps(c_repo_root=c_repo, rust_repo_root=rust, docs_root=docs)


# -- matrix conformance --------------------------------------------------------


def test_every_agent_builds_with_its_exact_row():
    for name in AGENT_TOOL_MATRIX:
        spec = agent_spec(name)
        assert spec.tools == AGENT_TOOL_MATRIX[name]


def test_full_grid_rejects_foreign_tools():
    """6 agents x all tools: any tool outside the row fails registration."""
    all_tools = set(TOOLS)
    for name, row in AGENT_TOOL_MATRIX.items():
        for tool in sorted(all_tools - row):
            with pytest.raises(ToolMatrixError):
                AgentSpec(
                    name=name,
                    system_prompt="x",
                    tools=frozenset(row | {tool}),
                    max_turns=5,
                )
        for tool in sorted(row):
            with pytest.raises(ToolMatrixError):
                AgentSpec(
                    name=name,
                    system_prompt="x",
                    tools=frozenset(row - {tool}),
                    max_turns=5,
                )


def test_unknown_agent_name_rejected():
    with pytest.raises(ToolMatrixError):
        AgentSpec(name="Oracle", system_prompt="x", tools=frozenset(), max_turns=5)


# -- render_prompt --------------------------------------------------------------


def test_translator_template_binds_feature_name():
    spec = agent_spec("Translator")
    rendered = render_prompt(spec, {"feature_name": "yaml"})
    assert "unsafe_detect(crate='yaml')" in rendered
    assert "{feature_name}" not in rendered


def test_template_without_placeholders_verbatim():
    spec = agent_spec("Planner")
    assert render_prompt(spec, {}) == spec.system_prompt


def test_missing_binding_names_placeholder():
    spec = agent_spec("Synthesizer")
    with pytest.raises(TemplateError, match="crate_names"):
        render_prompt(spec, {})


def test_literal_braces_survive_rendering():
    spec = agent_spec("TestTranslator")
    rendered = render_prompt(spec, {})
    assert "mod tests { ... }" in rendered


# -- run_episode -----------------------------------------------------------------


def replay(script: dict) -> ReplayBackend:
    return ReplayBackend(script)


def test_episode_turn_shape(deps):
    backend = replay(
        {
            "Planner": [
                {
                    "content": "Looking at the target.",
                    "tool_calls": [
                        {
                            "name": "str_replace_editor",
                            "args": {"command": "view", "working_dir": "rust_repo", "path": "src/lib.rs"},
                        }
                    ],
                },
                {"content": "All done."},
            ]
        }
    )
    transcript = run_episode(agent_spec("Planner"), deps, "inspect the crate", backend)
    roles = [t.role for t in transcript.turns]
    assert roles == ["system", "user", "assistant", "tool", "assistant"]
    assert transcript.outcome == "final"
    assert transcript.turns[2].tool_name == "str_replace_editor"
    assert transcript.turns[3].content == "pub fn f() {}\n"
    assert transcript.final_text() == "All done."


def test_unregistered_tool_returns_unknown_and_continues(deps):
    backend = replay(
        {
            "Planner": [
                {"content": "", "tool_calls": [{"name": "cargo_check", "args": {}}]},
                {"content": "recovered"},
            ]
        }
    )
    transcript = run_episode(agent_spec("Planner"), deps, "task", backend)
    tool_turn = next(t for t in transcript.turns if t.role == "tool")
    assert tool_turn.content == "unknown tool: cargo_check"
    assert transcript.outcome == "final"
    assert transcript.final_text() == "recovered"


def test_turn_limit_outcome(deps):
    backend = replay(
        {
            "Planner": [
                {
                    "content": "",
                    "tool_calls": [
                        {
                            "name": "str_replace_editor",
                            "args": {"command": "view", "working_dir": "rust_repo", "path": "src/lib.rs"},
                        }
                    ],
                }
            ]
        }
    )
    spec = agent_spec("Planner", max_turns=1)
    transcript = run_episode(spec, deps, "task", backend)
    assert transcript.outcome == "turn_limit"


def test_tool_fault_text_returned(deps, monkeypatch):
    def explode(deps, **kwargs):
        raise RuntimeError("synthetic fault")

    monkeypatch.setitem(TOOLS, "find_code_component", explode)
    backend = replay(
        {
            "Planner": [
                {"content": "", "tool_calls": [{"name": "find_code_component", "args": {"pattern": "x"}}]},
                {"content": "done"},
            ]
        }
    )
    transcript = run_episode(agent_spec("Planner"), deps, "task", backend)
    tool_turn = next(t for t in transcript.turns if t.role == "tool")
    assert tool_turn.content == "Tool fault: RuntimeError: synthetic fault"
    assert transcript.outcome == "final"


def test_invalid_arguments_become_error_text(deps):
    backend = replay(
        {
            "Planner": [
                {"content": "", "tool_calls": [{"name": "find_code_component", "args": {"bogus": 1}}]},
                {"content": "done"},
            ]
        }
    )
    transcript = run_episode(agent_spec("Planner"), deps, "task", backend)
    tool_turn = next(t for t in transcript.turns if t.role == "tool")
    assert tool_turn.content.startswith("Error: invalid arguments for find_code_component")


def test_exhausted_script_is_infra_fault(deps):
    backend = replay({"Planner": []})
    with pytest.raises(InfraError):
        run_episode(agent_spec("Planner"), deps, "task", backend)


def test_missing_workspace_root_is_infra_fault(deps, tmp_path):
    deps.rust_repo_root = tmp_path / "missing"
    with pytest.raises(InfraError):
        run_episode(agent_spec("Planner"), deps, "task", replay({"Planner": [{"content": "x"}]}))


def test_counters_monotonic_across_episode(deps, tmp_path):
    calls = []

    def fake_check(d, **kwargs):
        from migrust.tools import ToolResult

        d.counters["cargo_check_attempts"] = d.counters.get("cargo_check_attempts", 0) + 1
        calls.append(d.counters["cargo_check_attempts"])
        return ToolResult(text=f"Still has errors. Iteration {calls[-1]}.", ok=False)

    import migrust.tools as tools_mod

    original = tools_mod.TOOLS["cargo_check"]
    tools_mod.TOOLS["cargo_check"] = fake_check
    try:
        backend = replay(
            {
                "Translator": [
                    {"content": "", "tool_calls": [{"name": "cargo_check", "args": {}}]},
                    {"content": "", "tool_calls": [{"name": "cargo_check", "args": {}}]},
                    {"content": "gave up"},
                ]
            }
        )
        transcript = run_episode(
            agent_spec("Translator"), deps, "task", backend, bindings={"feature_name": "demo"}
        )
    finally:
        tools_mod.TOOLS["cargo_check"] = original
    assert calls == [1, 2]
    iterations = [t.content for t in transcript.turns if t.role == "tool"]
    assert iterations == ["Still has errors. Iteration 1.", "Still has errors. Iteration 2."]


def test_replay_transcripts_byte_identical(deps, tmp_path):
    script = {
        "Planner": [
            {
                "content": "viewing",
                "tool_calls": [
                    {
                        "name": "str_replace_editor",
                        "args": {"command": "view", "working_dir": "rust_repo", "path": "src/lib.rs"},
                    }
                ],
            },
            {"content": "done"},
        ]
    }
    paths = []
    for n in (1, 2):
        transcript = run_episode(agent_spec("Planner"), deps, "task", ReplayBackend(script))
        path = tmp_path / f"t{n}.jsonl"
        save_transcript(transcript, path)
        paths.append(path)
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_matrix_rows_resolve_in_registry():
    for row in AGENT_TOOL_MATRIX.values():
        assert row <= set(TOOLS)
