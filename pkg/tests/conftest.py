"""Shared fixtures: C repositories, Rust workspaces, replay scripts."""

from __future__ import annotations

import shutil
import textwrap
from pathlib import Path

import pytest

CARGO = shutil.which("cargo") is not None

requires_cargo = pytest.mark.skipif(not CARGO, reason="cargo not on PATH")


def write_tree(root: Path, files: dict[str, str]) -> Path:
    for rel, content in files.items():
        path = root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(textwrap.dedent(content), encoding="utf-8")
    return root


@pytest.fixture
def c_repo(tmp_path: Path) -> Path:
    """Small two-subsystem C repository with a tests/ directory."""
    return write_tree(
        tmp_path / "c_repo",
        {
            "arith/add.c": """\
                #include "arith.h"

                int add(int a, int b) {
                    return a + b;
                }

                int sub(int a, int b) {
                    return a - b;
                }
                """,
            "arith/arith.h": """\
                #ifndef ARITH_H
                #define ARITH_H
                int add(int a, int b);
                int sub(int a, int b);
                #endif
                """,
            "textio/hex.c": """\
                #include <stdio.h>

                int to_hex(unsigned v, char *out, int cap) {
                    return snprintf(out, cap, "%x", v);
                }
                """,
            "tests/test_arith.c": """\
                #include "../arith/arith.h"
                #include <assert.h>

                void test_add(void) {
                    assert(add(2, 3) == 5);
                }

                void test_sub(void) {
                    assert(sub(5, 3) == 2);
                }

                int main(void) {
                    test_add();
                    test_sub();
                    return 0;
                }
                """,
        },
    )


def make_crate(root: Path, name: str, lib_src: str, tests: dict[str, str] | None = None) -> Path:
    """One buildable cargo package under `root`."""
    crate = root
    write_tree(
        crate,
        {
            "Cargo.toml": f"""\
                [package]
                name = "{name}"
                version = "0.1.0"
                edition = "2021"
                """,
            "src/lib.rs": lib_src,
        },
    )
    if tests:
        write_tree(crate, {f"tests/{rel}": src for rel, src in tests.items()})
    return crate


def make_workspace(root: Path, crates: dict[str, str], tests: dict[str, dict[str, str]] | None = None) -> Path:
    """Multi-crate workspace with a root manifest."""
    members = ", ".join(f'"{name}"' for name in crates)
    write_tree(
        root,
        {
            "Cargo.toml": f"""\
                [workspace]
                members = [{members}]
                resolver = "2"
                """,
        },
    )
    for name, lib_src in crates.items():
        make_crate(root / name, name, lib_src, (tests or {}).get(name))
    return root


# ---------------------------------------------------------------------------
# Replay script for the full two-crate pipeline fixture

ARITH_CARGO = """\
[package]
name = "arith"
version = "0.1.0"
edition = "2021"
"""

ARITH_LIB_BUGGY = """\
pub fn add(a: i32, b: i32) -> i32 { a + b }

pub fn sub(a: i32, b: i32) -> i32 { a + b }
"""

TEXTIO_CARGO = """\
[package]
name = "textio"
version = "0.1.0"
edition = "2021"
"""

TEXTIO_LIB = """\
pub fn to_hex(v: u32) -> String { format!("{v:x}") }
"""

ROOT_MANIFEST = """\
[workspace]
members = ["arith", "textio"]
resolver = "2"

[workspace.package]
edition = "2021"
"""

TESTS_MD = """\
# Test map

| C test | Rust target | inputs | expected |
| ------ | ----------- | ------ | -------- |
| test_add | arith::add(i32, i32) -> i32 | 2, 3 | 5 |
| test_sub | arith::sub(i32, i32) -> i32 | 5, 3 | 2 |
"""

BASIC_TESTS_RS = """\
use arith::{add, sub};

#[test]
fn test_add() {
    assert_eq!(add(2, 3), 5);
}

#[test]
fn test_sub() {
    assert_eq!(sub(5, 3), 2);
}
"""


def _say(content: str) -> dict:
    return {"content": content}


def _call(content: str, *calls: tuple[str, dict]) -> dict:
    return {
        "content": content,
        "tool_calls": [{"name": name, "args": args} for name, args in calls],
    }


def _editor_create(path: str, file_text: str, working_dir: str = "rust_repo") -> tuple[str, dict]:
    return (
        "str_replace_editor",
        {"command": "create", "working_dir": working_dir, "path": path, "file_text": file_text},
    )


def _doc(title: str, body: str) -> str:
    return f"# {title}\n\n{body}\n"


def _judge(verdict: str) -> dict:
    return _say(
        '```json\n{"verdict": "%s", "rationale": "scripted", "evidence": "scripted"}\n```' % verdict
    )


FEATURE_JSON = """\
```json
[
  {"feature_name": "arith", "clusters": ["arith"], "summary": "integer arithmetic"},
  {"feature_name": "textio", "clusters": ["textio", "tests"], "summary": "text formatting helpers"}
]
```"""

RUBRIC_JSON = """\
```json
[
  {"component": "arith", "requirements": [
    {"requirement": "addition over machine integers", "weight": 5},
    {"requirement": "subtraction over machine integers", "weight": 5},
    {"requirement": "wrapping-free behavior documented", "weight": 4}
  ]},
  {"component": "textio", "requirements": [
    {"requirement": "hexadecimal rendering of unsigned values", "weight": 3},
    {"requirement": "caller-provided buffer semantics preserved", "weight": 2},
    {"requirement": "formatting errors surfaced to callers", "weight": 1}
  ]}
]
```"""

# Verdicts per iteration, in rubric tree order (weights 5,5,4,3,2,1):
#   iter 0: 10/20 = 0.5     iter 1: 18/20 = 0.9     iter 2: 17/20 = 0.85
JUDGE_VERDICTS = [
    ["pass", "pass", "fail", "fail", "fail", "fail"],
    ["pass", "pass", "pass", "pass", "fail", "pass"],
    ["pass", "pass", "pass", "pass", "fail", "fail"],
]


def build_pipeline_script() -> dict[str, list[dict]]:
    """Replay script driving the full five-stage run on the c_repo fixture.

    Stage 4 produces scores [0.5, 0.9, 0.85] (K=2), selecting version 1.
    Stage 5 translates two tests, one failing until the revisor repairs the
    subtraction bug, so the suite runs exactly twice (L=2).
    """
    docgen: list[dict] = []
    # Stage 1: clusters sorted (arith, tests, textio) then overview.
    for cid in ("arith", "tests", "textio"):
        docgen.append(_say(_doc(f"{cid} subsystem", f"Source-side notes for {cid}.")))
    docgen.append(_say(_doc("architecture overview", "Two subsystems plus a C test harness.")))
    # Stage 4: three scoring iterations x (2 rust clusters + overview).
    for i in range(3):
        for cid in ("arith", "textio"):
            docgen.append(_say(_doc(f"{cid} crate", f"Target-side notes for {cid}, round {i}.")))
        docgen.append(_say(_doc("workspace overview", f"Workspace overview, round {i}.")))

    planner = []
    translator = []
    for name, cargo_toml, lib in (
        ("arith", ARITH_CARGO, ARITH_LIB_BUGGY),
        ("textio", TEXTIO_CARGO, TEXTIO_LIB),
    ):
        planner.append(
            _call(
                f"Writing the {name} plan.",
                _editor_create(
                    "./IMPLEMENTATION_PLAN.md",
                    _doc(f"{name} implementation plan", f"Single crate `{name}` with src/lib.rs."),
                ),
            )
        )
        planner.append(_say(f"Plan for {name} is in place."))
        translator.extend(
            [
                _call(f"Creating {name} manifest.", _editor_create("./Cargo.toml", cargo_toml)),
                _call("Creating the library.", _editor_create("./src/lib.rs", lib)),
                _call("Auditing for unsafe.", ("unsafe_detect", {"crate": name})),
                _call("Compile check.", ("cargo_check", {"scope": "crate"})),
                _say(f"Crate {name} implemented and checked."),
            ]
        )

    synthesizer = [
        _call("Creating the workspace manifest.", _editor_create("./Cargo.toml", ROOT_MANIFEST)),
        _call(
            "Workspace README.",
            _editor_create("./README.md", _doc("translated workspace", "Members: arith, textio.")),
        ),
        _call("Ignore build artifacts.", _editor_create("./.gitignore", "/target\n")),
        _call("Workspace check.", ("cargo_check", {"scope": "workspace"})),
        _say("Workspace synthesized."),
    ]

    judge = [_judge(v) for round_verdicts in JUDGE_VERDICTS for v in round_verdicts]

    refiner = [
        # Iteration 0 repairs four leaves; the first episode makes a real edit.
        _call(
            "Documenting the addition API.",
            (
                "str_replace_editor",
                {
                    "command": "str_replace",
                    "working_dir": "rust_repo",
                    "path": "arith/src/lib.rs",
                    "old_str": "pub fn add(a: i32, b: i32) -> i32 { a + b }",
                    "new_str": "/// Adds two machine integers.\npub fn add(a: i32, b: i32) -> i32 { a + b }",
                },
            ),
        ),
        _say("Requirement addressed with a documentation fix."),
        _say("Implementation already satisfies this requirement."),
        _say("Implementation already satisfies this requirement."),
        _say("Implementation already satisfies this requirement."),
        # Iteration 1 repairs one leaf.
        _say("No code change needed; the mismatch is documentary."),
    ]

    test_translator = [
        _call(
            "Mapping C tests to Rust targets.",
            _editor_create("arith/tests/tests.md", TESTS_MD),
        ),
        _call("Translating the arithmetic tests.", _editor_create("arith/tests/basic.rs", BASIC_TESTS_RS)),
        _call("Compile-checking the suite.", ("cargo_test_no_run", {})),
        _say("Test suite translated; see arith/tests/tests.md."),
    ]

    revisor = [
        _call("Locating the failing test.", ("find_code_component", {"pattern": "test_sub"})),
        _call(
            "The subtraction body adds; fixing production code.",
            (
                "str_replace_editor",
                {
                    "command": "str_replace",
                    "working_dir": "rust_repo",
                    "path": "arith/src/lib.rs",
                    "old_str": "pub fn sub(a: i32, b: i32) -> i32 { a + b }",
                    "new_str": "pub fn sub(a: i32, b: i32) -> i32 { a - b }",
                },
            ),
        ),
        _call("Recompiling tests.", ("cargo_test_no_run", {})),
        _call("Re-running the failing test.", ("cargo_single_test", {})),
        _say("test_sub passes after fixing the subtraction operator."),
    ]

    return {
        "DocGen": docgen,
        "FeatureExtractor": [_say(FEATURE_JSON)],
        "Planner": planner,
        "Translator": translator,
        "Synthesizer": synthesizer,
        "RubricBuilder": [_say(RUBRIC_JSON)],
        "DocJudge": judge,
        "RequirementRefiner": refiner,
        "TestTranslator": test_translator,
        "ExecutionRevisor": revisor,
    }


@pytest.fixture
def pipeline_script() -> dict[str, list[dict]]:
    return build_pipeline_script()
