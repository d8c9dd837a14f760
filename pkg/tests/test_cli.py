"""CLI behavior: exit codes, config validation, evaluate/ledger output."""

from __future__ import annotations

import json
from pathlib import Path

from migrust.cli import main
from migrust.metrics import RubricLeaf, RubricNode, RubricTree, save_rubric
from migrust.pipeline import LedgerEntry, StageLedger, RunPaths

from conftest import build_pipeline_script, requires_cargo, write_tree


def write_config(tmp_path: Path, script: dict, name: str = "config.json", **overrides) -> Path:
    script_path = tmp_path / f"{name}.script.json"
    script_path.write_text(json.dumps(script), encoding="utf-8")
    cfg = {
        "source_root": str(tmp_path / "c_repo"),
        "output_root": str(tmp_path / "out"),
        "run_id": "t",
        "backend": {"mode": "replay", "script_path": str(script_path)},
        "K": 2,
        "L": 2,
    }
    cfg.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(cfg), encoding="utf-8")
    return path


def seed_c_repo(tmp_path: Path) -> Path:
    return write_tree(
        tmp_path / "c_repo",
        {
            "arith/add.c": "int add(int a, int b) {\n    return a + b;\n}\n",
            "tests/test_add.c": "int main(void) {\n    return 0;\n}\n",
        },
    )


def test_unknown_config_key_exits_2(tmp_path, capsys):
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, {}, mystery_knob=1)
    assert main(["run", "--config", str(cfg_path)]) == 2
    assert "mystery_knob" in capsys.readouterr().err


def test_unknown_backend_mode_exits_2(tmp_path, capsys):
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, {}, backend={"mode": "psychic"})
    assert main(["run", "--config", str(cfg_path)]) == 2


def test_bad_bounds_exit_2(tmp_path):
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, {}, L=0)
    assert main(["run", "--config", str(cfg_path)]) == 2


@requires_cargo
def test_run_through_synthesis_exits_0(tmp_path, c_repo, capsys):
    script = build_pipeline_script()
    cfg_path = write_config(
        tmp_path,
        script,
        source_root=str(c_repo),
        stages={"refine": False, "testgen": False, "revise": False},
    )
    assert main(["run", "--config", str(cfg_path)]) == 0
    report_path = tmp_path / "out" / "runs" / "t" / "report.json"
    assert report_path.exists()
    report = json.loads(report_path.read_text())
    assert report["metrics"]["compilable"] is True
    assert report["stages"]["refine"] == "disabled"
    # metric block entries appear only for stages that completed
    assert "fcv" not in report["metrics"]
    assert "tpr" not in report["metrics"]
    out = capsys.readouterr().out
    assert "report.json" in out


@requires_cargo
def test_run_stage3_failure_exits_1(tmp_path, c_repo):
    script = build_pipeline_script()
    script["Synthesizer"] = [
        {
            "content": "bad manifest",
            "tool_calls": [
                {
                    "name": "str_replace_editor",
                    "args": {
                        "command": "create",
                        "working_dir": "rust_repo",
                        "path": "./Cargo.toml",
                        "file_text": '[workspace]\nmembers = ["ghost"]\n',
                    },
                }
            ],
        },
        {"content": "done"},
    ]
    cfg_path = write_config(tmp_path, script, source_root=str(c_repo))
    assert main(["run", "--config", str(cfg_path)]) == 1
    report = json.loads((tmp_path / "out" / "runs" / "t" / "report.json").read_text())
    assert report["stages"]["synthesize"] == "failed"
    assert report["stages"]["revise"] == "skipped"


def test_stage_with_missing_prerequisite_exits_1(tmp_path, capsys):
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, {})
    assert main(["stage", "refine", "--config", str(cfg_path)]) == 1
    assert "prerequisite" in capsys.readouterr().err


def test_locked_run_dir_exits_2(tmp_path, capsys):
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, {})
    lock = tmp_path / "out" / "runs" / "t" / ".lock"
    lock.parent.mkdir(parents=True)
    lock.write_text("12345")
    assert main(["run", "--config", str(cfg_path)]) == 2
    assert "locked" in capsys.readouterr().err


def test_evaluate_saferate_all_unsafe(tmp_path, capsys):
    ws = write_tree(
        tmp_path / "ws",
        {
            "a/src/lib.rs": "pub unsafe fn f() {}\n",
            "b/src/lib.rs": "pub fn g() { unsafe {} }\n",
        },
    )
    assert main(["evaluate", "--workspace", str(ws), "--saferate"]) == 0
    assert "0.00 / 0.00" in capsys.readouterr().out


def test_evaluate_fcv_from_rubric_file(tmp_path, capsys):
    rubric = RubricTree(
        root=RubricNode(
            name="root",
            children=[
                RubricLeaf(id="a", requirement="x", weight=3.0, verdict=True),
                RubricLeaf(id="b", requirement="y", weight=1.0, verdict=False),
            ],
        )
    )
    path = tmp_path / "rubric.json"
    save_rubric(rubric, path)
    assert main(["evaluate", "--fcv", "--rubric", str(path)]) == 0
    assert "0.75" in capsys.readouterr().out


def test_evaluate_tpr_from_records(tmp_path, capsys):
    records_path = tmp_path / "execution.jsonl"
    lines = [
        json.dumps({"test": f"t{i}", "status": "pass" if i < 11 else "fail", "stdout": "", "iteration": 0})
        for i in range(15)
    ]
    records_path.write_text("\n".join(lines) + "\n")
    assert main(["evaluate", "--tpr", "--records", str(records_path)]) == 0
    assert "73.33" in capsys.readouterr().out


def test_evaluate_without_selection_exits_2(tmp_path):
    assert main(["evaluate", "--workspace", str(tmp_path)]) == 2


def test_evaluate_is_idempotent_on_read_paths(tmp_path, capsys):
    ws = write_tree(tmp_path / "ws", {"src/lib.rs": "pub fn f() {}\n"})
    main(["evaluate", "--workspace", str(ws), "--saferate"])
    first = capsys.readouterr().out
    main(["evaluate", "--workspace", str(ws), "--saferate"])
    second = capsys.readouterr().out
    assert first == second


def seed_ledger(tmp_path: Path) -> Path:
    paths = RunPaths(tmp_path / "out" / "runs" / "t")
    ledger = StageLedger()
    ledger.entries = [
        LedgerEntry("docgen", "DocGen", "x.jsonl", 1000, 500, 1.0, "final"),
        LedgerEntry("refine", "DocJudge", "y.jsonl", 600, 200, 1.0, "final", iteration=0),
        LedgerEntry("refine", "RequirementRefiner", "z.jsonl", 400, 100, 2.0, "final", iteration=0),
        LedgerEntry("refine", "DocJudge", "w.jsonl", 1000, 300, 1.0, "final", iteration=1),
    ]
    ledger.stage_outcomes = {"docgen": "completed", "refine": "completed"}
    ledger.save(paths.ledger_json)
    return tmp_path / "out"


def test_ledger_prints_per_iteration_average(tmp_path, capsys):
    out_root = seed_ledger(tmp_path)
    assert main(["ledger", "t", "--output-root", str(out_root)]) == 0
    out = capsys.readouterr().out
    assert "docgen" in out and "refine" in out
    # refine totals: prompt 2000 over 2 iterations -> 1000.0 per iteration
    assert "per-iteration avg over 2" in out
    assert "prompt 1000.0" in out


def test_ledger_price_math(tmp_path, capsys):
    out_root = seed_ledger(tmp_path)
    assert (
        main(["ledger", "t", "--output-root", str(out_root), "--price-in", "10", "--price-out", "30"])
        == 0
    )
    out = capsys.readouterr().out
    # docgen: 1000 prompt, 500 completion tokens -> 10*0.001 + 30*0.0005 = 0.025
    assert "0.0250" in out


def test_ledger_unknown_run_exits_2(tmp_path, capsys):
    assert main(["ledger", "ghost", "--output-root", str(tmp_path)]) == 2
    assert "unknown run id" in capsys.readouterr().err


@requires_cargo
def test_evaluate_cross_on_pre_adapted_workspace(tmp_path, capsys):
    from conftest import make_workspace

    donor = make_workspace(
        tmp_path / "donor",
        {"calc": "pub fn add(a: i32, b: i32) -> i32 { a + b }\n"},
        tests={"calc": {"basic.rs": "#[test]\nfn test_add() {\n    assert_eq!(calc::add(1, 2), 3);\n}\n"}},
    )
    target = make_workspace(
        tmp_path / "target_ws",
        {"calc": "pub fn sum(a: i32, b: i32) -> i32 { a + b }\n"},
        tests={
            "calc": {
                "own.rs": "#[test]\nfn test_sum() {\n    assert_eq!(calc::sum(1, 1), 2);\n}\n",
                "cross_basic.rs": "#[test]\nfn test_add() {\n    assert_eq!(calc::sum(1, 2), 3);\n}\n",
            }
        },
    )
    out_dir = tmp_path / "eval_out"
    code = main(
        [
            "evaluate",
            "--workspace",
            str(target),
            "--cross",
            "--other",
            str(donor),
            "--out",
            str(out_dir),
            "--figures",
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "TPR(own): 100.00" in out
    assert "TPR(other): 100.00" in out
    assert "aggregate TPR: 100.00" in out
    assert (out_dir / "cross_grid.csv").exists()
    assert (out_dir / "cross_grid.png").exists()


def test_stage_docgen_alone_populates_docs_only(tmp_path):
    from conftest import build_pipeline_script

    seed = write_tree(
        tmp_path / "c_repo",
        {
            "arith/add.c": "int add(int a, int b) {\n    return a + b;\n}\n",
            "textio/hex.c": "int hex(int v) {\n    return v;\n}\n",
            "tests/t.c": "int main(void) {\n    return 0;\n}\n",
        },
    )
    script = build_pipeline_script()
    cfg_path = write_config(tmp_path, script, source_root=str(seed))
    assert main(["stage", "docgen", "--config", str(cfg_path)]) == 0
    run_dir = tmp_path / "out" / "runs" / "t"
    assert (run_dir / "docs" / "source" / "overview.md").exists()
    assert (run_dir / "features.json").exists()
    assert not (run_dir / "workspace").exists()


def test_exit_code_discipline_table(tmp_path):
    """0 success, 1 pipeline/metric failure, 2 usage/config error."""
    ws = write_tree(tmp_path / "ws_ok", {"src/lib.rs": "pub fn f() {}\n"})
    seed_c_repo(tmp_path)
    bad_key_cfg = write_config(tmp_path, {}, name="bad.json", mystery=1)
    good_cfg = write_config(tmp_path, {}, name="good.json")

    cases = [
        (["evaluate", "--workspace", str(ws), "--saferate"], 0),
        (["stage", "refine", "--config", str(good_cfg)], 1),
        (["run", "--config", str(bad_key_cfg)], 2),
        (["evaluate", "--workspace", str(ws)], 2),
        (["ledger", "nonesuch", "--output-root", str(tmp_path)], 2),
    ]
    for argv, expected in cases:
        assert main(argv) == expected, argv


@requires_cargo
def test_evaluate_cross_with_config_runs_adaptation(tmp_path, capsys):
    from conftest import make_workspace

    donor = make_workspace(
        tmp_path / "donor2",
        {"calc": "pub fn add(a: i32, b: i32) -> i32 { a + b }\n"},
        tests={"calc": {"basic.rs": "#[test]\nfn test_add() {\n    assert_eq!(calc::add(2, 3), 5);\n}\n"}},
    )
    target = make_workspace(
        tmp_path / "target2",
        {"calc": "pub fn sum(a: i32, b: i32) -> i32 { a + b }\n"},
        tests={"calc": {"own.rs": "#[test]\nfn test_sum() {\n    assert_eq!(calc::sum(1, 1), 2);\n}\n"}},
    )
    script = {
        "TestTranslator": [
            {
                "content": "inject",
                "tool_calls": [{"name": "copy_test", "args": {"target_file": "calc/tests/cross_basic.rs"}}],
            },
            {
                "content": "rename the call",
                "tool_calls": [
                    {
                        "name": "str_replace_editor",
                        "args": {
                            "command": "str_replace",
                            "working_dir": "rust_repo",
                            "path": "calc/tests/cross_basic.rs",
                            "old_str": "calc::add(2, 3)",
                            "new_str": "calc::sum(2, 3)",
                        },
                    }
                ],
            },
            {"content": "ADAPTED"},
        ]
    }
    seed_c_repo(tmp_path)
    cfg_path = write_config(tmp_path, script, name="cross.json")
    code = main(
        [
            "evaluate",
            "--workspace",
            str(target),
            "--cross",
            "--other",
            str(donor),
            "--config",
            str(cfg_path),
        ]
    )
    assert code == 0
    out = capsys.readouterr().out
    assert "cross-adaptation: 1 adapted, 0 skipped" in out
    assert "TPR(own): 100.00" in out
    assert "TPR(other): 100.00" in out
