"""Five-stage migration pipeline with versioned refinement and revision.

Stage 1 documents the C repository and fixes the feature-to-crate map.
Stage 2 plans and translates one crate per feature. Stage 3 synthesizes the
workspace. Stage 4 alternates doc-equivalence scoring with per-requirement
repair, keeping an immutable snapshot of every version and selecting the
best one. Stage 5 translates the C tests and repairs runtime failures one
failing test at a time, never touching the tests themselves.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import shutil
import subprocess
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ModelBackend
from .docs import (
    DocTree,
    FeatureSpec,
    extract_features,
    generate_docs,
    load_doc_tree,
    load_features,
    write_features,
)
from .errors import ConfigError, InfraError, StageError
from .index import (
    cluster_files,
    index_repository,
    index_rust_workspace,
    write_dependency_graph,
    write_index_manifest,
)
from .metrics import (
    ExecutionRecord,
    append_execution_records,
    build_rubric,
    compute_saferate,
    compute_tpr,
    latest_iteration_records,
    load_execution_records,
    load_rubric,
    save_rubric,
    score_doc_equiv,
)
from .runtime import (
    DEFAULT_MAX_TURNS,
    EpisodeDeps,
    Transcript,
    Turn,
    agent_spec,
    run_episode,
    save_transcript,
)
from .tools import (
    count_unsafe_per_file,
    manifest_package_name,
    run_test_suite,
    workspace_members,
    workspace_resolver,
)

STAGE_NAMES = ("docgen", "translate", "synthesize", "refine", "testgen", "revise")


@dataclass
class RunConfig:
    """Everything one run needs; validated on construction."""

    source_root: Path
    output_root: Path
    backend: ModelBackend
    run_id: str = "run"
    refine_rounds: int = 5  # K
    revise_rounds: int = 5  # L
    max_turns: dict[str, int] = field(default_factory=dict)
    stages: dict[str, bool] = field(default_factory=dict)
    doc_source_cap: int = 40_000
    judge_doc_cap: int = 30_000
    figures: bool = True
    search_engine: str = "auto"
    price_input_per_million: float | None = None
    price_output_per_million: float | None = None

    def __post_init__(self):
        self.source_root = Path(self.source_root)
        self.output_root = Path(self.output_root)
        if self.refine_rounds < 0:
            raise ConfigError("refine_rounds (K) must be >= 0")
        if self.revise_rounds < 1:
            raise ConfigError("revise_rounds (L) must be >= 1")
        for name in self.stages:
            if name not in STAGE_NAMES:
                raise ConfigError(f"unknown stage toggle: {name}")
        for name in self.max_turns:
            if name not in DEFAULT_MAX_TURNS:
                raise ConfigError(f"unknown agent in max_turns override: {name}")

    def stage_enabled(self, name: str) -> bool:
        return self.stages.get(name, True)

    def turns_for(self, agent: str) -> int:
        return self.max_turns.get(agent, DEFAULT_MAX_TURNS[agent])


@dataclass
class RunPaths:
    root: Path

    @property
    def docs(self) -> Path:
        return self.root / "docs"

    @property
    def workspace(self) -> Path:
        return self.root / "workspace"

    @property
    def versions(self) -> Path:
        return self.root / "versions"

    @property
    def transcripts(self) -> Path:
        return self.root / "transcripts"

    @property
    def figures(self) -> Path:
        return self.root / "figures"

    @property
    def execution_jsonl(self) -> Path:
        return self.root / "execution.jsonl"

    @property
    def features_json(self) -> Path:
        return self.root / "features.json"

    @property
    def rubric_json(self) -> Path:
        return self.root / "rubric.json"

    @property
    def report_json(self) -> Path:
        return self.root / "report.json"

    @property
    def ledger_json(self) -> Path:
        return self.root / "ledger.json"

    @property
    def state_json(self) -> Path:
        return self.root / "state.json"

    @property
    def graph_json(self) -> Path:
        return self.root / "dependency_graph.json"

    @property
    def index_json(self) -> Path:
        return self.root / "index_manifest.json"

    @property
    def lock(self) -> Path:
        return self.root / ".lock"


@dataclass
class VersionRecord:
    """One immutable snapshot of the refined workspace with its score."""

    index: int
    workspace_snapshot: Path
    score: float
    failing_rubrics: list[str]
    note: str = ""
    sha256: str = ""


@dataclass
class CratePlan:
    feature: FeatureSpec
    crate_dir: Path
    plan_path: Path
    status: str = "planned"  # planned | translated-with-findings | checked | failed


@dataclass
class LedgerEntry:
    stage: str
    agent: str
    transcript: str
    prompt_tokens: int
    completion_tokens: int
    wall_time: float
    outcome: str
    iteration: int | None = None


@dataclass
class StageLedger:
    """Per-stage record of every backend interaction plus run warnings."""

    entries: list[LedgerEntry] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    stage_outcomes: dict[str, str] = field(default_factory=dict)

    def warn(self, message: str) -> None:
        self.warnings.append(message)

    def save(self, path: Path) -> None:
        payload = {
            "entries": [vars(e) for e in self.entries],
            "warnings": self.warnings,
            "stage_outcomes": self.stage_outcomes,
        }
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "StageLedger":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        ledger = cls(warnings=list(data.get("warnings", [])))
        ledger.stage_outcomes = dict(data.get("stage_outcomes", {}))
        for row in data.get("entries", []):
            ledger.entries.append(LedgerEntry(**row))
        return ledger


def workspace_sha256(root: Path) -> str:
    """Order-independent content hash over every file in a snapshot."""
    digest = hashlib.sha256()
    for path in sorted(Path(root).rglob("*")):
        if not path.is_file():
            continue
        digest.update(path.relative_to(root).as_posix().encode())
        digest.update(b"\0")
        digest.update(path.read_bytes())
        digest.update(b"\0")
    return digest.hexdigest()


def _cargo_check_ok(cwd: Path) -> tuple[bool, str]:
    try:
        proc = subprocess.run(
            ["cargo", "check"], cwd=cwd, capture_output=True, text=True, timeout=300
        )
    except subprocess.TimeoutExpired:
        return False, "(cargo check timed out)"
    return proc.returncode == 0, proc.stderr.strip()


def _copy_workspace(src: Path, dst: Path) -> None:
    """Full directory copy minus build artifacts (snapshots are source-only)."""
    if dst.exists():
        shutil.rmtree(dst)
    shutil.copytree(src, dst, ignore=shutil.ignore_patterns("target"))


_THREAD_ID = re.compile(r"^(thread '[^']*') \(\d+\) (panicked)", re.MULTILINE)


def _stable_panic_text(text: str) -> str:
    """Drop OS thread ids from panic headers so replay tasks are stable."""
    return _THREAD_ID.sub(r"\1 \2", text)


def _test_files_of(workspace: Path) -> dict[str, bytes]:
    """Bytes of every file under a tests/ directory, keyed by relative path."""
    snapshot = {}
    for path in sorted(workspace.rglob("*")):
        rel = path.relative_to(workspace)
        if "target" in rel.parts or not path.is_file():
            continue
        if "tests" in rel.parts:
            snapshot[rel.as_posix()] = path.read_bytes()
    return snapshot


class PipelineRun:
    """One run directory plus the machinery shared by all stages."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.paths = RunPaths(cfg.output_root / "runs" / cfg.run_id)
        self.ledger = StageLedger()
        if self.paths.ledger_json.exists():
            self.ledger = StageLedger.load(self.paths.ledger_json)
        self.state: dict = {}
        if self.paths.state_json.exists():
            self.state = json.loads(self.paths.state_json.read_text(encoding="utf-8"))
        self._transcript_seq: dict[tuple[str, str], int] = {}
        self.paths.root.mkdir(parents=True, exist_ok=True)

    # -- bookkeeping --------------------------------------------------------

    def _save(self) -> None:
        self.ledger.save(self.paths.ledger_json)
        self.paths.state_json.write_text(
            json.dumps(self.state, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def _transcript_path(self, stage: str, agent: str) -> Path:
        key = (stage, agent)
        self._transcript_seq[key] = self._transcript_seq.get(key, 0) + 1
        return self.paths.transcripts / f"{stage}-{agent}-{self._transcript_seq[key]}.jsonl"

    def _begin_stage(self, stage: str) -> None:
        """Stages restart atomically: drop any previous records for this one."""
        self.ledger.entries = [e for e in self.ledger.entries if e.stage != stage]
        for key in [k for k in self._transcript_seq if k[0] == stage]:
            del self._transcript_seq[key]
        if self.paths.transcripts.is_dir():
            for stale in self.paths.transcripts.glob(f"{stage}-*.jsonl"):
                stale.unlink()
        self.ledger.stage_outcomes.pop(stage, None)

    def _record_episode(
        self, stage: str, transcript: Transcript, iteration: int | None = None
    ) -> None:
        path = self._transcript_path(stage, transcript.agent_name)
        save_transcript(transcript, path)
        self.ledger.entries.append(
            LedgerEntry(
                stage=stage,
                agent=transcript.agent_name,
                transcript=str(path.relative_to(self.paths.root)),
                prompt_tokens=transcript.prompt_tokens,
                completion_tokens=transcript.completion_tokens,
                wall_time=round(transcript.wall_time, 3),
                outcome=transcript.outcome,
                iteration=iteration,
            )
        )

    def _exchange_recorder(self, stage: str, iteration: int | None = None):
        """Recorder for single-shot backend exchanges (docgen, judging)."""

        def record(agent_name: str, messages: list[dict], turn, wall_time: float = 0.0) -> None:
            transcript = Transcript(agent_name=agent_name)
            for msg in messages:
                transcript.turns.append(Turn(role=msg["role"], content=msg["content"]))
            transcript.turns.append(Turn(role="assistant", content=turn.content))
            transcript.prompt_tokens = turn.prompt_tokens
            transcript.completion_tokens = turn.completion_tokens
            transcript.wall_time = wall_time
            self._record_episode(stage, transcript, iteration=iteration)

        return record

    def _episode_deps(self, rust_root: Path, **overrides) -> EpisodeDeps:
        deps = EpisodeDeps(
            c_repo_root=self.cfg.source_root,
            rust_repo_root=rust_root,
            docs_root=self.paths.docs / "source",
            graph_path=self.paths.graph_json,
            search_engine=self.cfg.search_engine,
        )
        for key, value in overrides.items():
            setattr(deps, key, value)
        return deps

    # -- stage 1: documentation generation ----------------------------------

    def stage1_docgen(self) -> tuple[DocTree, list[FeatureSpec]]:
        self._begin_stage("docgen")
        index = index_repository(self.cfg.source_root, warnings=self.ledger.warnings)
        clusters = cluster_files(index.components)
        write_dependency_graph(index.graph, self.paths.graph_json)
        write_index_manifest(index, self.paths.index_json)

        s_doc = generate_docs(
            index,
            "source",
            self.cfg.backend,
            self.paths.docs,
            clusters=clusters,
            source_cap=self.cfg.doc_source_cap,
            record=self._exchange_recorder("docgen"),
        )
        features = extract_features(
            s_doc, self.cfg.backend, clusters, record=self._exchange_recorder("docgen")
        )
        if not features:
            raise StageError("stage 1 extracted zero features")
        write_features(features, self.paths.features_json)
        self.state["clusters"] = [c.cluster_id for c in clusters]
        self.ledger.stage_outcomes["docgen"] = "completed"
        self._save()
        return s_doc, features

    def _load_stage1(self) -> tuple[DocTree, list[FeatureSpec]]:
        source_docs = self.paths.docs / "source"
        if not source_docs.is_dir() or not self.paths.features_json.exists():
            raise StageError("stage prerequisites missing: run docgen first")
        return load_doc_tree(source_docs, "source"), load_features(self.paths.features_json)

    # -- stage 2: per-crate planning and translation -------------------------

    def stage2_translate(self, features: list[FeatureSpec]) -> list[CratePlan]:
        self._begin_stage("translate")
        index = index_repository(self.cfg.source_root, warnings=self.ledger.warnings)
        plans: list[CratePlan] = []
        for feature in features:
            crate_dir = self.paths.workspace / feature.feature_name
            crate_dir.mkdir(parents=True, exist_ok=True)
            plan_path = crate_dir / "IMPLEMENTATION_PLAN.md"

            deps = self._episode_deps(crate_dir, components=index.components)
            component_ids = [
                c.id
                for c in index.components.values()
                if any(c.file_path in self._cluster_files(f) for f in feature.source_clusters)
            ][:80]
            planner_task = (
                f"Plan the Rust crate `{feature.feature_name}`.\n"
                f"Feature summary: {feature.summary}\n"
                f"Documentation files: {', '.join(feature.doc_files) or '(none)'}\n"
                f"C components: {', '.join(component_ids) or '(none listed)'}\n"
                "Write ./IMPLEMENTATION_PLAN.md in the crate directory."
            )
            transcript = run_episode(
                agent_spec("Planner", self.cfg.turns_for("Planner")),
                deps,
                planner_task,
                self.cfg.backend,
            )
            self._record_episode("translate", transcript)
            plan = CratePlan(
                feature=feature,
                crate_dir=crate_dir,
                plan_path=plan_path,
                status="planned" if plan_path.exists() else "failed",
            )
            plans.append(plan)
            if plan.status == "failed":
                self.ledger.warn(
                    f"planner produced no IMPLEMENTATION_PLAN.md for {feature.feature_name}"
                )
                continue

            deps = self._episode_deps(crate_dir, components=index.components)
            translator_task = (
                f"Implement the crate `{feature.feature_name}` from "
                "./IMPLEMENTATION_PLAN.md. Iterate until cargo check passes and "
                "no unsafe code remains."
            )
            transcript = run_episode(
                agent_spec("Translator", self.cfg.turns_for("Translator")),
                deps,
                translator_task,
                self.cfg.backend,
                bindings={"feature_name": feature.feature_name},
            )
            self._record_episode("translate", transcript)

            check_ok, diagnostics = _cargo_check_ok(crate_dir)
            unsafe_total = sum(count_unsafe_per_file(crate_dir).values())
            if transcript.outcome == "final" and check_ok and unsafe_total == 0:
                plan.status = "checked"
            else:
                plan.status = "translated-with-findings"
                findings = []
                if transcript.outcome == "turn_limit":
                    findings.append("turn limit reached")
                if not check_ok:
                    findings.append(f"cargo check failing: {diagnostics[:300]}")
                if unsafe_total:
                    findings.append(f"{unsafe_total} unsafe token(s) remain")
                self.ledger.warn(
                    f"crate {feature.feature_name} translated with findings: "
                    + "; ".join(findings)
                )

        self.state["crates"] = [
            {
                "feature": p.feature.feature_name,
                "crate_dir": str(p.crate_dir.relative_to(self.paths.root)),
                "status": p.status,
            }
            for p in plans
        ]
        self.ledger.stage_outcomes["translate"] = "completed"
        self._save()
        return plans

    def _cluster_files(self, cluster_id: str) -> set[str]:
        if not hasattr(self, "_cluster_cache"):
            index = index_repository(self.cfg.source_root)
            self._cluster_cache = {
                c.cluster_id: set(c.files) for c in cluster_files(index.components)
            }
        return self._cluster_cache.get(cluster_id, set())

    # -- stage 3: workspace synthesis ----------------------------------------

    def stage3_synthesize(self, plans: list[CratePlan]) -> Path:
        self._begin_stage("synthesize")
        members = [p.feature.feature_name for p in plans if p.status != "failed"]
        if not members:
            raise StageError("no crates survived translation; nothing to synthesize")
        workspace = self.paths.workspace
        deps = self._episode_deps(workspace)
        task = (
            "Synthesize the workspace root for these member crates:\n"
            + "\n".join(f"- {m}" for m in members)
            + "\nCreate the root Cargo.toml, README.md, and .gitignore, then make "
            "cargo_check(scope='workspace') pass."
        )
        transcript = run_episode(
            agent_spec("Synthesizer", self.cfg.turns_for("Synthesizer")),
            deps,
            task,
            self.cfg.backend,
            bindings={"crate_names": ", ".join(members)},
        )
        self._record_episode("synthesize", transcript)

        manifest = workspace / "Cargo.toml"
        if manifest.exists():
            declared = set(workspace_members(manifest))
            expected = set(members)
            if declared != expected:
                self.ledger.warn(
                    f"workspace members mismatch: declared {sorted(declared)}, "
                    f"expected {sorted(expected)}"
                )
            if workspace_resolver(manifest) != "2":
                self.ledger.warn("workspace manifest does not set resolver = \"2\"")
        else:
            self.ledger.warn("synthesizer produced no root Cargo.toml")

        check_ok, diagnostics = _cargo_check_ok(workspace)
        if not check_ok:
            self.ledger.stage_outcomes["synthesize"] = "failed"
            self._save()
            raise StageError(f"workspace check failed after synthesis: {diagnostics[:500]}")
        self.ledger.stage_outcomes["synthesize"] = "completed"
        self.state["workspace"] = str(workspace.relative_to(self.paths.root))
        self._save()
        return workspace

    # -- stage 4: requirement-driven refinement ------------------------------

    def stage4_refine(self, t0: Path, s_doc: DocTree) -> tuple[list[VersionRecord], Path]:
        self._begin_stage("refine")
        check_ok, diagnostics = _cargo_check_ok(t0)
        if not check_ok:
            raise StageError(
                f"refinement requires a compiling workspace; cargo check said: {diagnostics[:500]}"
            )

        if self.paths.rubric_json.exists():
            rubric = load_rubric(self.paths.rubric_json)
        else:
            rubric = build_rubric(
                s_doc,
                self.cfg.backend,
                record=self._exchange_recorder("refine"),
                doc_cap=self.cfg.judge_doc_cap,
            )
            save_rubric(rubric, self.paths.rubric_json)

        versions: list[VersionRecord] = []
        live = t0
        previous_failing: list[str] | None = None
        for i in range(self.cfg.refine_rounds + 1):
            score, failing, note = 0.0, None, ""
            try:
                target_docs_root = self.paths.docs / "target"
                if target_docs_root.exists():
                    shutil.rmtree(target_docs_root)
                rust_index = index_rust_workspace(live, warnings=self.ledger.warnings)
                t_doc = generate_docs(
                    rust_index,
                    "target",
                    self.cfg.backend,
                    self.paths.docs,
                    source_cap=self.cfg.doc_source_cap,
                    record=self._exchange_recorder("refine", iteration=i),
                )
                score, failing = score_doc_equiv(
                    s_doc,
                    t_doc,
                    rubric,
                    self.cfg.backend,
                    record=self._exchange_recorder("refine", iteration=i),
                    doc_cap=self.cfg.judge_doc_cap,
                )
                save_rubric(rubric, self.paths.rubric_json)
            except StageError:
                raise
            except Exception as exc:
                note = f"scoring fault: {exc}"
                self.ledger.warn(f"version {i} scoring failed: {exc}")

            snapshot = self.paths.versions / f"v{i}"
            _copy_workspace(live, snapshot)
            record = VersionRecord(
                index=i,
                workspace_snapshot=snapshot,
                score=score,
                failing_rubrics=list(failing or []),
                note=note,
                sha256=workspace_sha256(snapshot),
            )
            versions.append(record)

            if i == self.cfg.refine_rounds:
                break
            effective = failing if failing is not None else previous_failing
            if not effective:
                break
            previous_failing = effective

            leaf_by_id = {leaf.id: leaf for leaf in rubric.leaves()}
            for leaf_id in effective:
                leaf = leaf_by_id.get(leaf_id)
                if leaf is None:
                    continue
                module_name = leaf_id.split(".")[0]
                deps = self._episode_deps(live, workspace_root=live)
                task = (
                    f"Failing requirement {leaf.id} (weight {leaf.weight}):\n"
                    f"{leaf.requirement}\n\n"
                    f"Judge rationale: {leaf.rationale or '(none)'}\n"
                    f"Evidence: {leaf.evidence or '(none)'}\n"
                    "Align the Rust workspace with this requirement."
                )
                transcript = run_episode(
                    agent_spec("RequirementRefiner", self.cfg.turns_for("RequirementRefiner")),
                    deps,
                    task,
                    self.cfg.backend,
                    bindings={"current_module_name": module_name},
                )
                self._record_episode("refine", transcript, iteration=i)

        best = max(versions, key=lambda v: (v.score, -v.index))
        self.state["versions"] = [
            {
                "index": v.index,
                "snapshot": str(v.workspace_snapshot.relative_to(self.paths.root)),
                "score": v.score,
                "failing_rubrics": v.failing_rubrics,
                "note": v.note,
                "sha256": v.sha256,
            }
            for v in versions
        ]
        self.state["t_star"] = {
            "index": best.index,
            "snapshot": str(best.workspace_snapshot.relative_to(self.paths.root)),
            "score": best.score,
        }
        self.ledger.stage_outcomes["refine"] = "completed"
        self._save()
        return versions, best.workspace_snapshot

    # -- stage 5: test translation and execution-aware revision ---------------

    def _c_test_dir(self) -> Path | None:
        for name in ("tests", "test"):
            candidate = self.cfg.source_root / name
            if candidate.is_dir():
                return candidate
        return None

    def stage5_testgen(self, t_star: Path) -> Path:
        self._begin_stage("testgen")
        c_tests = self._c_test_dir()
        if c_tests is None:
            raise StageError("C repository has no tests/ or test/ directory")

        live = self.paths.workspace
        if t_star.resolve() != live.resolve():
            _copy_workspace(t_star, live)
        # Verify on the working copy; snapshots stay byte-frozen forever.
        check_ok, diagnostics = _cargo_check_ok(live)
        if not check_ok:
            raise StageError(
                f"execution stage requires a compiling workspace: {diagnostics[:500]}"
            )

        members = [
            row["feature"] for row in self.state.get("crates", []) if row["status"] != "failed"
        ]
        crate_lines = []
        for member in members:
            manifest = live / member / "Cargo.toml"
            package = manifest_package_name(manifest) or member
            crate_lines.append(f"- directory: {member}, package: {package}")
        c_test_files = sorted(
            p.relative_to(self.cfg.source_root).as_posix()
            for p in c_tests.rglob("*")
            if p.is_file()
        )
        deps = self._episode_deps(live, workspace_root=live)
        task = (
            "Translate the C test suite into Rust tests.\n"
            f"Workspace crates:\n" + "\n".join(crate_lines) + "\n"
            f"C test files:\n" + "\n".join(f"- {f}" for f in c_test_files)
        )
        transcript = run_episode(
            agent_spec("TestTranslator", self.cfg.turns_for("TestTranslator")),
            deps,
            task,
            self.cfg.backend,
        )
        self._record_episode("testgen", transcript)

        tests_md = sorted(live.glob("*/tests/tests.md"))
        if not tests_md:
            self.ledger.warn("test translation produced no tests.md map")

        env = {**os.environ, "RUSTFLAGS": "-Awarnings"}
        proc = subprocess.run(
            ["cargo", "test", "--no-run"],
            cwd=live,
            capture_output=True,
            text=True,
            timeout=300,
            env=env,
        )
        if proc.returncode != 0:
            self.ledger.stage_outcomes["testgen"] = "failed"
            self.ledger.warn(
                "translated test suite does not compile:\n<CARGO_TEST_OUTPUT>\n"
                + (proc.stderr.strip() or "(no output)")
                + "\n</CARGO_TEST_OUTPUT>"
            )
            self._save()
            raise StageError("translated test suite does not compile; revision cannot start")
        self.ledger.stage_outcomes["testgen"] = "completed"
        self.state["exec_tests_ready"] = True
        self._save()
        return live

    def stage5_revise(self, live: Path) -> Path:
        self._begin_stage("revise")
        self.paths.execution_jsonl.unlink(missing_ok=True)
        completed_iterations = 0
        for round_no in range(1, self.cfg.revise_rounds + 1):
            iteration = round_no - 1
            suite = run_test_suite(live)
            records = [
                ExecutionRecord(test=s.test, status=s.status, stdout=s.stdout, iteration=iteration)
                for s in suite
            ]
            append_execution_records(records, self.paths.execution_jsonl)
            completed_iterations = round_no
            failing = sorted(r.test for r in records if r.status == "fail")
            if not failing:
                break

            snapshot = self.paths.versions / f"exec_v{iteration}"
            _copy_workspace(live, snapshot)

            stdout_by_test = {r.test: r.stdout for r in records if r.status == "fail"}
            for test_name in failing:
                test_bytes_before = _test_files_of(live)
                deps = self._episode_deps(live, workspace_root=live, current_test_name=test_name)
                task = (
                    f"Failing test: {test_name}\n"
                    f"Captured output from the failed run:\n"
                    f"{_stable_panic_text(stdout_by_test.get(test_name) or '(no output captured)')}"
                )
                transcript = run_episode(
                    agent_spec("ExecutionRevisor", self.cfg.turns_for("ExecutionRevisor")),
                    deps,
                    task,
                    self.cfg.backend,
                    bindings={"test_name": test_name},
                )
                self._record_episode("revise", transcript, iteration=iteration)

                test_bytes_after = _test_files_of(live)
                if test_bytes_after != test_bytes_before:
                    self.ledger.warn(
                        f"revisor touched test files while fixing {test_name}; restored"
                    )
                    for rel in set(test_bytes_after) - set(test_bytes_before):
                        (live / rel).unlink()
                    for rel, data in test_bytes_before.items():
                        target = live / rel
                        target.parent.mkdir(parents=True, exist_ok=True)
                        if test_bytes_after.get(rel) != data:
                            target.write_bytes(data)

        self.state["exec"] = {
            "iterations": completed_iterations,
            "final": str(live.relative_to(self.paths.root)),
        }
        self.ledger.stage_outcomes["revise"] = "completed"
        self._save()
        return live

    def stage5_execution(self, t_star: Path) -> Path:
        live = self.stage5_testgen(t_star)
        return self.stage5_revise(live)

    # -- full run -------------------------------------------------------------

    def run_full(self) -> dict:
        s_doc = features = plans = workspace = None
        versions: list[VersionRecord] = []
        t_star: Path | None = None
        final_ws: Path | None = None
        halted = False

        order = [
            ("docgen", lambda: self.stage1_docgen()),
            ("translate", lambda: self.stage2_translate(features)),
            ("synthesize", lambda: self.stage3_synthesize(plans)),
            ("refine", lambda: self.stage4_refine(workspace, s_doc)),
            ("testgen", lambda: self.stage5_testgen(t_star)),
            ("revise", lambda: self.stage5_revise(final_ws)),
        ]
        for name, runner in order:
            if halted:
                self.ledger.stage_outcomes.setdefault(name, "skipped")
                continue
            if not self.cfg.stage_enabled(name):
                self.ledger.stage_outcomes[name] = "disabled"
                if name in ("docgen", "translate", "synthesize"):
                    halted = True  # later stages need these artifacts
                continue
            try:
                result = runner()
            except (StageError, InfraError) as exc:
                self.ledger.stage_outcomes[name] = "failed"
                self.ledger.warn(f"stage {name} failed: {exc}")
                halted = True
                continue
            if name == "docgen":
                s_doc, features = result
            elif name == "translate":
                plans = result
            elif name == "synthesize":
                workspace = result
            elif name == "refine":
                versions, t_star = result
            elif name == "testgen":
                final_ws = result
            elif name == "revise":
                final_ws = result

        report = self._build_report(versions, t_star, final_ws)
        self._save()
        return report

    def _build_report(
        self,
        versions: list[VersionRecord],
        t_star: Path | None,
        final_ws: Path | None,
    ) -> dict:
        from .report import write_report

        metrics_block: dict = {}
        eval_ws = final_ws or (self.paths.workspace if self.paths.workspace.is_dir() else None)
        if self.ledger.stage_outcomes.get("synthesize") == "completed" and eval_ws:
            ok, _ = _cargo_check_ok(eval_ws)
            metrics_block["compilable"] = ok
            rates = compute_saferate(eval_ws)
            metrics_block["sr_a"] = rates.sr_a
            metrics_block["sr_f"] = rates.sr_f
            if not ok and rates.sr_a is not None:
                # SR(F) stands on its own over non-compiling output; SR(A) is
                # advisory there because the API surface never type-checked.
                self.ledger.warn(
                    "SafeRate(A) computed over a non-compiling workspace; treat as advisory"
                )
        if self.ledger.stage_outcomes.get("refine") == "completed" and self.state.get("t_star"):
            metrics_block["fcv"] = self.state["t_star"]["score"]
        if (
            self.ledger.stage_outcomes.get("revise") == "completed"
            and self.paths.execution_jsonl.exists()
        ):
            records = load_execution_records(self.paths.execution_jsonl)
            metrics_block["tpr"] = compute_tpr(latest_iteration_records(records))

        cost_block = self._cost_block()
        report = {
            "run_id": self.cfg.run_id,
            "stages": dict(self.ledger.stage_outcomes),
            "metrics": metrics_block,
            "cost": cost_block,
            "artifacts": {
                "workspace": "workspace",
                "docs": "docs",
                "versions": [
                    {"index": v["index"], "snapshot": v["snapshot"], "score": v["score"]}
                    for v in self.state.get("versions", [])
                ],
                "t_star": self.state.get("t_star"),
                "execution_records": "execution.jsonl" if self.paths.execution_jsonl.exists() else None,
                "rubric": "rubric.json" if self.paths.rubric_json.exists() else None,
            },
            "warnings": list(self.ledger.warnings),
        }
        write_report(report, self.paths.report_json)
        if self.cfg.figures:
            from .report import render_run_figures, write_metrics_csv

            write_metrics_csv(report, self.paths.root / "metrics.csv")
            render_run_figures(
                self.state.get("versions", []), metrics_block, self.paths.figures
            )
        return report

    def _cost_block(self) -> dict:
        stages: dict[str, dict] = {}
        for entry in self.ledger.entries:
            row = stages.setdefault(
                entry.stage,
                {"prompt_tokens": 0, "completion_tokens": 0, "episodes": 0, "iterations": set()},
            )
            row["prompt_tokens"] += entry.prompt_tokens
            row["completion_tokens"] += entry.completion_tokens
            row["episodes"] += 1
            if entry.iteration is not None:
                row["iterations"].add(entry.iteration)
        out = {}
        for stage, row in stages.items():
            iterations = len(row.pop("iterations")) or None
            entry = dict(row)
            entry["iterations"] = iterations
            if self.cfg.price_input_per_million is not None:
                cost = row["prompt_tokens"] / 1e6 * self.cfg.price_input_per_million
                if self.cfg.price_output_per_million is not None:
                    cost += row["completion_tokens"] / 1e6 * self.cfg.price_output_per_million
                entry["estimated_usd"] = round(cost, 4)
            out[stage] = entry
        return out


# Spec-level stage entry points ------------------------------------------------


def run_stage1_docgen(cfg: RunConfig) -> tuple[DocTree, list[FeatureSpec]]:
    return PipelineRun(cfg).stage1_docgen()


def run_stage2_translate(features: list[FeatureSpec], cfg: RunConfig) -> list[CratePlan]:
    return PipelineRun(cfg).stage2_translate(features)


def run_stage3_synthesize(crates: list[CratePlan], cfg: RunConfig) -> Path:
    return PipelineRun(cfg).stage3_synthesize(crates)


def run_stage4_refine(
    t0: Path, s_doc: DocTree, cfg: RunConfig
) -> tuple[list[VersionRecord], Path]:
    return PipelineRun(cfg).stage4_refine(t0, s_doc)


def run_stage5_execution(t_star: Path, cfg: RunConfig) -> Path:
    return PipelineRun(cfg).stage5_execution(t_star)


def run_full(cfg: RunConfig) -> dict:
    return PipelineRun(cfg).run_full()
