"""Evaluation metrics: rubric scoring, test pass rate, unsafe auditing.

FCV is the weighted fraction of passing leaf requirements in a rubric tree.
TPR is the percentage of translated tests that pass at execution. SafeRate
is reported at API granularity (public functions that need no `unsafe`) and
file granularity (files with zero `unsafe` tokens). The cross-evaluation
protocol adapts one workspace's test suite onto another and scores both
workspaces under both suites.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
import time
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ModelBackend
from .docs import DocTree, parse_json_block, read_doc_text, sanitize_feature_name, truncate_middle
from .errors import InfraError, StageError
from .runtime import AgentSpec, EpisodeDeps, run_episode

JUDGE_SYSTEM = """\
You audit one requirement of a translated codebase. You receive the
requirement text and the documentation generated from the translated code.
Decide strictly from that evidence whether the requirement is preserved.
Reply with a fenced ```json block: {"verdict": "pass" or "fail",
"rationale": one sentence, "evidence": the supporting excerpt}."""

RUBRIC_SYSTEM = """\
You distill codebase documentation into a requirement rubric. Group concrete,
checkable requirements under their components and give each an importance
weight from 1 (minor) to 5 (essential). Reply with a fenced ```json block
holding an array of {"component": name, "requirements": [{"requirement":
text, "weight": number}]} objects."""

RUBRIC_REPAIR = """\
Your previous reply could not be parsed. Reply with only a fenced ```json
block holding a non-empty array of {"component", "requirements"} objects as
instructed."""


@dataclass
class RubricLeaf:
    """One judgeable requirement with an importance weight."""

    id: str
    requirement: str
    weight: float = 1.0
    verdict: bool | None = None
    rationale: str = ""
    evidence: str = ""


@dataclass
class RubricNode:
    name: str
    children: list = field(default_factory=list)  # RubricNode | RubricLeaf


@dataclass
class RubricTree:
    root: RubricNode

    def leaves(self) -> list[RubricLeaf]:
        found: list[RubricLeaf] = []

        def walk(node):
            for child in node.children:
                if isinstance(child, RubricLeaf):
                    found.append(child)
                else:
                    walk(child)

        walk(self.root)
        return found

    def validate(self) -> None:
        leaves = self.leaves()
        if not leaves:
            raise ValueError("rubric tree has no leaf requirements")
        for leaf in leaves:
            if leaf.weight <= 0:
                raise ValueError(f"rubric leaf {leaf.id} has non-positive weight")
        ids = [leaf.id for leaf in leaves]
        if len(ids) != len(set(ids)):
            raise ValueError("rubric leaf ids are not unique")


def compute_fcv(tree: RubricTree) -> float:
    """Weighted fraction of passing leaves; unset verdicts count as failing."""
    tree.validate()
    leaves = tree.leaves()
    total = sum(leaf.weight for leaf in leaves)
    passed = sum(leaf.weight for leaf in leaves if leaf.verdict)
    return passed / total


def rubric_to_json_obj(tree: RubricTree) -> dict:
    def node_obj(node):
        if isinstance(node, RubricLeaf):
            return {
                "id": node.id,
                "requirement": node.requirement,
                "weight": node.weight,
                "verdict": node.verdict,
                "rationale": node.rationale,
                "evidence": node.evidence,
            }
        return {"name": node.name, "children": [node_obj(c) for c in node.children]}

    return node_obj(tree.root)


def rubric_from_json_obj(obj: dict) -> RubricTree:
    def parse(node_obj):
        if "requirement" in node_obj:
            return RubricLeaf(
                id=node_obj["id"],
                requirement=node_obj["requirement"],
                weight=float(node_obj.get("weight", 1.0)),
                verdict=node_obj.get("verdict"),
                rationale=node_obj.get("rationale", ""),
                evidence=node_obj.get("evidence", ""),
            )
        return RubricNode(
            name=node_obj.get("name", ""),
            children=[parse(c) for c in node_obj.get("children", [])],
        )

    root = parse(obj)
    if isinstance(root, RubricLeaf):
        root = RubricNode(name="root", children=[root])
    return RubricTree(root=root)


def save_rubric(tree: RubricTree, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rubric_to_json_obj(tree), indent=2) + "\n", encoding="utf-8")


def load_rubric(path: Path | str) -> RubricTree:
    return rubric_from_json_obj(json.loads(Path(path).read_text(encoding="utf-8")))


def build_rubric(
    s_doc: DocTree, backend: ModelBackend, record=None, doc_cap: int = 30_000
) -> RubricTree:
    """Derive the requirement rubric from the source documentation tree."""
    doc_text = _doc_text(s_doc, doc_cap)

    def _ask(prefix: str):
        messages = [
            {"role": "system", "content": RUBRIC_SYSTEM},
            {"role": "user", "content": f"{prefix}{doc_text}"},
        ]
        started = time.monotonic()
        turn = backend.complete("RubricBuilder", messages)
        if record is not None:
            record("RubricBuilder", messages, turn, wall_time=time.monotonic() - started)
        parsed = parse_json_block(turn.content)
        return parsed if isinstance(parsed, list) and parsed else None

    raw = _ask("")
    if raw is None:
        raw = _ask(RUBRIC_REPAIR + "\n\n")
    if raw is None:
        raise StageError("rubric construction returned no parseable rubric")

    root = RubricNode(name="root")
    seen_ids: set[str] = set()
    for group in raw:
        if not isinstance(group, dict):
            continue
        comp_name = sanitize_feature_name(str(group.get("component", "component")))
        node = RubricNode(name=comp_name)
        for i, req in enumerate(group.get("requirements", []), start=1):
            if not isinstance(req, dict) or not req.get("requirement"):
                continue
            try:
                weight = float(req.get("weight", 1.0))
            except (TypeError, ValueError):
                weight = 1.0
            weight = min(5.0, max(1.0, weight))
            leaf_id = f"{comp_name}.r{i}"
            n = 2
            while leaf_id in seen_ids:
                leaf_id = f"{comp_name}.r{i}_{n}"
                n += 1
            seen_ids.add(leaf_id)
            node.children.append(
                RubricLeaf(id=leaf_id, requirement=str(req["requirement"]), weight=weight)
            )
        if node.children:
            root.children.append(node)
    tree = RubricTree(root=root)
    tree.validate()
    return tree


def _doc_text(tree: DocTree, cap: int) -> str:
    parts = []
    for entry in tree.manifest:
        parts.append(f"==== {entry.path} ====\n{read_doc_text(tree.root, entry.path)}")
    return truncate_middle("\n\n".join(parts), cap)


def score_doc_equiv(
    s_doc: DocTree,
    t_doc: DocTree,
    rubric: RubricTree,
    backend: ModelBackend,
    record=None,
    doc_cap: int = 30_000,
) -> tuple[float, list[str]]:
    """Judge every rubric leaf against the target docs; return (s, M).

    An unparseable judge reply marks the leaf failing with a fault
    rationale — conservative, never silently passing.
    """
    rubric.validate()
    target_text = _doc_text(t_doc, doc_cap)
    failing: list[str] = []
    for leaf in rubric.leaves():
        user = (
            f"Requirement ({leaf.id}, weight {leaf.weight}):\n{leaf.requirement}\n\n"
            f"Documentation generated from the translated code:\n{target_text}"
        )
        messages = [
            {"role": "system", "content": JUDGE_SYSTEM},
            {"role": "user", "content": user},
        ]
        started = time.monotonic()
        turn = backend.complete("DocJudge", messages)
        if record is not None:
            record("DocJudge", messages, turn, wall_time=time.monotonic() - started)
        parsed = parse_json_block(turn.content)
        if isinstance(parsed, dict) and str(parsed.get("verdict", "")).lower() in ("pass", "fail", "true", "false"):
            verdict_text = str(parsed.get("verdict")).lower()
            leaf.verdict = verdict_text in ("pass", "true")
            leaf.rationale = str(parsed.get("rationale", ""))
            leaf.evidence = str(parsed.get("evidence", ""))
        else:
            leaf.verdict = False
            leaf.rationale = "judge output unparseable; marked fail"
            leaf.evidence = turn.content[:400]
        if not leaf.verdict:
            failing.append(leaf.id)
    return compute_fcv(rubric), failing


# ---------------------------------------------------------------------------
# Test pass rate


@dataclass
class ExecutionRecord:
    test: str
    status: str  # pass | fail
    stdout: str
    iteration: int


def append_execution_records(records: list[ExecutionRecord], path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        for r in records:
            fh.write(
                json.dumps(
                    {"test": r.test, "status": r.status, "stdout": r.stdout, "iteration": r.iteration},
                    sort_keys=True,
                )
                + "\n"
            )


def load_execution_records(path: Path | str) -> list[ExecutionRecord]:
    records = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        obj = json.loads(line)
        records.append(
            ExecutionRecord(
                test=obj["test"],
                status=obj["status"],
                stdout=obj.get("stdout", ""),
                iteration=int(obj.get("iteration", 0)),
            )
        )
    return records


def compute_tpr(records: list[ExecutionRecord]) -> float | None:
    """100 × pass/total to two decimals; None (not 0) for an empty set."""
    if not records:
        return None
    passes = sum(1 for r in records if r.status == "pass")
    return round(100.0 * passes / len(records), 2)


def latest_iteration_records(records: list[ExecutionRecord]) -> list[ExecutionRecord]:
    if not records:
        return []
    last = max(r.iteration for r in records)
    return [r for r in records if r.iteration == last]


def fmt_pct(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


# ---------------------------------------------------------------------------
# Safety


@dataclass
class ApiEntry:
    symbol: str
    file: str
    is_public: bool
    requires_unsafe: bool


@dataclass
class ApiInventory:
    entries: list[ApiEntry] = field(default_factory=list)


@dataclass
class SafeRates:
    sr_a: float | None
    sr_f: float | None
    public_apis: int = 0
    safe_apis: int = 0
    files: int = 0
    safe_files: int = 0


_FN_DECL = re.compile(
    r"^[ \t]*(?P<vis>pub(?:\([^)]*\))?[ \t]+)?(?:const[ \t]+)?(?:async[ \t]+)?"
    r"(?P<unsafe>unsafe[ \t]+)?(?:extern[ \t]+\"[^\"]*\"[ \t]+)?fn[ \t]+(?P<name>\w+)",
    re.MULTILINE,
)
_CFG_TEST = re.compile(r"#\[cfg\(test\)\]")
_UNSAFE_TOKEN = re.compile(r"\bunsafe\b")


def _cfg_test_spans(text: str) -> list[tuple[int, int]]:
    """Character spans of #[cfg(test)] mod blocks, found lexically."""
    from .index import _brace_span  # shared scanner

    spans = []
    for m in _CFG_TEST.finditer(text):
        mod = re.compile(r"\bmod\s+\w+\s*\{").search(text, m.end())
        if not mod:
            continue
        close = _brace_span(text, mod.end() - 1)
        if close is not None:
            spans.append((m.start(), close))
    return spans


def _is_test_path(rel: Path) -> bool:
    return "tests" in rel.parts or "target" in rel.parts


def build_api_inventory(workspace: Path | str) -> ApiInventory:
    """Lexical scan of function items in non-test .rs files.

    A function requires unsafe when its declaration is marked `unsafe` or
    its body's brace span contains a word-boundary `unsafe` token.
    """
    from .index import _brace_span

    workspace = Path(workspace).resolve()
    inventory = ApiInventory()
    for path in sorted(workspace.rglob("*.rs")):
        rel = path.relative_to(workspace)
        if _is_test_path(rel):
            continue
        text = path.read_text(encoding="utf-8", errors="replace")
        test_spans = _cfg_test_spans(text)
        for m in _FN_DECL.finditer(text):
            if any(start <= m.start() <= end for start, end in test_spans):
                continue
            brace = text.find("{", m.end())
            semi = text.find(";", m.end())
            if brace == -1 or (semi != -1 and semi < brace):
                continue  # trait signature or extern decl, no body
            close = _brace_span(text, brace)
            body = text[brace : close + 1] if close is not None else ""
            inventory.entries.append(
                ApiEntry(
                    symbol=f"{rel.as_posix()}::{m.group('name')}",
                    file=rel.as_posix(),
                    is_public=m.group("vis") is not None,
                    requires_unsafe=bool(m.group("unsafe")) or bool(_UNSAFE_TOKEN.search(body)),
                )
            )
    return inventory


def compute_saferate(workspace: Path | str) -> SafeRates:
    """SR(A) over public functions and SR(F) over .rs files, two decimals.

    Computable over non-compiling output as well: the scan is purely
    lexical, so a workspace that fails cargo check still gets scores.
    """
    from .tools import count_unsafe_per_file

    workspace = Path(workspace).resolve()
    counts = {
        rel: n
        for rel, n in count_unsafe_per_file(workspace).items()
        if "target" not in Path(rel).parts
    }
    files = len(counts)
    safe_files = sum(1 for n in counts.values() if n == 0)

    inventory = build_api_inventory(workspace)
    publics = [e for e in inventory.entries if e.is_public]
    safe_publics = [e for e in publics if not e.requires_unsafe]

    sr_a = round(100.0 * len(safe_publics) / len(publics), 2) if publics else None
    sr_f = round(100.0 * safe_files / files, 2) if files else None
    return SafeRates(
        sr_a=sr_a,
        sr_f=sr_f,
        public_apis=len(publics),
        safe_apis=len(safe_publics),
        files=files,
        safe_files=safe_files,
    )


# ---------------------------------------------------------------------------
# Cross-test adaptation and evaluation


@dataclass
class TestFunction:
    file: str  # workspace-relative
    name: str
    text: str  # attribute through closing brace


_TEST_ATTR = re.compile(r"^[ \t]*#\[test\][ \t]*$", re.MULTILINE)


def extract_test_functions(workspace: Path | str) -> list[TestFunction]:
    """Every #[test] function in the workspace, by file then name."""
    from .index import _brace_span

    workspace = Path(workspace).resolve()
    found: list[TestFunction] = []
    for path in sorted(workspace.rglob("*.rs")):
        rel = path.relative_to(workspace)
        if "target" in rel.parts:
            continue
        text = path.read_text(encoding="utf-8", errors="replace")
        for m in _TEST_ATTR.finditer(text):
            fn = re.compile(r"fn\s+(\w+)").search(text, m.end())
            if not fn:
                continue
            brace = text.find("{", fn.end())
            if brace == -1:
                continue
            close = _brace_span(text, brace)
            if close is None:
                continue
            found.append(
                TestFunction(
                    file=rel.as_posix(),
                    name=fn.group(1),
                    text=text[m.start() : close + 1],
                )
            )
    return sorted(found, key=lambda t: (t.file, t.name))


@dataclass
class AdaptOutcome:
    test: str
    source_file: str
    status: str  # adapted | skipped
    reason: str = ""


def _snapshot_files(root: Path) -> dict[str, bytes]:
    snap = {}
    for path in sorted(root.rglob("*")):
        rel = path.relative_to(root)
        if "target" in rel.parts or not path.is_file():
            continue
        snap[rel.as_posix()] = path.read_bytes()
    return snap


def _restore_files(root: Path, snap: dict[str, bytes]) -> None:
    current = _snapshot_files(root)
    for rel in set(current) - set(snap):
        (root / rel).unlink()
    for rel, data in snap.items():
        if current.get(rel) != data:
            target = root / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)


def _suite_compiles(workspace: Path) -> tuple[bool, str]:
    import os

    env = {**os.environ, "RUSTFLAGS": "-Awarnings"}
    try:
        proc = subprocess.run(
            ["cargo", "test", "--no-run"],
            cwd=workspace,
            capture_output=True,
            text=True,
            timeout=300,
            env=env,
        )
    except subprocess.TimeoutExpired:
        return False, "(timed out)"
    return proc.returncode == 0, proc.stderr.strip()


def cross_test_adapt(
    from_ws: Path | str,
    to_ws: Path | str,
    backend: ModelBackend,
    record=None,
    max_turns: int = 40,
) -> list[AdaptOutcome]:
    """Port every donor test into the target workspace, one episode each.

    Each test ends up either adapted (and the suite compiles) or skipped
    with a reason; nothing is silently dropped. A skipped episode's edits
    are rolled back so one bad adaptation cannot poison the next.
    """
    from .prompts import CROSS_ADAPTER
    from .runtime import AGENT_TOOL_MATRIX

    from_ws, to_ws = Path(from_ws), Path(to_ws)
    tests = extract_test_functions(from_ws)
    if not tests:
        raise ValueError(f"no #[test] functions found in donor workspace {from_ws}")

    outcomes: list[AdaptOutcome] = []
    for test in tests:
        spec = AgentSpec(
            name="TestTranslator",
            system_prompt=CROSS_ADAPTER,
            tools=AGENT_TOOL_MATRIX["TestTranslator"],
            max_turns=max_turns,
        )
        deps = EpisodeDeps(
            c_repo_root=from_ws,
            rust_repo_root=to_ws,
            docs_root=to_ws,
            source_code=test.text,
            current_test_name=test.name,
        )
        task = (
            f"Donor test `{test.name}` from {test.file}:\n\n"
            f"```rust\n{test.text}\n```\n\n"
            "Adapt it to this workspace or reply SKIPPED with a reason."
        )
        snapshot = _snapshot_files(to_ws)
        transcript = run_episode(spec, deps, task, backend)
        if record is not None:
            record("CrossAdapter", transcript)
        final = transcript.final_text().strip()
        if final.upper().startswith("SKIPPED"):
            _restore_files(to_ws, snapshot)
            reason = final.split(":", 1)[1].strip() if ":" in final else "skipped by adapter"
            outcomes.append(
                AdaptOutcome(test=test.name, source_file=test.file, status="skipped", reason=reason)
            )
            continue
        ok, diagnostics = _suite_compiles(to_ws)
        if not ok:
            _restore_files(to_ws, snapshot)
            outcomes.append(
                AdaptOutcome(
                    test=test.name,
                    source_file=test.file,
                    status="skipped",
                    reason=f"adapted suite failed to compile: {diagnostics[:500]}",
                )
            )
            continue
        outcomes.append(AdaptOutcome(test=test.name, source_file=test.file, status="adapted"))
    return outcomes


@dataclass
class SuiteEvaluation:
    tpr: float | None
    records: list[ExecutionRecord] = field(default_factory=list)
    diagnostics: str = ""


def cross_evaluate(
    ws: Path | str, suites: dict[str, list[str]], keep_dirs: bool = False
) -> dict[str, SuiteEvaluation]:
    """Run the workspace under each named suite independently.

    `suites` maps a suite name to the workspace-relative test files that
    constitute it. Each suite is evaluated in a scratch copy of the
    workspace holding only that suite's test files, so one suite failing
    to compile cannot mask the other.
    """
    from .tools import run_test_suite

    ws = Path(ws).resolve()
    all_test_files = {rel for files in suites.values() for rel in files}
    results: dict[str, SuiteEvaluation] = {}
    for suite_name, files in suites.items():
        scratch = Path(tempfile.mkdtemp(prefix=f"cross-{suite_name}-"))
        try:
            shutil.copytree(ws, scratch, dirs_exist_ok=True, ignore=shutil.ignore_patterns("target"))
            for rel in all_test_files - set(files):
                victim = scratch / rel
                # Only integration test files are prunable; unit tests living
                # in src/ are part of the library and stay put.
                if victim.is_file() and "tests" in Path(rel).parts:
                    victim.unlink()
            try:
                suite = run_test_suite(scratch)
            except InfraError as exc:
                results[suite_name] = SuiteEvaluation(tpr=None, diagnostics=str(exc))
                continue
            wanted = set(files)
            records = []
            for s in suite:
                try:
                    rel = Path(s.src_path).resolve().relative_to(scratch.resolve()).as_posix()
                except ValueError:
                    rel = s.src_path
                if rel in wanted:
                    records.append(
                        ExecutionRecord(test=s.test, status=s.status, stdout=s.stdout, iteration=0)
                    )
            results[suite_name] = SuiteEvaluation(tpr=compute_tpr(records), records=records)
        finally:
            if not keep_dirs:
                shutil.rmtree(scratch, ignore_errors=True)
    return results


def aggregate_cells(cells: list[float | None]) -> float | None:
    """Average of the defined cells, two decimals; None if all are n/a."""
    defined = [c for c in cells if c is not None]
    if not defined:
        return None
    return round(sum(defined) / len(defined), 2)
