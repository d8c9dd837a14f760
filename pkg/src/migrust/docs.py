"""Documentation trees and feature extraction.

The doc engine turns an indexed repository into a tree of markdown files
(one per file cluster plus an architecture overview) and maps documented
features onto target crates. Source-side trees drive planning; target-side
trees are regenerated each refinement round and compared against the source.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

from .backends import ModelBackend
from .errors import StageError
from .index import FileCluster, RepoIndex, cluster_files

DEFAULT_SOURCE_CAP = 40_000

_HEADING = re.compile(r"^#\s+(.+)$", re.MULTILINE)
_FENCED_JSON = re.compile(r"```(?:json)?\s*\n(.*?)```", re.DOTALL)
_NAME_CLEAN = re.compile(r"[^a-z0-9_]+")

DOCGEN_SYSTEM = """\
You are a software documentation engineer writing a migration blueprint for \
a codebase that will be reimplemented in Rust. Describe each subsystem in \
feature-oriented terms: what it does, the public APIs it exposes, how data \
flows through it, and the design decisions worth preserving. Do not narrate \
code line by line. Reply with the markdown document body only, starting with \
a single `# Title` heading."""

FEATURE_SYSTEM = """\
You partition a documented codebase into Rust crates, one crate per \
top-level feature. Reply with a fenced ```json code block containing an \
array of objects with keys "feature_name" (lowercase snake_case, legal as a \
directory and package name), "clusters" (the cluster ids the feature owns), \
and "summary" (one sentence). Every cluster must be claimed by exactly one \
feature."""

FEATURE_REPAIR = """\
Your previous reply could not be parsed as a JSON feature list. Reply again \
with only a fenced ```json block holding a non-empty array of \
{"feature_name", "clusters", "summary"} objects."""


@dataclass
class DocEntry:
    path: str  # relative to the tree root, forward slashes
    title: str


@dataclass
class DocTree:
    """A directory of markdown documents with a deterministic manifest."""

    root: Path
    side: str  # source | target
    manifest: list[DocEntry] = field(default_factory=list)


@dataclass
class FeatureSpec:
    """One documented feature, mapped to one target crate."""

    feature_name: str
    summary: str
    source_clusters: list[str]
    doc_files: list[str]


def truncate_middle(text: str, cap: int) -> str:
    """Cap text length, keeping the head and tail around an elision marker."""
    if cap <= 0 or len(text) <= cap:
        return text
    head = cap * 2 // 3
    tail = cap - head
    dropped = len(text) - cap
    return f"{text[:head]}\n...[{dropped} characters elided]...\n{text[-tail:]}"


def sanitize_feature_name(raw: str) -> str:
    name = _NAME_CLEAN.sub("_", raw.strip().lower()).strip("_")
    if not name:
        return "feature"
    if name[0].isdigit():
        name = f"f_{name}"
    return name


def parse_json_block(text: str):
    """Extract and parse the first fenced JSON block, or the whole text."""
    m = _FENCED_JSON.search(text)
    candidates = [m.group(1)] if m else []
    candidates.append(text)
    for candidate in candidates:
        try:
            return json.loads(candidate)
        except json.JSONDecodeError:
            continue
    return None


def _title_of(text: str, fallback: str) -> str:
    m = _HEADING.search(text)
    return m.group(1).strip() if m else fallback


def read_doc_text(docs_root: Path, file_path: str) -> str:
    """Documentation lookup with the miss contract agents rely on.

    Appends `.md` when missing. A miss (or any path escaping the root) is a
    normal string result listing up to 10 available documents, never an
    exception.
    """
    docs_root = Path(docs_root).resolve()
    if not file_path.endswith(".md"):
        file_path = f"{file_path}.md"
    try:
        full = (docs_root / file_path.lstrip("/")).resolve()
        confined = full == docs_root or full.is_relative_to(docs_root)
    except (OSError, ValueError):
        confined = False
        full = None
    if confined and full is not None and full.is_file():
        return full.read_text(encoding="utf-8")
    available = sorted(
        p.relative_to(docs_root).as_posix()
        for p in docs_root.rglob("*.md")
        if p.is_file()
    ) if docs_root.is_dir() else []
    return (
        f"Documentation file not found: {file_path}\n"
        f"Available files: {', '.join(available[:10])}"
    )


def read_doc_file(doc: DocTree, rel_path: str) -> str:
    return read_doc_text(doc.root, rel_path)


def load_doc_tree(root: Path | str, side: str) -> DocTree:
    """Rebuild a DocTree by scanning its directory (lexicographic order)."""
    root = Path(root)
    entries = []
    for path in sorted(root.rglob("*.md")):
        rel = path.relative_to(root).as_posix()
        entries.append(DocEntry(path=rel, title=_title_of(path.read_text(encoding="utf-8"), rel)))
    return DocTree(root=root, side=side, manifest=entries)


def _cluster_source(index: RepoIndex, cluster: FileCluster, cap: int) -> str:
    parts = []
    for rel in cluster.files:
        file_comp = next(
            (c for c in index.components.values() if c.kind == "file" and c.file_path == rel),
            None,
        )
        if file_comp is not None:
            parts.append(f"==== {rel} ====\n{file_comp.source_code}")
    return truncate_middle("\n\n".join(parts), cap)


def generate_docs(
    index: RepoIndex,
    side: str,
    backend: ModelBackend,
    out_root: Path | str,
    clusters: list[FileCluster] | None = None,
    source_cap: int = DEFAULT_SOURCE_CAP,
    record=None,
) -> DocTree:
    """Generate one markdown document per cluster plus an overview.

    `record(agent_name, messages, turn)` is invoked for every backend
    exchange so the caller can persist transcripts and token usage.
    """
    if clusters is None:
        clusters = cluster_files(index.components)
    if not clusters:
        raise ValueError("cannot generate documentation for an empty cluster list")

    tree_root = Path(out_root) / side
    (tree_root / "clusters").mkdir(parents=True, exist_ok=True)
    entries: list[DocEntry] = []
    summaries: list[str] = []

    def _call(user: str) -> str:
        messages = [
            {"role": "system", "content": DOCGEN_SYSTEM},
            {"role": "user", "content": user},
        ]
        started = time.monotonic()
        turn = backend.complete("DocGen", messages)
        if record is not None:
            record("DocGen", messages, turn, wall_time=time.monotonic() - started)
        return turn.content

    try:
        for cluster in clusters:
            user = (
                f"Cluster id: {cluster.cluster_id}\n"
                f"Files:\n" + "\n".join(f"- {f}" for f in cluster.files) + "\n\n"
                f"Source (may be truncated):\n{_cluster_source(index, cluster, source_cap)}"
            )
            text = _call(user)
            rel = f"clusters/{cluster.cluster_id}.md"
            (tree_root / rel).write_text(text, encoding="utf-8")
            entries.append(DocEntry(path=rel, title=_title_of(text, cluster.cluster_id)))
            summaries.append(f"## {cluster.cluster_id}\n{text[:400]}")

        overview_user = (
            "Write the architecture overview for the whole repository: subsystem "
            "roles, how data flows between them, and the public surface to "
            "preserve. Cluster documents follow.\n\n" + "\n\n".join(summaries)
        )
        overview = _call(overview_user)
        (tree_root / "overview.md").write_text(overview, encoding="utf-8")
        entries.append(DocEntry(path="overview.md", title=_title_of(overview, "overview")))
    except Exception as exc:
        raise StageError(
            f"documentation generation failed for side {side}: {exc}",
            partial=sorted(entries, key=lambda e: e.path),
        ) from exc

    entries.sort(key=lambda e: e.path)
    return DocTree(root=tree_root, side=side, manifest=entries)


def extract_features(
    doc: DocTree,
    backend: ModelBackend,
    clusters: list[FileCluster],
    record=None,
) -> list[FeatureSpec]:
    """Map documented features onto crates, one feature per crate.

    Guarantees at least one feature, unique sanitized names, and full
    cluster coverage: duplicate cluster claims keep the first claimant and
    unclaimed clusters become synthesized single-cluster features.
    """
    if doc.side != "source":
        raise ValueError("features are extracted from the source-side tree only")

    overview = read_doc_text(doc.root, "overview.md")
    user = (
        "Clusters:\n"
        + "\n".join(f"- {c.cluster_id}: {c.label}" for c in clusters)
        + f"\n\nArchitecture overview:\n{overview}"
    )

    def _ask(prompt: str) -> list | None:
        messages = [
            {"role": "system", "content": FEATURE_SYSTEM},
            {"role": "user", "content": prompt},
        ]
        started = time.monotonic()
        turn = backend.complete("FeatureExtractor", messages)
        if record is not None:
            record("FeatureExtractor", messages, turn, wall_time=time.monotonic() - started)
        parsed = parse_json_block(turn.content)
        return parsed if isinstance(parsed, list) and parsed else None

    raw = _ask(user)
    if raw is None:
        raw = _ask(f"{FEATURE_REPAIR}\n\n{user}")
    if raw is None:
        raise StageError("feature extraction returned no parseable feature list")

    known = {c.cluster_id for c in clusters}
    claimed: set[str] = set()
    taken_names: set[str] = set()
    features: list[FeatureSpec] = []
    for item in raw:
        if not isinstance(item, dict):
            continue
        name = sanitize_feature_name(str(item.get("feature_name", "")))
        base, n = name, 2
        while name in taken_names:
            name = f"{base}_{n}"
            n += 1
        taken_names.add(name)
        mine = []
        for cid in item.get("clusters", []):
            # First claim wins; unknown ids are dropped.
            if cid in known and cid not in claimed:
                claimed.add(cid)
                mine.append(cid)
        features.append(
            FeatureSpec(
                feature_name=name,
                summary=str(item.get("summary", "")).strip(),
                source_clusters=mine,
                doc_files=[f"clusters/{cid}.md" for cid in mine],
            )
        )

    for cid in sorted(known - claimed):
        name = sanitize_feature_name(cid)
        base, n = name, 2
        while name in taken_names:
            name = f"{base}_{n}"
            n += 1
        taken_names.add(name)
        features.append(
            FeatureSpec(
                feature_name=name,
                summary=f"Synthesized feature covering unclaimed cluster {cid}.",
                source_clusters=[cid],
                doc_files=[f"clusters/{cid}.md"],
            )
        )

    features = [f for f in features if f.source_clusters]
    if not features:
        raise StageError("feature extraction produced no feature with cluster coverage")
    return features


def write_features(features: list[FeatureSpec], path: Path | str) -> None:
    rows = [
        {
            "feature_name": f.feature_name,
            "summary": f.summary,
            "source_clusters": f.source_clusters,
            "doc_files": f.doc_files,
        }
        for f in features
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")


def load_features(path: Path | str) -> list[FeatureSpec]:
    rows = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        FeatureSpec(
            feature_name=r["feature_name"],
            summary=r.get("summary", ""),
            source_clusters=list(r.get("source_clusters", [])),
            doc_files=list(r.get("doc_files", [])),
        )
        for r in rows
    ]
