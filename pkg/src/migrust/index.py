"""Lexical repository indexing: components, file clusters, dependency graph.

The indexer is deliberately shallow. Agents read raw source themselves, so
the index only needs to carve a repository into addressable spans (functions,
aggregate types, macros, whole files) and record which indexed symbols a
function body appears to call. No preprocessing, no include resolution, no
type checking.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

C_EXTENSIONS = (".c", ".h")
RUST_EXTENSION = ".rs"

# A C definition line: starts at column 0 with a type-ish token and contains
# `name(`. Declarations are filtered later by looking for `;` before `{`.
_C_SIG = re.compile(r"^[A-Za-z_][\w\s\*]*?\b([A-Za-z_]\w*)\s*\(")
_C_AGGREGATE = re.compile(r"^(typedef\s+)?(struct|enum|union)(\s+[A-Za-z_]\w*)?\s*\{")
_C_DEFINE = re.compile(r"^\s*#\s*define\s+([A-Za-z_]\w*)")
_CALL_TOKEN = re.compile(r"\b([A-Za-z_]\w*)\s*\(")
_RUST_FN = re.compile(
    r"^\s*(?:pub(?:\([^)]*\))?\s+)?(?:const\s+)?(?:async\s+)?(?:unsafe\s+)?"
    r"(?:extern\s+\"[^\"]*\"\s+)?fn\s+([A-Za-z_]\w*)"
)
_RUST_TYPE = re.compile(r"^\s*(?:pub(?:\([^)]*\))?\s+)?(struct|enum)\s+([A-Za-z_]\w*)")
_CHAR_LITERAL = re.compile(r"'(\\.|[^\\'])'")

_RUST_SKIP_DIRS = {"target", ".git"}
_C_SKIP_DIRS = {".git"}


@dataclass
class Component:
    """One indexed unit of source, addressable by qualified id."""

    id: str
    name: str
    kind: str  # function | struct | enum | macro | file
    file_path: str  # repository-relative, forward slashes
    source_code: str
    line_range: tuple[int, int]  # 1-based, inclusive


@dataclass
class DependencyGraph:
    """Symbol-level call edges keyed by component id."""

    entries: dict[str, dict] = field(default_factory=dict)

    def to_json_obj(self) -> dict:
        return {
            cid: {
                "name": e["name"],
                "source_code": e["source_code"],
                "edges": list(e["edges"]),
            }
            for cid, e in self.entries.items()
        }


@dataclass
class FileCluster:
    """A group of related source files, the unit of documentation."""

    cluster_id: str
    files: list[str]
    label: str


@dataclass
class RepoIndex:
    """Components keyed by id plus the derived dependency graph."""

    root: Path
    components: dict[str, Component]
    graph: DependencyGraph
    language: str = "c"

    def files(self) -> list[str]:
        return sorted({c.file_path for c in self.components.values()})


def _read_text(path: Path) -> str:
    return path.read_text(encoding="utf-8", errors="replace")


def _brace_span(text: str, open_idx: int) -> int | None:
    """Index of the `}` matching the `{` at open_idx, or None.

    Skips braces inside strings, chars, and comments. Single quotes only
    open a char state when they actually start a char literal, so Rust
    lifetimes do not derail the scan.
    """
    depth = 0
    i = open_idx
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "/" and i + 1 < n:
            nxt = text[i + 1]
            if nxt == "/":
                j = text.find("\n", i)
                i = n if j == -1 else j
                continue
            if nxt == "*":
                j = text.find("*/", i + 2)
                i = n if j == -1 else j + 2
                continue
        if ch == '"':
            i += 1
            while i < n and text[i] != '"':
                i += 2 if text[i] == "\\" else 1
            i += 1
            continue
        if ch == "'":
            m = _CHAR_LITERAL.match(text, i)
            if m:
                i = m.end()
                continue
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return i
        i += 1
    return None


def _line_of(text: str, idx: int) -> int:
    return text.count("\n", 0, idx) + 1


def _span_lines(lines: list[str], start: int, end: int) -> str:
    return "\n".join(lines[start - 1 : end])


def _qualify(rel: Path, symbol: str | None = None) -> str:
    parts = list(rel.parent.parts) if rel.parent != Path(".") else []
    parts.append(rel.stem)
    if symbol:
        parts.append(symbol)
    return ".".join(parts)


class _IdAllocator:
    def __init__(self):
        self._seen: set[str] = set()

    def take(self, candidate: str) -> str:
        if candidate not in self._seen:
            self._seen.add(candidate)
            return candidate
        n = 2
        while f"{candidate}_{n}" in self._seen:
            n += 1
        final = f"{candidate}_{n}"
        self._seen.add(final)
        return final


def _index_c_file(text: str, rel: Path, ids: _IdAllocator) -> list[Component]:
    lines = text.split("\n")
    components: list[Component] = []
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1

    lineno = 0
    while lineno < len(lines):
        line = lines[lineno]

        m = _C_DEFINE.match(line)
        if m:
            end = lineno
            while end < len(lines) - 1 and lines[end].rstrip().endswith("\\"):
                end += 1
            components.append(
                Component(
                    id=ids.take(_qualify(rel, m.group(1))),
                    name=m.group(1),
                    kind="macro",
                    file_path=rel.as_posix(),
                    source_code=_span_lines(lines, lineno + 1, end + 1),
                    line_range=(lineno + 1, end + 1),
                )
            )
            lineno = end + 1
            continue

        m = _C_AGGREGATE.match(line)
        if m:
            open_idx = offsets[lineno] + line.index("{")
            close = _brace_span(text, open_idx)
            if close is not None:
                tail = text[close : close + 200]
                tm = re.match(r"\}\s*([A-Za-z_]\w*)?\s*;", tail)
                tag = (m.group(3) or "").strip()
                name = tag or (tm.group(1) if tm and tm.group(1) else "")
                end_idx = close + (tm.end() - 1 if tm else 0)
                if name:
                    kind = "enum" if m.group(2) == "enum" else "struct"
                    end_line = _line_of(text, end_idx)
                    components.append(
                        Component(
                            id=ids.take(_qualify(rel, name)),
                            name=name,
                            kind=kind,
                            file_path=rel.as_posix(),
                            source_code=_span_lines(lines, lineno + 1, end_line),
                            line_range=(lineno + 1, end_line),
                        )
                    )
                lineno = _line_of(text, close)
                continue

        m = _C_SIG.match(line)
        if m and not line.lstrip().startswith(("#", "//", "*", "/*")):
            # Walk forward to the first `;` or `{`; only `{` means definition.
            probe = offsets[lineno]
            window = text[probe : probe + 4096]
            semi = window.find(";")
            brace = window.find("{")
            if brace != -1 and (semi == -1 or brace < semi):
                # Reject control-flow keywords masquerading as names.
                if m.group(1) not in ("if", "for", "while", "switch", "return", "sizeof"):
                    close = _brace_span(text, probe + brace)
                    if close is not None:
                        end_line = _line_of(text, close)
                        components.append(
                            Component(
                                id=ids.take(_qualify(rel, m.group(1))),
                                name=m.group(1),
                                kind="function",
                                file_path=rel.as_posix(),
                                source_code=_span_lines(lines, lineno + 1, end_line),
                                line_range=(lineno + 1, end_line),
                            )
                        )
                        lineno = end_line
                        continue
        lineno += 1
    return components


def _index_rust_file(text: str, rel: Path, ids: _IdAllocator) -> list[Component]:
    lines = text.split("\n")
    components: list[Component] = []
    offsets = []
    pos = 0
    for line in lines:
        offsets.append(pos)
        pos += len(line) + 1

    for lineno, line in enumerate(lines):
        m = _RUST_FN.match(line)
        kind, name = None, None
        if m:
            kind, name = "function", m.group(1)
        else:
            t = _RUST_TYPE.match(line)
            if t:
                kind, name = t.group(1), t.group(2)
        if not kind:
            continue
        brace = text.find("{", offsets[lineno])
        semi = text.find(";", offsets[lineno])
        if brace == -1 or (semi != -1 and semi < brace):
            continue
        close = _brace_span(text, brace)
        if close is None:
            continue
        end_line = _line_of(text, close)
        components.append(
            Component(
                id=ids.take(_qualify(rel, name)),
                name=name,
                kind=kind,
                file_path=rel.as_posix(),
                source_code=_span_lines(lines, lineno + 1, end_line),
                line_range=(lineno + 1, end_line),
            )
        )
    return components


def _build_graph(components: dict[str, Component]) -> DependencyGraph:
    by_name: dict[str, list[str]] = {}
    for cid, comp in components.items():
        if comp.kind != "file":
            by_name.setdefault(comp.name, []).append(cid)

    graph = DependencyGraph()
    for cid, comp in components.items():
        edges: list[str] = []
        if comp.kind in ("function", "macro"):
            called = {t.group(1) for t in _CALL_TOKEN.finditer(comp.source_code)}
            for name in called:
                for target in by_name.get(name, ()):
                    if target != cid:
                        edges.append(target)
        graph.entries[cid] = {
            "name": comp.name,
            "source_code": comp.source_code,
            "edges": sorted(set(edges)),
        }
    return graph


def _walk_sources(root: Path, extensions: tuple[str, ...], skip: set[str]) -> list[Path]:
    found = []
    for path in sorted(root.rglob("*")):
        if not path.is_file() or path.suffix not in extensions:
            continue
        if any(part in skip for part in path.relative_to(root).parts[:-1]):
            continue
        found.append(path)
    return found


def index_repository(root: Path | str, warnings: list[str] | None = None) -> RepoIndex:
    """Index a C repository into components plus a call-token graph.

    Raises FileNotFoundError for a missing root and ValueError when the
    tree holds no `.c`/`.h` files. Unreadable files are skipped, with a
    note appended to `warnings` when provided.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"repository root does not exist: {root}")
    sources = _walk_sources(root, C_EXTENSIONS, _C_SKIP_DIRS)
    if not sources:
        raise ValueError(f"no C sources (.c/.h) found under {root}")

    ids = _IdAllocator()
    components: dict[str, Component] = {}
    for path in sources:
        rel = path.relative_to(root)
        try:
            text = _read_text(path)
        except OSError as exc:
            if warnings is not None:
                warnings.append(f"skipped unreadable file {rel.as_posix()}: {exc}")
            continue
        for comp in _index_c_file(text, rel, ids):
            components[comp.id] = comp
        file_comp = Component(
            id=ids.take(_qualify(rel)),
            name=rel.name,
            kind="file",
            file_path=rel.as_posix(),
            source_code=text,
            line_range=(1, max(1, text.count("\n") + 1)),
        )
        components[file_comp.id] = file_comp

    return RepoIndex(root=root, components=components, graph=_build_graph(components))


def index_rust_workspace(root: Path | str, warnings: list[str] | None = None) -> RepoIndex:
    """Index a translated Rust workspace the same way, for target-side docs."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"workspace root does not exist: {root}")
    sources = _walk_sources(root, (RUST_EXTENSION,), _RUST_SKIP_DIRS)

    ids = _IdAllocator()
    components: dict[str, Component] = {}
    for path in sources:
        rel = path.relative_to(root)
        try:
            text = _read_text(path)
        except OSError as exc:
            if warnings is not None:
                warnings.append(f"skipped unreadable file {rel.as_posix()}: {exc}")
            continue
        for comp in _index_rust_file(text, rel, ids):
            components[comp.id] = comp
        file_comp = Component(
            id=ids.take(_qualify(rel)),
            name=rel.name,
            kind="file",
            file_path=rel.as_posix(),
            source_code=text,
            line_range=(1, max(1, text.count("\n") + 1)),
        )
        components[file_comp.id] = file_comp

    return RepoIndex(
        root=root, components=components, graph=_build_graph(components), language="rust"
    )


def cluster_files(components: dict[str, Component] | list[Component]) -> list[FileCluster]:
    """Partition indexed files by top-level directory.

    Singleton header clusters are folded into the cluster holding the
    same-stem `.c` file, so `include/a.h` travels with `src/a.c`.
    """
    if isinstance(components, dict):
        components = list(components.values())
    if not components:
        raise ValueError("cannot cluster an empty component list")

    files = sorted({c.file_path for c in components})
    groups: dict[str, list[str]] = {}
    for f in files:
        parts = f.split("/")
        top = parts[0] if len(parts) > 1 else "root"
        groups.setdefault(top, []).append(f)

    # Fold singleton header clusters into their .c sibling's cluster.
    for cid in sorted(groups):
        members = groups[cid]
        if len(members) != 1 or not members[0].endswith(".h"):
            continue
        stem = Path(members[0]).stem
        for other, other_files in sorted(groups.items()):
            if other == cid:
                continue
            if any(Path(f).stem == stem and f.endswith(".c") for f in other_files):
                other_files.append(members[0])
                other_files.sort()
                del groups[cid]
                break

    clusters = [
        FileCluster(
            cluster_id=cid,
            files=sorted(fs),
            label=f"{len(fs)} file(s) under {cid}",
        )
        for cid, fs in sorted(groups.items())
    ]
    return clusters


def write_dependency_graph(graph: DependencyGraph, path: Path | str) -> None:
    """Serialize the graph as JSON keyed by component id."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(
            json.dumps(graph.to_json_obj(), indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
    except OSError as exc:
        raise OSError(f"cannot write dependency graph to {path}: {exc}") from exc


def load_dependency_graph(path: Path | str) -> DependencyGraph:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    graph = DependencyGraph()
    for cid, entry in data.items():
        graph.entries[cid] = {
            "name": entry.get("name", ""),
            "source_code": entry.get("source_code", ""),
            "edges": list(entry.get("edges", [])),
        }
    return graph


def write_index_manifest(index: RepoIndex, path: Path | str) -> None:
    """Persist the component listing (ids, kinds, paths, line ranges)."""
    rows = [
        {
            "id": c.id,
            "kind": c.kind,
            "path": c.file_path,
            "start_line": c.line_range[0],
            "end_line": c.line_range[1],
        }
        for c in index.components.values()
    ]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
