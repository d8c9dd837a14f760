"""Run reports: schema-validated JSON, delimited exports, and figures.

Every report.json emission is validated against the schema below. The
figure renderers sit beside the delimited writers so a report always ships
as machine-readable values plus charts of the same numbers.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import jsonschema

REPORT_SCHEMA = {
    "type": "object",
    "required": ["run_id", "stages", "metrics", "cost", "artifacts"],
    "additionalProperties": False,
    "properties": {
        "run_id": {"type": "string"},
        "stages": {
            "type": "object",
            "additionalProperties": {
                "type": "string",
                "enum": ["completed", "failed", "skipped", "disabled"],
            },
        },
        "metrics": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "compilable": {"type": "boolean"},
                "fcv": {"type": ["number", "null"]},
                "tpr": {"type": ["number", "null"]},
                "sr_a": {"type": ["number", "null"]},
                "sr_f": {"type": ["number", "null"]},
            },
        },
        "cost": {
            "type": "object",
            "additionalProperties": {
                "type": "object",
                "properties": {
                    "prompt_tokens": {"type": "integer"},
                    "completion_tokens": {"type": "integer"},
                    "episodes": {"type": "integer"},
                    "iterations": {"type": ["integer", "null"]},
                    "estimated_usd": {"type": "number"},
                },
            },
        },
        "artifacts": {"type": "object"},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}


def write_report(report: dict, path: Path | str) -> None:
    """Validate against the published schema, then write."""
    jsonschema.validate(report, REPORT_SCHEMA)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_report(path: Path | str) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def write_metrics_csv(report: dict, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        for key in sorted(report.get("metrics", {})):
            writer.writerow([key, report["metrics"][key]])
        for stage in sorted(report.get("stages", {})):
            writer.writerow([f"stage.{stage}", report["stages"][stage]])


def write_cross_csv(cells: list[dict], path: Path | str) -> None:
    """Cross-evaluation grid: one row per (workspace, suite) cell."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["workspace", "suite", "tpr", "tests"])
        for cell in cells:
            tpr = cell.get("tpr")
            writer.writerow(
                [
                    cell.get("workspace", ""),
                    cell.get("suite", ""),
                    "n/a" if tpr is None else f"{tpr:.2f}",
                    cell.get("tests", 0),
                ]
            )


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_refinement_curve(versions: list[dict], out_path: Path | str) -> Path | None:
    """Score trajectory across refinement iterations."""
    if not versions:
        return None
    plt = _pyplot()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    xs = [v["index"] for v in versions]
    ys = [v["score"] for v in versions]
    fig, ax = plt.subplots(figsize=(5, 3.2))
    ax.plot(xs, ys, marker="o")
    best = max(range(len(ys)), key=lambda i: (ys[i], -xs[i]))
    ax.scatter([xs[best]], [ys[best]], s=90, facecolors="none", edgecolors="tab:red", label="selected")
    ax.set_xlabel("refinement iteration")
    ax.set_ylabel("feature coverage score")
    ax.set_ylim(0, 1.05)
    ax.set_xticks(xs)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_metrics_bars(metrics: dict, out_path: Path | str) -> Path | None:
    """Bar view of the percentage metrics (TPR, SafeRate A/F, FCV)."""
    labels, values = [], []
    if metrics.get("fcv") is not None:
        labels.append("FCV")
        values.append(metrics["fcv"] * 100.0)
    for key, label in (("tpr", "TPR"), ("sr_a", "SR (A)"), ("sr_f", "SR (F)")):
        if metrics.get(key) is not None:
            labels.append(label)
            values.append(metrics[key])
    if not labels:
        return None
    plt = _pyplot()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(5, 3.2))
    bars = ax.bar(labels, values, color="tab:blue")
    ax.bar_label(bars, fmt="%.2f")
    ax.set_ylabel("percent")
    ax.set_ylim(0, 110)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_cross_grid(cells: list[dict], out_path: Path | str) -> Path | None:
    """Grouped bars: TPR per workspace under each suite."""
    if not cells:
        return None
    plt = _pyplot()
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    suites = sorted({c["suite"] for c in cells})
    workspaces = sorted({c["workspace"] for c in cells})
    width = 0.8 / max(1, len(suites))
    fig, ax = plt.subplots(figsize=(5.5, 3.2))
    for si, suite in enumerate(suites):
        xs, ys = [], []
        for wi, ws in enumerate(workspaces):
            cell = next(
                (c for c in cells if c["suite"] == suite and c["workspace"] == ws), None
            )
            if cell and cell.get("tpr") is not None:
                xs.append(wi + si * width)
                ys.append(cell["tpr"])
        ax.bar(xs, ys, width=width, label=f"suite: {suite}")
    ax.set_xticks([i + width * (len(suites) - 1) / 2 for i in range(len(workspaces))])
    ax.set_xticklabels(workspaces, rotation=15, ha="right")
    ax.set_ylabel("TPR (%)")
    ax.set_ylim(0, 110)
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def render_run_figures(versions: list[dict], metrics: dict, out_dir: Path | str) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    path = render_refinement_curve(versions, out_dir / "refinement_scores.png")
    if path:
        written.append(path)
    path = render_metrics_bars(metrics, out_dir / "metrics.png")
    if path:
        written.append(path)
    return written
