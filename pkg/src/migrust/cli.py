"""Operator CLI: launch runs, drive individual stages, evaluate, inspect.

Exit codes: 0 success, 1 pipeline or metric failure, 2 usage/config error.
Structural settings live in a JSON config file so a run is reproducible from
one artifact; flags only override. Credentials are only ever named by an
environment variable in config, never stored.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .backends import HttpBackend, ModelBackend, ReplayBackend
from .errors import ConfigError, InfraError, MigrustError, StageError
from .metrics import (
    aggregate_cells,
    compute_saferate,
    compute_tpr,
    cross_evaluate,
    cross_test_adapt,
    extract_test_functions,
    fmt_pct,
    latest_iteration_records,
    load_execution_records,
    load_rubric,
    compute_fcv,
)
from .pipeline import PipelineRun, RunConfig, StageLedger, RunPaths

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

_TOP_KEYS = {
    "source_root",
    "output_root",
    "run_id",
    "backend",
    "K",
    "L",
    "max_turns",
    "stages",
    "truncation",
    "figures",
    "search_engine",
    "prices",
}
_BACKEND_KEYS = {
    "mode",
    "script_path",
    "endpoint",
    "model",
    "credential_env_var",
    "temperature",
    "retries",
    "timeout",
}
_TRUNCATION_KEYS = {"doc_source_cap", "judge_doc_cap"}
_PRICE_KEYS = {"input_per_million", "output_per_million"}


def _reject_unknown(obj: dict, allowed: set[str], context: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown config key {key!r} in {context}")


def build_backend(spec: dict, base_dir: Path) -> ModelBackend:
    _reject_unknown(spec, _BACKEND_KEYS, "backend")
    mode = spec.get("mode")
    if mode == "replay":
        script = spec.get("script_path")
        if not script:
            raise ConfigError("replay backend requires script_path")
        script_path = Path(script)
        if not script_path.is_absolute():
            script_path = base_dir / script_path
        return ReplayBackend.from_file(script_path)
    if mode == "http":
        for required in ("endpoint", "model", "credential_env_var"):
            if not spec.get(required):
                raise ConfigError(f"http backend requires {required}")
        return HttpBackend(
            endpoint=spec["endpoint"],
            model=spec["model"],
            credential_env_var=spec["credential_env_var"],
            temperature=float(spec.get("temperature", 0.0)),
            retries=int(spec.get("retries", 3)),
            timeout=int(spec.get("timeout", 300)),
        )
    raise ConfigError(f"backend mode must be 'replay' or 'http', got {mode!r}")


def load_config(path: Path | str) -> RunConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}")
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    _reject_unknown(raw, _TOP_KEYS, "config")
    for required in ("source_root", "output_root", "backend"):
        if required not in raw:
            raise ConfigError(f"config is missing required key {required!r}")

    truncation = raw.get("truncation", {})
    _reject_unknown(truncation, _TRUNCATION_KEYS, "truncation")
    prices = raw.get("prices", {})
    _reject_unknown(prices, _PRICE_KEYS, "prices")

    base_dir = path.parent
    source_root = Path(raw["source_root"])
    output_root = Path(raw["output_root"])
    if not source_root.is_absolute():
        source_root = base_dir / source_root
    if not output_root.is_absolute():
        output_root = base_dir / output_root

    return RunConfig(
        source_root=source_root,
        output_root=output_root,
        backend=build_backend(raw["backend"], base_dir),
        run_id=str(raw.get("run_id", "run")),
        refine_rounds=int(raw.get("K", 5)),
        revise_rounds=int(raw.get("L", 5)),
        max_turns=dict(raw.get("max_turns", {})),
        stages=dict(raw.get("stages", {})),
        doc_source_cap=int(truncation.get("doc_source_cap", 40_000)),
        judge_doc_cap=int(truncation.get("judge_doc_cap", 30_000)),
        figures=bool(raw.get("figures", True)),
        search_engine=str(raw.get("search_engine", "auto")),
        price_input_per_million=prices.get("input_per_million"),
        price_output_per_million=prices.get("output_per_million"),
    )


class _RunLock:
    """Exclusive ownership of one run directory for the process lifetime."""

    def __init__(self, lock_path: Path):
        self.lock_path = lock_path
        self._fd: int | None = None

    def __enter__(self):
        self.lock_path.parent.mkdir(parents=True, exist_ok=True)
        try:
            self._fd = os.open(self.lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise ConfigError(
                f"run directory is locked by another command: {self.lock_path}"
            )
        os.write(self._fd, str(os.getpid()).encode())
        return self

    def __exit__(self, *exc_info):
        if self._fd is not None:
            os.close(self._fd)
        self.lock_path.unlink(missing_ok=True)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    run = PipelineRun(cfg)
    with _RunLock(run.paths.lock):
        report = run.run_full()
    print(f"run {report['run_id']} finished")
    for stage, outcome in report["stages"].items():
        print(f"  {stage:<12} {outcome}")
    metrics = report["metrics"]
    if metrics:
        print(
            "  metrics: compilable="
            + str(metrics.get("compilable"))
            + f" FCV={metrics.get('fcv')}"
            + f" TPR={fmt_pct(metrics.get('tpr'))}"
            + f" SR(A)={fmt_pct(metrics.get('sr_a'))}"
            + f" SR(F)={fmt_pct(metrics.get('sr_f'))}"
        )
    print(f"  report: {run.paths.report_json}")
    faulted = any(v == "failed" for v in report["stages"].values())
    if faulted or not metrics.get("compilable"):
        return EXIT_FAILURE
    return EXIT_OK


def cmd_stage(args) -> int:
    cfg = load_config(args.config)
    run = PipelineRun(cfg)
    with _RunLock(run.paths.lock):
        if args.name == "docgen":
            run.stage1_docgen()
        elif args.name == "translate":
            _, features = run._load_stage1()
            run.stage2_translate(features)
        elif args.name == "synthesize":
            if not run.state.get("crates"):
                raise StageError("stage prerequisite missing: translate has not run")
            from .docs import load_features
            from .pipeline import CratePlan

            features = load_features(run.paths.features_json)
            by_name = {f.feature_name: f for f in features}
            plans = [
                CratePlan(
                    feature=by_name[row["feature"]],
                    crate_dir=run.paths.root / row["crate_dir"],
                    plan_path=run.paths.root / row["crate_dir"] / "IMPLEMENTATION_PLAN.md",
                    status=row["status"],
                )
                for row in run.state["crates"]
                if row["feature"] in by_name
            ]
            run.stage3_synthesize(plans)
        elif args.name == "refine":
            if run.ledger.stage_outcomes.get("synthesize") != "completed":
                raise StageError("stage prerequisite missing: synthesize has not completed")
            s_doc, _ = run._load_stage1()
            run.stage4_refine(run.paths.workspace, s_doc)
        elif args.name == "testgen":
            t_star = run.state.get("t_star")
            if not t_star:
                raise StageError("stage prerequisite missing: refine has not selected a version")
            run.stage5_testgen(run.paths.root / t_star["snapshot"])
        elif args.name == "revise":
            if not run.state.get("exec_tests_ready"):
                raise StageError("stage prerequisite missing: testgen has not completed")
            run.stage5_revise(run.paths.workspace)
        else:
            raise ConfigError(f"unknown stage name: {args.name}")
    print(f"stage {args.name} completed for run {cfg.run_id}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    out_dir = Path(args.out) if args.out else None
    printed_anything = False

    if args.saferate:
        rates = compute_saferate(args.workspace)
        print(f"SafeRate (A/F): {fmt_pct(rates.sr_a)} / {fmt_pct(rates.sr_f)}")
        printed_anything = True
        if out_dir and args.figures:
            from .report import render_metrics_bars

            render_metrics_bars(
                {"sr_a": rates.sr_a, "sr_f": rates.sr_f}, out_dir / "saferate.png"
            )

    if args.fcv:
        if not args.rubric:
            raise ConfigError("--fcv requires --rubric <rubric.json>")
        tree = load_rubric(args.rubric)
        print(f"FCV: {compute_fcv(tree):.2f}")
        printed_anything = True

    if args.tpr:
        if not args.records:
            raise ConfigError("--tpr requires --records <execution.jsonl>")
        # The headline number is the latest suite run, not a mix of rounds.
        records = latest_iteration_records(load_execution_records(args.records))
        print(f"TPR: {fmt_pct(compute_tpr(records))}")
        printed_anything = True

    if args.cross:
        if not args.other:
            raise ConfigError("--cross requires --other <workspace>")
        ws = Path(args.workspace)
        other = Path(args.other)
        if args.config:
            cfg = load_config(args.config)
            outcomes = cross_test_adapt(other, ws, cfg.backend)
            adapted = sum(1 for o in outcomes if o.status == "adapted")
            skipped = [o for o in outcomes if o.status == "skipped"]
            print(f"cross-adaptation: {adapted} adapted, {len(skipped)} skipped")
            for o in skipped:
                print(f"  skipped {o.test}: {o.reason}")
        own_files = [
            t.file
            for t in extract_test_functions(ws)
            if not Path(t.file).name.startswith("cross_")
        ]
        other_files = [
            t.file
            for t in extract_test_functions(ws)
            if Path(t.file).name.startswith("cross_")
        ]
        suites = {"own": sorted(set(own_files)), "other": sorted(set(other_files))}
        grid = cross_evaluate(ws, suites)
        cells = []
        for suite_name in ("own", "other"):
            evaluation = grid[suite_name]
            print(f"TPR({suite_name}): {fmt_pct(evaluation.tpr)}")
            if evaluation.tpr is None and evaluation.diagnostics:
                print(f"  not applicable: {evaluation.diagnostics[:300]}")
            cells.append(
                {
                    "workspace": ws.name,
                    "suite": suite_name,
                    "tpr": evaluation.tpr,
                    "tests": len(evaluation.records),
                }
            )
        aggregate = aggregate_cells([c["tpr"] for c in cells])
        print(f"aggregate TPR: {fmt_pct(aggregate)}")
        printed_anything = True
        if out_dir:
            from .report import render_cross_grid, write_cross_csv

            write_cross_csv(cells, out_dir / "cross_grid.csv")
            if args.figures:
                render_cross_grid(cells, out_dir / "cross_grid.png")

    if not printed_anything:
        raise ConfigError("evaluate needs at least one of --saferate/--fcv/--tpr/--cross")
    return EXIT_OK


def cmd_ledger(args) -> int:
    root = Path(args.output_root) / "runs" / args.run_id
    paths = RunPaths(root)
    if not paths.ledger_json.exists():
        print(f"unknown run id: {args.run_id}", file=sys.stderr)
        return EXIT_USAGE
    ledger = StageLedger.load(paths.ledger_json)

    totals: dict[str, dict] = {}
    for entry in ledger.entries:
        row = totals.setdefault(
            entry.stage,
            {"episodes": 0, "prompt": 0, "completion": 0, "wall": 0.0, "iters": set()},
        )
        row["episodes"] += 1
        row["prompt"] += entry.prompt_tokens
        row["completion"] += entry.completion_tokens
        row["wall"] += entry.wall_time
        if entry.iteration is not None:
            row["iters"].add(entry.iteration)

    header = f"{'stage':<12}{'episodes':>9}{'prompt':>10}{'completion':>12}{'wall(s)':>9}"
    if args.price_in is not None:
        header += f"{'usd':>10}"
    print(header)
    for stage in ("docgen", "translate", "synthesize", "refine", "testgen", "revise"):
        if stage not in totals:
            continue
        row = totals[stage]
        line = (
            f"{stage:<12}{row['episodes']:>9}{row['prompt']:>10}"
            f"{row['completion']:>12}{row['wall']:>9.1f}"
        )
        if args.price_in is not None:
            usd = row["prompt"] / 1e6 * args.price_in
            if args.price_out is not None:
                usd += row["completion"] / 1e6 * args.price_out
            line += f"{usd:>10.4f}"
        print(line)
        iterations = len(row["iters"])
        if stage in ("refine", "revise") and iterations:
            print(
                f"{'':<12}per-iteration avg over {iterations}: "
                f"prompt {row['prompt'] / iterations:.1f}, "
                f"completion {row['completion'] / iterations:.1f}"
            )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="migrust",
        description="Documentation-guided multi-agent C-to-Rust migration orchestrator",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the full pipeline (stages 1-5)")
    run_p.add_argument("--config", required=True, help="JSON run configuration")
    run_p.set_defaults(func=cmd_run)

    stage_p = sub.add_parser("stage", help="run one stage against an existing run")
    stage_p.add_argument(
        "name", choices=["docgen", "translate", "synthesize", "refine", "testgen", "revise"]
    )
    stage_p.add_argument("--config", required=True)
    stage_p.set_defaults(func=cmd_stage)

    eval_p = sub.add_parser("evaluate", help="standalone metrics over a workspace")
    eval_p.add_argument("--workspace", default=".", help="workspace root to evaluate")
    eval_p.add_argument("--saferate", action="store_true")
    eval_p.add_argument("--fcv", action="store_true")
    eval_p.add_argument("--rubric", help="rubric.json for --fcv")
    eval_p.add_argument("--tpr", action="store_true")
    eval_p.add_argument("--records", help="execution.jsonl for --tpr")
    eval_p.add_argument("--cross", action="store_true")
    eval_p.add_argument("--other", help="donor workspace for --cross")
    eval_p.add_argument("--config", help="run config (enables cross adaptation)")
    eval_p.add_argument("--out", help="directory for CSV/figure outputs")
    eval_p.add_argument("--figures", action="store_true", help="also render PNG charts")
    eval_p.set_defaults(func=cmd_evaluate)

    ledger_p = sub.add_parser("ledger", help="print the per-stage token/cost table")
    ledger_p.add_argument("run_id")
    ledger_p.add_argument("--output-root", default=".")
    ledger_p.add_argument("--price-in", type=float, default=None, help="USD per million input tokens")
    ledger_p.add_argument("--price-out", type=float, default=None, help="USD per million output tokens")
    ledger_p.set_defaults(func=cmd_ledger)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (StageError, InfraError) as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except MigrustError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
