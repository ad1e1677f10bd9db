"""Command-line surface: search, eval, ablate, report, suite.

Exit codes: 0 on success, 2 for usage or configuration errors, 3 for
missing or corrupt data.
"""

from __future__ import annotations

import argparse
import csv
import json
import shlex
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np

from . import persistence
from .evolution import ESConfig, run_search
from .llm import HTTPClient, LLMParams, MockClient, TranscriptWriter
from .metrics import AOCCConfig, Trace, aocc, ub_for_dim
from .optimizers import ATRBO, ATRBOParams, REGISTRY
from .persistence import (
    CorruptSnapshot,
    RunWriter,
    collect_trace_records,
    load_config,
    load_state,
    make_wire_evaluator,
    write_json,
    write_trace_file,
)
from .problems import ProblemSpec, function_name, implemented_functions, training_subset
from .protocol import run_cells, score_outcomes

__all__ = ["main"]

USAGE_ERROR = 2
DATA_ERROR = 3


def _int_list(text: str) -> list[int]:
    try:
        return [int(part) for part in text.replace(",", " ").split()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _budget_for(dim: int, explicit: int | None, mode: str) -> int:
    if explicit is not None:
        return explicit
    return 10 * dim + 50 if mode == "validation" else 20 * dim


def _check_functions(fids: list[int]) -> str | None:
    known = set(implemented_functions())
    bad = [f for f in fids if f not in known]
    if bad:
        return (
            f"unknown function id(s) {bad}; implemented: "
            + ", ".join(str(f) for f in implemented_functions())
        )
    return None


def _add_bench_flags(parser: argparse.ArgumentParser, default_mode: str) -> None:
    parser.add_argument("--fid", type=_int_list, default=None,
                        help="function ids, comma separated (default: training subset)")
    parser.add_argument("--iid", type=_int_list, default=[1],
                        help="instance ids, comma separated (default: 1)")
    parser.add_argument("--dim", type=_int_list, default=[5],
                        help="dimensions, comma separated (default: 5)")
    parser.add_argument("--seeds", type=int, default=3,
                        help="number of repetition seeds 0..N-1 (default: 3)")
    parser.add_argument("--budget", type=int, default=None,
                        help="evaluations per run (overrides --budget-mode)")
    parser.add_argument("--budget-mode", "--mode", dest="budget_mode",
                        choices=("validation", "search"), default=default_mode,
                        help="validation: 10*d+50 evals; search: 20*d "
                             f"(default: {default_mode})")
    parser.add_argument("--time-limit", type=float, default=1800.0,
                        help="wall-clock seconds per benchmark sweep (default: 1800)")
    parser.add_argument("--workers", type=int, default=1,
                        help="parallel sessions (default: 1)")
    parser.add_argument("--out", default=None, help="output directory")


def _bench_settings(args) -> dict:
    return {
        "function_ids": args.fid,
        "instance_ids": args.iid,
        "dims": args.dim,
        "seeds": list(range(args.seeds)),
        "budget": args.budget,
        "budget_mode": args.budget_mode,
        "time_limit": args.time_limit,
    }


def _run_sweep(candidate, label, fids, iids, dims, seeds, args, out: Path) -> dict:
    """Run (fids x iids x seeds) per dim, write traces, return per-dim results."""
    per_dim: dict = {}
    for dim in dims:
        budget = _budget_for(dim, args.budget, args.budget_mode)
        specs = [ProblemSpec(fid, iid, dim) for fid in fids for iid in iids]
        outcomes = run_cells(candidate, specs, seeds, budget,
                             time_limit=args.time_limit, workers=args.workers)
        for (fid, iid, seed), outcome in outcomes.items():
            if len(outcome.trace):
                spec = next(s for s in specs
                            if (s.function_id, s.instance_id) == (fid, iid))
                write_trace_file(out / "traces", label, spec, seed, outcome.trace, budget)
        report = score_outcomes(outcomes, specs, budget)
        per_dim[str(dim)] = {
            "budget": budget,
            "aggregate": report.aggregate,
            "cells": [
                {"function_id": fid, "instance_id": iid, "seed": seed, "aocc": score}
                for (fid, iid, seed), score in sorted(report.per_cell.items())
            ],
            "failures": [
                {"function_id": c[0], "instance_id": c[1], "seed": c[2], "error": msg}
                for c, msg in report.failures
            ],
        }
        print(
            f"{label}: d={dim} budget={budget} mean AOCC {report.aggregate:.4f} "
            f"over {len(report.per_cell)} cells"
            + (f", {len(report.failures)} failure(s)" if report.failures else "")
        )
    return per_dim


def cmd_suite(args) -> int:
    for fid in implemented_functions():
        print(f"{fid:3d}  {function_name(fid)}")
    return 0


def cmd_eval(args) -> int:
    if args.algo is not None:
        if args.algo not in REGISTRY:
            print(
                f"unknown algorithm {args.algo!r}; registered: "
                + ", ".join(sorted(REGISTRY)),
                file=sys.stderr,
            )
            return USAGE_ERROR
        candidate = args.algo
        label = args.label or args.algo
    else:
        candidate = shlex.split(args.worker)
        if not candidate:
            print("empty --worker command", file=sys.stderr)
            return USAGE_ERROR
        label = args.label or Path(candidate[0]).stem
    fids = args.fid if args.fid is not None else training_subset()
    problem = _check_functions(fids)
    if problem:
        print(problem, file=sys.stderr)
        return USAGE_ERROR
    out = Path(args.out or "runs/eval")
    seeds = list(range(args.seeds))
    per_dim = _run_sweep(candidate, label, fids, args.iid, args.dim, seeds, args, out)
    write_json(
        out / f"results-{persistence.safe_label(label)}.json",
        {"label": label, "settings": _bench_settings(args), "dims": per_dim},
    )
    return 0


_ABLATION_GRIDS = {
    "rho": [("rho-0.65", {"rho": 0.65}), ("rho-0.80", {"rho": 0.80}), ("rho-0.95", {"rho": 0.95})],
    "kappa0": [("kappa0-1.0", {"kappa0": 1.0}), ("kappa0-2.0", {"kappa0": 2.0}),
               ("kappa0-4.0", {"kappa0": 4.0})],
    "r0": [("r0-1.0", {"r0": 1.0}), ("r0-2.5", {"r0": 2.5}), ("r0-5.0", {"r0": 5.0})],
    "adaptive": [
        ("adaptive-both", {"adaptive_r": True, "adaptive_kappa": True}),
        ("adaptive-r-only", {"adaptive_r": True, "adaptive_kappa": False}),
        ("adaptive-kappa-only", {"adaptive_r": False, "adaptive_kappa": True}),
        ("adaptive-none", {"adaptive_r": False, "adaptive_kappa": False}),
    ],
}


def ablation_arms(param: str) -> list[tuple[str, ATRBOParams]]:
    """Labelled parameter settings for one ablation axis."""
    return [
        (label, replace(ATRBOParams(), **overrides))
        for label, overrides in _ABLATION_GRIDS[param]
    ]


def cmd_ablate(args) -> int:
    fids = args.fid if args.fid is not None else training_subset()
    problem = _check_functions(fids)
    if problem:
        print(problem, file=sys.stderr)
        return USAGE_ERROR
    out = Path(args.out or "runs/ablate")
    seeds = list(range(args.seeds))
    arms: dict = {}
    for label, params in ablation_arms(args.param):
        def factory(dim, budget, seed, _p=params):
            return ATRBO(dim, budget, seed, _p)

        per_dim = _run_sweep(factory, label, fids, args.iid, args.dim, seeds, args, out)
        arms[label] = {"params": asdict(params), "dims": per_dim}
    write_json(
        out / "results.json",
        {"param": args.param, "settings": _bench_settings(args), "arms": arms},
    )
    return 0


def _group_traces(records: list[dict]):
    """records -> {(algo, dim): {(fid, iid, seed): sorted cell records}}"""
    groups: dict = {}
    for rec in records:
        key = (rec["algo"], rec["dim"])
        cell = (rec["function_id"], rec["instance_id"], rec["seed"])
        groups.setdefault(key, {}).setdefault(cell, []).append(rec)
    for cells in groups.values():
        for cell_records in cells.values():
            cell_records.sort(key=lambda r: r["eval_index"])
    return groups


def cmd_report(args) -> int:
    root = Path(args.results_dir)
    records = collect_trace_records(root / "traces") or collect_trace_records(root)
    if not records:
        print(f"no trace records found under {root}", file=sys.stderr)
        return DATA_ERROR
    groups = _group_traces(records)
    table = []
    convergence_rows = []
    for (algo, dim), cells in sorted(groups.items()):
        ub = args.ub if args.ub is not None else ub_for_dim(dim)
        scores = []
        for cell_records in cells.values():
            budget = cell_records[0].get("budget", len(cell_records))
            cfg = AOCCConfig(lb=args.lb, ub=ub, budget=budget)
            trace = Trace(
                [r["best_so_far"] for r in cell_records], cell_records[0]["f_opt"]
            )
            scores.append(aocc(trace, cfg))
        table.append(
            {"algo": algo, "dim": dim, "cells": len(scores),
             "mean_aocc": float(np.mean(scores)), "ub": ub}
        )
        by_fid: dict = {}
        for (fid, iid, seed), cell_records in cells.items():
            by_fid.setdefault(fid, []).append(
                [r["best_so_far"] - r["f_opt"] for r in cell_records]
            )
        for fid, runs in sorted(by_fid.items()):
            longest = max(len(r) for r in runs)
            padded = [r + [r[-1]] * (longest - len(r)) for r in runs]
            means = np.mean(np.asarray(padded), axis=0)
            for k, value in enumerate(means):
                convergence_rows.append(
                    {"algo": algo, "dim": dim, "function_id": fid,
                     "eval_index": k, "mean_precision": float(value)}
                )
    print(f"{'algo':24s} {'dim':>4s} {'cells':>6s} {'mean AOCC':>10s}")
    for row in table:
        print(f"{row['algo']:24s} {row['dim']:4d} {row['cells']:6d} {row['mean_aocc']:10.4f}")
    write_json(root / "report.json", {"table": table})
    csv_path = Path(args.csv) if args.csv else root / "convergence.csv"
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(
            fh, fieldnames=["algo", "dim", "function_id", "eval_index", "mean_precision"]
        )
        writer.writeheader()
        writer.writerows(convergence_rows)
    return 0


def _load_replies(path: Path) -> list:
    replies: list = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            entry = json.loads(line)
            if isinstance(entry, str):
                replies.append(entry)
            elif isinstance(entry, dict) and "text" in entry:
                replies.append(str(entry["text"]))
            elif isinstance(entry, dict) and "error" in entry:
                replies.append(RuntimeError(str(entry["error"])))
            else:
                raise ValueError(f"bad reply entry: {entry!r}")
    return replies


def _build_client(llm_cfg: dict, backend: str, run_dir: Path):
    params = LLMParams(
        temperature=llm_cfg.get("temperature", 0.5),
        top_k=llm_cfg.get("top_k", 60),
        top_p=llm_cfg.get("top_p"),
        model=llm_cfg.get("model", "default"),
        max_tokens=llm_cfg.get("max_tokens"),
        timeout=llm_cfg.get("timeout", 120.0),
        max_retries=llm_cfg.get("max_retries", 3),
    )
    transcript = TranscriptWriter(persistence.transcript_path(run_dir))
    common = {
        "params": params,
        "transcript": transcript,
        "min_interval": llm_cfg.get("min_interval", 0.0),
        "parallelism": llm_cfg.get("parallelism", 1),
    }
    if backend == "mock":
        replies_path = llm_cfg.get("replies")
        if not replies_path:
            raise ValueError("mock backend needs llm.replies (a JSONL file of replies)")
        return MockClient(_load_replies(Path(replies_path)), **common), params
    endpoint = llm_cfg.get("endpoint")
    if not endpoint:
        raise ValueError("http backend needs llm.endpoint")
    return (
        HTTPClient(endpoint, api_key_env=llm_cfg.get("api_key_env", "EVOBO_API_KEY"), **common),
        params,
    )


def _es_config(es_cfg: dict) -> ESConfig:
    fields = dict(es_cfg)
    if "lambda" in fields:
        fields["lam"] = fields.pop("lambda")
    return ESConfig(**fields)


def cmd_search(args) -> int:
    out = Path(args.out)
    if args.resume:
        try:
            config = load_config(out)
            state, llm_calls = load_state(out)
        except CorruptSnapshot as exc:
            print(f"cannot resume: {exc}", file=sys.stderr)
            return DATA_ERROR
    else:
        if args.config is None:
            print("search needs --config (or --resume with an existing --out)", file=sys.stderr)
            return USAGE_ERROR
        config_path = Path(args.config)
        if not config_path.is_file():
            print(f"config file not found: {config_path}", file=sys.stderr)
            return USAGE_ERROR
        if (out / "archive.jsonl").exists():
            print(
                f"{out} already holds a run; use --resume or a fresh directory",
                file=sys.stderr,
            )
            return USAGE_ERROR
        with open(config_path, encoding="utf-8") as fh:
            config = json.load(fh)
        replies = config.get("llm", {}).get("replies")
        if replies:
            config["llm"]["replies"] = str((config_path.parent / replies).resolve())
        state, llm_calls = None, None

    try:
        es = _es_config(config.get("es", {}))
    except (TypeError, ValueError) as exc:
        print(f"bad es config: {exc}", file=sys.stderr)
        return USAGE_ERROR

    if state is not None and state.generated >= es.T:
        print(f"run already complete ({state.generated}/{es.T} candidates); nothing to do")
        return 0

    backend = args.backend or config.get("llm", {}).get("backend", "mock")
    try:
        client, params = _build_client(config.get("llm", {}), backend, out)
    except (ValueError, OSError) as exc:
        print(f"bad llm config: {exc}", file=sys.stderr)
        return USAGE_ERROR

    eval_cfg = config.get("eval", {})
    worker_template = config.get("worker", {}).get("template")
    if not worker_template:
        print("search needs worker.template (argv with {source} and {class})", file=sys.stderr)
        return USAGE_ERROR
    dim = eval_cfg.get("dim", 5)
    fids = eval_cfg.get("function_ids") or training_subset()
    problem = _check_functions(fids)
    if problem:
        print(problem, file=sys.stderr)
        return USAGE_ERROR
    specs = [
        ProblemSpec(fid, iid, dim)
        for fid in fids
        for iid in eval_cfg.get("instance_ids", [1, 2, 3])
    ]
    evaluator = make_wire_evaluator(
        out,
        worker_template,
        specs,
        eval_cfg.get("seeds", [0, 1, 2]),
        eval_cfg.get("budget") or 20 * dim,
        time_limit=eval_cfg.get("time_limit", 1800.0),
        workers=eval_cfg.get("workers", 1),
        smoke=eval_cfg.get("smoke", True),
    )

    writer = RunWriter(out, config, client)
    if state is not None and isinstance(client, MockClient):
        client.seek(min(llm_calls if llm_calls is not None else state.generated,
                        len(client.responses)))
    if state is not None and llm_calls is not None:
        client.calls = llm_calls

    result = run_search(es, client, evaluator, observer=writer, params=params, state=state)
    write_json(
        out / "result.json",
        {
            "best": persistence.candidate_to_record(result.best),
            "generated": result.generated,
            "t": result.t,
            "generations": result.generations,
        },
    )
    print(
        f"search finished: {result.generated} candidates over {result.generations} "
        f"generation(s); best {result.best.name} fitness "
        f"{0.0 if result.best.fitness is None else result.best.fitness:.4f}"
    )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="evobo",
        description="Evolve and evaluate black-box optimizers on a BBOB-style suite.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_suite = sub.add_parser("suite", help="inspect the benchmark suite")
    suite_sub = p_suite.add_subparsers(dest="suite_command", required=True)
    p_list = suite_sub.add_parser("list", help="list implemented functions")
    p_list.set_defaults(func=cmd_suite)

    p_eval = sub.add_parser("eval", help="benchmark a registered or wire-worker optimizer")
    group = p_eval.add_mutually_exclusive_group(required=True)
    group.add_argument("--algo", help="registered optimizer name")
    group.add_argument("--worker", help="wire worker command (quoted)")
    p_eval.add_argument("--label", default=None, help="label for traces and reports")
    _add_bench_flags(p_eval, default_mode="validation")
    p_eval.set_defaults(func=cmd_eval)

    p_ablate = sub.add_parser("ablate", help="sweep one trust-region parameter grid")
    p_ablate.add_argument("--param", required=True,
                          choices=("rho", "kappa0", "r0", "adaptive"),
                          help="which axis to sweep")
    _add_bench_flags(p_ablate, default_mode="search")
    p_ablate.set_defaults(func=cmd_ablate)

    p_report = sub.add_parser("report", help="summarize persisted traces")
    p_report.add_argument("results_dir", help="directory holding trace files")
    p_report.add_argument("--csv", default=None, help="convergence CSV path")
    p_report.add_argument("--lb", type=float, default=1e-8, help="precision lower clip")
    p_report.add_argument("--ub", type=float, default=None,
                          help="precision upper clip (default: per-dim)")
    p_report.set_defaults(func=cmd_report)

    p_search = sub.add_parser("search", help="run the LLM-driven algorithm search")
    p_search.add_argument("--config", default=None, help="JSON config file")
    p_search.add_argument("--out", required=True, help="run directory")
    p_search.add_argument("--resume", action="store_true",
                          help="continue the run already in --out")
    p_search.add_argument("--backend", choices=("mock", "http"), default=None,
                          help="override the configured model backend")
    p_search.set_defaults(func=cmd_search)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    return args.func(args)
