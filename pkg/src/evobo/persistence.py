"""On-disk run records: append-only logs, resumable snapshots, trace files.

A run directory looks like::

    run/
      config.json            full configuration snapshot
      state.json             latest resumable search state (atomic replace)
      archive.jsonl          one record per generated candidate, append-only
      generations.jsonl      one record per completed generation
      llm_transcript.jsonl   one record per model call
      candidates/            source file per parsed candidate
      traces/<label>/        per-cell evaluation traces, one JSONL file each

Everything is line-delimited JSON so runs can be tailed, grepped, and
replayed; reports are recomputable from the trace files alone.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

import numpy as np

from .evolution import EvalOutcome, RunObserver, SearchState
from .llm import BaseClient, TranscriptWriter
from .metrics import Trace
from .problems import ProblemSpec
from .prompts import Candidate
from .protocol import run_cells, score_outcomes, smoke_test

__all__ = [
    "CorruptSnapshot",
    "RunWriter",
    "candidate_from_record",
    "candidate_to_record",
    "load_config",
    "load_state",
    "make_wire_evaluator",
    "read_trace_file",
    "run_is_complete",
    "transcript_path",
    "write_json",
    "write_trace_file",
]


class CorruptSnapshot(RuntimeError):
    """A run directory's state cannot be restored faithfully."""


def write_json(path: str | Path, payload: dict) -> None:
    """Atomic JSON write: temp file in the same directory, then replace."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)


def _append_line(path: Path, record: dict) -> None:
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(json.dumps(record, separators=(",", ":")) + "\n")
        fh.flush()
        os.fsync(fh.fileno())


def candidate_to_record(candidate: Candidate) -> dict:
    return {
        "created": candidate.created,
        "name": candidate.name,
        "origin": candidate.origin,
        "parent_names": list(candidate.parent_names),
        "fitness": candidate.fitness,
        "error": candidate.error,
        "loc": candidate.loc,
        "description": candidate.description,
        "code": candidate.code,
    }


def candidate_from_record(record: dict) -> Candidate:
    try:
        return Candidate(
            name=record["name"],
            code=record["code"],
            origin=record["origin"],
            description=record.get("description", ""),
            parent_names=tuple(record.get("parent_names", ())),
            fitness=record["fitness"],
            error=record.get("error"),
            created=record["created"],
            loc=record.get("loc"),
        )
    except KeyError as exc:
        raise CorruptSnapshot(f"candidate record missing field {exc}") from exc


class RunWriter(RunObserver):
    """Observer that mirrors a search run onto disk as it happens."""

    def __init__(self, run_dir: str | Path, config: dict, client: BaseClient | None = None):
        self.run_dir = Path(run_dir)
        self.run_dir.mkdir(parents=True, exist_ok=True)
        (self.run_dir / "candidates").mkdir(exist_ok=True)
        (self.run_dir / "traces").mkdir(exist_ok=True)
        self.client = client
        write_json(self.run_dir / "config.json", config)

    def on_candidate(self, candidate: Candidate) -> None:
        _append_line(self.run_dir / "archive.jsonl", candidate_to_record(candidate))

    def on_generation(self, index: int, population: list[Candidate], t: int) -> None:
        best = max(
            (c.fitness if c.fitness is not None else 0.0 for c in population),
            default=0.0,
        )
        _append_line(
            self.run_dir / "generations.jsonl",
            {
                "generation": index,
                "t": t,
                "population": [c.created for c in population],
                "best_fitness": best,
            },
        )

    def on_state(self, state: SearchState) -> None:
        write_json(
            self.run_dir / "state.json",
            {
                "rng_state": state.rng.bit_generator.state,
                "generated": state.generated,
                "t": state.t,
                "generation": state.generation,
                "population": [c.created for c in state.population],
                "llm_calls": self.client.calls if self.client is not None else None,
            },
        )


def transcript_path(run_dir: str | Path) -> Path:
    return Path(run_dir) / "llm_transcript.jsonl"


def load_config(run_dir: str | Path) -> dict:
    path = Path(run_dir) / "config.json"
    if not path.is_file():
        raise CorruptSnapshot(f"no config.json under {run_dir}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _load_archive(run_dir: Path) -> list[Candidate]:
    path = run_dir / "archive.jsonl"
    if not path.is_file():
        return []
    archive = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh):
            if not line.strip():
                continue
            try:
                archive.append(candidate_from_record(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise CorruptSnapshot(f"archive.jsonl line {lineno + 1}: {exc}") from exc
    expected = list(range(len(archive)))
    if [c.created for c in archive] != expected:
        raise CorruptSnapshot("archive.jsonl is not a contiguous creation sequence")
    return archive


def load_state(run_dir: str | Path) -> tuple[SearchState, int | None]:
    """Rebuild the search state from disk; returns (state, llm_calls).

    The random stream is restored bit for bit, and the population is
    re-linked to archive entries by creation id.
    """
    run_dir = Path(run_dir)
    path = run_dir / "state.json"
    if not path.is_file():
        raise CorruptSnapshot(f"no state.json under {run_dir}")
    try:
        with open(path, encoding="utf-8") as fh:
            payload = json.load(fh)
    except json.JSONDecodeError as exc:
        raise CorruptSnapshot(f"state.json is not valid JSON: {exc}") from exc
    archive = _load_archive(run_dir)
    try:
        rng_state = payload["rng_state"]
        generated = payload["generated"]
        t = payload["t"]
        generation = payload["generation"]
        population_ids = payload["population"]
    except KeyError as exc:
        raise CorruptSnapshot(f"state.json missing field {exc}") from exc
    if generated != len(archive):
        raise CorruptSnapshot(
            f"state says {generated} candidates generated but archive holds {len(archive)}"
        )
    by_id = {c.created: c for c in archive}
    try:
        population = [by_id[i] for i in population_ids]
    except KeyError as exc:
        raise CorruptSnapshot(f"population references unknown candidate {exc}") from exc
    rng = np.random.default_rng()
    try:
        rng.bit_generator.state = rng_state
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptSnapshot(f"random-stream state cannot be restored: {exc}") from exc
    state = SearchState(
        rng=rng,
        population=population,
        archive=archive,
        generated=generated,
        t=t,
        generation=generation,
    )
    return state, payload.get("llm_calls")


def run_is_complete(run_dir: str | Path, total: int) -> bool:
    state_path = Path(run_dir) / "state.json"
    if not state_path.is_file():
        return False
    with open(state_path, encoding="utf-8") as fh:
        return json.load(fh).get("generated", 0) >= total


# ---------------------------------------------------------------------------
# Trace files
# ---------------------------------------------------------------------------

_SAFE_LABEL = re.compile(r"[^A-Za-z0-9._-]+")


def safe_label(label: str) -> str:
    return _SAFE_LABEL.sub("-", label) or "unnamed"


def trace_file_name(spec: ProblemSpec, seed: int) -> str:
    return f"f{spec.function_id:03d}_i{spec.instance_id:02d}_d{spec.dim:02d}_s{seed:02d}.jsonl"


def write_trace_file(
    directory: str | Path,
    label: str,
    spec: ProblemSpec,
    seed: int,
    trace: Trace,
    budget: int,
) -> Path:
    """One JSONL file per cell; line k is the best-so-far after k+1 evals."""
    directory = Path(directory) / safe_label(label)
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / trace_file_name(spec, seed)
    with open(path, "w", encoding="utf-8") as fh:
        for k, value in enumerate(trace.values):
            fh.write(
                json.dumps(
                    {
                        "algo": label,
                        "function_id": spec.function_id,
                        "instance_id": spec.instance_id,
                        "dim": spec.dim,
                        "seed": seed,
                        "eval_index": k,
                        "best_so_far": value,
                        "f_opt": trace.f_opt,
                        "budget": budget,
                    },
                    separators=(",", ":"),
                )
                + "\n"
            )
    return path


def read_trace_file(path: str | Path) -> list[dict]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                records.append(json.loads(line))
    return records


def collect_trace_records(root: str | Path) -> list[dict]:
    """All trace records under a directory tree, in stable path order."""
    root = Path(root)
    records: list[dict] = []
    if not root.exists():
        return records
    for path in sorted(root.rglob("*.jsonl")):
        records.extend(read_trace_file(path))
    return records


# ---------------------------------------------------------------------------
# Production evaluator: run candidate source through a wire worker
# ---------------------------------------------------------------------------


def substitute_worker_template(template: list[str], source: Path, class_name: str) -> list[str]:
    return [
        arg.replace("{source}", str(source)).replace("{class}", class_name)
        for arg in template
    ]


def make_wire_evaluator(
    run_dir: str | Path,
    worker_template: list[str],
    specs: list[ProblemSpec],
    seeds: list[int],
    budget: int,
    time_limit: float = 1800.0,
    workers: int = 1,
    smoke: bool = True,
    smoke_time_limit: float = 30.0,
):
    """Evaluator that hosts candidate source in a subprocess worker.

    The candidate's code is written under ``candidates/`` and the worker
    command is built from ``worker_template`` by substituting ``{source}``
    and ``{class}``.  A cheap smoke check runs first; candidates that fail
    it score 0 without spending benchmark budget.  Traces for every cell
    land under ``traces/<candidate>/``.
    """
    run_dir = Path(run_dir)
    (run_dir / "candidates").mkdir(parents=True, exist_ok=True)

    def evaluate(candidate: Candidate) -> EvalOutcome:
        label = f"{candidate.created:04d}-{safe_label(candidate.name)}"
        source = run_dir / "candidates" / f"{label}.py"
        source.write_text(candidate.code + "\n", encoding="utf-8")
        argv = substitute_worker_template(worker_template, source, candidate.name)
        if smoke:
            result = smoke_test(argv, time_limit=smoke_time_limit)
            if not result.ok:
                return EvalOutcome(0.0, error=f"smoke test failed: {result.error}")
        outcomes = run_cells(argv, specs, seeds, budget, time_limit, workers)
        for (fid, iid, seed), outcome in outcomes.items():
            if len(outcome.trace):
                spec = next(s for s in specs if (s.function_id, s.instance_id) == (fid, iid))
                write_trace_file(run_dir / "traces", label, spec, seed, outcome.trace, budget)
        report = score_outcomes(outcomes, specs, budget)
        error = None
        if report.failures:
            parts = [f"f{cell[0]}i{cell[1]}s{cell[2]}: {msg}" for cell, msg in report.failures[:3]]
            if len(report.failures) > 3:
                parts.append(f"and {len(report.failures) - 3} more")
            error = "; ".join(parts)
        return EvalOutcome(report.aggregate, error=error, report=report)

    return evaluate
