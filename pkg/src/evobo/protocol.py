"""Candidate execution over a line-delimited ask/tell wire protocol.

One message per line, JSON-shaped, five kinds:

    {"init": {"dim": D, "budget": B, "lower_bound": -5.0,
              "upper_bound": 5.0, "seed": S}}      orchestrator -> worker
    {"ask": [x1, ..., xD]}                         worker -> orchestrator
    {"tell": y}                                    orchestrator -> worker
    {"done": true}                                 worker -> orchestrator
    {"error": "message"}                           either direction

The orchestrator clips out-of-bounds ask points to the box, enforces the
evaluation budget (replying with an error on the budget+1-th ask), kills
hung workers at the session deadline, and never lets a crashing worker
abort the surrounding run.  Native reference optimizers bypass the wire
and run in-process through the same session bookkeeping.
"""

from __future__ import annotations

import json
import queue
import subprocess
import threading
import time
from dataclasses import dataclass, field

import numpy as np

from .metrics import AOCCConfig, FitnessReport, Trace, aocc
from .problems import ProblemInstance, ProblemSpec, make_instance

__all__ = [
    "Init",
    "Ask",
    "Tell",
    "Done",
    "Error",
    "ParseError",
    "BudgetExhausted",
    "EvalSession",
    "SessionOutcome",
    "encode_message",
    "decode_message",
    "run_wire_session",
    "run_native_session",
    "run_cells",
    "run_candidate",
    "smoke_test",
    "replay",
    "worker_main",
]


# ---------------------------------------------------------------------------
# Wire messages
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Init:
    dim: int
    budget: int
    lower_bound: float
    upper_bound: float
    seed: int


@dataclass(frozen=True)
class Ask:
    point: tuple


@dataclass(frozen=True)
class Tell:
    value: float


@dataclass(frozen=True)
class Done:
    pass


@dataclass(frozen=True)
class Error:
    message: str


class ParseError(ValueError):
    """Malformed wire line; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(message)
        self.offset = offset


def encode_message(msg) -> str:
    """One message as one compact text line (no trailing newline)."""
    if isinstance(msg, Init):
        body = {
            "init": {
                "dim": msg.dim,
                "budget": msg.budget,
                "lower_bound": msg.lower_bound,
                "upper_bound": msg.upper_bound,
                "seed": msg.seed,
            }
        }
    elif isinstance(msg, Ask):
        body = {"ask": [float(v) for v in msg.point]}
    elif isinstance(msg, Tell):
        body = {"tell": float(msg.value)}
    elif isinstance(msg, Done):
        body = {"done": True}
    elif isinstance(msg, Error):
        body = {"error": str(msg.message)}
    else:
        raise TypeError(f"not a wire message: {msg!r}")
    return json.dumps(body, separators=(",", ":"))


def decode_message(line: str):
    """Parse one complete line back into a message."""
    line = line.rstrip("\n")
    try:
        body = json.loads(line)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid message: {e.msg}", offset=e.pos) from None
    if not isinstance(body, dict) or len(body) != 1:
        raise ParseError("message must be an object with exactly one key")
    key, payload = next(iter(body.items()))
    if key == "init":
        if not isinstance(payload, dict):
            raise ParseError("init payload must be an object")
        try:
            return Init(
                dim=int(payload["dim"]),
                budget=int(payload["budget"]),
                lower_bound=float(payload["lower_bound"]),
                upper_bound=float(payload["upper_bound"]),
                seed=int(payload["seed"]),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ParseError(f"bad init payload: {e}") from None
    if key == "ask":
        if not isinstance(payload, list) or not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in payload
        ):
            raise ParseError("ask payload must be a list of numbers")
        return Ask(point=tuple(float(v) for v in payload))
    if key == "tell":
        if not isinstance(payload, (int, float)) or isinstance(payload, bool):
            raise ParseError("tell payload must be a number")
        return Tell(value=float(payload))
    if key == "done":
        if payload is not True:
            raise ParseError("done payload must be true")
        return Done()
    if key == "error":
        if not isinstance(payload, str):
            raise ParseError("error payload must be a string")
        return Error(message=payload)
    raise ParseError(f"unknown message kind: {key!r}")


# ---------------------------------------------------------------------------
# Sessions
# ---------------------------------------------------------------------------


class BudgetExhausted(RuntimeError):
    """Raised by the in-process objective once the budget is consumed."""


class EvalSession:
    """Budget, clipping and trace bookkeeping for one (instance, seed) run."""

    def __init__(self, instance: ProblemInstance, budget: int, seed: int = 0):
        if budget < 1:
            raise ValueError(f"budget must be >= 1, got {budget}")
        self.instance = instance
        self.budget = budget
        self.seed = seed
        self._best = np.inf
        self._values: list[float] = []
        self._points: list[np.ndarray] = []

    @property
    def consumed(self) -> int:
        return len(self._values)

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.budget

    @property
    def points(self) -> list[np.ndarray]:
        return list(self._points)

    def evaluate(self, x) -> float:
        """Clip to the box, evaluate, record best-so-far; returns the raw value."""
        if self.exhausted:
            raise BudgetExhausted("budget exhausted")
        spec = self.instance.spec
        x = np.clip(np.asarray(x, dtype=float), spec.lower, spec.upper)
        y = self.instance.evaluate(x)
        self._best = min(self._best, y)
        self._values.append(self._best)
        self._points.append(x.copy())
        return y

    def trace(self) -> Trace:
        return Trace(self._values, f_opt=self.instance.f_opt)


@dataclass
class SessionOutcome:
    """What one session produced: the trace, the evaluated points, any error
    diagnostic, and the full wire transcript (empty for native runs)."""

    trace: Trace
    points: list
    error: str | None = None
    transcript: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None


def replay(instance: ProblemInstance, points, budget: int | None = None) -> Trace:
    """Re-evaluate a recorded point sequence; reproduces the original trace."""
    session = EvalSession(instance, budget if budget is not None else max(1, len(points)))
    for x in points:
        if session.exhausted:
            break
        session.evaluate(x)
    return session.trace()


# ---------------------------------------------------------------------------
# Wire session supervision
# ---------------------------------------------------------------------------

_STDERR_CAP = 16384


def _reader(stream, out: queue.Queue):
    try:
        for line in stream:
            out.put(("line", line.rstrip("\n")))
    except ValueError:
        pass  # stream closed under the iterator
    out.put(("eof", None))


def _drain(stream, buf: list):
    try:
        for line in stream:
            if sum(len(s) for s in buf) < _STDERR_CAP:
                buf.append(line)
    except ValueError:
        pass


def _shutdown(proc: subprocess.Popen):
    for closer in (proc.stdin,):
        try:
            closer.close()
        except OSError:
            pass
    try:
        proc.wait(timeout=2.0)
    except subprocess.TimeoutExpired:
        proc.terminate()
        try:
            proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()


def run_wire_session(
    argv,
    instance: ProblemInstance,
    budget: int,
    seed: int = 0,
    time_limit: float = 30.0,
) -> SessionOutcome:
    """Run one worker process through a full session.

    The worker is launched from ``argv``, receives the init line, and is
    expected to alternate ask lines with reading tell lines until it sends
    done.  Hangs are killed at the deadline; every failure mode lands in
    the outcome's error field rather than raising.
    """
    spec = instance.spec
    session = EvalSession(instance, budget, seed)
    transcript: list = []
    error: str | None = None
    try:
        proc = subprocess.Popen(
            list(argv),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
    except OSError as e:
        return SessionOutcome(
            trace=session.trace(), points=[], error=f"failed to launch worker: {e}"
        )

    outq: queue.Queue = queue.Queue()
    stderr_buf: list[str] = []
    threading.Thread(target=_reader, args=(proc.stdout, outq), daemon=True).start()
    threading.Thread(target=_drain, args=(proc.stderr, stderr_buf), daemon=True).start()
    deadline = time.monotonic() + time_limit

    def send(msg) -> bool:
        line = encode_message(msg)
        transcript.append((">", line))
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            return True
        except (BrokenPipeError, OSError):
            return False

    line_no = 0
    try:
        if not send(
            Init(
                dim=spec.dim,
                budget=budget,
                lower_bound=spec.lower,
                upper_bound=spec.upper,
                seed=seed,
            )
        ):
            error = "worker closed stream before init"
        while error is None:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                error = "timeout"
                break
            try:
                kind, payload = outq.get(timeout=remaining)
            except queue.Empty:
                error = "timeout"
                break
            if kind == "eof":
                error = "worker closed stream before done"
                break
            line_no += 1
            transcript.append(("<", payload))
            try:
                msg = decode_message(payload)
            except ParseError as e:
                error = f"protocol parse error at line {line_no}: {e}"
                break
            if isinstance(msg, Ask):
                if len(msg.point) != spec.dim:
                    error = (
                        f"ask dimension mismatch: expected {spec.dim}, "
                        f"got {len(msg.point)}"
                    )
                    break
                if session.exhausted:
                    send(Error("budget exhausted"))
                    error = "budget exhausted"
                    break
                y = session.evaluate(msg.point)
                if not send(Tell(y)):
                    error = "worker closed stream mid-session"
                    break
            elif isinstance(msg, Done):
                break
            elif isinstance(msg, Error):
                error = f"worker error: {msg.message}"
                break
            else:
                error = f"unexpected message from worker: {type(msg).__name__}"
                break
    finally:
        _shutdown(proc)

    if error is not None and error != "budget exhausted":
        tail = "".join(stderr_buf).strip()
        if tail:
            error = f"{error}; stderr: {tail[-500:]}"
    return SessionOutcome(
        trace=session.trace(), points=session.points, error=error, transcript=transcript
    )


def run_native_session(
    factory,
    instance: ProblemInstance,
    budget: int,
    seed: int = 0,
    time_limit: float | None = None,
) -> SessionOutcome:
    """Run an in-process optimizer through the same session bookkeeping.

    ``factory(dim, budget, seed)`` returns an engine callable that drives
    the objective; native optimizers are trusted, so no deadline is
    enforced here.
    """
    session = EvalSession(instance, budget, seed)
    error: str | None = None
    try:
        engine = factory(instance.spec.dim, budget, seed)
        engine(session.evaluate)
    except BudgetExhausted:
        error = "budget exhausted"
    except Exception as e:  # noqa: BLE001 -- candidate failures become diagnostics
        error = f"{type(e).__name__}: {e}"
    return SessionOutcome(
        trace=session.trace(), points=session.points, error=error, transcript=[]
    )


# ---------------------------------------------------------------------------
# Candidate-level runs
# ---------------------------------------------------------------------------


def _resolve_candidate(candidate):
    """Accepts a registry name, a worker argv list, or a native factory."""
    if isinstance(candidate, str):
        from . import optimizers

        try:
            return "native", optimizers.REGISTRY[candidate]
        except KeyError:
            raise ValueError(
                f"unknown optimizer {candidate!r}; registered: "
                f"{sorted(optimizers.REGISTRY)}"
            ) from None
    if isinstance(candidate, (list, tuple)):
        return "wire", [str(a) for a in candidate]
    if callable(candidate):
        return "native", candidate
    raise TypeError(f"cannot run candidate of type {type(candidate).__name__}")


def _run_one(candidate, spec: ProblemSpec, seed: int, budget: int, slice_s: float):
    kind, runner = _resolve_candidate(candidate)
    instance = make_instance(spec)
    if kind == "wire":
        return run_wire_session(runner, instance, budget, seed, time_limit=slice_s)
    return run_native_session(runner, instance, budget, seed, time_limit=slice_s)


def run_cells(
    candidate,
    specs,
    seeds,
    budget: int,
    time_limit: float = 1800.0,
    workers: int = 1,
) -> dict:
    """One session per (spec, seed); returns {cell: SessionOutcome}.

    The whole-benchmark time limit is split evenly across sessions with a
    30-second floor per session.
    """
    jobs = [(spec, seed) for spec in specs for seed in seeds]
    if not jobs:
        return {}
    slice_s = max(30.0, time_limit / len(jobs))
    results: dict = {}
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            futs = {
                (s.function_id, s.instance_id, seed): pool.submit(
                    _run_one, candidate, s, seed, budget, slice_s
                )
                for s, seed in jobs
            }
            for cell, fut in futs.items():
                results[cell] = fut.result()
    else:
        for spec, seed in jobs:
            cell = (spec.function_id, spec.instance_id, seed)
            results[cell] = _run_one(candidate, spec, seed, budget, slice_s)
    return results


def score_outcomes(outcomes, specs, budget: int, lb: float = 1e-8) -> FitnessReport:
    """Turn {cell: SessionOutcome} into a fitness report.

    A session with an empty trace scores 0 and lands in the failure list; a
    nonempty partial trace is padded to the budget and scored, with its
    error kept as a diagnostic.
    """
    spec_by_key = {(s.function_id, s.instance_id): s for s in specs}
    cells: dict = {}
    failures: list = []
    for cell, outcome in outcomes.items():
        spec = spec_by_key[cell[:2]]
        cfg = AOCCConfig(lb=lb, ub=AOCCConfig.for_dim(spec.dim, budget).ub, budget=budget)
        if len(outcome.trace) == 0:
            cells[cell] = 0.0
            failures.append((cell, outcome.error or "no evaluations returned"))
        else:
            cells[cell] = aocc(outcome.trace, cfg)
            if outcome.error is not None:
                failures.append((cell, outcome.error))
    if not cells:
        raise ValueError("no sessions were run; empty specs or seeds")
    return FitnessReport.from_cells(cells, failures)


def run_candidate(
    candidate,
    specs,
    seeds,
    budget: int,
    time_limit: float = 1800.0,
    workers: int = 1,
    lb: float = 1e-8,
) -> FitnessReport:
    """Score a candidate over (specs x seeds) sessions."""
    outcomes = run_cells(candidate, specs, seeds, budget, time_limit, workers)
    return score_outcomes(outcomes, specs, budget, lb)


@dataclass(frozen=True)
class SmokeResult:
    ok: bool
    error: str | None = None


def smoke_test(candidate, time_limit: float = 30.0) -> SmokeResult:
    """Cheap pre-check on a 2-d sphere with budget 5.

    Any crash, malformed message, or protocol violation fails the check;
    the captured message is meant to be fed back into later prompts.
    """
    spec = ProblemSpec(function_id=1, instance_id=0, dim=2)
    try:
        outcome = _run_one(candidate, spec, seed=0, budget=5, slice_s=time_limit)
    except (ValueError, TypeError) as e:
        return SmokeResult(ok=False, error=str(e))
    if outcome.error is not None:
        return SmokeResult(ok=False, error=outcome.error)
    return SmokeResult(ok=True)


# ---------------------------------------------------------------------------
# Worker side (used by the native-optimizer wire entry and by tests)
# ---------------------------------------------------------------------------


def worker_main(factory, stdin, stdout) -> int:
    """Drive one session from the worker side of the wire.

    Reads the init line, runs ``factory(dim, budget, seed)`` with a proxy
    objective that round-trips through ask/tell, then reports done.
    Returns the process exit status: 0 only after done was sent.
    """

    def send(msg):
        stdout.write(encode_message(msg) + "\n")
        stdout.flush()

    line = stdin.readline()
    if not line:
        return 1
    try:
        init = decode_message(line)
    except ParseError as e:
        send(Error(f"bad init line: {e}"))
        return 1
    if not isinstance(init, Init):
        send(Error(f"expected init, got {type(init).__name__}"))
        return 1

    def objective(x) -> float:
        send(Ask(point=tuple(float(v) for v in np.asarray(x, dtype=float).ravel())))
        reply_line = stdin.readline()
        if not reply_line:
            raise RuntimeError("orchestrator closed the stream")
        reply = decode_message(reply_line)
        if isinstance(reply, Tell):
            return reply.value
        if isinstance(reply, Error):
            raise RuntimeError(f"session refused evaluation: {reply.message}")
        raise RuntimeError(f"unexpected reply: {type(reply).__name__}")

    try:
        engine = factory(init.dim, init.budget, init.seed)
        engine(objective)
    except Exception as e:  # noqa: BLE001 -- report, never hang
        try:
            send(Error(f"{type(e).__name__}: {e}"))
        except OSError:
            pass
        return 1
    send(Done())
    return 0
