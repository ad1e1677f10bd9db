"""Load a candidate optimizer class and drive it through the wire.

The hosted class is expected in the template shape::

    class SomeBO:
        def __init__(self, budget, dim): ...
        def __call__(self, func): ...

``host`` waits for the orchestrator's ``init``, builds the instance with
``(budget, dim)``, and calls it with a proxy objective.  Each proxy call
performs exactly one ask/tell exchange; the objective is never evaluated
locally.  A normal return sends ``done`` and yields exit status 0.  Load
failures, whitelist violations, and runtime exceptions send ``error`` and
yield a nonzero status.
"""

from __future__ import annotations

import sys
import traceback
from contextlib import redirect_stdout
from typing import IO

from candidate_shim.whitelist import check_imports, guarded_builtins
from candidate_shim.wire import ProtocolError, Wire

TRACEBACK_LIMIT = 8000


class BudgetRefused(RuntimeError):
    """The orchestrator answered an ask with an error instead of a value.

    The canonical cause is an exhausted evaluation budget; the message
    carries the orchestrator's stated reason.  Raised inside the hosted
    class so over-budget asks surface where the extra call was made.
    """


class ObjectiveProxy:
    """Callable objective that forwards each evaluation over the wire."""

    def __init__(self, wire: Wire):
        self._wire = wire
        self.exchanges = 0

    @staticmethod
    def _as_floats(point) -> list[float]:
        if hasattr(point, "tolist"):
            point = point.tolist()
        if isinstance(point, (int, float)):
            return [float(point)]
        flat: list[float] = []
        for value in point:
            if isinstance(value, (list, tuple)):
                flat.extend(float(inner) for inner in value)
            else:
                flat.append(float(value))
        return flat

    def __call__(self, point) -> float:
        self._wire.send_ask(self._as_floats(point))
        kind, payload = self._wire.read()
        self.exchanges += 1
        if kind == "tell":
            return payload
        if kind == "error":
            raise BudgetRefused(payload)
        raise ProtocolError(f"expected tell or error after ask, got {kind!r}")


def _clip_traceback(text: str) -> str:
    if len(text) <= TRACEBACK_LIMIT:
        return text
    return "... " + text[-TRACEBACK_LIMIT:]


def _read_init(wire: Wire) -> tuple[int, int]:
    kind, payload = wire.read()
    if kind != "init":
        raise ProtocolError(f"expected init as the first message, got {kind!r}")
    try:
        budget = int(payload["budget"])
        dim = int(payload["dim"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ProtocolError(f"init payload missing usable budget/dim: {exc}") from exc
    if budget < 1 or dim < 1:
        raise ProtocolError(f"init with non-positive budget or dim: {payload}")
    return budget, dim


def load_candidate_class(
    source: str,
    class_name: str,
    whitelist: frozenset[str],
    source_name: str = "<candidate>",
) -> type:
    """Execute the source in an isolated namespace and return the class.

    Raises ImportError on whitelist violations, SyntaxError on unparsable
    source, and whatever the module body itself raises while executing.
    """
    violations = check_imports(source, whitelist)
    if violations:
        raise ImportError("import not whitelisted: " + ", ".join(violations))
    namespace: dict = {
        "__name__": "hosted_candidate",
        "__builtins__": guarded_builtins(whitelist),
    }
    exec(compile(source, source_name, "exec"), namespace)
    candidate = namespace.get(class_name)
    if candidate is None:
        raise NameError(f"class {class_name!r} not defined by the source")
    if not isinstance(candidate, type):
        raise TypeError(f"{class_name!r} is not a class")
    return candidate


def host(
    source: str,
    class_name: str,
    reader: IO[str],
    writer: IO[str],
    whitelist: frozenset[str],
    source_name: str = "<candidate>",
) -> int:
    """Run one hosting session over the given streams; return the exit status."""
    wire = Wire(reader, writer)
    try:
        budget, dim = _read_init(wire)
    except ProtocolError as exc:
        wire.send_error(str(exc))
        return 1

    # Hosted code may print; route that to stderr so the wire stream stays
    # clean.  The Wire object holds the original writer, so redirecting the
    # process-level stdout does not touch protocol messages.
    try:
        with redirect_stdout(sys.stderr):
            candidate_class = load_candidate_class(source, class_name, whitelist, source_name)
            instance = candidate_class(budget, dim)
    except BaseException:
        wire.send_error(_clip_traceback(traceback.format_exc()))
        return 1

    proxy = ObjectiveProxy(wire)
    try:
        with redirect_stdout(sys.stderr):
            instance(proxy)
    except BaseException:
        # Includes BudgetRefused: the orchestrator has already recorded its
        # own error for that session, but the failure is still reported so
        # nothing ends silently.
        wire.send_error(_clip_traceback(traceback.format_exc()))
        return 1

    wire.send_done()
    return 0
