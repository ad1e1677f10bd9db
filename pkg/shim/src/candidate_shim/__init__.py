"""Host a generated optimizer class behind an ask/tell wire protocol.

The shim is the worker half of a line-delimited JSON protocol spoken over
standard streams.  An orchestrator launches ``shim <source-file> <class-name>``,
sends a single ``init`` message carrying the evaluation budget and problem
dimension, and then answers each ``ask`` with a ``tell``.  The shim loads the
given source in an isolated namespace, instantiates ``ClassName(budget, dim)``,
and invokes the instance with a proxy objective: every call the hosted code
makes to the objective becomes exactly one ask/tell exchange.  The shim never
evaluates the objective itself.

Imports made by the hosted source are restricted to the standard library plus
a configurable whitelist of third-party packages.  Violations, load failures,
and runtime exceptions are all reported as ``error`` messages on the wire and
a nonzero exit status; exit status 0 is reached only after ``done`` is sent.
"""

from candidate_shim.host import BudgetRefused, host
from candidate_shim.whitelist import check_imports, load_whitelist
from candidate_shim.wire import ProtocolError, Wire

__version__ = "0.1.0"

__all__ = [
    "BudgetRefused",
    "ProtocolError",
    "Wire",
    "check_imports",
    "host",
    "load_whitelist",
]
