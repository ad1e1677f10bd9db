"""The ask/tell wire protocol, from message grammar to a live session.

Workers run in their own process and talk line-delimited JSON on standard
streams: the orchestrator sends one init, answers every ask with a tell
(or an error once the budget is gone), and the worker finishes with done.
The orchestrator owns the objective, the clipping, and the budget, so a
buggy or hostile worker can never overspend or corrupt a score.
"""

import sys

from evobo.problems import ProblemSpec, make_instance
from evobo.protocol import decode_message, encode_message, run_wire_session

print("message grammar, one JSON object per line:")
for line in (
    '{"init":{"dim":2,"budget":5,"lower_bound":-5.0,"upper_bound":5.0,"seed":0}}',
    '{"ask":[0.5,-1.25]}',
    '{"tell":42.0}',
    '{"done":true}',
    '{"error":"budget exhausted"}',
):
    message = decode_message(line)
    print(f"  {line:62} -> {type(message).__name__}")
tell_line = '{"tell":1.5}'
print(f"  round trip: {encode_message(decode_message(tell_line))}")

# A live session against the bundled random-search worker.
instance = make_instance(ProblemSpec(8, 1, 2))
outcome = run_wire_session(
    [sys.executable, "-m", "evobo.worker", "random"],
    instance,
    budget=5,
    seed=0,
)

print(f"\nsession on f08 i01 d2, budget 5: error={outcome.error!r}")
print("transcript ('>' orchestrator to worker, '<' worker to orchestrator):")
for origin, line in outcome.transcript:
    text = line if len(line) <= 70 else line[:67] + "..."
    print(f"  {origin} {text}")
print(f"best-so-far trace: {[round(v, 3) for v in outcome.trace.values]}")
