"""The full search loop with a scripted stand-in for the language model.

A mock client replays prepared replies, so the whole evolutionary
machinery runs offline: candidates are parsed out of fenced code blocks,
scored on real benchmark cells, ranked, and fed back into later prompts.
One reply is deliberately broken to show how a failure scores zero and
its error message reaches the next prompt.
"""

from evobo.evolution import ESConfig, EvalOutcome, RunObserver, run_search
from evobo.llm import MockClient
from evobo.problems import ProblemSpec
from evobo.protocol import run_candidate

SPECS = [ProblemSpec(2, 1, 2), ProblemSpec(15, 1, 2)]
BUDGET = 30


def reply(name, body):
    return (
        f"# Description: {name} demo candidate.\n"
        "# Code:\n"
        "```python\n"
        "import numpy as np\n\n\n"
        f"class {name}:\n"
        "    def __init__(self, budget, dim):\n"
        "        self.budget = budget\n"
        "        self.dim = dim\n\n"
        "    def __call__(self, func):\n"
        f"{body}"
        "        return best_y, best_x\n"
        "```\n"
    )


UNIFORM = """        rng = np.random.default_rng(1)
        best_y, best_x = float("inf"), None
        for _ in range(self.budget):
            x = rng.uniform(-5.0, 5.0, self.dim)
            y = func(x)
            if y < best_y:
                best_y, best_x = y, x
"""

SHRINKING = """        rng = np.random.default_rng(2)
        best_y, best_x = float("inf"), np.zeros(self.dim)
        scale = 5.0
        for step in range(self.budget):
            x = np.clip(best_x + rng.normal(0.0, scale, self.dim), -5.0, 5.0)
            y = func(x)
            if y < best_y:
                best_y, best_x = y, x
            scale = max(0.05, scale * 0.93)
"""

responses = [
    # The first reply is broken: its body references an undefined name, so
    # every cell fails and the error shows up in later prompts as history.
    reply("BrokenBO", "        best_y, best_x = mystery_helper(func)\n"),
    reply("UniformDrawBO", UNIFORM),
    reply("ShrinkingStepBO", SHRINKING),
    reply("ShrinkingStepV2BO", SHRINKING.replace("0.93", "0.90")),
    reply("UniformDrawV2BO", UNIFORM.replace("default_rng(1)", "default_rng(7)")),
    reply("ShrinkingStepV3BO", SHRINKING.replace("(2)", "(9)")),
]


def evaluate(candidate):
    namespace: dict = {}
    try:
        exec(candidate.code, namespace)
        cls = namespace[candidate.name]
        report = run_candidate(
            lambda dim, budget, seed: cls(budget, dim),
            SPECS,
            seeds=[0],
            budget=BUDGET,
        )
        error = None
        if report.failures:
            (fid, iid, seed), message = report.failures[0]
            error = f"{message} (first failing cell f{fid:02d} i{iid:02d} s{seed})"
        return EvalOutcome(fitness=report.aggregate, error=error, report=report)
    except Exception as e:  # scored zero; the message feeds the next prompt
        return EvalOutcome(fitness=0.0, error=f"{type(e).__name__}: {e}")


class PrintProgress(RunObserver):
    def on_candidate(self, candidate):
        note = f"score {candidate.fitness:.4f}" if not candidate.error else "failed"
        print(f"    [{candidate.created}] {candidate.name:18} ({candidate.origin:9}) {note}")

    def on_generation(self, index, population, t):
        kept = ", ".join(c.name for c in population)
        print(f"  after generation {index} (t={t}): kept {kept}")


class CapturingClient(MockClient):
    """Mock client that also keeps every prompt it was shown."""

    def __init__(self, responses):
        super().__init__(responses)
        self.prompts = []

    def generate(self, prompt, params=None):
        self.prompts.append(prompt)
        return super().generate(prompt, params)


client = CapturingClient(responses)
config = ESConfig(T=6, mu=2, lam=2, p_cr=0.5, elitist=True, seed=3)

print(f"budget: {config.T} candidates, ({config.mu}+{config.lam}) selection\n")
result = run_search(config, client, evaluate, observer=PrintProgress())

best = result.best
print(f"\nbest candidate: {best.name} with fitness {best.fitness:.4f}")
print(f"archive size {len(result.archive)}, llm calls {client.calls}")

failed = next(c for c in result.archive if c.error)
followups = [p for p in client.prompts if failed.error.split(" (")[0] in p]
print(f"\nbroken candidate scored {failed.fitness} with error: {failed.error}")
print(f"later prompts that showed the model that failure: {len(followups)}")
