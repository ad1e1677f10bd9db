import io
import json
import textwrap

import numpy as np
import pytest

from candidate_shim.host import (
    TRACEBACK_LIMIT,
    BudgetRefused,
    ObjectiveProxy,
    host,
    load_candidate_class,
)
from candidate_shim.wire import Wire

ALLOWED = frozenset({"numpy", "scipy", "sklearn"})

COUNTING_SOURCE = textwrap.dedent(
    """
    class CountingBO:
        def __init__(self, budget, dim):
            self.budget = budget
            self.dim = dim

        def __call__(self, func):
            best = float("inf")
            for step in range(self.budget):
                best = min(best, func([float(step)] * self.dim))
            return best, None
    """
)


def script(*messages):
    """Join orchestrator messages into a readable stream."""
    return io.StringIO("".join(json.dumps(m, separators=(",", ":")) + "\n" for m in messages))


def init_message(dim=2, budget=3):
    return {"init": {"dim": dim, "budget": budget, "lower": -5.0, "upper": 5.0, "seed": 0}}


def run_host(source, class_name, reader, whitelist=ALLOWED):
    writer = io.StringIO()
    code = host(source, class_name, reader, writer, whitelist)
    sent = [json.loads(line) for line in writer.getvalue().splitlines()]
    return code, sent


class TestHappyPath:
    def test_asks_then_done_and_exit_zero(self):
        reader = script(init_message(dim=2, budget=3), {"tell": 5.0}, {"tell": 2.0}, {"tell": 9.0})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 0
        assert sent == [
            {"ask": [0.0, 0.0]},
            {"ask": [1.0, 1.0]},
            {"ask": [2.0, 2.0]},
            {"done": True},
        ]

    def test_one_exchange_per_objective_call(self):
        reader = script(init_message(budget=4), *({"tell": 1.0} for _ in range(4)))
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 0
        assert sum(1 for m in sent if "ask" in m) == 4

    def test_instance_sees_init_budget_and_dim(self):
        probe = textwrap.dedent(
            """
            class ProbeBO:
                def __init__(self, budget, dim):
                    assert budget == 2 and dim == 5, (budget, dim)

                def __call__(self, func):
                    func([0.0] * 5)
                    return 0.0, None
            """
        )
        reader = script(init_message(dim=5, budget=2), {"tell": 0.5})
        code, sent = run_host(probe, "ProbeBO", reader)
        assert code == 0
        assert sent[-1] == {"done": True}


class TestPointConversion:
    @pytest.mark.parametrize(
        "expression, expected",
        [
            ("[1.0, 2.0]", [1.0, 2.0]),
            ("(0.5, -0.5)", [0.5, -0.5]),
            ("np.array([3.0, 4.0])", [3.0, 4.0]),
            ("np.array([[3.0], [4.0]])", [3.0, 4.0]),
            ("np.float64(2.5)", [2.5]),
            ("1.5", [1.5]),
        ],
    )
    def test_point_shapes_flatten_to_float_lists(self, expression, expected):
        source = textwrap.dedent(
            f"""
            import numpy as np

            class ShapeBO:
                def __init__(self, budget, dim):
                    pass

                def __call__(self, func):
                    func({expression})
                    return 0.0, None
            """
        )
        reader = script(init_message(dim=2, budget=5), {"tell": 0.0})
        code, sent = run_host(source, "ShapeBO", reader)
        assert code == 0
        assert sent[0] == {"ask": expected}

    def test_as_floats_handles_numpy_column(self):
        proxy = ObjectiveProxy.__new__(ObjectiveProxy)
        assert proxy._as_floats(np.array([[1.0], [2.0], [3.0]])) == [1.0, 2.0, 3.0]

    def test_proxy_returns_float_tells(self):
        reader = script(init_message(dim=1, budget=1), {"tell": 7})
        writer = io.StringIO()
        proxy = ObjectiveProxy(Wire(reader, writer))
        reader.readline()  # consume init; the proxy only reads replies
        value = proxy([0.0])
        assert value == 7.0
        assert isinstance(value, float)
        assert proxy.exchanges == 1


class TestRefusals:
    def test_error_reply_raises_inside_hosted_code(self):
        reader = script(init_message(budget=3), {"tell": 1.0}, {"error": "budget exhausted"})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 1
        assert "BudgetRefused" in sent[-1]["error"]
        assert "budget exhausted" in sent[-1]["error"]
        assert not any("done" in m for m in sent)

    def test_hosted_code_may_catch_refusal_and_finish(self):
        source = textwrap.dedent(
            """
            class PoliteBO:
                def __init__(self, budget, dim):
                    self.budget = budget
                    self.dim = dim

                def __call__(self, func):
                    for step in range(self.budget + 3):
                        try:
                            func([0.0] * self.dim)
                        except Exception:
                            break
                    return 0.0, None
            """
        )
        reader = script(
            init_message(dim=1, budget=2),
            {"tell": 1.0},
            {"tell": 1.0},
            {"error": "budget exhausted"},
        )
        code, sent = run_host(source, "PoliteBO", reader)
        assert code == 0
        assert sent[-1] == {"done": True}
        assert sum(1 for m in sent if "ask" in m) == 3

    def test_unexpected_reply_kind_is_an_error(self):
        reader = script(init_message(budget=2), {"done": True})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 1
        assert "expected tell or error" in sent[-1]["error"]


class TestHandshake:
    def test_first_message_must_be_init(self):
        reader = script({"tell": 1.0})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 1
        assert "expected init" in sent[-1]["error"]

    def test_init_missing_budget(self):
        reader = script({"init": {"dim": 2}})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 1
        assert "budget/dim" in sent[-1]["error"]

    def test_init_non_positive_dim(self):
        reader = script({"init": {"dim": 0, "budget": 5}})
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", reader)
        assert code == 1
        assert "non-positive" in sent[-1]["error"]

    def test_closed_stream_before_init(self):
        code, sent = run_host(COUNTING_SOURCE, "CountingBO", io.StringIO(""))
        assert code == 1
        assert "closed the stream" in sent[-1]["error"]


class TestLoadFailures:
    def test_syntax_error_reported(self):
        code, sent = run_host("class Broken(", "Broken", script(init_message()))
        assert code == 1
        assert "SyntaxError" in sent[-1]["error"]

    def test_missing_class_reported(self):
        code, sent = run_host("x = 1", "GhostBO", script(init_message()))
        assert code == 1
        assert "not defined by the source" in sent[-1]["error"]

    def test_name_bound_to_non_class(self):
        code, sent = run_host("def AlmostBO():\n    pass", "AlmostBO", script(init_message()))
        assert code == 1
        assert "is not a class" in sent[-1]["error"]

    def test_whitelist_violation_reported(self):
        code, sent = run_host("import requests", "AnyBO", script(init_message()))
        assert code == 1
        assert "import not whitelisted: requests" in sent[-1]["error"]

    def test_constructor_failure_reported_with_traceback(self):
        source = textwrap.dedent(
            """
            class FragileBO:
                def __init__(self, budget, dim):
                    raise ValueError("bad hyperparameters")

                def __call__(self, func):
                    return 0.0, None
            """
        )
        code, sent = run_host(source, "FragileBO", script(init_message()))
        assert code == 1
        assert "ValueError: bad hyperparameters" in sent[-1]["error"]
        assert not any("ask" in m for m in sent)

    def test_module_body_failure_reported(self):
        code, sent = run_host("raise ImportError('no backend')", "AnyBO", script(init_message()))
        assert code == 1
        assert "no backend" in sent[-1]["error"]


class TestRuntimeFailures:
    def test_exception_before_any_ask(self):
        source = textwrap.dedent(
            """
            class EagerFailBO:
                def __init__(self, budget, dim):
                    pass

                def __call__(self, func):
                    raise RuntimeError("kernel matrix singular")
            """
        )
        code, sent = run_host(source, "EagerFailBO", script(init_message()))
        assert code == 1
        assert "kernel matrix singular" in sent[-1]["error"]
        assert not any("ask" in m for m in sent)
        assert not any("done" in m for m in sent)

    def test_sys_exit_is_not_a_clean_finish(self):
        source = textwrap.dedent(
            """
            import sys

            class QuitterBO:
                def __init__(self, budget, dim):
                    pass

                def __call__(self, func):
                    sys.exit(0)
            """
        )
        code, sent = run_host(source, "QuitterBO", script(init_message()))
        assert code == 1
        assert not any("done" in m for m in sent)

    def test_traceback_is_clipped(self):
        source = textwrap.dedent(
            """
            class VerboseFailBO:
                def __init__(self, budget, dim):
                    pass

                def __call__(self, func):
                    raise ValueError("x" * 20000)
            """
        )
        code, sent = run_host(source, "VerboseFailBO", script(init_message()))
        assert code == 1
        assert len(sent[-1]["error"]) <= TRACEBACK_LIMIT + 4


class TestLoadCandidateClass:
    def test_returns_class_in_isolated_namespace(self):
        cls = load_candidate_class(COUNTING_SOURCE, "CountingBO", ALLOWED)
        instance = cls(3, 2)
        assert instance.budget == 3

    def test_namespace_is_not_main(self):
        source = "captured_name = __name__\n" + COUNTING_SOURCE
        cls = load_candidate_class(source, "CountingBO", ALLOWED)
        assert cls.__module__ == "hosted_candidate"

    def test_budget_refused_is_a_runtime_error(self):
        assert issubclass(BudgetRefused, RuntimeError)
