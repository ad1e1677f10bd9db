"""Tests for the wire protocol and candidate session supervision."""

from __future__ import annotations

import io
import math
import sys
from pathlib import Path

import numpy as np
import pytest

from evobo.metrics import Trace
from evobo.problems import ProblemSpec, make_instance
from evobo.protocol import (
    Ask,
    BudgetExhausted,
    Done,
    Error,
    EvalSession,
    Init,
    ParseError,
    Tell,
    decode_message,
    encode_message,
    replay,
    run_candidate,
    run_cells,
    run_native_session,
    run_wire_session,
    smoke_test,
    worker_main,
)

WORKERS = Path(__file__).parent / "wire_workers"


def worker_cmd(name: str) -> list[str]:
    return [sys.executable, str(WORKERS / f"{name}.py")]


def native_worker(name: str) -> list[str]:
    return [sys.executable, "-m", "evobo.worker", name]


class TestWireGrammar:
    def test_tell_exact_encoding(self):
        assert encode_message(Tell(1.5)) == '{"tell":1.5}'

    def test_tell_round_trip(self):
        msg = Tell(value=1.5)
        assert decode_message(encode_message(msg)) == msg

    def test_ask_round_trips_bit_exactly(self):
        point = (math.pi, -4.9999999999, 1e-17, 0.1 + 0.2, 5.0)
        msg = Ask(point=point)
        out = decode_message(encode_message(msg))
        assert out.point == point  # exact float equality

    def test_init_round_trip(self):
        msg = Init(dim=3, budget=50, lower_bound=-5.0, upper_bound=5.0, seed=42)
        assert decode_message(encode_message(msg)) == msg

    def test_done_and_error_round_trip(self):
        assert decode_message(encode_message(Done())) == Done()
        assert decode_message(encode_message(Error("nope"))) == Error("nope")

    def test_truncated_line(self):
        with pytest.raises(ParseError):
            decode_message('{"tell":1.')

    def test_parse_error_carries_offset(self):
        try:
            decode_message('{"tell":zz}')
        except ParseError as e:
            assert isinstance(e.offset, int)
        else:
            pytest.fail("expected ParseError")

    def test_unknown_kind(self):
        with pytest.raises(ParseError):
            decode_message('{"shout":1}')

    def test_two_keys_rejected(self):
        with pytest.raises(ParseError):
            decode_message('{"tell":1.0,"done":true}')

    def test_bad_payloads(self):
        for line in (
            '{"ask":"no"}',
            '{"ask":[1,true]}',
            '{"tell":"x"}',
            '{"done":false}',
            '{"error":5}',
            '{"init":[1]}',
            '{"init":{"dim":2}}',
            "[]",
            "3",
        ):
            with pytest.raises(ParseError):
                decode_message(line)


class TestEvalSession:
    def make(self, budget=5):
        inst = make_instance(ProblemSpec(1, 0, 2))
        return inst, EvalSession(inst, budget=budget, seed=0)

    def test_clips_and_records(self):
        inst, session = self.make()
        y = session.evaluate([100.0, -100.0])
        assert y == pytest.approx(inst.evaluate([5.0, -5.0]))
        assert np.array_equal(session.points[0], [5.0, -5.0])

    def test_budget_raises(self):
        _, session = self.make(budget=2)
        session.evaluate([0.0, 0.0])
        session.evaluate([1.0, 1.0])
        with pytest.raises(BudgetExhausted):
            session.evaluate([2.0, 2.0])

    def test_trace_is_best_so_far(self):
        _, session = self.make()
        session.evaluate([2.0, 0.0])  # 4
        session.evaluate([3.0, 0.0])  # 9, best stays 4
        session.evaluate([1.0, 0.0])  # 1
        assert session.trace().values == (4.0, 4.0, 1.0)

    def test_invalid_budget(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        with pytest.raises(ValueError):
            EvalSession(inst, budget=0)


class TestNativeSessions:
    def test_random_search_protocol_conformance(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_native_session(
            lambda d, b, s: __import__("evobo.optimizers", fromlist=["RandomSearch"]).RandomSearch(d, b, s),
            inst,
            budget=10,
            seed=0,
        )
        assert outcome.ok
        assert len(outcome.trace) == 10
        for p in outcome.points:
            assert np.all(p >= -5.0) and np.all(p <= 5.0)

    def test_crashing_engine_becomes_diagnostic(self):
        def factory(d, b, s):
            def engine(objective):
                raise RuntimeError("synthetic failure")

            return engine

        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_native_session(factory, inst, budget=5, seed=0)
        assert not outcome.ok
        assert "synthetic failure" in outcome.error
        assert len(outcome.trace) == 0

    def test_replay_reproduces_trace(self):
        inst = make_instance(ProblemSpec(2, 3, 2))
        outcome = run_native_session(
            lambda d, b, s: __import__("evobo.optimizers", fromlist=["RandomSearch"]).RandomSearch(d, b, s),
            inst,
            budget=8,
            seed=3,
        )
        again = replay(inst, outcome.points, budget=8)
        assert again.values == outcome.trace.values


class TestWireSessions:
    def test_native_worker_end_to_end(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            native_worker("random"), inst, budget=10, seed=0, time_limit=60.0
        )
        assert outcome.ok, outcome.error
        assert len(outcome.trace) == 10
        for p in outcome.points:
            assert np.all(p >= -5.0) and np.all(p <= 5.0)

    def test_wire_matches_in_process_run(self):
        """The same optimizer produces the same trace through either path."""
        inst = make_instance(ProblemSpec(1, 1, 2))
        from evobo.optimizers import RandomSearch

        wire = run_wire_session(native_worker("random"), inst, budget=10, seed=5, time_limit=60.0)
        native = run_native_session(lambda d, b, s: RandomSearch(d, b, s), inst, budget=10, seed=5)
        assert wire.trace.values == pytest.approx(native.trace.values, rel=1e-15)

    def test_over_budget_gets_error_reply(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("over_budget"), inst, budget=4, seed=0, time_limit=30.0
        )
        assert len(outcome.trace) == 4
        assert outcome.error == "budget exhausted"
        sent = [line for direction, line in outcome.transcript if direction == ">"]
        assert sent[-1] == '{"error":"budget exhausted"}'

    def test_crash_yields_empty_trace(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("crash_immediately"), inst, budget=4, seed=0, time_limit=30.0
        )
        assert not outcome.ok
        assert len(outcome.trace) == 0
        assert "boom" in outcome.error

    def test_malformed_line_reported_with_position(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("malformed_line"), inst, budget=4, seed=0, time_limit=30.0
        )
        assert outcome.error.startswith("protocol parse error at line 1")

    def test_hang_killed_at_deadline(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("sleeper"), inst, budget=4, seed=0, time_limit=1.5
        )
        assert outcome.error is not None
        assert outcome.error.startswith("timeout")

    def test_partial_crash_keeps_partial_trace(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("partial_then_crash"), inst, budget=10, seed=0, time_limit=30.0
        )
        assert len(outcome.trace) == 3
        assert not outcome.ok
        assert "simulated mid-run crash" in outcome.error

    def test_out_of_bounds_ask_clipped(self):
        inst = make_instance(ProblemSpec(1, 0, 3))
        outcome = run_wire_session(
            worker_cmd("out_of_bounds"), inst, budget=4, seed=0, time_limit=30.0
        )
        assert outcome.ok
        assert np.array_equal(outcome.points[0], [5.0, -5.0, -5.0])
        assert outcome.trace.values[0] == pytest.approx(inst.evaluate([5.0, -5.0, -5.0]))

    def test_wrong_dimension_ask_rejected(self):
        inst = make_instance(ProblemSpec(1, 0, 2))
        outcome = run_wire_session(
            worker_cmd("wrong_dim"), inst, budget=4, seed=0, time_limit=30.0
        )
        assert "dimension mismatch" in outcome.error

    def test_transcript_replays(self):
        """Ask points recovered from the transcript reproduce the trace."""
        inst = make_instance(ProblemSpec(1, 2, 2))
        outcome = run_wire_session(
            native_worker("random"), inst, budget=6, seed=9, time_limit=60.0
        )
        asked = [
            decode_message(line).point
            for direction, line in outcome.transcript
            if direction == "<" and '"ask"' in line
        ]
        again = replay(inst, [np.asarray(p) for p in asked], budget=6)
        assert again.values == outcome.trace.values


class TestRunCandidate:
    SPECS = [ProblemSpec(1, 0, 2), ProblemSpec(2, 1, 2)]

    def test_native_random(self):
        report = run_candidate("random", self.SPECS, seeds=[0, 1], budget=10)
        assert len(report.per_cell) == 4
        assert 0.0 <= report.aggregate <= 1.0
        assert not report.failures

    def test_crashing_worker_scores_zero_and_run_proceeds(self):
        report = run_candidate(
            worker_cmd("crash_immediately"), self.SPECS, seeds=[0], budget=5
        )
        assert report.aggregate == 0.0
        assert len(report.failures) == 2
        # the orchestrator is still healthy: a follow-up run works
        follow_up = run_candidate("random", self.SPECS, seeds=[0], budget=5)
        assert follow_up.aggregate > 0.0

    def test_partial_crash_scores_padded_trace(self):
        report = run_candidate(
            worker_cmd("partial_then_crash"), [ProblemSpec(1, 0, 2)], seeds=[0], budget=10
        )
        cell = (1, 0, 0)
        assert report.per_cell[cell] > 0.0
        assert report.failures and report.failures[0][0] == cell

    def test_unknown_name_lists_registry(self):
        with pytest.raises(ValueError, match="atrbo"):
            run_candidate("nonsense", self.SPECS, seeds=[0], budget=5)

    def test_parallel_workers_match_sequential(self):
        seq = run_candidate("random", self.SPECS, seeds=[0, 1], budget=8, workers=1)
        par = run_candidate("random", self.SPECS, seeds=[0, 1], budget=8, workers=4)
        assert seq.per_cell == par.per_cell

    def test_run_cells_outcomes(self):
        outcomes = run_cells("random", [ProblemSpec(1, 0, 2)], seeds=[0], budget=7)
        outcome = outcomes[(1, 0, 0)]
        assert len(outcome.trace) == 7
        assert outcome.ok


class TestSmokeTest:
    def test_reference_optimizer_passes(self):
        result = smoke_test("random")
        assert result.ok

    def test_wire_reference_passes(self):
        result = smoke_test(native_worker("atrbo"))
        assert result.ok, result.error

    def test_malformed_worker_fails_with_parse_message(self):
        result = smoke_test(worker_cmd("malformed_line"))
        assert not result.ok
        assert result.error.startswith("protocol parse error at line 1")

    def test_sleeper_fails_with_timeout(self):
        result = smoke_test(worker_cmd("sleeper"), time_limit=1.5)
        assert not result.ok
        assert result.error.startswith("timeout")

    def test_crash_fails_with_message(self):
        result = smoke_test(worker_cmd("crash_immediately"))
        assert not result.ok
        assert result.error


class TestWorkerMain:
    def test_full_session_in_process(self):
        lines = [encode_message(Init(dim=2, budget=3, lower_bound=-5.0, upper_bound=5.0, seed=1))]
        lines += [encode_message(Tell(float(i))) for i in range(3)]
        stdin = io.StringIO("\n".join(lines) + "\n")
        stdout = io.StringIO()

        from evobo.optimizers import RandomSearch

        status = worker_main(lambda d, b, s: RandomSearch(d, b, s), stdin, stdout)
        assert status == 0
        out_lines = stdout.getvalue().strip().splitlines()
        assert len(out_lines) == 4  # 3 asks + done
        assert decode_message(out_lines[-1]) == Done()

    def test_error_reply_aborts_with_error_message(self):
        lines = [
            encode_message(Init(dim=2, budget=3, lower_bound=-5.0, upper_bound=5.0, seed=1)),
            encode_message(Error("budget exhausted")),
        ]
        stdin = io.StringIO("\n".join(lines) + "\n")
        stdout = io.StringIO()

        from evobo.optimizers import RandomSearch

        status = worker_main(lambda d, b, s: RandomSearch(d, b, s), stdin, stdout)
        assert status == 1
        last = decode_message(stdout.getvalue().strip().splitlines()[-1])
        assert isinstance(last, Error)
