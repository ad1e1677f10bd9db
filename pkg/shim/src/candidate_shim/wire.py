"""Worker-side codec for the line-delimited ask/tell protocol.

One JSON object per line.  The orchestrator sends ``{"init": {...}}`` once,
then replies to each ``{"ask": [...]}`` with ``{"tell": value}`` or
``{"error": "message"}``.  The worker finishes with ``{"done": true}``.
"""

from __future__ import annotations

import json
from typing import IO


class ProtocolError(Exception):
    """The peer closed the stream or sent a line outside the grammar."""


def _is_number(value: object) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def parse_message(line: str) -> tuple[str, object]:
    """Decode one wire line into a ``(kind, payload)`` pair.

    Kinds are ``init`` (payload: dict), ``tell`` (payload: float),
    ``error`` (payload: str), and ``done`` (payload: True).
    """
    try:
        message = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"undecodable wire line: {line!r}") from exc
    if not isinstance(message, dict) or len(message) != 1:
        raise ProtocolError(f"expected a single-key object, got: {line.strip()!r}")
    key, payload = next(iter(message.items()))
    if key == "init":
        if not isinstance(payload, dict):
            raise ProtocolError("init payload must be an object")
        return "init", payload
    if key == "tell":
        if not _is_number(payload):
            raise ProtocolError(f"tell payload must be a number, got {payload!r}")
        return "tell", float(payload)
    if key == "error":
        return "error", str(payload)
    if key == "done":
        return "done", True
    raise ProtocolError(f"unknown message kind: {key!r}")


class Wire:
    """Reads orchestrator messages and writes worker messages on text streams."""

    def __init__(self, reader: IO[str], writer: IO[str]):
        self._reader = reader
        self._writer = writer

    def read(self) -> tuple[str, object]:
        line = self._reader.readline()
        if not line:
            raise ProtocolError("orchestrator closed the stream")
        return parse_message(line)

    def _write(self, message: dict) -> None:
        self._writer.write(json.dumps(message, separators=(",", ":")) + "\n")
        self._writer.flush()

    def send_ask(self, point: list[float]) -> None:
        self._write({"ask": point})

    def send_done(self) -> None:
        self._write({"done": True})

    def send_error(self, message: str) -> None:
        # Best effort: the orchestrator may already have hung up, and the
        # error is about to surface through the exit status anyway.
        try:
            self._write({"error": message})
        except (BrokenPipeError, ValueError, OSError):
            pass
