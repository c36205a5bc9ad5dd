"""Deterministic stand-in for a real proof checker worker.

Speaks the newline-delimited JSON wire protocol on stdin/stdout.  Behavior is
driven entirely by the command text:

    starts with import lines  sleep MOCK_HEADER_COST, return a fresh env
    anything else             sleep MOCK_BODY_COST
    empty/whitespace cmd      reply immediately (readiness probes are free)
    MOCK_ERROR                attach an error diagnostic
    sorry (word)              attach a sorry entry plus a warning
    MOCK_SLEEP(n)             sleep n extra seconds
    MOCK_GROW(n)              allocate n bytes of resident memory and keep it
    MOCK_CRASH                exit the process without replying

Config env vars: MOCK_HEADER_COST (default 0.3), MOCK_BODY_COST (default
0.03), MOCK_JITTER (fraction in [0,1), default 0), MOCK_CALL_LOG (path; every
received command is appended there as a JSON line).

Single-threaded: one command in flight at a time, like the real checker.
"""

from __future__ import annotations

import json
import os
import random
import re
import sys
import time

from .protocol import (
    Diagnostic,
    Position,
    ReplReply,
    Severity,
    SorryEntry,
    decode_command,
    encode_reply,
)
from .errors import MalformedReply

_SLEEP_RE = re.compile(r"MOCK_SLEEP\((\d+(?:\.\d+)?)\)")
_GROW_RE = re.compile(r"MOCK_GROW\((\d+)\)")
_SORRY_RE = re.compile(r"\bsorry\b")
_BY_RE = re.compile(r"\bby\b")


def _token_pos(code: str, index: int) -> Position:
    """1-based line / 0-based column of a character offset."""
    line = code.count("\n", 0, index) + 1
    col = index - (code.rfind("\n", 0, index) + 1)
    return Position(line, col)


def synth_infotree(code: str) -> list | None:
    """Flat list of sequential tactic nodes, one per non-blank, non-comment
    line after the first line containing the `by` keyword.  Ranges index the
    command text as received; goal states chain from node to node."""
    lines = code.split("\n")
    begun = False
    nodes: list[dict] = []
    step = 0
    for line_no, line in enumerate(lines, start=1):
        if not begun:
            if _BY_RE.search(line):
                begun = True
            continue
        stripped = line.strip()
        if not stripped or stripped.startswith("--"):
            continue
        indent = len(line) - len(line.lstrip())
        nodes.append(
            {
                "kind": "TacticInfo",
                "range": {
                    "start": {"line": line_no, "column": indent},
                    "finish": {"line": line_no, "column": len(line.rstrip())},
                },
                "goalsBefore": [f"⊢ step {step}"],
                "goalsAfter": [f"⊢ step {step + 1}"],
                "children": [],
            }
        )
        step += 1
    if not nodes:
        return None
    nodes[-1]["goalsAfter"] = []
    return nodes


class MockChecker:
    def __init__(self, header_cost: float, body_cost: float, jitter: float,
                 call_log: str | None = None, seed: int | None = None):
        if header_cost < 0 or body_cost < 0:
            raise ValueError("costs must be >= 0")
        if not 0 <= jitter < 1:
            raise ValueError("jitter must be in [0, 1)")
        self.header_cost = header_cost
        self.body_cost = body_cost
        self.jitter = jitter
        self._rng = random.Random(seed)
        self._next_env = 0
        self._issued: set[int] = set()
        self._balloon: list[bytearray] = []
        self._log = open(call_log, "a", encoding="utf-8") if call_log else None

    def _log_command(self, doc: dict) -> None:
        if self._log is None:
            return
        record = {"pid": os.getpid(), "t": time.time(), **doc}
        self._log.write(json.dumps(record, ensure_ascii=False) + "\n")
        self._log.flush()

    def _cost_for(self, code: str) -> float:
        if not code.strip():
            return 0.0
        base = self.header_cost if code.lstrip().startswith("import") else self.body_cost
        m = _SLEEP_RE.search(code)
        if m:
            base += float(m.group(1))
        if self.jitter:
            base *= 1 + self._rng.uniform(-self.jitter, self.jitter)
        return base

    def handle(self, code: str, env: int | None, infotree_mode: str | None) -> ReplReply:
        slept = self._cost_for(code)
        if slept > 0:
            time.sleep(slept)
        grow = _GROW_RE.search(code)
        if grow:
            self._balloon.append(bytearray(int(grow.group(1))))

        messages: list[Diagnostic] = []
        sorries: list[SorryEntry] = []
        if env is not None and env not in self._issued:
            messages.append(
                Diagnostic(Severity.ERROR, Position(1, 0), None, f"unknown environment {env}")
            )
        idx = code.find("MOCK_ERROR")
        if idx >= 0:
            pos = _token_pos(code, idx)
            messages.append(
                Diagnostic(
                    Severity.ERROR,
                    pos,
                    Position(pos.line, pos.column + len("MOCK_ERROR")),
                    "MOCK_ERROR: forced failure",
                )
            )
        m = _SORRY_RE.search(code)
        if m:
            pos = _token_pos(code, m.start())
            end = Position(pos.line, pos.column + len("sorry"))
            messages.append(
                Diagnostic(Severity.WARNING, pos, end, "declaration uses 'sorry'")
            )
            sorries.append(SorryEntry(pos, end, "⊢ True"))

        fresh = self._next_env
        self._next_env += 1
        self._issued.add(fresh)
        tree = None
        if infotree_mode and not code.lstrip().startswith("import"):
            tree = synth_infotree(code)
        return ReplReply(
            env=fresh,
            messages=tuple(messages),
            sorries=tuple(sorries),
            time=slept,
            infotree=tree,
        )

    def serve(self, stdin, stdout) -> int:
        """Process commands until EOF.  Malformed input exits nonzero."""
        for line in stdin:
            try:
                command = decode_command(line)
            except MalformedReply:
                return 2
            self._log_command(
                {"cmd": command.cmd, "env": command.env, "infotree": command.infotree}
            )
            if "MOCK_CRASH" in command.cmd:
                if self._log:
                    self._log.flush()
                os._exit(3)
            reply = self.handle(command.cmd, command.env, command.infotree)
            stdout.write(encode_reply(reply))
            stdout.flush()
        return 0


def main() -> int:
    checker = MockChecker(
        header_cost=float(os.environ.get("MOCK_HEADER_COST", "0.3")),
        body_cost=float(os.environ.get("MOCK_BODY_COST", "0.03")),
        jitter=float(os.environ.get("MOCK_JITTER", "0")),
        call_log=os.environ.get("MOCK_CALL_LOG") or None,
        seed=0,
    )
    return checker.serve(sys.stdin.buffer, sys.stdout.buffer)


if __name__ == "__main__":
    sys.exit(main())
