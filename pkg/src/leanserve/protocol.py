"""Snippet model, checker wire protocol, header splitting, and verdict analysis.

The checker worker speaks newline-delimited JSON documents over its standard
streams: one command document in, one reply document out, one document per
line.  Everything here is an immutable value type, safe to share between
threads without coordination.

Positions follow the checker's convention: lines are 1-based, columns are
0-based.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Optional

from .errors import MalformedReply

__all__ = [
    "Snippet",
    "SplitSource",
    "Position",
    "Diagnostic",
    "SorryEntry",
    "ReplCommand",
    "ReplReply",
    "Severity",
    "VerdictStatus",
    "Verdict",
    "split_snippet",
    "normalize_header",
    "analyze",
    "encode_command",
    "decode_command",
    "encode_reply",
    "decode_reply",
]

_IMPORT_RE = re.compile(r"^\s*import\b")
_COMMENT_RE = re.compile(r"^\s*--")

INFOTREE_MODES = ("none", "tactics", "full")


@dataclass(frozen=True)
class Snippet:
    """One identified unit of source code submitted for checking."""

    id: str
    code: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("snippet id must be non-empty")


@dataclass(frozen=True)
class SplitSource:
    """A snippet split into its import-only header and the remaining body."""

    header: str
    body: str


@dataclass(frozen=True, order=True)
class Position:
    line: int  # 1-based
    column: int  # 0-based

    def to_wire(self) -> dict:
        return {"line": self.line, "column": self.column}

    @classmethod
    def from_wire(cls, raw: Any) -> "Position":
        if not isinstance(raw, dict):
            raise MalformedReply(f"position must be an object, got {type(raw).__name__}")
        try:
            return cls(line=int(raw["line"]), column=int(raw["column"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedReply(f"bad position document: {raw!r}") from exc


class Severity(str, Enum):
    ERROR = "error"
    WARNING = "warning"
    INFO = "info"


@dataclass(frozen=True)
class Diagnostic:
    """One checker message with its source location."""

    severity: Severity
    pos: Position
    end_pos: Optional[Position]
    data: str

    def __post_init__(self) -> None:
        if self.end_pos is not None and self.end_pos < self.pos:
            raise ValueError("diagnostic endPos precedes pos")

    def to_wire(self) -> dict:
        return {
            "severity": self.severity.value,
            "pos": self.pos.to_wire(),
            "endPos": self.end_pos.to_wire() if self.end_pos else None,
            "data": self.data,
        }

    @classmethod
    def from_wire(cls, raw: Any) -> "Diagnostic":
        if not isinstance(raw, dict):
            raise MalformedReply("diagnostic must be an object")
        try:
            severity = Severity(raw["severity"])
        except (KeyError, ValueError) as exc:
            raise MalformedReply(f"bad diagnostic severity: {raw!r}") from exc
        end_raw = raw.get("endPos")
        return cls(
            severity=severity,
            pos=Position.from_wire(raw["pos"]) if "pos" in raw else Position(1, 0),
            end_pos=Position.from_wire(end_raw) if end_raw else None,
            data=str(raw.get("data", "")),
        )


@dataclass(frozen=True)
class SorryEntry:
    """A placeholder-closed goal reported by the checker."""

    pos: Position
    end_pos: Optional[Position]
    goal: str

    def to_wire(self) -> dict:
        return {
            "pos": self.pos.to_wire(),
            "endPos": self.end_pos.to_wire() if self.end_pos else None,
            "goal": self.goal,
        }

    @classmethod
    def from_wire(cls, raw: Any) -> "SorryEntry":
        if not isinstance(raw, dict):
            raise MalformedReply("sorry entry must be an object")
        end_raw = raw.get("endPos")
        return cls(
            pos=Position.from_wire(raw["pos"]) if "pos" in raw else Position(1, 0),
            end_pos=Position.from_wire(end_raw) if end_raw else None,
            goal=str(raw.get("goal", "")),
        )


@dataclass(frozen=True)
class ReplCommand:
    """A source-elaboration command sent to a checker worker.

    `env`, when given, must be an environment id previously returned by the
    same worker process.
    """

    cmd: str
    env: Optional[int] = None
    infotree: Optional[str] = None  # "tactics" or "full"

    def __post_init__(self) -> None:
        if self.infotree is not None and self.infotree not in ("tactics", "full"):
            raise ValueError(f"unknown infotree mode {self.infotree!r}")
        if self.env is not None and self.env < 0:
            raise ValueError("env must be non-negative")


@dataclass(frozen=True)
class ReplReply:
    """A checker worker's reply to one command."""

    env: int
    messages: tuple[Diagnostic, ...] = ()
    sorries: tuple[SorryEntry, ...] = ()
    time: float = 0.0
    infotree: Any = None

    def __post_init__(self) -> None:
        if self.env < 0:
            raise ValueError("env must be non-negative")
        if self.time < 0:
            raise ValueError("time must be >= 0")

    def has_errors(self) -> bool:
        return any(m.severity is Severity.ERROR for m in self.messages)


class VerdictStatus(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    SORRY = "sorry"
    TIMEOUT = "timeout"
    CRASHED = "crashed"


@dataclass(frozen=True)
class Verdict:
    """Classified outcome of checking one snippet."""

    status: VerdictStatus
    diagnostics: tuple[Diagnostic, ...] = field(default=())


def split_snippet(code: str) -> SplitSource:
    """Split source text into an import-only header and the remaining body.

    The header is the maximal prefix made of import lines, blank lines, and
    comment lines that are followed by a later import; the split point sits
    immediately after the newline terminating the last import line of that
    prefix.  ``header + body == code`` always holds.  A file without imports
    (or with comments only) has an empty header.
    """
    lines = code.splitlines(keepends=True)
    last_import = -1
    for i, line in enumerate(lines):
        stripped = line.strip()
        if _IMPORT_RE.match(line):
            last_import = i
        elif stripped == "" or _COMMENT_RE.match(line):
            continue  # kept only if a later import extends the prefix
        else:
            break
    if last_import < 0:
        return SplitSource(header="", body=code)
    cut = sum(len(l) for l in lines[: last_import + 1])
    return SplitSource(header=code[:cut], body=code[cut:])


def normalize_header(header: str) -> str:
    """Canonical cache key for a header: import lines only, right-trimmed,
    joined with single newlines, order preserved."""
    kept = [line.rstrip() for line in header.splitlines() if _IMPORT_RE.match(line)]
    return "\n".join(kept)


def analyze(reply: ReplReply) -> Verdict:
    """Classify a completed reply: any error diagnostic makes it invalid,
    otherwise a non-empty sorries list makes it sorry, otherwise valid.

    Timeout and crash verdicts are assigned by the pool, never here.
    """
    if reply.has_errors():
        return Verdict(VerdictStatus.INVALID, reply.messages)
    if reply.sorries:
        return Verdict(VerdictStatus.SORRY, reply.messages)
    return Verdict(VerdictStatus.VALID, reply.messages)


def encode_command(cmd: ReplCommand) -> bytes:
    """Serialize a command to one newline-terminated JSON document."""
    doc: dict[str, Any] = {"cmd": cmd.cmd}
    if cmd.env is not None:
        doc["env"] = cmd.env
    if cmd.infotree is not None:
        doc["infotree"] = cmd.infotree
    return json.dumps(doc, ensure_ascii=False).encode("utf-8") + b"\n"


def decode_command(line: bytes) -> ReplCommand:
    """Parse a command document (the worker-side mirror of encode_command)."""
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedReply(f"not a command document: {line[:80]!r}") from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("cmd"), str):
        raise MalformedReply(f"command document missing cmd: {line[:80]!r}")
    env = doc.get("env")
    if env is not None and not isinstance(env, int):
        raise MalformedReply(f"command env must be an integer: {env!r}")
    tree_mode = doc.get("infotree")
    if tree_mode is not None and tree_mode not in ("tactics", "full"):
        raise MalformedReply(f"unknown infotree mode: {tree_mode!r}")
    return ReplCommand(cmd=doc["cmd"], env=env, infotree=tree_mode)


def encode_reply(reply: ReplReply) -> bytes:
    """Serialize a reply to one newline-terminated JSON document."""
    doc: dict[str, Any] = {
        "env": reply.env,
        "messages": [m.to_wire() for m in reply.messages],
        "sorries": [s.to_wire() for s in reply.sorries],
        "time": reply.time,
    }
    if reply.infotree is not None:
        doc["infotree"] = reply.infotree
    return json.dumps(doc, ensure_ascii=False).encode("utf-8") + b"\n"


def decode_reply(line: bytes) -> ReplReply:
    """Parse a reply document.

    Raises MalformedReply on anything that is not a complete reply document;
    callers treat that as a worker crash.
    """
    try:
        doc = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MalformedReply(f"not a reply document: {line[:80]!r}") from exc
    if not isinstance(doc, dict):
        raise MalformedReply(f"reply document must be an object: {line[:80]!r}")
    env = doc.get("env")
    if not isinstance(env, int) or env < 0:
        raise MalformedReply(f"reply document missing env: {line[:80]!r}")
    raw_time = doc.get("time", 0.0)
    if not isinstance(raw_time, (int, float)) or raw_time < 0:
        raise MalformedReply(f"reply time must be a non-negative number: {raw_time!r}")
    messages = tuple(Diagnostic.from_wire(m) for m in doc.get("messages", []) or [])
    sorries = tuple(SorryEntry.from_wire(s) for s in doc.get("sorries", []) or [])
    return ReplReply(
        env=env,
        messages=messages,
        sorries=sorries,
        time=float(raw_time),
        infotree=doc.get("infotree"),
    )
