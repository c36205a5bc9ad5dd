"""Environment-driven configuration.

Recognized variables:

    LEAN_SERVER_MAX_REPLS     pool size (int, default: CPU count)
    LEAN_SERVER_MAX_WAIT      per-job execution timeout in seconds (int)
    LEAN_SERVER_MAX_REPL_MEM  per-worker resident memory cap in bytes;
                              K/M/G suffixes accepted
    LEAN_SERVER_CHECKER_CMD   checker executable + args (shell-quoted string;
                              defaults to the bundled mock checker)
    LEAN_SERVER_HOST          listen address (default 0.0.0.0)
    LEAN_SERVER_PORT          listen port (default 8000)
    LEAN_SERVER_MAX_BATCH     max snippets per request (default 10000)
"""

from __future__ import annotations

import os
import shlex
import sys
from dataclasses import dataclass, field

_SIZE_SUFFIXES = {"K": 1024, "M": 1024**2, "G": 1024**3}


def parse_size(raw: str) -> int:
    """Parse a byte count with optional K/M/G suffix ("512M" -> 536870912)."""
    text = raw.strip().upper()
    if not text:
        raise ValueError("empty size")
    if text[-1] in _SIZE_SUFFIXES:
        return int(float(text[:-1]) * _SIZE_SUFFIXES[text[-1]])
    return int(text)


def mock_checker_command() -> list[str]:
    """Command line for the bundled mock checker."""
    return [sys.executable, "-m", "leanserve.mock_checker"]


@dataclass
class Settings:
    max_repls: int = field(default_factory=lambda: os.cpu_count() or 4)
    max_wait: float = 60.0
    max_repl_mem: int = 8 * 1024**3
    checker_command: list[str] = field(default_factory=mock_checker_command)
    checker_env: dict[str, str] | None = None  # extra env for checker children
    host: str = "0.0.0.0"
    port: int = 8000
    max_batch: int = 10_000

    @classmethod
    def from_env(cls, env: dict[str, str] | None = None) -> "Settings":
        env = os.environ if env is None else env
        settings = cls()
        if env.get("LEAN_SERVER_MAX_REPLS"):
            settings.max_repls = int(env["LEAN_SERVER_MAX_REPLS"])
        if env.get("LEAN_SERVER_MAX_WAIT"):
            settings.max_wait = float(env["LEAN_SERVER_MAX_WAIT"])
        if env.get("LEAN_SERVER_MAX_REPL_MEM"):
            settings.max_repl_mem = parse_size(env["LEAN_SERVER_MAX_REPL_MEM"])
        if env.get("LEAN_SERVER_CHECKER_CMD"):
            settings.checker_command = shlex.split(env["LEAN_SERVER_CHECKER_CMD"])
        if env.get("LEAN_SERVER_HOST"):
            settings.host = env["LEAN_SERVER_HOST"]
        if env.get("LEAN_SERVER_PORT"):
            settings.port = int(env["LEAN_SERVER_PORT"])
        if env.get("LEAN_SERVER_MAX_BATCH"):
            settings.max_batch = int(env["LEAN_SERVER_MAX_BATCH"])
        return settings
