"""One supervised checker subprocess speaking the line-delimited protocol.

The worker owns all I/O with its child process.  Reads honor a monotonic
deadline by polling the raw pipe descriptor, so a wedged checker can always
be detected and hard-killed.  After a timeout or crash the process state is
untrustworthy: the worker is killed and never reused (the pool respawns a
fresh one in its slot).
"""

from __future__ import annotations

import logging
import os
import selectors
import subprocess
import time
from enum import Enum
from typing import Optional

import psutil

from .errors import MalformedReply, SpawnFailure, TimeoutExceeded, WarmFailure, WorkerCrashed
from .protocol import ReplCommand, ReplReply, decode_reply, encode_command, normalize_header

log = logging.getLogger(__name__)

_READ_CHUNK = 65536
_POLL_CAP = 0.5  # upper bound on one select() wait, keeps kills responsive


class WorkerState(str, Enum):
    STARTING = "starting"
    IDLE_COLD = "idle_cold"
    IDLE_WARM = "idle_warm"
    BUSY = "busy"
    DEAD = "dead"


class CheckerWorker:
    """Lifecycle and wire I/O for a single checker process."""

    def __init__(
        self,
        worker_id: int,
        command: list[str],
        startup_deadline: float = 30.0,
        env: Optional[dict[str, str]] = None,
    ):
        self.worker_id = worker_id
        self.command = list(command)
        self.startup_deadline = startup_deadline
        self.env = env
        self.state = WorkerState.STARTING
        self.warmed_key: Optional[str] = None
        self.warmed_env: Optional[int] = None
        self.last_used = time.monotonic()
        self.jobs_served = 0
        self._proc: Optional[subprocess.Popen] = None
        self._buf = bytearray()
        self._selector: Optional[selectors.BaseSelector] = None

    # -- lifecycle ---------------------------------------------------------

    @property
    def pid(self) -> Optional[int]:
        return self._proc.pid if self._proc else None

    @property
    def alive(self) -> bool:
        return (
            self.state is not WorkerState.DEAD
            and self._proc is not None
            and self._proc.poll() is None
        )

    def start(self) -> None:
        """Spawn the child and wait for it to answer a trivial probe command."""
        child_env = None
        if self.env:
            child_env = dict(os.environ)
            child_env.update(self.env)
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                env=child_env,
            )
        except OSError as exc:
            self.state = WorkerState.DEAD
            raise SpawnFailure(f"cannot start checker {self.command!r}: {exc}") from exc
        fd = self._proc.stdout.fileno()
        os.set_blocking(fd, False)
        self._selector = selectors.DefaultSelector()
        self._selector.register(self._proc.stdout, selectors.EVENT_READ)
        try:
            self.execute(ReplCommand(cmd=""), time.monotonic() + self.startup_deadline)
        except (TimeoutExceeded, WorkerCrashed, MalformedReply) as exc:
            self.kill()
            raise SpawnFailure(f"checker never became ready: {exc}") from exc
        self.state = WorkerState.IDLE_COLD

    def kill(self) -> None:
        """Hard-kill the child process; the worker is dead afterwards."""
        self.state = WorkerState.DEAD
        self.warmed_key = None
        self.warmed_env = None
        proc = self._proc
        if proc is None:
            return
        if proc.poll() is None:
            try:
                proc.kill()
            except OSError:
                pass
        try:
            proc.wait(timeout=5)
        except subprocess.TimeoutExpired:  # pragma: no cover - kill is SIGKILL
            log.warning("worker %d pid %s did not reap", self.worker_id, proc.pid)
        if self._selector is not None:
            self._selector.close()
            self._selector = None
        for stream in (proc.stdin, proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass

    def rss(self) -> Optional[int]:
        """Resident memory of the child in bytes, or None if unreadable."""
        if self._proc is None or self._proc.poll() is not None:
            return None
        try:
            return psutil.Process(self._proc.pid).memory_info().rss
        except psutil.Error:
            return None

    # -- wire I/O ----------------------------------------------------------

    def _read_line(self, deadline: Optional[float]) -> bytes:
        assert self._proc is not None and self._selector is not None
        fd = self._proc.stdout.fileno()
        while b"\n" not in self._buf:
            wait: Optional[float] = _POLL_CAP
            if deadline is not None:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    raise TimeoutExceeded("deadline exceeded while waiting for reply")
                wait = min(remaining, _POLL_CAP)
            if not self._selector.select(wait):
                continue
            try:
                chunk = os.read(fd, _READ_CHUNK)
            except BlockingIOError:
                continue
            except OSError as exc:
                raise WorkerCrashed(f"read failed: {exc}") from exc
            if not chunk:
                raise WorkerCrashed("worker closed its output stream")
            self._buf += chunk
        line, _, rest = bytes(self._buf).partition(b"\n")
        self._buf = bytearray(rest)
        return line + b"\n"

    def execute(self, command: ReplCommand, deadline: Optional[float]) -> ReplReply:
        """Send one command and wait for its reply.

        Raises TimeoutExceeded immediately, without dispatching, when the
        deadline has already passed.  On a mid-command timeout or protocol
        break the process is hard-killed before the error propagates.
        """
        if deadline is not None and time.monotonic() >= deadline:
            raise TimeoutExceeded("deadline passed before dispatch")
        if not self.alive:
            raise WorkerCrashed("worker process is not running")
        try:
            self._proc.stdin.write(encode_command(command))
            self._proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self.kill()
            raise WorkerCrashed(f"write failed: {exc}") from exc
        try:
            line = self._read_line(deadline)
            reply = decode_reply(line)
        except TimeoutExceeded:
            self.kill()
            raise
        except (WorkerCrashed, MalformedReply) as exc:
            self.kill()
            raise WorkerCrashed(str(exc)) from exc
        self.last_used = time.monotonic()
        return reply

    def warm(self, header: str, deadline: Optional[float]) -> tuple[int, float]:
        """Import a header, recording the returned environment for reuse.

        Warming with the header already loaded is a no-op: nothing crosses
        the wire and the existing environment id is returned.  Error
        diagnostics while importing raise WarmFailure; the caller kills and
        respawns the worker.  Returns (environment id, elapsed seconds).
        """
        if not header.strip():
            raise ValueError("cannot warm with an empty header")
        key = normalize_header(header)
        if self.warmed_key == key and self.warmed_env is not None:
            return self.warmed_env, 0.0
        started = time.monotonic()
        reply = self.execute(ReplCommand(cmd=header), deadline)
        elapsed = time.monotonic() - started
        if reply.has_errors():
            raise WarmFailure(f"header import failed for worker {self.worker_id}", reply)
        self.warmed_key = key
        self.warmed_env = reply.env
        return reply.env, elapsed

    def invalidate_warm(self) -> None:
        """Forget the warmed header (eviction re-warm or recycle path)."""
        self.warmed_key = None
        self.warmed_env = None
