"""Checker worker pool: dispatch, warm-cache routing, timeouts, respawn.

One runner thread per pool slot owns that slot's worker process and all I/O
with it.  Every state transition (claim, release, kill, respawn, queue push
and pop) happens under a single pool lock and touches no process I/O, so the
transitions are linearizable; command execution runs outside the lock.

Worker selection for a job, in order:

  1. an idle warm worker whose header key matches (warm-cache lookup) -- the
     body runs against the recorded environment;
  2. any idle cold worker -- the header is imported first (one command), then
     the body runs against the fresh environment, and the worker is recorded
     as warmed when the import was error-free;
  3. no cold worker: the least-recently-used idle warm worker is re-warmed in
     place with the new header (no process kill);
  4. otherwise the job waits in a FIFO queue.

A job submitted with use_cache=False skips the warm lookup and its worker is
recycled to cold afterwards, so every such job pays its own header import.

Per-job execution timeouts are measured from dispatch; queue waiting is
bounded separately by 10x max_wait.  Timeouts and protocol breaks hard-kill
the worker (its internal state is untrustworthy) and a fresh one is spawned
into the slot.
"""

from __future__ import annotations

import logging
import queue as queue_mod
import threading
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Any, Optional, Sequence

from .cache import CacheStats, WarmCache
from .errors import (
    MalformedReply,
    SpawnFailure,
    TimeoutExceeded,
    WarmFailure,
    WorkerCrashed,
)
from .protocol import (
    Diagnostic,
    ReplCommand,
    Snippet,
    VerdictStatus,
    analyze,
    normalize_header,
    split_snippet,
)
from .worker import CheckerWorker, WorkerState

log = logging.getLogger(__name__)

_STOP = object()
_KILL = object()

QUEUE_WAIT_FACTOR = 10.0


@dataclass
class PoolConfig:
    max_repls: int
    max_wait: float
    max_repl_mem: int
    checker_command: list[str]
    checker_env: Optional[dict[str, str]] = None
    respawn: bool = True
    supervisor_interval: float = 1.0
    startup_deadline: float = 30.0

    def __post_init__(self) -> None:
        if self.max_repls < 1:
            raise ValueError("max_repls must be >= 1")
        if self.max_wait <= 0:
            raise ValueError("max_wait must be > 0")
        if self.max_repl_mem <= 0:
            raise ValueError("max_repl_mem must be > 0")
        if not self.checker_command:
            raise ValueError("checker_command must not be empty")


@dataclass(frozen=True)
class SnippetResponse:
    """Checker output for one snippet: diagnostics, environment id, elapsed
    seconds, optional raw infotree."""

    messages: tuple[Diagnostic, ...]
    env: int
    time: float
    infotree: Any = None

    def to_wire(self) -> dict:
        return {
            "messages": [m.to_wire() for m in self.messages],
            "env": self.env,
            "time": self.time,
            "infotree": self.infotree,
        }


@dataclass
class CheckResult:
    """Terminal outcome for one snippet: a response or a failure description."""

    id: str
    status: VerdictStatus
    response: Optional[SnippetResponse] = None
    error: Optional[str] = None

    def to_wire(self) -> dict:
        return {
            "id": self.id,
            "response": self.response.to_wire() if self.response else None,
            "error": self.error,
            "status": self.status.value,
        }


@dataclass
class Job:
    snippet_id: str
    header: str
    header_key: str
    body: str
    full_code: str
    infotree_mode: Optional[str]
    use_cache: bool
    exec_timeout: float
    queue_deadline: float
    done: threading.Event = field(default_factory=threading.Event)
    result: Optional[CheckResult] = None


class _Slot:
    def __init__(self, index: int):
        self.index = index
        self.inbox: queue_mod.Queue = queue_mod.Queue()
        self.thread: Optional[threading.Thread] = None
        self.worker_id: Optional[int] = None
        self.busy_job: Optional[Job] = None
        self.failed_permanently = False


class WorkerPool:
    """Supervises checker processes and fans snippet jobs across them."""

    def __init__(self, config: PoolConfig):
        self._config = config
        self._lock = threading.Lock()
        self._queue: deque[Job] = deque()
        self._cold: deque[int] = deque()
        self._cache = WarmCache()
        self._workers: dict[int, CheckerWorker] = {}
        self._slot_of: dict[int, _Slot] = {}
        self._slots = [_Slot(i) for i in range(config.max_repls)]
        self._next_worker_id = 0
        self._stopping = False
        self._stop_event = threading.Event()
        self._supervisor: Optional[threading.Thread] = None
        self._started_at = time.monotonic()
        self.jobs_total = 0
        self.warm_path_jobs = 0
        self.cold_path_jobs = 0
        self.verdicts: Counter = Counter()

    @property
    def config(self) -> PoolConfig:
        return self._config

    # -- lifecycle ---------------------------------------------------------

    def start(self, wait_ready: bool = True, ready_timeout: Optional[float] = None) -> None:
        """Spawn runner threads (one per slot) and the supervisor.

        With wait_ready, blocks until every slot holds a ready worker;
        raises SpawnFailure if not even one worker comes up in time.
        """
        self._started_at = time.monotonic()
        for slot in self._slots:
            slot.thread = threading.Thread(
                target=self._runner, args=(slot,), name=f"checker-slot-{slot.index}", daemon=True
            )
            slot.thread.start()
        self._supervisor = threading.Thread(
            target=self._supervise, name="pool-supervisor", daemon=True
        )
        self._supervisor.start()
        if wait_ready:
            deadline = time.monotonic() + (ready_timeout or self._config.startup_deadline)
            while time.monotonic() < deadline:
                counts = self.counts()
                if counts["live"] >= self._config.max_repls:
                    return
                if self._all_slots_failed():
                    break
                time.sleep(0.01)
            if self.live_workers() == 0:
                raise SpawnFailure(
                    f"no checker worker became ready ({self._config.checker_command!r})"
                )

    def _all_slots_failed(self) -> bool:
        with self._lock:
            return all(s.failed_permanently for s in self._slots)

    def shutdown(self) -> None:
        with self._lock:
            if self._stopping:
                return
            self._stopping = True
            pending = list(self._queue)
            self._queue.clear()
        self._stop_event.set()
        for job in pending:
            self._resolve(
                job,
                CheckResult(job.snippet_id, VerdictStatus.CRASHED, error="pool shutdown"),
            )
        for slot in self._slots:
            slot.inbox.put(_STOP)
        for slot in self._slots:
            if slot.thread is not None:
                slot.thread.join(timeout=self._config.max_wait + 10)
        if self._supervisor is not None:
            self._supervisor.join(timeout=self._config.supervisor_interval + 5)

    # -- public job API ------------------------------------------------------

    def submit(
        self,
        snippet: Snippet,
        timeout: Optional[float] = None,
        infotree: Optional[str] = None,
        use_cache: bool = True,
    ) -> Job:
        """Queue one snippet for checking; returns a Job whose `done` event
        fires when `result` is set.  Per-snippet failures land in the result,
        never as exceptions."""
        split = split_snippet(snippet.code)
        now = time.monotonic()
        exec_timeout = timeout if timeout is not None else self._config.max_wait
        job = Job(
            snippet_id=snippet.id,
            header=split.header,
            header_key=normalize_header(split.header),
            body=split.body,
            full_code=snippet.code,
            infotree_mode=infotree if infotree in ("tactics", "full") else None,
            use_cache=use_cache,
            exec_timeout=exec_timeout,
            queue_deadline=now + QUEUE_WAIT_FACTOR * self._config.max_wait,
        )
        with self._lock:
            if self._stopping:
                raise RuntimeError("pool is shut down")
            self.jobs_total += 1
            if not self._try_dispatch_locked(job):
                self._queue.append(job)
        return job

    def wait(self, job: Job) -> CheckResult:
        bound = (job.queue_deadline - time.monotonic()) + job.exec_timeout + 30
        if not job.done.wait(timeout=max(bound, 1.0)):
            self._resolve(
                job,
                CheckResult(
                    job.snippet_id, VerdictStatus.CRASHED, error="internal stall: job never settled"
                ),
            )
        assert job.result is not None
        return job.result

    def check(
        self,
        snippet: Snippet,
        timeout: Optional[float] = None,
        infotree: Optional[str] = None,
        use_cache: bool = True,
    ) -> CheckResult:
        return self.wait(self.submit(snippet, timeout, infotree, use_cache))

    def check_batch(
        self,
        snippets: Sequence[Snippet],
        timeout: Optional[float] = None,
        infotree: Optional[str] = None,
        use_cache: bool = True,
    ) -> list[CheckResult]:
        """Check a batch concurrently; results come back in request order."""
        jobs = [self.submit(s, timeout, infotree, use_cache) for s in snippets]
        return [self.wait(job) for job in jobs]

    # -- introspection -------------------------------------------------------

    def live_workers(self) -> int:
        with self._lock:
            return len(self._workers)

    def counts(self) -> dict:
        with self._lock:
            live = len(self._workers)
            warm = len(self._cache)
            cold = len(self._cold)
            busy = sum(1 for s in self._slots if s.busy_job is not None)
            starting = sum(
                1
                for s in self._slots
                if s.worker_id is None and not s.failed_permanently and not self._stopping
            )
            return {
                "live": live,
                "idle": warm + cold,
                "idle_cold": cold,
                "warm": warm,
                "busy": busy,
                "starting": starting,
                "queued": len(self._queue),
            }

    def worker_snapshot(self) -> list[dict]:
        with self._lock:
            return [
                {
                    "worker_id": w.worker_id,
                    "pid": w.pid,
                    "state": w.state.value,
                    "warmed_key": w.warmed_key,
                    "jobs_served": w.jobs_served,
                }
                for w in self._workers.values()
            ]

    def cache_stats(self) -> CacheStats:
        with self._lock:
            return self._cache.stats()

    def uptime(self) -> float:
        return time.monotonic() - self._started_at

    # -- dispatch internals ---------------------------------------------------

    def _try_dispatch_locked(self, job: Job) -> bool:
        claimed = self._claim_worker_locked(job)
        if claimed is None:
            return False
        slot, worker = claimed
        slot.busy_job = job
        worker.state = WorkerState.BUSY
        slot.inbox.put(job)
        return True

    def _claim_worker_locked(self, job: Job) -> Optional[tuple[_Slot, CheckerWorker]]:
        if not self._cold and not len(self._cache):
            return None  # nothing idle: queue without recording a cache miss
        if job.header_key and job.use_cache:
            wid = self._cache.lookup(job.header_key)
            if wid is not None:
                return self._slot_of[wid], self._workers[wid]
        if self._cold:
            wid = self._cold.popleft()
            return self._slot_of[wid], self._workers[wid]
        wid = self._cache.evict_lru()
        if wid is not None:
            worker = self._workers[wid]
            worker.invalidate_warm()  # re-warmed in place with the new header
            return self._slot_of[wid], worker
        return None

    def _pop_queued_locked(self) -> Optional[Job]:
        now = time.monotonic()
        while self._queue:
            job = self._queue.popleft()
            if now > job.queue_deadline:
                self._resolve_locked(
                    job,
                    CheckResult(
                        job.snippet_id,
                        VerdictStatus.TIMEOUT,
                        error="queue timeout: no worker became available in time",
                    ),
                )
                continue
            return job
        return None

    def _make_idle_locked(self, slot: _Slot, worker: CheckerWorker) -> None:
        slot.busy_job = None
        if worker.warmed_key is not None:
            worker.state = WorkerState.IDLE_WARM
            self._cache.release(worker.worker_id, worker.warmed_key)
        else:
            worker.state = WorkerState.IDLE_COLD
            self._cold.append(worker.worker_id)

    def _resolve(self, job: Job, result: CheckResult) -> None:
        with self._lock:
            self._resolve_locked(job, result)

    def _resolve_locked(self, job: Job, result: CheckResult) -> None:
        if job.result is not None:
            return
        job.result = result
        self.verdicts[result.status.value] += 1
        job.done.set()

    def _deregister_locked(self, slot: _Slot, worker: CheckerWorker) -> None:
        self._workers.pop(worker.worker_id, None)
        self._slot_of.pop(worker.worker_id, None)
        self._cache.discard(worker.worker_id)
        if worker.worker_id in self._cold:
            self._cold.remove(worker.worker_id)
        slot.worker_id = None
        slot.busy_job = None

    # -- runner thread ---------------------------------------------------------

    def _spawn_worker(self) -> CheckerWorker:
        with self._lock:
            worker_id = self._next_worker_id
            self._next_worker_id += 1
        worker = CheckerWorker(
            worker_id,
            self._config.checker_command,
            self._config.startup_deadline,
            env=self._config.checker_env,
        )
        worker.start()
        return worker

    def _runner(self, slot: _Slot) -> None:
        backoff = 0.2
        while not self._stop_event.is_set():
            try:
                worker = self._spawn_worker()
            except SpawnFailure as exc:
                log.warning("slot %d: spawn failed: %s", slot.index, exc)
                if not self._config.respawn:
                    with self._lock:
                        slot.failed_permanently = True
                    return
                if self._stop_event.wait(backoff):
                    return
                backoff = min(backoff * 2, 5.0)
                continue
            backoff = 0.2
            job: Optional[Job] = None
            with self._lock:
                if self._stopping:
                    pass
                else:
                    self._workers[worker.worker_id] = worker
                    self._slot_of[worker.worker_id] = slot
                    slot.worker_id = worker.worker_id
                    job = self._pop_queued_locked()
                    if job is not None:
                        slot.busy_job = job
                        worker.state = WorkerState.BUSY
                    else:
                        self._make_idle_locked(slot, worker)
            if self._stopping:
                worker.kill()
                return

            respawn = self._serve(slot, worker, job)
            if not respawn:
                return
            if not self._config.respawn:
                with self._lock:
                    slot.failed_permanently = True
                return

    def _serve(self, slot: _Slot, worker: CheckerWorker, job: Optional[Job]) -> bool:
        """Serve jobs on one live worker until it dies or the pool stops.

        Returns True when the slot should respawn a replacement worker.
        """
        while True:
            if job is None:
                msg = slot.inbox.get()
                if msg is _STOP:
                    with self._lock:
                        self._deregister_locked(slot, worker)
                    worker.kill()
                    return False
                if msg is _KILL:
                    with self._lock:
                        self._deregister_locked(slot, worker)
                    worker.kill()
                    return True
                job = msg

            result, worker_dead = self._execute_job(worker, job)
            with self._lock:
                self._resolve_locked(job, result)
                job = None
                worker.jobs_served += 1
                if worker_dead or self._stopping:
                    self._deregister_locked(slot, worker)
                else:
                    job = self._pop_queued_locked()
                    if job is not None:
                        slot.busy_job = job
                        worker.state = WorkerState.BUSY
                    else:
                        self._make_idle_locked(slot, worker)
            if worker_dead:
                return True
            if self._stopping:
                worker.kill()
                return False

    def _execute_job(self, worker: CheckerWorker, job: Job) -> tuple[CheckResult, bool]:
        """Run one job's commands against a claimed worker.  Never raises;
        failures become terminal results.  Returns (result, worker_died)."""
        deadline = time.monotonic() + job.exec_timeout
        mode = job.infotree_mode
        try:
            if (
                job.use_cache
                and job.header_key
                and worker.warmed_key == job.header_key
                and worker.warmed_env is not None
            ):
                # warm path: only the body crosses the wire
                with self._lock:
                    self.warm_path_jobs += 1
                started = time.monotonic()
                reply = worker.execute(
                    ReplCommand(cmd=job.body, env=worker.warmed_env, infotree=mode), deadline
                )
                elapsed = time.monotonic() - started
            elif job.header_key:
                # cold path: import the header, then check the body against it
                with self._lock:
                    self.cold_path_jobs += 1
                env, warm_elapsed = worker.warm(job.header, deadline)
                started = time.monotonic()
                reply = worker.execute(
                    ReplCommand(cmd=job.body, env=env, infotree=mode), deadline
                )
                elapsed = warm_elapsed + (time.monotonic() - started)
            else:
                started = time.monotonic()
                reply = worker.execute(ReplCommand(cmd=job.full_code, infotree=mode), deadline)
                elapsed = time.monotonic() - started
            if not job.use_cache:
                worker.invalidate_warm()  # recycle: the next job re-imports
            result = CheckResult(
                id=job.snippet_id,
                status=analyze(reply).status,
                response=SnippetResponse(
                    messages=reply.messages,
                    env=reply.env,
                    time=elapsed,
                    infotree=reply.infotree,
                ),
            )
            return result, not worker.alive
        except WarmFailure as exc:
            worker.kill()
            reply = exc.reply
            result = CheckResult(
                id=job.snippet_id,
                status=VerdictStatus.INVALID,
                response=SnippetResponse(
                    messages=reply.messages, env=reply.env, time=reply.time
                ),
            )
            return result, True
        except TimeoutExceeded:
            worker.kill()
            return (
                CheckResult(
                    id=job.snippet_id,
                    status=VerdictStatus.TIMEOUT,
                    error=f"timeout: exceeded {job.exec_timeout:g}s deadline",
                ),
                True,
            )
        except (WorkerCrashed, MalformedReply) as exc:
            worker.kill()
            return (
                CheckResult(
                    id=job.snippet_id,
                    status=VerdictStatus.CRASHED,
                    error=f"worker crashed: {exc}",
                ),
                True,
            )

    # -- supervision ------------------------------------------------------------

    def enforce_memory(self) -> list[int]:
        """Kill idle workers whose resident memory exceeds the cap.

        Busy workers are left alone; they are caught on a later tick once
        their job finishes.  Returns the killed worker ids."""
        with self._lock:
            candidates = [
                (wid, self._workers[wid])
                for wid in list(self._cold) + [w for w in self._workers if w in self._cache]
            ]
        killed: list[int] = []
        for wid, worker in candidates:
            rss = worker.rss()
            if rss is None or rss <= self._config.max_repl_mem:
                continue
            with self._lock:
                if wid in self._cache:
                    self._cache.discard(wid)
                elif wid in self._cold:
                    self._cold.remove(wid)
                else:
                    continue  # claimed in the meantime
                slot = self._slot_of.get(wid)
            if slot is not None:
                slot.inbox.put(_KILL)
                killed.append(wid)
                log.info("memory cap: recycling worker %d (rss=%d)", wid, rss)
        return killed

    def _sweep_queue(self) -> None:
        now = time.monotonic()
        with self._lock:
            expired = [j for j in self._queue if now > j.queue_deadline]
            for job in expired:
                self._queue.remove(job)
        for job in expired:
            self._resolve(
                job,
                CheckResult(
                    job.snippet_id,
                    VerdictStatus.TIMEOUT,
                    error="queue timeout: no worker became available in time",
                ),
            )

    def _supervise(self) -> None:
        while not self._stop_event.wait(self._config.supervisor_interval):
            try:
                self.enforce_memory()
                self._sweep_queue()
            except Exception:  # pragma: no cover - supervision must never die
                log.exception("supervisor tick failed")
