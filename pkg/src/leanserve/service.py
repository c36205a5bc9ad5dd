"""REST front end: batch check endpoint, health, and plain-text metrics.

POST /check   {"snippets": [{"id", "code"}...], "timeout"?, "infotree"?, "cache"?}
              -> {"results": [{"id", "response", "error", "status"}...]}
GET  /health  pool liveness and cache statistics; 503 with zero live workers
GET  /metrics plain-text counters

Request handlers run concurrently; each batch fans its snippets out to the
pool and answers once every snippet has settled, in request order.
Per-snippet failures (timeout, crash) are reported inside their result and
never fail the batch.
"""

from __future__ import annotations

import hashlib
import threading
import time
from contextlib import asynccontextmanager
from typing import Any, Optional

from fastapi import FastAPI, HTTPException, Response
from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel, Field

from .errors import SpawnFailure
from .pool import PoolConfig, WorkerPool
from .protocol import INFOTREE_MODES, Snippet
from .settings import Settings


class SnippetIn(BaseModel):
    id: str = Field(min_length=1)
    code: str


class CheckRequest(BaseModel):
    snippets: list[SnippetIn]
    timeout: Optional[float] = None
    infotree: Optional[str] = None
    cache: bool = True


class ResponseBody(BaseModel):
    messages: list[dict]
    env: int
    time: float
    infotree: Any = None


class CheckResultOut(BaseModel):
    id: str
    response: Optional[ResponseBody] = None
    error: Optional[str] = None
    status: str


class CheckResponse(BaseModel):
    results: list[CheckResultOut]


class _RequestGauge:
    """Tracks concurrent /check requests and the high-water mark."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self.total = 0
        self.in_flight = 0
        self.peak = 0
        self.snippets_total = 0

    def enter(self, snippets: int) -> None:
        with self._lock:
            self.total += 1
            self.snippets_total += snippets
            self.in_flight += 1
            self.peak = max(self.peak, self.in_flight)

    def leave(self) -> None:
        with self._lock:
            self.in_flight -= 1


def create_app(settings: Settings | None = None, pool: WorkerPool | None = None) -> FastAPI:
    """Build the application; the pool starts on startup and stops on exit."""
    settings = settings or Settings.from_env()
    owns_pool = pool is None
    if pool is None:
        pool = WorkerPool(
            PoolConfig(
                max_repls=settings.max_repls,
                max_wait=settings.max_wait,
                max_repl_mem=settings.max_repl_mem,
                checker_command=settings.checker_command,
                checker_env=settings.checker_env,
            )
        )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        if owns_pool:
            try:
                await run_in_threadpool(pool.start)
            except SpawnFailure:
                # Keep serving: /health reports 503 until workers come up.
                pass
        yield
        if owns_pool:
            await run_in_threadpool(pool.shutdown)

    app = FastAPI(title="leanserve", lifespan=lifespan)
    app.state.pool = pool
    app.state.settings = settings
    gauge = _RequestGauge()
    app.state.gauge = gauge
    started = time.monotonic()

    @app.post("/check", response_model=CheckResponse)
    async def check(request: CheckRequest) -> CheckResponse:
        if not request.snippets:
            raise HTTPException(status_code=400, detail="empty batch")
        if len(request.snippets) > settings.max_batch:
            raise HTTPException(
                status_code=400,
                detail=f"batch of {len(request.snippets)} exceeds limit {settings.max_batch}",
            )
        ids = [s.id for s in request.snippets]
        if len(set(ids)) != len(ids):
            raise HTTPException(status_code=400, detail="duplicate snippet ids")
        if request.timeout is not None and request.timeout <= 0:
            raise HTTPException(status_code=400, detail="timeout must be > 0")
        if request.infotree is not None and request.infotree not in INFOTREE_MODES:
            raise HTTPException(
                status_code=400, detail=f"infotree must be one of {INFOTREE_MODES}"
            )
        if pool.live_workers() == 0:
            raise HTTPException(status_code=503, detail="no live checker workers")

        snippets = [Snippet(id=s.id, code=s.code) for s in request.snippets]
        tree_mode = request.infotree if request.infotree in ("tactics", "full") else None
        gauge.enter(len(snippets))
        try:
            results = await run_in_threadpool(
                pool.check_batch,
                snippets,
                request.timeout,
                tree_mode,
                request.cache,
            )
        finally:
            gauge.leave()
        return CheckResponse(results=[CheckResultOut(**r.to_wire()) for r in results])

    @app.get("/health")
    async def health(response: Response) -> dict:
        counts = pool.counts()
        cache = pool.cache_stats()
        body = {
            "status": "ok" if counts["live"] > 0 else "unavailable",
            "uptime": round(time.monotonic() - started, 3),
            "workers": counts,
            "cache": {
                "hits": cache.hits,
                "misses": cache.misses,
                "evictions": cache.evictions,
                "buckets": len(cache.buckets),
            },
        }
        if counts["live"] == 0:
            response.status_code = 503
        return body

    @app.get("/metrics")
    async def metrics() -> Response:
        counts = pool.counts()
        cache = pool.cache_stats()
        lines = [
            f"uptime_seconds {time.monotonic() - started:.3f}",
            f"workers_live {counts['live']}",
            f"workers_idle {counts['idle']}",
            f"workers_warm {counts['warm']}",
            f"workers_busy {counts['busy']}",
            f"jobs_queued {counts['queued']}",
            f"jobs_total {pool.jobs_total}",
            f"jobs_warm_path {pool.warm_path_jobs}",
            f"jobs_cold_path {pool.cold_path_jobs}",
            f"requests_total {gauge.total}",
            f"requests_in_flight {gauge.in_flight}",
            f"requests_in_flight_peak {gauge.peak}",
            f"snippets_total {gauge.snippets_total}",
            f"cache_hits {cache.hits}",
            f"cache_misses {cache.misses}",
            f"cache_evictions {cache.evictions}",
        ]
        for status, count in sorted(pool.verdicts.items()):
            lines.append(f"verdict_{status} {count}")
        for key, size in sorted(cache.buckets.items()):
            digest = hashlib.sha1(key.encode("utf-8")).hexdigest()[:12]
            lines.append(f'warm_bucket{{key="{digest}"}} {size}')
        return Response("\n".join(lines) + "\n", media_type="text/plain")

    return app
