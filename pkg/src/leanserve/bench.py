"""Benchmark harness: drive a running gateway with a proof corpus and report
totals, per-proof averages, and verdict counts for cached or non-cached runs.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import requests

from .errors import CorpusError
from .protocol import Snippet

TRANSPORT_TIMEOUT_SLACK = 60.0


def format_mmss(seconds: float) -> str:
    minutes, secs = divmod(int(round(seconds)), 60)
    return f"{minutes}:{secs:02d}"


@dataclass
class BenchReport:
    n_proofs: int
    total_seconds: float
    worker_count: int
    mode: str
    statuses: dict[str, int] = field(default_factory=dict)
    result_times: list[float] = field(default_factory=list)

    @property
    def total_mmss(self) -> str:
        return format_mmss(self.total_seconds)

    @property
    def avg_time_per_proof(self) -> float:
        return self.total_seconds / self.n_proofs if self.n_proofs else 0.0

    @property
    def n_valid(self) -> int:
        return self.statuses.get("valid", 0)

    @property
    def n_invalid(self) -> int:
        return self.statuses.get("invalid", 0)

    @property
    def n_timeout(self) -> int:
        return self.statuses.get("timeout", 0)

    def to_wire(self) -> dict:
        return {
            "n_proofs": self.n_proofs,
            "total_seconds": round(self.total_seconds, 3),
            "total_mmss": self.total_mmss,
            "avg_time_per_proof": round(self.avg_time_per_proof, 6),
            "worker_count": self.worker_count,
            "mode": self.mode,
            "statuses": dict(self.statuses),
        }

    def table(self) -> str:
        rows = [
            ("proofs", str(self.n_proofs)),
            ("workers", str(self.worker_count)),
            ("mode", self.mode),
            ("total time (mm:ss)", self.total_mmss),
            ("total time (s)", f"{self.total_seconds:.2f}"),
            ("avg time per proof (s)", f"{self.avg_time_per_proof:.4f}"),
        ]
        rows += [(f"n_{status}", str(count)) for status, count in sorted(self.statuses.items())]
        width = max(len(name) for name, _ in rows)
        sep = "-" * (width + 14)
        lines = [sep] + [f"{name:<{width}}  {value:>10}" for name, value in rows] + [sep]
        return "\n".join(lines)


def server_worker_count(server_url: str) -> int:
    resp = requests.get(f"{server_url.rstrip('/')}/health", timeout=10)
    try:
        return int(resp.json()["workers"]["live"])
    except (ValueError, KeyError, TypeError):
        return 0


def _post_batch(
    server_url: str,
    batch: Sequence[Snippet],
    mode: str,
    timeout: float | None,
) -> list[dict]:
    payload: dict = {
        "snippets": [{"id": s.id, "code": s.code} for s in batch],
        "cache": mode != "non-cached",
    }
    if timeout is not None:
        payload["timeout"] = timeout
    transport_timeout = (timeout or 120.0) * len(batch) + TRANSPORT_TIMEOUT_SLACK
    resp = requests.post(
        f"{server_url.rstrip('/')}/check", json=payload, timeout=transport_timeout
    )
    resp.raise_for_status()
    return resp.json()["results"]


def bench_run(
    server_url: str,
    corpus: Sequence[Snippet],
    batch_size: int = 8,
    max_in_flight: int = 4,
    mode: str = "cached",
    timeout: float | None = None,
) -> BenchReport:
    """Submit the whole corpus in batches with bounded request concurrency
    and measure wall time.  In non-cached mode the server is told to bypass
    its warm cache and recycle each worker, so every proof pays its own
    header import."""
    if mode not in ("cached", "non-cached"):
        raise ValueError(f"unknown mode {mode!r}")
    if batch_size < 1 or max_in_flight < 1:
        raise ValueError("batch_size and max_in_flight must be >= 1")
    batches = [list(corpus[i : i + batch_size]) for i in range(0, len(corpus), batch_size)]
    statuses: dict[str, int] = {}
    result_times: list[float] = []
    worker_count = server_worker_count(server_url)

    started = time.monotonic()
    if batches:
        with ThreadPoolExecutor(max_workers=max_in_flight) as executor:
            for results in executor.map(
                lambda b: _post_batch(server_url, b, mode, timeout), batches
            ):
                for result in results:
                    statuses[result["status"]] = statuses.get(result["status"], 0) + 1
                    if result.get("response"):
                        result_times.append(float(result["response"]["time"]))
    total = time.monotonic() - started

    return BenchReport(
        n_proofs=len(corpus),
        total_seconds=total if corpus else 0.0,
        worker_count=worker_count,
        mode=mode,
        statuses=statuses,
        result_times=result_times,
    )


def ideal_makespan(
    n: int, workers: int, header_cost: float, body_cost: float, cached: bool
) -> float:
    """Offline schedule bound for a uniform, identical-header corpus: with
    caching every worker pays the import once; without it every proof does."""
    if n == 0:
        return 0.0
    rounds = -(-n // workers)  # ceil
    if cached:
        return header_cost + rounds * body_cost
    return rounds * (header_cost + body_cost)


def write_report(report: BenchReport, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report.to_wire(), indent=2) + "\n", encoding="utf-8")


def load_snippets_for_run(path: str | Path) -> list[Snippet]:
    from .corpus import load_corpus

    snippets = load_corpus(path)
    if not all(s.id for s in snippets):
        raise CorpusError("corpus records must carry non-empty uuids")
    return snippets
