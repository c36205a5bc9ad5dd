"""LRU index from canonical header keys to idle warmed workers.

The cache never talks to processes; it only tracks which idle worker ids
currently hold which warmed header.  The pool mutates it under the same lock
as its own worker-state transitions, so every operation here is a plain
single-threaded data-structure update.

Recency is defined by release order: a worker becomes most-recently-used when
it is returned to the cache after finishing a job, not when it is claimed.
Within one bucket, claims hand out the least recently released worker first.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field

from .errors import DuplicateRelease


@dataclass
class CacheStats:
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    buckets: dict[str, int] = field(default_factory=dict)


class WarmCache:
    """Maps normalized header keys to the idle workers warmed with them."""

    def __init__(self) -> None:
        # worker_id -> key, in global recency order (oldest first)
        self._entries: OrderedDict[int, str] = OrderedDict()
        # key -> worker ids in the same recency order
        self._buckets: dict[str, OrderedDict[int, None]] = {}
        self.hits = 0
        self.misses = 0
        self.evictions = 0

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, worker_id: int) -> bool:
        return worker_id in self._entries

    def lookup(self, key: str) -> int | None:
        """Claim an idle worker warmed with `key`, or record a miss.

        On a hit the worker leaves the cache (it is about to go busy); the
        recency of the remaining entries is untouched.
        """
        bucket = self._buckets.get(key)
        if not bucket:
            self.misses += 1
            return None
        worker_id, _ = bucket.popitem(last=False)
        if not bucket:
            del self._buckets[key]
        del self._entries[worker_id]
        self.hits += 1
        return worker_id

    def release(self, worker_id: int, key: str) -> None:
        """Insert a worker as the most-recently-used entry for `key`."""
        if worker_id in self._entries:
            raise DuplicateRelease(f"worker {worker_id} already cached")
        self._entries[worker_id] = key
        self._buckets.setdefault(key, OrderedDict())[worker_id] = None

    def evict_lru(self) -> int | None:
        """Claim the globally least-recently-used warm idle worker.

        Returns None when the cache is empty (caller queues the job).  The
        victim worker stays alive; the caller re-warms it with the new header.
        """
        if not self._entries:
            return None
        worker_id, key = self._entries.popitem(last=False)
        bucket = self._buckets[key]
        del bucket[worker_id]
        if not bucket:
            del self._buckets[key]
        self.evictions += 1
        return worker_id

    def discard(self, worker_id: int) -> bool:
        """Drop a worker from the cache (it died or is being recycled)."""
        key = self._entries.pop(worker_id, None)
        if key is None:
            return False
        bucket = self._buckets[key]
        del bucket[worker_id]
        if not bucket:
            del self._buckets[key]
        return True

    def key_of(self, worker_id: int) -> str | None:
        return self._entries.get(worker_id)

    def stats(self) -> CacheStats:
        return CacheStats(
            hits=self.hits,
            misses=self.misses,
            evictions=self.evictions,
            buckets={key: len(bucket) for key, bucket in self._buckets.items()},
        )

    def check_invariants(self) -> None:
        """Debug aid: entries and buckets must mirror each other exactly."""
        seen: set[int] = set()
        for key, bucket in self._buckets.items():
            for worker_id in bucket:
                assert worker_id not in seen, f"worker {worker_id} in two buckets"
                seen.add(worker_id)
                assert self._entries.get(worker_id) == key
        assert seen == set(self._entries)
