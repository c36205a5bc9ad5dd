import random

import pytest

from leanserve.cache import WarmCache
from leanserve.errors import DuplicateRelease

from util import ModelCache


def test_lookup_empty_is_miss():
    cache = WarmCache()
    assert cache.lookup("import Mathlib") is None
    assert cache.misses == 1


def test_release_then_lookup_round_trip():
    cache = WarmCache()
    cache.release(1, "K")
    assert cache.lookup("K") == 1
    assert cache.lookup("K") is None
    assert cache.hits == 1 and cache.misses == 1


def test_bucket_claims_in_lru_order():
    cache = WarmCache()
    cache.release(1, "K")
    cache.release(2, "K")
    assert cache.lookup("K") == 1
    assert cache.lookup("K") == 2
    assert cache.lookup("K") is None


def test_duplicate_release_fails_loudly():
    cache = WarmCache()
    cache.release(1, "K")
    with pytest.raises(DuplicateRelease):
        cache.release(1, "K")


def test_evict_returns_global_lru():
    cache = WarmCache()
    cache.release(1, "A")
    cache.release(2, "B")
    cache.release(3, "A")
    assert cache.evict_lru() == 1
    assert cache.evict_lru() == 2
    assert cache.evict_lru() == 3
    assert cache.evict_lru() is None


def test_evict_empty_returns_none():
    assert WarmCache().evict_lru() is None


def test_release_refreshes_recency():
    cache = WarmCache()
    cache.release(1, "A")
    cache.release(2, "B")
    assert cache.lookup("A") == 1
    cache.release(1, "A")  # 1 is now most recently used
    assert cache.evict_lru() == 2


def test_discard_removes_entry():
    cache = WarmCache()
    cache.release(1, "A")
    assert cache.discard(1)
    assert not cache.discard(1)
    assert cache.lookup("A") is None


def test_stats_buckets():
    cache = WarmCache()
    cache.release(1, "A")
    cache.release(2, "A")
    cache.release(3, "B")
    stats = cache.stats()
    assert stats.buckets == {"A": 2, "B": 1}


def test_interleaved_ops_match_model():
    from util import run_cache_session

    run_cache_session(random.Random(2), steps=1000, n_keys=4, n_workers=32,
                      check_invariants=True)


def simulate_sequential_hits(trace, pool_size):
    """Sequential dispatch simulator: claim per policy, run, release."""
    cache = WarmCache()
    spawned = 0
    cold = []
    for key in trace:
        wid = cache.lookup(key)
        if wid is None:
            if cold:
                wid = cold.pop()
            elif spawned < pool_size:
                wid = spawned
                spawned += 1
            else:
                wid = cache.evict_lru()
                assert wid is not None
        cache.release(wid, key)
    return cache.hits


def test_hit_monotonicity_in_pool_size():
    rng = random.Random(9)
    for _ in range(50):
        keys = [f"K{i}" for i in range(rng.randint(1, 6))]
        trace = [rng.choice(keys) for _ in range(rng.randint(5, 120))]
        hits = [simulate_sequential_hits(trace, w) for w in range(1, 9)]
        assert all(a <= b for a, b in zip(hits, hits[1:])), hits


def test_alternating_headers_hit_rates():
    trace = ["A", "B"] * 50
    assert simulate_sequential_hits(trace, 1) == 0
    assert simulate_sequential_hits(trace, 2) == 98
