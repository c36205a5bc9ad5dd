"""Shared test helpers: live servers, call-log parsing, corpus builders,
synthetic infotree generation, and independent reference oracles."""

from __future__ import annotations

import json
import random
import socket
import threading
import time
from pathlib import Path

import requests
import uvicorn

from leanserve.infotree import RawSpan
from leanserve.protocol import Snippet
from leanserve.service import create_app
from leanserve.settings import Settings

FIXTURES = Path(__file__).parent / "fixtures"


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


class LiveServer:
    """A gateway running under uvicorn in a daemon thread."""

    def __init__(self, settings: Settings, pool=None):
        self.port = free_port()
        settings.host = "127.0.0.1"
        settings.port = self.port
        self.settings = settings
        self.app = create_app(settings, pool=pool)
        config = uvicorn.Config(
            self.app, host="127.0.0.1", port=self.port, log_level="warning"
        )
        self._server = uvicorn.Server(config)
        self._thread = threading.Thread(target=self._server.run, daemon=True)

    @property
    def url(self) -> str:
        return f"http://127.0.0.1:{self.port}"

    @property
    def pool(self):
        return self.app.state.pool

    def start(self, timeout: float = 60.0) -> "LiveServer":
        self._thread.start()
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            try:
                requests.get(f"{self.url}/health", timeout=2)
                return self
            except requests.RequestException:
                time.sleep(0.05)
        raise RuntimeError("server did not come up")

    def stop(self) -> None:
        self._server.should_exit = True
        self._thread.join(timeout=30)

    def health(self) -> dict:
        return requests.get(f"{self.url}/health", timeout=10).json()

    def metrics(self) -> dict[str, float]:
        text = requests.get(f"{self.url}/metrics", timeout=10).text
        out: dict[str, float] = {}
        for line in text.splitlines():
            name, _, value = line.rpartition(" ")
            if name:
                out[name] = float(value)
        return out

    def check(self, snippets, timeout_s=None, infotree=None, cache=True,
              transport_timeout=600) -> list[dict]:
        payload = {
            "snippets": [{"id": s.id, "code": s.code} for s in snippets],
            "cache": cache,
        }
        if timeout_s is not None:
            payload["timeout"] = timeout_s
        if infotree is not None:
            payload["infotree"] = infotree
        resp = requests.post(f"{self.url}/check", json=payload, timeout=transport_timeout)
        resp.raise_for_status()
        return resp.json()["results"]


# -- mock call log -----------------------------------------------------------


def read_call_log(path) -> list[dict]:
    path = Path(path)
    if not path.exists():
        return []
    return [json.loads(line) for line in path.read_text().splitlines() if line.strip()]


def header_imports(entries: list[dict]) -> list[dict]:
    return [e for e in entries if e["cmd"].lstrip().startswith("import")]


# -- corpora -----------------------------------------------------------------

HEADER = "import Mathlib\n"


def make_snippet(i: int, marker: str = "", header: str = HEADER) -> Snippet:
    body = f"theorem case_{i} : True := by\n  trivial"
    if marker:
        body += f"\n  {marker}"
    return Snippet(id=f"case-{i}", code=f"{header}\n{body}")


def uniform_corpus(n: int, header: str = HEADER) -> list[Snippet]:
    return [make_snippet(i, header=header) for i in range(n)]


def verdict_multiset(results: list[dict]) -> tuple:
    return tuple(sorted((r["id"], r["status"]) for r in results))


# -- reference LRU model -----------------------------------------------------


class ModelCache:
    """Brute-force association-list model of the warm cache."""

    def __init__(self):
        self.entries: list[tuple[int, str, int]] = []  # (worker_id, key, stamp)
        self.clock = 0

    def lookup(self, key: str):
        matches = [e for e in self.entries if e[1] == key]
        if not matches:
            return None
        victim = min(matches, key=lambda e: e[2])
        self.entries.remove(victim)
        return victim[0]

    def release(self, worker_id: int, key: str):
        assert worker_id not in [e[0] for e in self.entries]
        self.clock += 1
        self.entries.append((worker_id, key, self.clock))

    def evict_lru(self):
        if not self.entries:
            return None
        victim = min(self.entries, key=lambda e: e[2])
        self.entries.remove(victim)
        return victim[0]


def run_cache_session(rng, steps, n_keys, n_workers, check_invariants=False):
    """Drive WarmCache and the brute-force model through one random op trace,
    asserting identical hit/miss/victim decisions at every step."""
    from leanserve.cache import WarmCache

    cache = WarmCache()
    model = ModelCache()
    inside: set[int] = set()
    keys = [f"K{i}" for i in range(n_keys)]
    outcomes = []
    for step in range(steps):
        roll = rng.random()
        candidates = [w for w in range(n_workers) if w not in inside]
        if roll < 0.45 and candidates:
            wid = rng.choice(candidates)
            key = rng.choice(keys)
            cache.release(wid, key)
            model.release(wid, key)
            inside.add(wid)
            outcomes.append(("release", wid))
        elif roll < 0.8:
            key = rng.choice(keys)
            got, expected = cache.lookup(key), model.lookup(key)
            assert got == expected, f"step {step}: lookup({key}) diverged: {got} != {expected}"
            if got is not None:
                inside.discard(got)
            outcomes.append(("lookup", got))
        else:
            got, expected = cache.evict_lru(), model.evict_lru()
            assert got == expected, f"step {step}: evict diverged: {got} != {expected}"
            if got is not None:
                inside.discard(got)
            outcomes.append(("evict", got))
        if check_invariants:
            cache.check_invariants()
    return outcomes


# -- synthetic infotrees -------------------------------------------------------


def offset_to_linecol(body: str, offset: int) -> dict:
    line = body.count("\n", 0, offset) + 1
    column = offset - (body.rfind("\n", 0, offset) + 1)
    return {"line": line, "column": column}


def node_doc(body: str, start: int, end: int, before, after, children=None,
             kind: str = "TacticInfo") -> dict:
    return {
        "kind": kind,
        "range": {
            "start": offset_to_linecol(body, start),
            "finish": offset_to_linecol(body, end),
        },
        "goalsBefore": list(before),
        "goalsAfter": list(after),
        "children": children or [],
    }


def random_body(rng: random.Random, min_len: int = 30, max_len: int = 160) -> str:
    pieces = []
    length = rng.randint(min_len, max_len)
    words = ["rw", "simp", "ring", "have h", ":=", "by", "exact", "x", "⊢", "≠", "--c"]
    while sum(len(p) for p in pieces) < length:
        roll = rng.random()
        if roll < 0.12:
            pieces.append("\n")
        elif roll < 0.2:
            pieces.append("  ")
        else:
            pieces.append(rng.choice(words))
            pieces.append(" ")
    return "".join(pieces)[:length]


def _gen_spans(rng: random.Random, lo: int, hi: int, depth: int,
               acc: list[tuple[int, int, int]], parent_idx: int) -> None:
    """Generate nested child spans inside [lo, hi); acc holds (start, end, parent)."""
    if hi - lo < 4 or depth > 3 or rng.random() < 0.35:
        return
    n_children = rng.randint(1, 3)
    cursor = lo if rng.random() < 0.3 else lo + rng.randint(0, (hi - lo) // 3)
    for _ in range(n_children):
        if hi - cursor < 2:
            break
        start = cursor if rng.random() < 0.25 else cursor + rng.randint(0, min(5, hi - cursor - 1))
        end = start + rng.randint(1, max(1, hi - start))
        end = min(end, hi)
        if end <= start:
            continue
        acc.append((start, end, parent_idx))
        _gen_spans(rng, start, end, depth + 1, acc, len(acc) - 1)
        cursor = end + rng.randint(0, 3)


def random_tree_doc(rng: random.Random, max_roots: int = 2):
    """A random infotree document (list of root nodes) over a random body.

    Returns (document, body).  Spans nest but may share starts with their
    parents; some nodes are non-tactic wrappers.  Goals chain depth-first so
    goal inheritance stays exercised.
    """
    body = random_body(rng)
    if not body:
        body = "x"
    flat: list[tuple[int, int, int]] = []  # (start, end, parent index or -1)
    cursor = 0
    for _ in range(rng.randint(1, max_roots)):
        if len(body) - cursor < 3:
            break
        start = cursor + rng.randint(0, min(6, len(body) - cursor - 1))
        end = start + rng.randint(1, len(body) - start)
        flat.append((start, end, -1))
        _gen_spans(rng, start, end, 1, flat, len(flat) - 1)
        cursor = end

    goal_counter = [0]

    def next_goal():
        goal_counter[0] += 1
        return [f"⊢ state {goal_counter[0]}"]

    docs: list[dict | None] = [None] * len(flat)
    children_of: dict[int, list[int]] = {}
    for idx, (_, _, parent) in enumerate(flat):
        children_of.setdefault(parent, []).append(idx)

    def build(idx: int) -> dict:
        start, end, _ = flat[idx]
        kids = [build(k) for k in children_of.get(idx, [])]
        kind = "TacticInfo" if rng.random() < 0.85 else "TermInfo"
        return node_doc(body, start, end, next_goal(), next_goal(), kids, kind=kind)

    roots = [build(i) for i in children_of.get(-1, [])]
    return roots, body


def oracle_eliminate(spans: list[RawSpan], body: str) -> list[RawSpan]:
    """Independent reference for overlap elimination: direct pairwise
    arithmetic, no sweep.  For each span the cut point is the earliest start
    of any other span that begins strictly inside it (or at the same start
    with a shorter extent, which erases the span).  Assumes no two spans
    share both start and end."""
    kept = []
    for s in spans:
        cut = None
        for t in spans:
            if t is s:
                continue
            if s.start < t.start < s.end:
                cut = t.start if cut is None else min(cut, t.start)
            elif t.start == s.start and t.end < s.end:
                cut = s.start
                break
        if cut is None:
            if s.end > s.start:
                kept.append(s)
            continue
        end = cut
        while end > s.start and body[end - 1].isspace():
            end -= 1
        if body[s.start : end].strip() == "":
            continue
        cutters = [t for t in spans if t.start == cut and t is not s]
        cutter = max(cutters, key=lambda t: t.end)
        kept.append(RawSpan(s.start, end, s.goals_before, cutter.goals_before))
    kept.sort(key=lambda s: s.start)
    return kept
