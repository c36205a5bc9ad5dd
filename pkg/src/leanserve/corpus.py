"""Proof corpus files: newline-delimited JSON records with uuid and code.

`prepare_records` applies the standard dataset cleanup: drop duplicate uuids
(first occurrence wins), keep only records whose ground_truth_type is
"complete" when that column is present, and drop proofs containing `sorry`.
"""

from __future__ import annotations

import json
import re
from pathlib import Path
from typing import Iterable

from .errors import CorpusError
from .protocol import Snippet

_SORRY_RE = re.compile(r"\bsorry\b")


def _record_code(record: dict) -> str | None:
    for field in ("code", "formal_ground_truth"):
        value = record.get(field)
        if isinstance(value, str):
            return value
    return None


def _record_uuid(record: dict) -> str | None:
    for field in ("uuid", "id"):
        value = record.get(field)
        if value is not None:
            return str(value)
    return None


def read_records(path: str | Path) -> list[dict]:
    """Read a corpus or raw dataset export: one JSON object per line, or a
    single JSON array."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from exc
    stripped = text.lstrip()
    try:
        if stripped.startswith("["):
            records = json.loads(text)
        else:
            records = [json.loads(line) for line in text.splitlines() if line.strip()]
    except json.JSONDecodeError as exc:
        raise CorpusError(f"corpus {path} is not valid JSON lines: {exc}") from exc
    if not isinstance(records, list) or not all(isinstance(r, dict) for r in records):
        raise CorpusError(f"corpus {path} must contain JSON objects")
    return records


def load_corpus(path: str | Path) -> list[Snippet]:
    snippets = []
    for i, record in enumerate(read_records(path)):
        uuid = _record_uuid(record)
        code = _record_code(record)
        if uuid is None or code is None:
            raise CorpusError(f"record {i} lacks uuid/code fields: {record!r:.120}")
        snippets.append(Snippet(id=uuid, code=code))
    return snippets


def prepare_records(records: Iterable[dict]) -> list[dict]:
    """Dedup on uuid, keep complete proofs, drop sorry-bearing ones."""
    seen: set[str] = set()
    out = []
    for record in records:
        uuid = _record_uuid(record)
        code = _record_code(record)
        if uuid is None or code is None:
            continue
        if uuid in seen:
            continue
        gtype = record.get("ground_truth_type")
        if gtype is not None and gtype != "complete":
            continue
        if _SORRY_RE.search(code):
            continue
        seen.add(uuid)
        out.append({"uuid": uuid, "code": code})
    return out


def write_corpus(path: str | Path, records: Iterable[dict]) -> int:
    path = Path(path)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record, ensure_ascii=False) + "\n")
            count += 1
    return count


def synthetic_corpus(
    n: int,
    header: str = "import Mathlib\n",
    marker: str = "",
) -> list[Snippet]:
    """Uniform synthetic proofs sharing one header; handy for load tests."""
    snippets = []
    for i in range(n):
        body = f"theorem synth_{i} : True := by\n  trivial{marker}"
        snippets.append(Snippet(id=f"synth-{i}", code=header + "\n" + body))
    return snippets
