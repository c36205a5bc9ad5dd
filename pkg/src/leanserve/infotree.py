"""Turn a checker infotree plus the proof body into non-overlapping steps.

Pipeline stages:

  parse_infotree       line/column ranges -> offsets into the body text
  collect_tactic_spans depth-first spans of every tactic node
  eliminate_overlaps   child-priority truncation to pairwise-disjoint spans
  carve_snippets       exact body slices per span
  adjust_boundaries    attach inter-span gap text to the following step

The overlap rule: within a region claimed by several tactic nodes, the
later-starting (inner) node wins; the enclosing node keeps only its prefix up
to the first inner node, back-trimmed over whitespace.  A node whose kept
prefix is empty or whitespace-only disappears.  A truncated node keeps its
goals-before and inherits goals-after from the node that cut it, so goal
states still chain across consecutive steps.

Everything here is a pure function over immutable values.  Offsets count
codepoints of the body string; lines are 1-based and columns 0-based, the
checker's convention, measured against the text exactly as it was sent to
the worker (the body alone when the header was split off).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Iterator

from .errors import MalformedTree, SpanOutOfBounds

__all__ = [
    "InfoTreeNode",
    "RawSpan",
    "ProofStep",
    "parse_infotree",
    "collect_tactic_spans",
    "eliminate_overlaps",
    "carve_snippets",
    "adjust_boundaries",
    "extract_data",
    "format_steps",
    "is_whitespace_or_comments",
]


@dataclass(frozen=True)
class InfoTreeNode:
    kind: str
    start: int
    end: int
    goals_before: tuple[str, ...]
    goals_after: tuple[str, ...]
    children: tuple["InfoTreeNode", ...]

    @property
    def is_tactic(self) -> bool:
        return "tactic" in self.kind.lower()

    def walk(self) -> Iterator["InfoTreeNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class RawSpan:
    start: int
    end: int
    goals_before: tuple[str, ...]
    goals_after: tuple[str, ...]


@dataclass(frozen=True)
class ProofStep:
    tactic: str
    goals_before: tuple[str, ...]
    goals_after: tuple[str, ...]
    span: tuple[int, int]

    def to_wire(self) -> dict:
        return {
            "tactic": self.tactic,
            "goalsBefore": list(self.goals_before),
            "goalsAfter": list(self.goals_after),
            "span": list(self.span),
        }


def _line_starts(body: str) -> list[int]:
    starts = [0]
    for i, ch in enumerate(body):
        if ch == "\n":
            starts.append(i + 1)
    return starts


def _to_offset(pos: Any, starts: list[int], body_len: int, what: str) -> int:
    if not isinstance(pos, dict) or "line" not in pos or "column" not in pos:
        raise MalformedTree(f"node {what} position must carry line and column: {pos!r}")
    try:
        line = int(pos["line"])
        column = int(pos["column"])
    except (TypeError, ValueError) as exc:
        raise MalformedTree(f"non-integer {what} position: {pos!r}") from exc
    if line < 1 or column < 0:
        raise MalformedTree(f"{what} position out of range: {pos!r}")
    if line > len(starts):
        return body_len
    return min(starts[line - 1] + column, body_len)


def _goals(raw: Any, node_kind: str, which: str) -> tuple[str, ...]:
    if raw is None:
        raise MalformedTree(f"{node_kind} node missing {which}")
    if not isinstance(raw, list):
        raise MalformedTree(f"{node_kind} node {which} must be a list: {raw!r}")
    return tuple(str(g) for g in raw)


def _parse_node(raw: Any, starts: list[int], body_len: int,
                lo: int, hi: int) -> InfoTreeNode:
    if not isinstance(raw, dict):
        raise MalformedTree(f"tree node must be an object, got {type(raw).__name__}")
    kind = raw.get("kind")
    if not isinstance(kind, str) or not kind:
        raise MalformedTree(f"tree node missing kind: {raw!r}")
    rng = raw.get("range")
    if not isinstance(rng, dict) or "start" not in rng or "finish" not in rng:
        raise MalformedTree(f"{kind} node missing range")
    start = _to_offset(rng["start"], starts, body_len, "start")
    end = _to_offset(rng["finish"], starts, body_len, "finish")
    if end < start:
        raise MalformedTree(f"{kind} node range ends before it starts")
    # repair containment violations by clamping into the parent range
    start = min(max(start, lo), hi)
    end = min(max(end, start), hi)
    goals_before = _goals(raw.get("goalsBefore"), kind, "goalsBefore")
    goals_after = _goals(raw.get("goalsAfter"), kind, "goalsAfter")
    children = raw.get("children", [])
    if not isinstance(children, list):
        raise MalformedTree(f"{kind} node children must be a list")
    parsed = tuple(
        sorted(
            (_parse_node(c, starts, body_len, start, end) for c in children),
            key=lambda n: (n.start, -n.end),
        )
    )
    return InfoTreeNode(kind, start, end, goals_before, goals_after, parsed)


def parse_infotree(document: Any, body: str) -> InfoTreeNode:
    """Parse a worker infotree document against the body it was produced for.

    The document is either one node object or a list of root nodes; a list is
    wrapped in a synthetic non-tactic root spanning the whole body.  Raises
    MalformedTree when kind, range, or goals fields are missing.
    """
    starts = _line_starts(body)
    if isinstance(document, list):
        children = tuple(
            sorted(
                (_parse_node(c, starts, len(body), 0, len(body)) for c in document),
                key=lambda n: (n.start, -n.end),
            )
        )
        return InfoTreeNode("root", 0, len(body), (), (), children)
    return _parse_node(document, starts, len(body), 0, len(body))


def collect_tactic_spans(tree: InfoTreeNode) -> list[RawSpan]:
    """Depth-first, in-order spans of every tactic node.  Parents that merely
    wrap their children are kept here; overlap elimination resolves them."""
    spans = [
        RawSpan(n.start, n.end, n.goals_before, n.goals_after)
        for n in tree.walk()
        if n.is_tactic
    ]
    spans.sort(key=lambda s: (s.start, -s.end))
    return spans


def _back_trim(body: str, start: int, end: int) -> int:
    while end > start and body[end - 1].isspace():
        end -= 1
    return end


def eliminate_overlaps(spans: list[RawSpan], body: str) -> list[RawSpan]:
    """Reduce overlapping tactic spans to a disjoint, sorted sequence.

    Inner (later-starting) spans take precedence; an enclosing span keeps the
    region before its first inner span, back-trimmed over whitespace, and is
    dropped entirely when that prefix is empty or whitespace.  A truncated
    span keeps its goals-before and takes goals-after from its first inner
    span.  Applying the function to its own output is the identity.
    """
    ordered = sorted(spans, key=lambda s: (s.start, -s.end))
    out: list[RawSpan] = []
    for i, span in enumerate(ordered):
        cutter = None
        for later in ordered[i + 1 :]:
            if later.start >= span.end:
                break
            cutter = later
            break
        if cutter is None:
            if span.end > span.start:
                out.append(span)
            continue
        end = _back_trim(body, span.start, cutter.start)
        if body[span.start : end].strip() == "":
            continue
        out.append(RawSpan(span.start, end, span.goals_before, cutter.goals_before))
    return out


def carve_snippets(body: str, spans: list[RawSpan]) -> list[ProofStep]:
    """Slice the exact body text for each disjoint span."""
    steps = []
    for span in spans:
        if span.start < 0 or span.end > len(body) or span.start > span.end:
            raise SpanOutOfBounds(
                f"span [{span.start}, {span.end}) outside body of length {len(body)}"
            )
        steps.append(
            ProofStep(
                tactic=body[span.start : span.end],
                goals_before=span.goals_before,
                goals_after=span.goals_after,
                span=(span.start, span.end),
            )
        )
    return steps


def is_whitespace_or_comments(text: str) -> bool:
    """True when the text holds nothing but whitespace, line comments, and
    (possibly nested) block comments."""
    out: list[str] = []
    i, depth, n = 0, 0, len(text)
    while i < n:
        two = text[i : i + 2]
        if depth == 0 and two == "--":
            nl = text.find("\n", i)
            i = n if nl < 0 else nl
        elif two == "/-":
            depth += 1
            i += 2
        elif depth > 0 and two == "-/":
            depth -= 1
            i += 2
        elif depth > 0:
            i += 1
        else:
            out.append(text[i])
            i += 1
    return "".join(out).strip() == ""


def adjust_boundaries(steps: list[ProofStep], body: str) -> list[ProofStep]:
    """Attach inter-span gap text (whitespace, comments) to the following
    step, so a comment rides with the tactic it annotates.  Text before the
    first step is dropped; a whitespace/comment tail after the last step is
    dropped; anything else trailing extends the last step.  Empty steps are
    removed."""
    present = [s for s in steps if s.tactic]
    out: list[ProofStep] = []
    for step in present:
        if not out:
            out.append(step)
            continue
        prev_end = out[-1].span[1]
        if step.span[0] > prev_end:
            gap = body[prev_end : step.span[0]]
            step = ProofStep(
                tactic=gap + step.tactic,
                goals_before=step.goals_before,
                goals_after=step.goals_after,
                span=(prev_end, step.span[1]),
            )
        out.append(step)
    if out:
        tail = body[out[-1].span[1] :]
        if tail and not is_whitespace_or_comments(tail):
            last = out[-1]
            out[-1] = ProofStep(
                tactic=last.tactic + tail,
                goals_before=last.goals_before,
                goals_after=last.goals_after,
                span=(last.span[0], len(body)),
            )
    return out


def extract_data(document: Any, body: str) -> list[ProofStep]:
    """Full pipeline: infotree document + body -> ordered disjoint steps."""
    if document is None or document == []:
        return []
    tree = parse_infotree(document, body)
    spans = collect_tactic_spans(tree)
    disjoint = eliminate_overlaps(spans, body)
    steps = carve_snippets(body, disjoint)
    return adjust_boundaries(steps, body)


def format_steps(steps: list[ProofStep]) -> str:
    """Render steps in the three-field interval layout."""
    blocks = []
    for i, step in enumerate(steps, start=1):
        blocks.append(
            "\n".join(
                [
                    f"INTERVAL {i}",
                    "-----",
                    "Goals before:",
                    "\n\n".join(step.goals_before),
                    "-----",
                    "Tactic:",
                    step.tactic,
                    "-----",
                    "Goals after:",
                    "\n\n".join(step.goals_after),
                ]
            )
        )
    return ("\n" + "-" * 20 + "\n").join(blocks)
