import json
import random

import pytest

from leanserve.errors import MalformedTree, SpanOutOfBounds
from leanserve.infotree import (
    RawSpan,
    adjust_boundaries,
    carve_snippets,
    collect_tactic_spans,
    eliminate_overlaps,
    extract_data,
    format_steps,
    is_whitespace_or_comments,
    parse_infotree,
)
from leanserve.protocol import split_snippet

from util import FIXTURES, node_doc, oracle_eliminate, random_tree_doc


def load_golden():
    source = (FIXTURES / "algebra_4013.lean").read_text(encoding="utf-8")
    tree = json.loads((FIXTURES / "algebra_4013_infotree.json").read_text(encoding="utf-8"))
    return tree, split_snippet(source).body


class TestParse:
    def test_single_node_spans_whole_body(self):
        body = "norm_num"
        doc = node_doc(body, 0, len(body), ["⊢ g"], [])
        tree = parse_infotree(doc, body)
        assert (tree.start, tree.end) == (0, 8)
        assert tree.is_tactic

    def test_list_document_wrapped_in_root(self):
        body = "a\nb"
        doc = [node_doc(body, 0, 1, ["⊢ x"], ["⊢ y"]), node_doc(body, 2, 3, ["⊢ y"], [])]
        tree = parse_infotree(doc, body)
        assert tree.kind == "root" and not tree.is_tactic
        assert len(tree.children) == 2

    def test_missing_goals_before_is_malformed(self):
        body = "x"
        doc = node_doc(body, 0, 1, ["⊢ g"], [])
        del doc["goalsBefore"]
        with pytest.raises(MalformedTree):
            parse_infotree(doc, body)

    def test_missing_range_is_malformed(self):
        doc = {"kind": "TacticInfo", "goalsBefore": [], "goalsAfter": [], "children": []}
        with pytest.raises(MalformedTree):
            parse_infotree(doc, "x")

    def test_missing_kind_is_malformed(self):
        body = "x"
        doc = node_doc(body, 0, 1, [], [])
        del doc["kind"]
        with pytest.raises(MalformedTree):
            parse_infotree(doc, body)

    def test_children_clamped_into_parent(self):
        body = "abcdefghij"
        child = node_doc(body, 0, 10, ["⊢ c"], [])
        doc = node_doc(body, 2, 6, ["⊢ p"], [], children=[child])
        tree = parse_infotree(doc, body)
        assert (tree.children[0].start, tree.children[0].end) == (2, 6)

    def test_golden_tree_has_14_tactic_descendants(self):
        tree_doc, body = load_golden()
        tree = parse_infotree(tree_doc, body)
        descendants = [n for n in tree.walk() if n.is_tactic][1:]
        assert len(descendants) >= 14

    def test_unicode_columns_count_codepoints(self):
        body = "⊢ ≠ by\n  ring"
        doc = node_doc(body, 8, 13, ["⊢ g"], [])
        tree = parse_infotree(doc, body)
        assert body[tree.start : tree.end] == " ring"


class TestCollect:
    def test_no_tactic_nodes(self):
        body = "x"
        doc = node_doc(body, 0, 1, [], [], kind="TermInfo")
        assert collect_tactic_spans(parse_infotree(doc, body)) == []

    def test_tactic_under_non_tactic_wrapper(self):
        body = "have h := by ring"
        inner = node_doc(body, 13, 17, ["⊢ a"], [])
        doc = node_doc(body, 0, 17, [], [], children=[inner], kind="TermInfo")
        spans = collect_tactic_spans(parse_infotree(doc, body))
        assert [(s.start, s.end) for s in spans] == [(13, 17)]

    def test_nested_have_produces_overlapping_spans(self):
        body = "have h : P := by rw [x]; ring"
        child = node_doc(body, 14, 29, ["⊢ P"], [])
        doc = node_doc(body, 0, 29, ["⊢ Q"], [], children=[child])
        spans = collect_tactic_spans(parse_infotree(doc, body))
        assert len(spans) == 2
        assert spans[0].start <= spans[1].start < spans[0].end


class TestEliminate:
    def test_disjoint_spans_unchanged(self):
        body = "x" * 50
        spans = [RawSpan(0, 10, ("a",), ("b",)), RawSpan(20, 30, ("b",), ("c",))]
        assert eliminate_overlaps(spans, body) == spans

    def test_parent_truncated_before_first_child(self):
        body = "x" * 100
        parent = RawSpan(0, 100, ("g0",), ())
        children = [RawSpan(20, 50, ("g1",), ("g2",)), RawSpan(60, 90, ("g2",), ("g3",))]
        out = eliminate_overlaps([parent] + children, body)
        assert [(s.start, s.end) for s in out] == [(0, 20), (20, 50), (60, 90)]
        assert out[0].goals_before == ("g0",)
        assert out[0].goals_after == ("g1",)  # inherited from the first child

    def test_whitespace_prefix_parent_dropped(self):
        body = "   rw [h]"
        parent = RawSpan(0, 9, ("g0",), ())
        child = RawSpan(3, 9, ("g1",), ())
        out = eliminate_overlaps([parent, child], body)
        assert out == [child]

    def test_same_start_parent_dropped(self):
        body = "ring_nf"
        parent = RawSpan(0, 7, ("g0",), ())
        child = RawSpan(0, 4, ("g0",), ("g1",))
        out = eliminate_overlaps([parent, child], body)
        assert out == [child]

    def test_truncation_back_trims_whitespace(self):
        body = "by  ring"
        parent = RawSpan(0, 8, ("g0",), ())
        child = RawSpan(4, 8, ("g1",), ())
        out = eliminate_overlaps([parent, child], body)
        assert [(s.start, s.end) for s in out] == [(0, 2), (4, 8)]

    def test_idempotent(self):
        rng = random.Random(1)
        for _ in range(100):
            doc, body = random_tree_doc(rng)
            spans = collect_tactic_spans(parse_infotree(doc, body))
            once = eliminate_overlaps(spans, body)
            assert eliminate_overlaps(once, body) == once

    def test_matches_brute_force_oracle_small_trees(self):
        rng = random.Random(17)
        checked = 0
        while checked < 300:
            doc, body = random_tree_doc(rng)
            spans = collect_tactic_spans(parse_infotree(doc, body))
            if not spans or len(spans) > 6:
                continue
            # the oracle does not model exact-duplicate spans
            if len({(s.start, s.end) for s in spans}) != len(spans):
                continue
            checked += 1
            got = eliminate_overlaps(spans, body)
            expected = oracle_eliminate(spans, body)
            assert got == expected, f"body={body!r} spans={spans}"


class TestCarve:
    def test_full_slice(self):
        body = "norm_num"
        steps = carve_snippets(body, [RawSpan(0, 8, ("g",), ())])
        assert steps[0].tactic == "norm_num"
        assert steps[0].span == (0, 8)

    def test_two_spans_slice_exactly(self):
        body = "rw [h]; norm_num"
        spans = [RawSpan(0, 7, ("a",), ("b",)), RawSpan(7, 16, ("b",), ())]
        steps = carve_snippets(body, spans)
        assert [s.tactic for s in steps] == ["rw [h];", " norm_num"]

    def test_span_beyond_body_raises(self):
        with pytest.raises(SpanOutOfBounds):
            carve_snippets("short", [RawSpan(0, 99, (), ())])


class TestAdjust:
    def test_gap_attaches_to_following_step(self):
        body = "ring\n  -- comment\n  have h := this"
        steps = carve_snippets(body, [RawSpan(0, 4, ("a",), ("b",)),
                                      RawSpan(20, 34, ("b",), ())])
        out = adjust_boundaries(steps, body)
        assert out[0].tactic == "ring"
        assert out[1].tactic == "\n  -- comment\n  have h := this"

    def test_no_gaps_is_identity(self):
        body = "ab"
        steps = carve_snippets(body, [RawSpan(0, 1, (), ()), RawSpan(1, 2, (), ())])
        assert adjust_boundaries(steps, body) == steps

    def test_leading_text_before_first_step_dropped(self):
        body = "theorem t : True := by ring"
        steps = carve_snippets(body, [RawSpan(23, 27, (), ())])
        out = adjust_boundaries(steps, body)
        assert out[0].tactic == "ring"

    def test_trailing_comment_tail_dropped(self):
        body = "ring\n-- done\n"
        steps = carve_snippets(body, [RawSpan(0, 4, (), ())])
        out = adjust_boundaries(steps, body)
        assert len(out) == 1 and out[0].tactic == "ring"

    def test_trailing_code_extends_last_step(self):
        body = "ring; simp"
        steps = carve_snippets(body, [RawSpan(0, 4, (), ())])
        out = adjust_boundaries(steps, body)
        assert out[0].tactic == "ring; simp"

    def test_empty_steps_removed(self):
        body = "ab"
        steps = carve_snippets(body, [RawSpan(0, 0, (), ()), RawSpan(0, 2, (), ())])
        out = adjust_boundaries(steps, body)
        assert [s.tactic for s in out] == ["ab"]


def test_is_whitespace_or_comments():
    assert is_whitespace_or_comments("")
    assert is_whitespace_or_comments("  \n\t")
    assert is_whitespace_or_comments("-- line comment\n   ")
    assert is_whitespace_or_comments("/- block /- nested -/ still -/ \n")
    assert not is_whitespace_or_comments("ring")
    assert not is_whitespace_or_comments("/- open block")
    assert not is_whitespace_or_comments("-/ stray close")


class TestExtract:
    def test_empty_tree_and_body(self):
        assert extract_data([], "") == []
        assert extract_data(None, "") == []

    def test_propagates_malformed(self):
        with pytest.raises(MalformedTree):
            extract_data({"kind": "TacticInfo"}, "x")

    def test_golden_first_five_intervals(self):
        tree, body = load_golden()
        steps = extract_data(tree, body)
        assert [s.tactic for s in steps[:5]] == [
            "by\n  -- need ne_zero condition to perform division\n  have : a * b * c ≠ 0 :=",
            " by rw [h];",
            " norm_num",
            "\n  have ha : a ≠ 0 := left_ne_zero_of_mul <| left_ne_zero_of_mul this",
            "\n  have hb : b ≠ 0 := right_ne_zero_of_mul <| left_ne_zero_of_mul this",
        ]
        assert steps[0].goals_after == steps[1].goals_before

    def test_golden_reconstruction(self):
        tree, body = load_golden()
        steps = extract_data(tree, body)
        joined = "".join(s.tactic for s in steps)
        assert joined == body[steps[0].span[0] :]

    def test_property_suite(self):
        rng = random.Random(23)
        for _ in range(200):
            doc, body = random_tree_doc(rng)
            steps = extract_data(doc, body)
            check_step_properties(steps, body)

    def test_linear_tree_goal_chaining(self):
        body = "rw [h]\nsimp\nring"
        nodes = [
            node_doc(body, 0, 6, ["⊢ s0"], ["⊢ s1"]),
            node_doc(body, 7, 11, ["⊢ s1"], ["⊢ s2"]),
            node_doc(body, 12, 16, ["⊢ s2"], []),
        ]
        steps = extract_data(nodes, body)
        assert len(steps) == 3
        for left, right in zip(steps, steps[1:]):
            assert left.goals_after == right.goals_before


def check_step_properties(steps, body):
    # disjoint and sorted
    for left, right in zip(steps, steps[1:]):
        assert left.span[1] <= right.span[0]
    # faithful slices
    for step in steps:
        assert step.tactic == body[step.span[0] : step.span[1]]
    # reconstruction: no text lost between first step start and body end
    if steps:
        joined = "".join(s.tactic for s in steps)
        tail = body[steps[-1].span[1] :]
        assert joined + tail == body[steps[0].span[0] :]
        assert tail == "" or is_whitespace_or_comments(tail)


def test_format_steps_layout():
    body = "ring"
    steps = extract_data([node_doc(body, 0, 4, ["⊢ 1 = 1"], [])], body)
    text = format_steps(steps)
    assert text.splitlines()[0] == "INTERVAL 1"
    assert "Goals before:" in text and "Tactic:" in text and "Goals after:" in text
    assert "⊢ 1 = 1" in text and "ring" in text
