#!/usr/bin/env python3
"""Regenerate the golden extraction fixture under tests/fixtures/.

The fixture pins the extractor's end-to-end behavior on a real NuminaMath
proof (theorem algebra_4013): positions are computed against the actual
source text, so the committed tree document stays consistent with the body
byte-for-byte.  Node shapes mirror a tactics-mode trace: a root node for the
outer `by` block, one node per top-level tactic line, and a nested node pair
for the `have`'s inline `by rw [h]; norm_num` proof.

Run from the repository root:  python tools/make_extract_fixture.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from leanserve.protocol import split_snippet  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "tests" / "fixtures"

SOURCE_LINES = [
    "import Mathlib",
    "",
    r"/- Given that the product \( a \cdot b \cdot c = 1 \), what is the value of the following expression?",
    "$$",
    r"\frac{a}{a b + a + 1} + \frac{b}{b c + b + 1} + \frac{c}{c a + c + 1}",
    "$$-/",
    "theorem algebra_4013 {a b c : ℝ} (h : a * b * c = 1) (haux : 1 + a + a * b ≠ 0) :",
    "    a / (a * b + a + 1) + b / (b * c + b + 1) + c / (c * a + c + 1) = 1 := by",
    "  -- need ne_zero condition to perform division",
    "  have : a * b * c ≠ 0 := by rw [h]; norm_num",
    "  have ha : a ≠ 0 := left_ne_zero_of_mul <| left_ne_zero_of_mul this",
    "  have hb : b ≠ 0 := right_ne_zero_of_mul <| left_ne_zero_of_mul this",
    r"  --  Multiply the second fraction by \(a\).",
    "  conv => lhs; lhs; rhs; rw [← mul_div_mul_left _ _ ha]",
    r"  --  Multiply the third fraction by \(ab\).",
    "  conv => lhs; rhs; rw [← mul_div_mul_left _ _ (mul_ne_zero ha hb)]",
    "  -- Thus, we get:",
    r"  --  \[",
    r"  --  \frac{a}{ab + a + 1} + \frac{ab}{abc + ab + a} + \frac{abc}{abca + abc + ab}",
    r"  --  \]",
    "  rw [show a * (b * c + b + 1) = a*b*c + a*b + a by ring]",
    "  rw [show a*b*(c * a + c + 1) = a*b*c*a + a*b*c + a*b by ring]",
    r"  -- **Simplify the expression using \(abc = 1\):**",
    "  rw [h, one_mul]",
    "  ring_nf",
    "  -- **Combine the terms with the same denominator:**",
    "  rw [← add_mul]",
    "  nth_rw 2 [← one_mul (1 + a + a * b)⁻¹]",
    "  rw [← add_mul, show a * b + a + 1 = 1 + a + a * b by ring]",
    "  exact mul_inv_cancel₀ haux",
]

SOURCE = "\n".join(SOURCE_LINES)

CTX = "a b c : ℝ\nh : a * b * c = 1\nhaux : 1 + a + a * b ≠ 0"
MAIN = "⊢ a / (a * b + a + 1) + b / (b * c + b + 1) + c / (c * a + c + 1) = 1"
CTX_THIS = CTX + "\nthis : a * b * c ≠ 0"
CTX_HA = CTX_THIS + "\nha : a ≠ 0"
CTX_HB = CTX_HA + "\nhb : b ≠ 0"

G0 = f"{CTX}\n{MAIN}"
G1 = f"{CTX}\n⊢ a * b * c ≠ 0"
G2 = f"{CTX}\n⊢ 1 ≠ 0"
G3 = f"{CTX_THIS}\n{MAIN}"
G4 = f"{CTX_HA}\n{MAIN}"
G5 = f"{CTX_HB}\n{MAIN}"
G6 = f"{CTX_HB}\n⊢ a / (a * b + a + 1) + a * b / (a * (b * c + b + 1)) + c / (c * a + c + 1) = 1"
G7 = (
    f"{CTX_HB}\n⊢ a / (a * b + a + 1) + a * b / (a * (b * c + b + 1)) "
    "+ a * b * c / (a * b * (c * a + c + 1)) = 1"
)
G8 = (
    f"{CTX_HB}\n⊢ a / (a * b + a + 1) + a * b / (a * b * c + a * b + a) "
    "+ a * b * c / (a * b * (c * a + c + 1)) = 1"
)
G9 = (
    f"{CTX_HB}\n⊢ a / (a * b + a + 1) + a * b / (a * b * c + a * b + a) "
    "+ a * b * c / (a * b * c * a + a * b * c + a * b) = 1"
)
G10 = (
    f"{CTX_HB}\n⊢ a / (a * b + a + 1) + a * b / (1 + a * b + a) "
    "+ 1 / (a + 1 + a * b) = 1"
)
G11 = f"{CTX_HB}\n⊢ (a + a * b) * (1 + a + a * b)⁻¹ + (1 + a + a * b)⁻¹ = 1"
G12 = f"{CTX_HB}\n⊢ (a + a * b) * (1 + a + a * b)⁻¹ + 1 * (1 + a + a * b)⁻¹ = 1"
G13 = f"{CTX_HB}\n⊢ (a + a * b + 1) * (1 + a + a * b)⁻¹ = 1"
G14 = f"{CTX_HB}\n⊢ (1 + a + a * b) * (1 + a + a * b)⁻¹ = 1"


def pos_of(body: str, offset: int) -> dict:
    line = body.count("\n", 0, offset) + 1
    column = offset - (body.rfind("\n", 0, offset) + 1)
    return {"line": line, "column": column}


def node(body: str, start: int, end: int, before: list[str], after: list[str],
         children: list | None = None) -> dict:
    return {
        "kind": "TacticInfo",
        "range": {"start": pos_of(body, start), "finish": pos_of(body, end)},
        "goalsBefore": before,
        "goalsAfter": after,
        "children": children or [],
    }


def line_span(body: str, line_text: str) -> tuple[int, int]:
    """Offsets of a tactic line's content (indent start to line end)."""
    at = body.index("\n" + line_text + "\n") + 1 if "\n" + line_text + "\n" in body else body.index(line_text)
    stripped_at = at + (len(line_text) - len(line_text.lstrip()))
    return stripped_at, at + len(line_text)


def build_tree(body: str) -> dict:
    root_start = body.index(":= by") + len(":= ")
    root_end = len(body)

    have_line = "  have : a * b * c ≠ 0 := by rw [h]; norm_num"
    have_at = body.index(have_line)
    inner_by_start = have_at + have_line.index(":= by") + len(":= ")
    inner_by_end = have_at + len(have_line)
    norm_num_start = have_at + have_line.index("norm_num")

    inner = node(
        body, inner_by_start, inner_by_end, [G1], [],
        children=[node(body, norm_num_start, inner_by_end, [G2], [G3])],
    )

    sequence = [
        ("  have ha : a ≠ 0 := left_ne_zero_of_mul <| left_ne_zero_of_mul this", G3, G4),
        ("  have hb : b ≠ 0 := right_ne_zero_of_mul <| left_ne_zero_of_mul this", G4, G5),
        ("  conv => lhs; lhs; rhs; rw [← mul_div_mul_left _ _ ha]", G5, G6),
        ("  conv => lhs; rhs; rw [← mul_div_mul_left _ _ (mul_ne_zero ha hb)]", G6, G7),
        ("  rw [show a * (b * c + b + 1) = a*b*c + a*b + a by ring]", G7, G8),
        ("  rw [show a*b*(c * a + c + 1) = a*b*c*a + a*b*c + a*b by ring]", G8, G9),
        ("  rw [h, one_mul]", G9, G10),
        ("  ring_nf", G10, G11),
        ("  rw [← add_mul]", G11, G12),
        ("  nth_rw 2 [← one_mul (1 + a + a * b)⁻¹]", G12, G13),
        ("  rw [← add_mul, show a * b + a + 1 = 1 + a + a * b by ring]", G13, G14),
        ("  exact mul_inv_cancel₀ haux", G14, None),
    ]
    children = [inner]
    for text, before, after in sequence:
        start, end = line_span(body, text)
        children.append(node(body, start, end, [before], [after] if after else []))

    return node(body, root_start, root_end, [G0], [], children=children)


def main() -> None:
    split = split_snippet(SOURCE)
    assert split.header == "import Mathlib\n"
    assert split.header + split.body == SOURCE
    tree = build_tree(split.body)

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    (OUT_DIR / "algebra_4013.lean").write_text(SOURCE, encoding="utf-8")
    (OUT_DIR / "algebra_4013_infotree.json").write_text(
        json.dumps(tree, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    print(f"wrote fixtures to {OUT_DIR}")


if __name__ == "__main__":
    main()
