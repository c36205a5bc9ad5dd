"""Batch verification gateway for Lean-style proof scripts."""

from .protocol import Snippet, Verdict, VerdictStatus, analyze, normalize_header, split_snippet

__version__ = "0.1.0"

__all__ = [
    "Snippet",
    "Verdict",
    "VerdictStatus",
    "analyze",
    "normalize_header",
    "split_snippet",
    "__version__",
]
