"""Parsers for the two model-output formats used throughout the pipelines.

The structured format is ``<reason>...</reason><label>0|1</label>``; the bare
format is a single ``0`` or ``1`` character.  Structured parsing never raises:
failures surface in the returned fields so reward code can score format
compliance and label correctness as independent signals.
"""

from __future__ import annotations

import re
from dataclasses import dataclass


class InvalidLabelError(ValueError):
    """A bare-label response was not exactly '0' or '1' after trimming."""


@dataclass(frozen=True)
class ParsedOutput:
    """Result of parsing one structured model response.

    ``format_ok`` is 1 only when the response contains exactly one reason
    block followed by exactly one label block and the label body is binary.
    ``label`` is recovered best-effort even when the format is invalid.
    """

    reasoning: str | None
    label: int | None
    format_ok: int
    raw: str


_REASON_OPEN = re.compile(r"<reason>", re.IGNORECASE)
_REASON_CLOSE = re.compile(r"</reason>", re.IGNORECASE)
_LABEL_OPEN = re.compile(r"<label>", re.IGNORECASE)
_LABEL_CLOSE = re.compile(r"</label>", re.IGNORECASE)


def _spans(pattern: re.Pattern[str], text: str) -> list[tuple[int, int]]:
    return [m.span() for m in pattern.finditer(text)]


def _first_block(text: str, opens, closes) -> str | None:
    """Body of the first open tag up to the first close tag after it."""
    if not opens:
        return None
    start = opens[0][1]
    close = next((span for span in closes if span[0] >= start), None)
    if close is None:
        return None
    return text[start:close[0]]


def parse_structured_output(text: str) -> ParsedOutput:
    """Parse a reasoning-then-label response.

    Tag matching is case-insensitive.  Text outside the tags is tolerated,
    but each tag must occur exactly once and the reason block must precede
    the label block for the format to count as compliant.  Everything inside
    ``<reason>`` up to its first closing tag is taken verbatim.
    """
    ro = _spans(_REASON_OPEN, text)
    rc = _spans(_REASON_CLOSE, text)
    lo = _spans(_LABEL_OPEN, text)
    lc = _spans(_LABEL_CLOSE, text)

    reasoning = _first_block(text, ro, rc)

    label: int | None = None
    label_body = _first_block(text, lo, lc)
    if label_body is not None and label_body.strip() in ("0", "1"):
        label = int(label_body.strip())

    format_ok = 0
    if (
        len(ro) == 1
        and len(rc) == 1
        and len(lo) == 1
        and len(lc) == 1
        and ro[0][1] <= rc[0][0]
        and rc[0][1] <= lo[0][0]
        and lo[0][1] <= lc[0][0]
        and reasoning is not None
        and text[lo[0][1]:lc[0][0]].strip() in ("0", "1")
    ):
        format_ok = 1

    return ParsedOutput(reasoning=reasoning, label=label, format_ok=format_ok, raw=text)


def parse_bare_label(text: str) -> int:
    """Parse a single-character label response, trimming surrounding whitespace."""
    body = text.strip()
    if body in ("0", "1"):
        return int(body)
    raise InvalidLabelError(f"expected a bare '0' or '1', got {text!r}")


def format_score(parsed: ParsedOutput) -> int:
    """Structured-output compliance score: exactly ``parsed.format_ok``."""
    return parsed.format_ok


def render_structured_output(reasoning: str, label: int) -> str:
    """Render the canonical structured response for a reasoning/label pair."""
    if label not in (0, 1):
        raise ValueError(f"label must be 0 or 1, got {label!r}")
    return f"<reason>{reasoning}</reason><label>{label}</label>"
