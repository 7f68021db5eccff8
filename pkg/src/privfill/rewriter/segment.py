"""Rule-based sentence boundary detection.

Boundaries are proposed at runs of ``.``, ``!`` or ``?`` (plus trailing closing
quotes/brackets) that are followed by whitespace, and at blank lines. A
proposal is vetoed when the word before the terminator is a known
abbreviation or a personal initial.
"""

from __future__ import annotations

import re
from typing import NamedTuple

# never end a sentence, whatever follows
_ALWAYS_ABBREV = {
    "dr", "mr", "mrs", "ms", "prof", "st", "sen", "rep", "gen", "gov", "capt",
    "lt", "col", "sgt", "jr", "sr", "rev", "hon", "mt", "ft", "vs", "e.g", "i.e",
    "cf", "fig", "figs", "eq", "eqs", "vol", "pp", "approx",
    "dept", "univ", "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep",
    "sept", "oct", "nov", "dec", "ca", "al",
}
# end a sentence only when the next word is capitalised
_SOMETIMES_ABBREV = {"inc", "ltd", "co", "corp", "etc", "a.m", "p.m", "est", "min", "max"}
# also ordinary words ("said no."), so abbreviations only before a number
_NUMERIC_ABBREV = {"no", "nos", "tab"}

_ACRONYM = re.compile(r"^(?:[A-Za-z]\.)+[A-Za-z]$")
_CANDIDATE = re.compile(r"([.!?]+)([\"'”’)\]]*)(?=\s)|\n[ \t]*\n")
_OPENERS = "\"'“‘(["


class Sentence(NamedTuple):
    text: str
    start: int
    end: int


def _word_before(text: str, pos: int) -> str:
    i = pos
    while i > 0 and not text[i - 1].isspace():
        i -= 1
    return text[i:pos].lstrip(_OPENERS)


def _next_word(text: str, pos: int) -> str:
    m = re.compile(r"\s*(\S+)").match(text, pos)
    return m.group(1).lstrip(_OPENERS) if m else ""


def _is_boundary(text: str, m: re.Match) -> bool:
    if m.group(1) is None:
        return True  # blank line
    nxt = _next_word(text, m.end())
    if not nxt:
        return True
    upper_next = nxt[0].isupper()
    term = m.group(1)
    if term.startswith("..") and set(term) == {"."}:
        return upper_next
    if term != ".":
        return True
    word = _word_before(text, m.start(1))
    low = word.lower()
    if low in _ALWAYS_ABBREV:
        return False
    if low in _NUMERIC_ABBREV:
        return not nxt[0].isdigit()
    if low in _SOMETIMES_ABBREV or _ACRONYM.match(word):
        return upper_next
    # personal initial, e.g. "John F. Kennedy"
    if len(word) == 1 and word.isupper():
        bare = nxt.rstrip(".,;:!?")
        if len(bare) >= 2 and bare[0].isupper():
            return False
    return True


def _trimmed(text: str, start: int, end: int) -> Sentence | None:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    if start == end:
        return None
    return Sentence(text[start:end], start, end)


def segment_sentences(text: str) -> list[Sentence]:
    """Split ``text`` into ordered, non-overlapping, whitespace-trimmed spans.

    Every non-whitespace character of ``text`` belongs to exactly one span.
    Text without any terminator comes back as a single span.
    """
    sentences: list[Sentence] = []
    start = 0
    for m in _CANDIDATE.finditer(text):
        if not _is_boundary(text, m):
            continue
        span = _trimmed(text, start, m.end())
        if span is not None:
            sentences.append(span)
        start = m.end()
    span = _trimmed(text, start, len(text))
    if span is not None:
        sentences.append(span)
    return sentences


def sent_tokenize(text: str) -> list[str]:
    return [s.text for s in segment_sentences(text)]
