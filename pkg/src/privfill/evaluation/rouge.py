"""ROUGE-N and ROUGE-L F-measures.

Tokenisation follows the common rouge-score convention: lowercase, replace
anything outside ``[a-z0-9]`` by spaces, and stem tokens longer than three
characters.
"""

from __future__ import annotations

import re
from collections import Counter
from typing import Sequence

from privfill.evaluation.stemmer import porter_stem

_NON_ALNUM = re.compile(r"[^a-z0-9]+")


def tokenize(text: str, stemmer: bool = True) -> list[str]:
    tokens = _NON_ALNUM.sub(" ", text.lower()).split()
    if stemmer:
        tokens = [porter_stem(t) if len(t) > 3 else t for t in tokens]
    return tokens


def _f1(overlap: int, n_ref: int, n_cand: int) -> float:
    if overlap == 0 or n_ref == 0 or n_cand == 0:
        return 0.0
    # 2PR/(P+R) with P = o/c and R = o/r, reduced to one rounding step
    return 2 * overlap / (n_ref + n_cand)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def rouge_n_tokens(ref: Sequence[str], cand: Sequence[str], n: int = 1) -> float:
    r, c = _ngrams(ref, n), _ngrams(cand, n)
    overlap = sum((r & c).values())
    return _f1(overlap, sum(r.values()), sum(c.values()))


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b):
            cur.append(prev[j] + 1 if x == y else max(prev[j + 1], cur[j]))
        prev = cur
    return prev[-1]


def rouge_l_tokens(ref: Sequence[str], cand: Sequence[str]) -> float:
    return _f1(lcs_length(ref, cand), len(ref), len(cand))


def rouge_n_f(reference: str, candidate: str, n: int = 1, stemmer: bool = True) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    return rouge_n_tokens(tokenize(reference, stemmer), tokenize(candidate, stemmer), n)


def rouge_l_f(reference: str, candidate: str, stemmer: bool = True) -> float:
    return rouge_l_tokens(tokenize(reference, stemmer), tokenize(candidate, stemmer))
