"""Similarity, fluency and classifier-score arithmetic."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)


def cosine_similarity(original: str, rewritten: str, embedder) -> float:
    a = np.asarray(embedder.embed(original), dtype=np.float64)
    b = np.asarray(embedder.embed(rewritten), dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise ValueError("embedding is the zero vector")
    return float(np.clip(np.dot(a / na, b / nb), -1.0, 1.0))


@dataclass(frozen=True)
class PerplexityResult:
    mean: float
    scored: int
    skipped: int


def mean_perplexity(texts: Sequence[str], scorer) -> PerplexityResult:
    """Arithmetic mean over texts; texts the scorer rejects are skipped and counted."""
    if not texts:
        raise ValueError("no texts to score")
    values, skipped = [], 0
    for text in texts:
        try:
            ppl = float(scorer.perplexity(text))
        except Exception as exc:  # scorer-specific failures, e.g. overlong input
            log.warning("perplexity failed for %.40r: %s", text, exc)
            skipped += 1
            continue
        if not math.isfinite(ppl) or ppl <= 0:
            skipped += 1
            continue
        values.append(ppl)
    if not values:
        raise ValueError(f"scorer failed on all {len(texts)} texts")
    return PerplexityResult(math.fsum(values) / len(values), len(values), skipped)


def micro_f1(gold: Sequence, predicted: Sequence) -> float:
    """Micro-averaged F1 for single-label predictions, as a fraction."""
    if len(gold) != len(predicted):
        raise ValueError("gold and predicted lengths differ")
    if not gold:
        raise ValueError("empty evaluation set")
    # every item contributes one prediction and one gold label, so P = R = accuracy
    return sum(g == p for g, p in zip(gold, predicted)) / len(gold)


def majority_f1(p: float) -> float:
    """F1 (percent) of the majority class under a constant majority predictor."""
    if not 0 < p <= 1:
        raise ValueError(f"majority fraction must be in (0, 1], got {p}")
    return 100.0 * 2 * p / (1 + p)


@dataclass(frozen=True)
class EvalInputs:
    """F1 scores in percent: originals, rewritten, and guessing baselines."""

    U_o: float
    U_r: float
    P_o: float
    P_r: float
    MG_u: float
    MG_p: float

    def __post_init__(self):
        for name in ("U_o", "U_r", "P_o", "P_r", "MG_u", "MG_p"):
            v = getattr(self, name)
            if not 0 <= v <= 100:
                raise ValueError(f"{name}={v} outside [0, 100]")


def relative_gain(inputs: EvalInputs) -> float:
    """Utility kept minus privacy leaked, each measured above guessing."""
    if inputs.U_o == inputs.MG_u:
        raise ZeroDivisionError("utility baseline equals the utility guessing baseline (U_o == MG_u)")
    if inputs.P_o == inputs.MG_p:
        raise ZeroDivisionError("privacy baseline equals the privacy guessing baseline (P_o == MG_p)")
    return (inputs.U_r - inputs.MG_u) / (inputs.U_o - inputs.MG_u) - (
        inputs.P_r - inputs.MG_p
    ) / (inputs.P_o - inputs.MG_p)


def pp_plus(f1: float, mg: float) -> int:
    """Signed distance from guessing, in hundredths of a percentage point."""
    return int(round((f1 - mg) * 100))
