"""Utility and empirical-privacy protocols.

Both use one fixed 90/10 split per seed. Utility training is repeated three
times on differently shuffled train splits. Static attackers train on original
texts and are scored on rewritten validation texts; adaptive attackers train
and are scored on rewritten texts.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from privfill.evaluation.metrics import micro_f1
from privfill.rewriter.mechanisms import Document

STATIC = "static"
ADAPTIVE = "adaptive"

# classifier training is serialised, one accelerator at a time
TRAINING_LOCK = threading.Lock()


def split_indices(n: int, seed: int = 42, val_fraction: float = 0.1) -> tuple[np.ndarray, np.ndarray]:
    if n < 2:
        raise ValueError("need at least two items to split")
    n_val = min(max(1, math.ceil(val_fraction * n)), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    return np.sort(order[n_val:]), np.sort(order[:n_val])


def _train_and_score(trainer, train_texts, train_labels, val_texts, val_labels, seed) -> float:
    with TRAINING_LOCK:
        predictor = trainer.train(list(train_texts), list(train_labels), seed)
    return 100.0 * micro_f1(list(val_labels), predictor.predict(list(val_texts)))


def _shuffled(idx: np.ndarray, seed: int, repeat: int) -> np.ndarray:
    return np.random.default_rng([seed, repeat]).permutation(idx)


def run_utility_eval(
    dataset: Sequence[Document], trainer, seed: int = 42, repeats: int = 3
) -> tuple[float, float]:
    labels = [d.utility_label for d in dataset]
    if None in labels:
        raise ValueError("every document needs a utility label")
    if len(set(labels)) < 2:
        raise ValueError("utility evaluation needs at least two classes")
    texts = [d.text for d in dataset]
    train_idx, val_idx = split_indices(len(dataset), seed)
    scores = []
    for r in range(repeats):
        order = _shuffled(train_idx, seed, r)
        scores.append(_train_and_score(
            trainer,
            [texts[i] for i in order], [labels[i] for i in order],
            [texts[i] for i in val_idx], [labels[i] for i in val_idx],
            seed + r,
        ))
    return float(np.mean(scores)), float(np.std(scores))


def _text_of(item) -> str:
    if isinstance(item, str):
        return item
    for attr in ("privatized_text", "text"):
        if hasattr(item, attr):
            return getattr(item, attr)
    return item["privatized_text"] if "privatized_text" in item else item["text"]


def _id_of(item):
    if isinstance(item, str):
        return None
    for attr in ("document_id", "id"):
        if hasattr(item, attr):
            return getattr(item, attr)
    return item.get("id") if isinstance(item, dict) else None


def align(originals: Sequence[Document], rewrittens: Sequence) -> list[str]:
    """Rewritten texts in original order; raises on length or id mismatch."""
    if len(originals) != len(rewrittens):
        raise ValueError(f"{len(originals)} originals but {len(rewrittens)} rewritten texts")
    bad = [
        (o.id, _id_of(r)) for o, r in zip(originals, rewrittens)
        if _id_of(r) is not None and str(_id_of(r)) != o.id
    ]
    if bad:
        shown = ", ".join(f"{a}!={b}" for a, b in bad[:10])
        raise ValueError(f"misaligned original/rewritten pairs: {shown}")
    return [_text_of(r) for r in rewrittens]


def run_privacy_attack(
    protocol: str,
    originals: Sequence[Document],
    rewrittens: Sequence,
    trainer,
    seed: int = 42,
    repeat: int = 0,
) -> float:
    if protocol not in (STATIC, ADAPTIVE):
        raise ValueError(f"unknown attack protocol {protocol!r}")
    rewritten = align(originals, rewrittens)
    labels = [d.privacy_label for d in originals]
    if None in labels:
        raise ValueError("every document needs a privacy label")
    train_idx, val_idx = split_indices(len(originals), seed)
    order = _shuffled(train_idx, seed, repeat)
    source = [d.text for d in originals] if protocol == STATIC else rewritten
    return _train_and_score(
        trainer,
        [source[i] for i in order], [labels[i] for i in order],
        [rewritten[i] for i in val_idx], [labels[i] for i in val_idx],
        seed + repeat,
    )


@dataclass(frozen=True)
class PrivacyScores:
    static: float
    adaptive_mean: float
    adaptive_std: float


def evaluate_privacy(originals, rewrittens, trainer, seed: int = 42, adaptive_repeats: int = 3) -> PrivacyScores:
    """Static attacker once, adaptive attacker ``adaptive_repeats`` times."""
    static = run_privacy_attack(STATIC, originals, rewrittens, trainer, seed)
    adaptive = [run_privacy_attack(ADAPTIVE, originals, rewrittens, trainer, seed, r) for r in range(adaptive_repeats)]
    return PrivacyScores(static, float(np.mean(adaptive)), float(np.std(adaptive)))


def majority_fraction(labels: Sequence) -> float:
    counts = {}
    for lab in labels:
        counts[lab] = counts.get(lab, 0) + 1
    return max(counts.values()) / len(labels)


def validation_labels(dataset: Sequence[Document], field: str, seed: int = 42) -> list:
    _, val_idx = split_indices(len(dataset), seed)
    return [getattr(dataset[i], field) for i in val_idx]
