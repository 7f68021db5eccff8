"""Training samples for sentence infillers.

Encyclopedia-style text keeps a window of two sentences either side of the
masked one; crawl-style text keeps the whole document. The masked sentence is
stored separately as the target rather than inline after an answer marker.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from privfill.rewriter.mechanisms import BLANK
from privfill.rewriter.segment import sent_tokenize

WIKI_STYLE = "wiki_style"
CRAWL_STYLE = "crawl_style"
CONTEXT_WINDOW = 2


@dataclass(frozen=True)
class InfillSample:
    input_text: str
    target_text: str
    source: str

    def __post_init__(self):
        if self.input_text.count(BLANK) != 1:
            raise ValueError("input_text must contain exactly one [blank]")
        if self.source not in (WIKI_STYLE, CRAWL_STYLE):
            raise ValueError(f"unknown sample source {self.source!r}")

    def to_record(self) -> dict:
        return {"input": self.input_text, "target": self.target_text, "source": self.source}

    @classmethod
    def from_record(cls, record: dict) -> "InfillSample":
        return cls(record["input"], record["target"], record["source"])

    def filled(self) -> str:
        return self.input_text.replace(BLANK, self.target_text)


def _pick(sentences: Sequence[str], rng: np.random.Generator, index: int | None) -> int:
    if not sentences:
        raise ValueError("need at least one sentence")
    if index is None:
        return int(rng.integers(len(sentences)))
    if not 0 <= index < len(sentences):
        raise IndexError(f"target index {index} out of range")
    return index


def _masked(window: Sequence[str], target: int) -> str:
    return " ".join(BLANK if i == target else s for i, s in enumerate(window))


def build_wiki_sample(sentences: Sequence[str], rng: np.random.Generator, index: int | None = None) -> InfillSample:
    target = _pick(sentences, rng, index)
    lo = max(0, target - CONTEXT_WINDOW)
    window = sentences[lo : target + CONTEXT_WINDOW + 1]
    return InfillSample(_masked(window, target - lo), sentences[target], WIKI_STYLE)


def build_crawl_sample(sentences: Sequence[str], rng: np.random.Generator, index: int | None = None) -> InfillSample:
    target = _pick(sentences, rng, index)
    return InfillSample(_masked(sentences, target), sentences[target], CRAWL_STYLE)


def merge_and_split(
    samples: Sequence[InfillSample], train_fraction: float = 0.99, seed: int = 42
) -> tuple[list[InfillSample], list[InfillSample]]:
    if not samples:
        raise ValueError("no samples to split")
    if not 0 < train_fraction < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    order = np.random.default_rng(seed).permutation(len(samples))
    n_train = math.floor(train_fraction * len(samples))
    shuffled = [samples[i] for i in order]
    return shuffled[:n_train], shuffled[n_train:]


TRAINING_DEFAULTS = {
    "epochs": 1,
    "learning_rate": 5e-5,
    "eval_metric": "rouge",
    "max_length_tokens": 512,
    "train_batch": 32,
    "eval_batch": 64,
    "train_fraction": 0.99,
    "seed": 42,
}


def emit_training_manifest(**overrides) -> dict:
    """Fine-tuning configuration for an external trainer, with provenance per key."""
    unknown = sorted(set(overrides) - set(TRAINING_DEFAULTS))
    if unknown:
        raise ValueError(f"unknown manifest keys: {', '.join(unknown)}")
    manifest = dict(TRAINING_DEFAULTS)
    manifest.update(overrides)
    for key in ("epochs", "max_length_tokens", "train_batch", "eval_batch"):
        if not isinstance(manifest[key], int) or manifest[key] < 1:
            raise ValueError(f"{key} must be a positive integer")
    if not manifest["learning_rate"] > 0:
        raise ValueError("learning_rate must be positive")
    if not 0 < manifest["train_fraction"] < 1:
        raise ValueError("train_fraction must be in (0, 1)")
    manifest["provenance"] = {k: ("override" if k in overrides else "default") for k in TRAINING_DEFAULTS}
    return manifest


_MARKUP = [
    (re.compile(r"^=+\s*[^=\n]+?\s*=+\s*$", re.M), ""),  # == Heading ==
    (re.compile(r"^\s*[*#:;]+.*$", re.M), ""),  # list items
    (re.compile(r"\[\[(?:[^|\]]*\|)?([^\]]+)\]\]"), r"\1"),  # [[link|text]]
    (re.compile(r"\{\{[^}]*\}\}"), ""),  # templates
    (re.compile(r"<[^>]+>"), ""),
]


def strip_markup(text: str) -> str:
    for pattern, repl in _MARKUP:
        text = pattern.sub(repl, text)
    return re.sub(r"\n{3,}", "\n\n", text).strip()


def iter_jsonl_texts(path: str | Path, field: str = "text") -> Iterator[str]:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                yield json.loads(line)[field]


def build_samples(
    texts: Iterable[str], source: str, seed: int = 42, clean: bool = False
) -> Iterator[InfillSample]:
    """One sample per non-empty text, target chosen with a single seeded stream."""
    rng = np.random.default_rng(seed)
    builder = build_wiki_sample if source == WIKI_STYLE else build_crawl_sample
    for text in texts:
        sentences = sent_tokenize(strip_markup(text) if clean else text)
        if sentences:
            yield builder(sentences, rng)


def write_samples(path: str | Path, samples: Iterable[InfillSample]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")
            n += 1
    return n


def read_samples(path: str | Path) -> list[InfillSample]:
    with open(path, encoding="utf-8") as fh:
        return [InfillSample.from_record(json.loads(line)) for line in fh if line.strip()]
