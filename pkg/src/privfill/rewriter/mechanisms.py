"""Sentence-infilling rewriting (plain and DP) and the paraphrase-prompt baseline."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from privfill.dp_mechanism import (
    BudgetLedger,
    ClipBounds,
    PrivacySpec,
    document_rng,
    dp_select_token,
    sample_index,
    selection_probabilities,
)
from privfill.rewriter.models import GenerativeModel
from privfill.rewriter.segment import Sentence, segment_sentences

log = logging.getLogger(__name__)

BLANK = "[blank]"
DEFAULT_PARAPHRASE_TEMPLATE = "Paraphrase the following document: {text}\nParaphrase:"

PRIVFILL = "privfill"
PRIVFILL_DP = "privfill_dp"
DP_PROMPT = "dp_prompt"
MECHANISMS = (PRIVFILL, PRIVFILL_DP, DP_PROMPT)


@dataclass(frozen=True)
class Document:
    id: str
    text: str
    utility_label: str | None = None
    privacy_label: str | None = None

    def __post_init__(self):
        if not self.text or not self.text.strip():
            raise ValueError(f"document {self.id!r} has empty text")

    @classmethod
    def from_record(cls, record: dict) -> "Document":
        return cls(
            id=str(record["id"]),
            text=record["text"],
            utility_label=record.get("utility_label"),
            privacy_label=record.get("privacy_label"),
        )

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "text": self.text,
            "utility_label": self.utility_label,
            "privacy_label": self.privacy_label,
        }


@dataclass(frozen=True)
class GenerationLimits:
    max_len: int = 512
    max_new_tokens: int = 32

    def __post_init__(self):
        if self.max_len < 1 or self.max_new_tokens < 1:
            raise ValueError("max_len and max_new_tokens must be >= 1")


@dataclass
class RewriteOutput:
    document_id: str
    mechanism: str
    sentence_outputs: list[str]
    privatized_text: str
    tokens_generated: list[int]
    epsilon_per_token: float | None = None
    total_epsilon: float | None = None
    seed: int | None = None

    def to_record(self) -> dict:
        return {
            "id": self.document_id,
            "mechanism": self.mechanism,
            "privatized_text": self.privatized_text,
            "sentence_outputs": list(self.sentence_outputs),
            "tokens_generated": list(self.tokens_generated),
            "epsilon_per_token": self.epsilon_per_token,
            "total_epsilon": self.total_epsilon,
            "seed": self.seed,
        }


class RewriteError(RuntimeError):
    def __init__(self, document_id: str, sentence_index: int, cause: BaseException):
        super().__init__(f"document {document_id!r}, sentence {sentence_index}: {cause}")
        self.document_id = document_id
        self.sentence_index = sentence_index


def build_infill_prompt(document: Document | str, index: int, sentences: Sequence[Sentence] | None = None) -> str:
    """Replace the ``index``-th sentence (by position, not value) with ``[blank]``."""
    text = document.text if isinstance(document, Document) else document
    if sentences is None:
        sentences = segment_sentences(text)
    if not 0 <= index < len(sentences):
        raise IndexError(f"sentence index {index} out of range for {len(sentences)} sentences")
    s = sentences[index]
    prompt = text[: s.start] + BLANK + text[s.end :]
    if len(sentences) == 1:
        # the blank is the whole task; surrounding whitespace carries nothing
        return prompt.strip()
    return prompt


def encode_with_blank(model: GenerativeModel, prompt: str, max_len: int) -> list[int]:
    """Encode and truncate to ``max_len`` without ever cutting the blank.

    Truncates from the end; if that would drop the blank, keeps a window
    centred on it instead.
    """
    ids = model.encode(prompt)
    if len(ids) <= max_len or BLANK not in prompt:
        return ids[:max_len]
    n_pre = len(model.encode(prompt[: prompt.index(BLANK)]))
    n_blank = len(model.encode(BLANK))
    if n_pre + n_blank <= max_len:
        return ids[:max_len]
    room = max(max_len - n_blank, 0)
    start = n_pre - room // 2
    start = max(0, min(start, len(ids) - max_len))
    return ids[start : start + max_len]


def generate(
    model: GenerativeModel,
    prompt_ids: Sequence[int],
    max_new_tokens: int,
    choose: Callable[[np.ndarray], int],
) -> list[int]:
    """Token-by-token decoding; EOS stops early and is not counted."""
    generated: list[int] = []
    for _ in range(max_new_tokens):
        token = choose(np.asarray(model.next_logits(prompt_ids, generated), dtype=np.float64))
        if token == model.eos_id:
            break
        generated.append(token)
    return generated


def sampling_chooser(rng: np.random.Generator, temperature: float = 1.0, do_sample: bool = True):
    if not do_sample:
        return lambda logits: int(np.argmax(logits))
    return lambda logits: sample_index(selection_probabilities(logits, temperature), rng)


def dp_chooser(bounds: ClipBounds, spec: PrivacySpec, rng: np.random.Generator):
    # the one sampler shared by both DP mechanisms
    return lambda logits: dp_select_token(logits, bounds, spec, rng)


def _infill(model, document: Document, limits: GenerationLimits, choose) -> tuple[list[str], list[int]]:
    sentences = segment_sentences(document.text)
    if len(sentences) == 1:
        log.warning("document %s has a single sentence; prompt collapses to %s", document.id, BLANK)
    outputs, counts = [], []
    for idx in range(len(sentences)):
        try:
            prompt = build_infill_prompt(document, idx, sentences)
            ids = encode_with_blank(model, prompt, limits.max_len)
            generated = generate(model, ids, limits.max_new_tokens, choose)
            outputs.append(model.decode(generated).strip())
        except Exception as exc:
            raise RewriteError(document.id, idx, exc) from exc
        counts.append(len(generated))
    return outputs, counts


def privfill_rewrite(
    model: GenerativeModel,
    document: Document,
    limits: GenerationLimits = GenerationLimits(),
    rng: np.random.Generator | None = None,
    temperature: float = 1.0,
    do_sample: bool = True,
) -> RewriteOutput:
    rng = rng if rng is not None else np.random.default_rng()
    outputs, counts = _infill(model, document, limits, sampling_chooser(rng, temperature, do_sample))
    return RewriteOutput(document.id, PRIVFILL, outputs, " ".join(outputs), counts)


def privfill_dp_rewrite(
    model: GenerativeModel,
    document: Document,
    limits: GenerationLimits,
    bounds: ClipBounds,
    spec: PrivacySpec,
    ledger: BudgetLedger,
    rng: np.random.Generator,
) -> RewriteOutput:
    outputs, counts = _infill(model, document, limits, dp_chooser(bounds, spec, rng))
    entries = [ledger.append(document.id, i, n, spec.epsilon_per_token) for i, n in enumerate(counts)]
    return RewriteOutput(
        document.id,
        PRIVFILL_DP,
        outputs,
        " ".join(outputs),
        counts,
        epsilon_per_token=spec.epsilon_per_token,
        total_epsilon=sum(e.epsilon for e in entries),
    )


def dp_prompt_rewrite(
    model: GenerativeModel,
    document: Document,
    limits: GenerationLimits,
    bounds: ClipBounds,
    spec: PrivacySpec,
    ledger: BudgetLedger,
    rng: np.random.Generator,
    template: str = DEFAULT_PARAPHRASE_TEMPLATE,
) -> RewriteOutput:
    """Paraphrase the whole document, capped at its own token length."""
    cap = len(model.encode(document.text))
    try:
        ids = model.encode(template.format(text=document.text), limits.max_len)
        generated = generate(model, ids, cap, dp_chooser(bounds, spec, rng))
        text = model.decode(generated).strip()
    except Exception as exc:
        raise RewriteError(document.id, 0, exc) from exc
    entry = ledger.append(document.id, 0, len(generated), spec.epsilon_per_token)
    return RewriteOutput(
        document.id,
        DP_PROMPT,
        [text],
        text,
        [len(generated)],
        epsilon_per_token=spec.epsilon_per_token,
        total_epsilon=entry.epsilon,
    )


@dataclass
class RewriteJob:
    """One mechanism configuration applied to many documents."""

    mechanism: str
    model_factory: Callable[[], GenerativeModel]
    limits: GenerationLimits = field(default_factory=GenerationLimits)
    bounds: ClipBounds | None = None
    spec: PrivacySpec | None = None
    seed: int = 42
    temperature: float = 1.0
    template: str = DEFAULT_PARAPHRASE_TEMPLATE

    def __post_init__(self):
        if self.mechanism not in MECHANISMS:
            raise ValueError(f"unknown mechanism {self.mechanism!r}")
        is_dp = self.mechanism != PRIVFILL
        if is_dp and (self.bounds is None or self.spec is None):
            raise ValueError(f"{self.mechanism} requires clip bounds and a privacy spec")
        if not is_dp and (self.bounds is not None or self.spec is not None):
            raise ValueError("privfill takes no privacy parameters")

    def rewrite_one(self, model: GenerativeModel, document: Document, ledger: BudgetLedger) -> RewriteOutput:
        rng = document_rng(self.seed, document.id)
        if self.mechanism == PRIVFILL:
            out = privfill_rewrite(model, document, self.limits, rng, self.temperature)
        elif self.mechanism == PRIVFILL_DP:
            out = privfill_dp_rewrite(model, document, self.limits, self.bounds, self.spec, ledger, rng)
        else:
            out = dp_prompt_rewrite(model, document, self.limits, self.bounds, self.spec, ledger, rng, self.template)
        out.seed = self.seed
        return out

    def run(self, documents: Iterable[Document], ledger: BudgetLedger | None = None, workers: int = 1) -> list[RewriteOutput]:
        """Rewrite documents, each with its own rng substream; output order follows input."""
        ledger = ledger if ledger is not None else BudgetLedger()
        docs = list(documents)
        if workers <= 1:
            model = self.model_factory()
            return [self.rewrite_one(model, d, ledger) for d in docs]
        chunks = [docs[i::workers] for i in range(workers)]

        def work(chunk):
            model = self.model_factory()
            # per-worker ledger keeps each document's entries contiguous
            local = BudgetLedger()
            return [self.rewrite_one(model, d, local) for d in chunk], local

        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
        by_id = {}
        for outs, local in results:
            for out in outs:
                by_id[out.document_id] = out
        ordered = [by_id[d.id] for d in docs]
        per_doc = {}
        for _, local in results:
            for e in local.entries:
                per_doc.setdefault(e.document_id, []).append(e)
        for d in docs:
            for e in per_doc.get(d.id, []):
                ledger.append(e.document_id, e.sentence_index, e.tokens_generated, e.epsilon_per_token)
        return ordered
