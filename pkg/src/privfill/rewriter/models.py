"""Generative model backends.

Any object with ``encode``, ``next_logits``, ``decode``, ``eos_id`` and
``provider_id`` can drive the rewriting mechanisms. Stochasticity lives only in
the samplers, so ``next_logits`` must be a pure function of its arguments.
"""

from __future__ import annotations

import hashlib
import json
import re
from pathlib import Path
from typing import Any, Protocol, Sequence, runtime_checkable

import numpy as np


@runtime_checkable
class GenerativeModel(Protocol):
    provider_id: str
    eos_id: int | None

    def encode(self, text: str, max_len: int | None = None) -> list[int]: ...

    def next_logits(self, prompt_ids: Sequence[int], generated: Sequence[int]) -> np.ndarray: ...

    def decode(self, ids: Sequence[int]) -> str: ...


class BackendError(RuntimeError):
    """A model backend could not be loaded or failed while generating."""


_WORD = re.compile(r"\[blank\]|\S+")

HIGH_LOGIT = 8.0
LOW_LOGIT = -95.0


class StubModel:
    """Scripted word-level model for tests and dry runs.

    The fixture is a mapping with a ``vocab`` list, an optional ``eos`` token,
    and ``rules``: each rule has a regex ``pattern`` matched against the decoded
    prompt and one of

    * ``emit``: a string whose words are produced one per step, then EOS;
    * ``schedule``: a list of logit vectors, one per step (the last repeats);
    * ``uniform``: all-equal logits at every step.

    A ``default`` rule applies when no pattern matches.
    """

    def __init__(self, spec: dict[str, Any], provider_id: str = "stub:inline"):
        self.provider_id = spec.get("provider_id", provider_id)
        vocab = list(spec["vocab"])
        eos = spec.get("eos")
        if eos is not None and eos not in vocab:
            vocab.append(eos)
        self.vocab = vocab
        self._index = {w: i for i, w in enumerate(vocab)}
        self.eos_id = self._index[eos] if eos is not None else None
        self._rules = [(re.compile(r["pattern"], re.S), r) for r in spec.get("rules", [])]
        self._default = spec.get("default", {"uniform": True})
        # prompt words outside the output vocabulary get ids past its end
        self._extra: dict[str, int] = {}
        self._extra_words: list[str] = []
        for rule in [r for _, r in self._rules] + [self._default]:
            for w in rule.get("emit", "").split():
                if w not in self._index:
                    raise ValueError(f"emit word {w!r} not in stub vocabulary")
            for row in rule.get("schedule", []):
                if len(row) != len(vocab):
                    raise ValueError("schedule rows must cover the whole vocabulary")

    @classmethod
    def from_file(cls, path: str | Path) -> "StubModel":
        path = Path(path)
        return cls(json.loads(path.read_text(encoding="utf-8")), provider_id=f"stub:{path.name}")

    def _id(self, word: str) -> int:
        if word in self._index:
            return self._index[word]
        if word not in self._extra:
            self._extra[word] = len(self.vocab) + len(self._extra_words)
            self._extra_words.append(word)
        return self._extra[word]

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        ids = [self._id(w) for w in _WORD.findall(text)]
        return ids if max_len is None else ids[:max_len]

    def decode(self, ids: Sequence[int]) -> str:
        words = []
        n = len(self.vocab)
        for i in ids:
            if i == self.eos_id:
                continue
            words.append(self.vocab[i] if i < n else self._extra_words[i - n])
        return " ".join(words)

    def _rule_for(self, prompt: str) -> dict:
        for pattern, rule in self._rules:
            if pattern.search(prompt):
                return rule
        return self._default

    def _one_hot(self, index: int) -> np.ndarray:
        out = np.full(len(self.vocab), LOW_LOGIT)
        out[index] = HIGH_LOGIT
        return out

    def next_logits(self, prompt_ids: Sequence[int], generated: Sequence[int]) -> np.ndarray:
        rule = self._rule_for(self.decode(prompt_ids))
        step = len(generated)
        if "emit" in rule:
            words = rule["emit"].split()
            if step < len(words):
                return self._one_hot(self._index[words[step]])
            if self.eos_id is not None:
                return self._one_hot(self.eos_id)
            return self._one_hot(self._index[words[-1]])
        if "schedule" in rule:
            rows = rule["schedule"]
            return np.asarray(rows[min(step, len(rows) - 1)], dtype=np.float64)
        return np.zeros(len(self.vocab))


class HashedToyModel:
    """Deterministic pseudo-random logits keyed on (prompt, prefix).

    Useful for exercising the full pipeline with non-trivial distributions
    without model weights.
    """

    def __init__(self, vocab: Sequence[str] | None = None, eos_weight: float = 2.0, scale: float = 6.0):
        self.vocab = list(vocab or (
            "the a service food place staff was were good great slow bad friendly "
            "we i it they really very not back again will go love recommend . !"
        ).split()) + ["</s>"]
        self.eos_id = len(self.vocab) - 1
        self.provider_id = "stub:toy"
        self._index = {w: i for i, w in enumerate(self.vocab)}
        self._extra: dict[str, int] = {}
        self._extra_words: list[str] = []
        self.eos_weight = eos_weight
        self.scale = scale

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        ids = []
        for w in _WORD.findall(text):
            if w in self._index:
                ids.append(self._index[w])
            else:
                if w not in self._extra:
                    self._extra[w] = len(self.vocab) + len(self._extra_words)
                    self._extra_words.append(w)
                ids.append(self._extra[w])
        return ids if max_len is None else ids[:max_len]

    def decode(self, ids: Sequence[int]) -> str:
        n = len(self.vocab)
        return " ".join(
            (self.vocab[i] if i < n else self._extra_words[i - n]) for i in ids if i != self.eos_id
        )

    def next_logits(self, prompt_ids: Sequence[int], generated: Sequence[int]) -> np.ndarray:
        key = (self.decode(prompt_ids) + "\x00" + " ".join(map(str, generated))).encode("utf-8")
        seed = int.from_bytes(hashlib.sha256(key).digest()[:8], "little")
        logits = np.random.default_rng(seed).normal(0.0, self.scale, len(self.vocab))
        logits[self.eos_id] += self.eos_weight * len(generated)
        return logits


class TransformersSeq2Seq:
    """Adapter for a HuggingFace encoder-decoder checkpoint (e.g. flan-t5).

    ``encode`` returns ids without special tokens; the encoder EOS is appended
    inside ``next_logits``.
    """

    def __init__(self, checkpoint: str, device: str | None = None):
        try:
            import torch
            from transformers import AutoModelForSeq2SeqLM, AutoTokenizer
        except ImportError as exc:  # pragma: no cover
            raise BackendError("transformers backend requires torch and transformers") from exc
        self._torch = torch
        self.device = device or ("cuda" if torch.cuda.is_available() else "cpu")
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
            self.model = AutoModelForSeq2SeqLM.from_pretrained(checkpoint).to(self.device).eval()
        except OSError as exc:
            raise BackendError(f"cannot load checkpoint {checkpoint!r}: {exc}") from exc
        self.provider_id = f"hf:{checkpoint}"
        self.eos_id = self.tokenizer.eos_token_id
        self._start = self.model.config.decoder_start_token_id

    def encode(self, text: str, max_len: int | None = None) -> list[int]:
        ids = self.tokenizer(text, add_special_tokens=False)["input_ids"]
        return ids if max_len is None else ids[: max(max_len - 1, 1)]

    def decode(self, ids: Sequence[int]) -> str:
        return self.tokenizer.decode(list(ids), skip_special_tokens=True)

    def next_logits(self, prompt_ids: Sequence[int], generated: Sequence[int]) -> np.ndarray:
        torch = self._torch
        enc = torch.tensor([list(prompt_ids) + [self.eos_id]], device=self.device)
        dec = torch.tensor([[self._start] + list(generated)], device=self.device)
        with torch.no_grad():
            out = self.model(input_ids=enc, decoder_input_ids=dec)
        return out.logits[0, -1].float().cpu().numpy().astype(np.float64)


BUILTIN_STUBS: dict[str, dict[str, Any]] = {
    "constant": {"provider_id": "stub:constant", "vocab": ["S"], "eos": "</s>", "default": {"emit": "S"}},
    "uniform": {"provider_id": "stub:uniform", "vocab": ["x", "y"], "default": {"uniform": True}},
}


def load_backend(identifier: str) -> GenerativeModel:
    """Resolve a backend identifier.

    ``stub:<name>`` picks a builtin stub, ``stub:<path>.json`` loads a fixture,
    ``stub:toy`` the hashed toy model and ``hf:<checkpoint>`` a transformers
    seq2seq model.
    """
    scheme, _, rest = identifier.partition(":")
    if scheme == "stub":
        if rest == "toy":
            return HashedToyModel()
        if rest in BUILTIN_STUBS:
            return StubModel(BUILTIN_STUBS[rest], provider_id=identifier)
        path = Path(rest)
        if path.suffix == ".json":
            if not path.exists():
                raise BackendError(f"stub fixture not found: {path}")
            return StubModel.from_file(path)
        raise BackendError(f"unknown stub backend {rest!r}")
    if scheme == "hf":
        return TransformersSeq2Seq(rest)
    raise BackendError(f"unknown backend scheme in {identifier!r}")
