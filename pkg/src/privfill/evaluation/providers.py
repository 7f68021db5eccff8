"""Classifier, embedding and perplexity providers.

Full-scale backends (a fine-tuned deberta classifier, MiniLM sentence
embeddings, GPT-2 perplexity) plug in behind the same small protocols as the
desk-scale and stub providers defined here.
"""

from __future__ import annotations

import hashlib
import math
from collections import Counter
from typing import Mapping, Protocol, Sequence

import numpy as np

from privfill.evaluation.rouge import tokenize


class Predictor(Protocol):
    def predict(self, texts: Sequence[str]) -> list: ...


class ClassifierTrainer(Protocol):
    def train(self, texts: Sequence[str], labels: Sequence, seed: int) -> Predictor: ...


class EmbeddingProvider(Protocol):
    def embed(self, text: str) -> np.ndarray: ...


class CausalScorer(Protocol):
    def perplexity(self, text: str) -> float: ...


class _Lookup:
    def __init__(self, table: Mapping, fallback=None):
        self.table = dict(table)
        self.fallback = fallback

    def predict(self, texts):
        return [self.table.get(t, self.fallback) for t in texts]


class OracleTrainer:
    """Ignores training data and answers from a known text -> label table."""

    def __init__(self, truth: Mapping[str, object]):
        self.truth = dict(truth)

    def train(self, texts, labels, seed=0):
        return _Lookup(self.truth)


class ConstantTrainer:
    """Always predicts the most frequent training label (ties: smallest label)."""

    def train(self, texts, labels, seed=0):
        counts = Counter(labels)
        top = max(counts.values())
        label = sorted((lab for lab, c in counts.items() if c == top), key=str)[0]
        return _Lookup({}, fallback=label)


class TfidfTrainer:
    """TF-IDF features with logistic regression; a CPU stand-in for fine-tuning."""

    def __init__(self, max_features: int = 50000):
        self.max_features = max_features

    def train(self, texts, labels, seed=0):
        from sklearn.feature_extraction.text import TfidfVectorizer
        from sklearn.linear_model import LogisticRegression
        from sklearn.pipeline import make_pipeline

        model = make_pipeline(
            TfidfVectorizer(max_features=self.max_features, sublinear_tf=True),
            LogisticRegression(max_iter=1000, random_state=seed),
        )
        model.fit(list(texts), list(labels))
        return _SklearnPredictor(model)


class _SklearnPredictor:
    def __init__(self, model):
        self.model = model

    def predict(self, texts):
        return list(self.model.predict(list(texts)))


def _stable_hash(token: str) -> int:
    return int.from_bytes(hashlib.md5(token.encode("utf-8")).digest()[:8], "little")


class HashingEmbedder:
    """Unit-norm hashed bag of stemmed words."""

    provider_id = "stub:hash"

    def __init__(self, dim: int = 512):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim)
        for tok in tokenize(text):
            h = _stable_hash(tok)
            vec[h % self.dim] += 1.0 if (h >> 32) & 1 else -1.0
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec


class SentenceTransformerEmbedder:
    def __init__(self, model_name: str = "all-MiniLM-L6-v2"):
        from sentence_transformers import SentenceTransformer

        self.model = SentenceTransformer(model_name)
        self.provider_id = f"st:{model_name}"

    def embed(self, text: str) -> np.ndarray:
        return np.asarray(self.model.encode(text, normalize_embeddings=True), dtype=np.float64)


class UnigramScorer:
    """Add-one smoothed unigram perplexity fitted on a reference corpus."""

    provider_id = "stub:unigram"

    def __init__(self, corpus: Sequence[str]):
        self.counts = Counter(t for text in corpus for t in tokenize(text, stemmer=False))
        self.total = sum(self.counts.values())
        self.vocab = len(self.counts) + 1

    def perplexity(self, text: str) -> float:
        tokens = tokenize(text, stemmer=False)
        if not tokens:
            raise ValueError("cannot score an empty text")
        nll = -sum(math.log((self.counts[t] + 1) / (self.total + self.vocab)) for t in tokens)
        return math.exp(nll / len(tokens))


class GPT2Scorer:
    def __init__(self, checkpoint: str = "gpt2", max_len: int = 1024):
        import torch
        from transformers import AutoModelForCausalLM, AutoTokenizer

        self._torch = torch
        self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
        self.model = AutoModelForCausalLM.from_pretrained(checkpoint).eval()
        self.max_len = max_len
        self.provider_id = f"hf:{checkpoint}"

    def perplexity(self, text: str) -> float:
        ids = self.tokenizer(text, return_tensors="pt")["input_ids"]
        if ids.shape[1] > self.max_len:
            raise ValueError(f"text has {ids.shape[1]} tokens, limit {self.max_len}")
        if ids.shape[1] < 2:
            raise ValueError("need at least two tokens")
        with self._torch.no_grad():
            loss = self.model(ids, labels=ids).loss
        return float(math.exp(loss.item()))


def load_trainer(identifier: str, truth: Mapping | None = None):
    name = identifier.split(":", 1)[-1]
    if name == "constant":
        return ConstantTrainer()
    if name == "tfidf":
        return TfidfTrainer()
    if name == "oracle":
        if truth is None:
            raise ValueError("oracle trainer needs a truth table")
        return OracleTrainer(truth)
    raise ValueError(f"unknown trainer {identifier!r}")


def load_embedder(identifier: str):
    scheme, _, rest = identifier.partition(":")
    if identifier in ("stub:hash", "hash"):
        return HashingEmbedder()
    if scheme == "st":
        return SentenceTransformerEmbedder(rest)
    raise ValueError(f"unknown embedder {identifier!r}")


def load_scorer(identifier: str, corpus: Sequence[str] = ()):
    scheme, _, rest = identifier.partition(":")
    if identifier in ("stub:unigram", "unigram"):
        return UnigramScorer(corpus)
    if scheme == "hf":
        return GPT2Scorer(rest or "gpt2")
    raise ValueError(f"unknown scorer {identifier!r}")
