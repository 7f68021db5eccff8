import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privfill.infill_dataset import (
    CRAWL_STYLE,
    TRAINING_DEFAULTS,
    WIKI_STYLE,
    InfillSample,
    build_crawl_sample,
    build_samples,
    build_wiki_sample,
    emit_training_manifest,
    merge_and_split,
    read_samples,
    strip_markup,
    write_samples,
)

SENTS = [f"S{i}." for i in range(10)]


def test_wiki_window_centered():
    s = build_wiki_sample(SENTS, np.random.default_rng(0), index=5)
    assert s.input_text == "S3. S4. [blank] S6. S7."
    assert s.target_text == "S5."


@pytest.mark.parametrize("index, expected", [
    (0, "[blank] S1. S2."),
    (1, "S0. [blank] S2. S3."),
    (9, "S7. S8. [blank]"),
])
def test_wiki_window_at_edges(index, expected):
    assert build_wiki_sample(SENTS, np.random.default_rng(0), index=index).input_text == expected


def test_crawl_keeps_whole_text():
    s = build_crawl_sample(SENTS, np.random.default_rng(0), index=5)
    assert s.input_text == " ".join(SENTS[:5] + ["[blank]"] + SENTS[6:])
    assert s.source == CRAWL_STYLE


def test_one_sentence_sample():
    s = build_crawl_sample(["Hi."], np.random.default_rng(0))
    assert (s.input_text, s.target_text) == ("[blank]", "Hi.")


def test_builders_reject_bad_input():
    with pytest.raises(ValueError):
        build_wiki_sample([], np.random.default_rng(0))
    with pytest.raises(IndexError):
        build_crawl_sample(SENTS, np.random.default_rng(0), index=10)


sentence_lists = st.lists(st.from_regex(r"[A-Z][a-z]{1,6}\.", fullmatch=True), min_size=1, max_size=12)


@given(sentence_lists, st.data())
def test_wiki_sample_properties(sentences, data):
    i = data.draw(st.integers(0, len(sentences) - 1))
    s = build_wiki_sample(sentences, np.random.default_rng(0), index=i)
    slots = s.input_text.split(" ")
    assert len(slots) <= 5
    assert slots.count("[blank]") == 1
    pos = slots.index("[blank]")
    if 2 <= i <= len(sentences) - 3:
        assert len(slots) == 5 and pos == 2
    assert pos == min(i, 2)
    assert s.filled() == " ".join(sentences[max(0, i - 2) : i + 3])


@given(sentence_lists, st.data())
def test_crawl_sample_round_trip(sentences, data):
    i = data.draw(st.integers(0, len(sentences) - 1))
    s = build_crawl_sample(sentences, np.random.default_rng(0), index=i)
    assert s.filled() == " ".join(sentences)


def test_sample_requires_one_blank():
    with pytest.raises(ValueError):
        InfillSample("no blank", "x", WIKI_STYLE)
    with pytest.raises(ValueError):
        InfillSample("[blank] [blank]", "x", WIKI_STYLE)
    with pytest.raises(ValueError):
        InfillSample("[blank]", "x", "web")


def test_split_sizes_and_determinism():
    samples = [InfillSample(f"{i} [blank]", str(i), CRAWL_STYLE) for i in range(1000)]
    train, val = merge_and_split(samples)
    assert (len(train), len(val)) == (990, 10)
    assert merge_and_split(samples) == (train, val)
    assert sorted(train + val, key=lambda s: int(s.target_text)) == samples
    assert merge_and_split(samples, seed=1)[1] != val


def test_training_manifest_provenance():
    m = emit_training_manifest(epochs=2)
    assert m["epochs"] == 2 and m["provenance"]["epochs"] == "override"
    assert m["learning_rate"] == 5e-5 and m["provenance"]["learning_rate"] == "default"
    assert m["train_batch"] == 32 and m["eval_batch"] == 64 and m["max_length_tokens"] == 512
    assert set(m) == set(TRAINING_DEFAULTS) | {"provenance"}


@pytest.mark.parametrize("override", [{"epochs": 0}, {"learning_rate": 0}, {"optimizer": "sgd"}, {"train_fraction": 1.0}])
def test_training_manifest_rejects(override):
    with pytest.raises(ValueError):
        emit_training_manifest(**override)


def test_strip_markup():
    raw = "== History ==\nThe [[River Thames|Thames]] flows east.{{cite}} It is <b>long</b>.\n* a list item"
    assert strip_markup(raw) == "The Thames flows east. It is long."


def test_build_samples_and_io(tmp_path):
    texts = ["One. Two. Three.", "", "Alpha beta."]
    samples = list(build_samples(texts, WIKI_STYLE, seed=42))
    assert len(samples) == 2
    assert samples == list(build_samples(texts, WIKI_STYLE, seed=42))
    path = tmp_path / "s.jsonl"
    assert write_samples(path, samples) == 2
    assert read_samples(path) == samples


def test_target_choice_is_uniform():
    k, n = 5, 5000
    rng = np.random.default_rng(42)
    counts = np.zeros(k)
    for _ in range(n):
        s = build_crawl_sample(SENTS[:k], rng)
        counts[SENTS.index(s.target_text)] += 1
    sigma = np.sqrt(n * (1 / k) * (1 - 1 / k))
    assert np.all(np.abs(counts - n / k) < 3 * sigma)
