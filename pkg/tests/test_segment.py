import pytest
from hypothesis import given
from hypothesis import strategies as st

from privfill.rewriter import segment_sentences, sent_tokenize

from conftest import load_fixture

CASES = load_fixture("sentences.json")


@pytest.mark.parametrize("case", CASES, ids=[c["text"][:30] for c in CASES])
def test_fixture_sentences(case):
    assert sent_tokenize(case["text"]) == case["sentences"]


def test_fixture_has_enough_sentences():
    assert sum(len(c["sentences"]) for c in CASES) >= 50


def test_spans_point_into_text():
    text = "First one.  Second one!\n\nThird?"
    for s in segment_sentences(text):
        assert text[s.start : s.end] == s.text


@pytest.mark.parametrize("text", ["", "   ", "\n\n"])
def test_blank_text_has_no_sentences(text):
    assert segment_sentences(text) == []


def test_blank_line_splits_without_punctuation():
    assert sent_tokenize("Subject line\n\nBody text here") == ["Subject line", "Body text here"]


words = st.sampled_from(["the", "Dr.", "cat", "sat", "U.S.", "it", "p.m.", "J.", "No", "ok", "3.5", "A"])
terms = st.sampled_from([".", "!", "?", "...", "", ".\"", ")"])
seps = st.sampled_from([" ", "  ", "\n", "\n\n", " \t"])


@st.composite
def texts(draw):
    parts = []
    for _ in range(draw(st.integers(0, 8))):
        body = " ".join(draw(st.lists(words, min_size=1, max_size=6)))
        parts.append(body + draw(terms))
        parts.append(draw(seps))
    return draw(seps) + "".join(parts)


@given(texts())
def test_segmentation_partitions_text(text):
    spans = segment_sentences(text)
    covered = set()
    prev_end = 0
    for s in spans:
        assert s.start >= prev_end
        assert s.text == s.text.strip() and s.text
        assert text[s.start : s.end] == s.text
        covered.update(range(s.start, s.end))
        prev_end = s.end
    non_ws = {i for i, c in enumerate(text) if not c.isspace()}
    assert non_ws <= covered


@given(texts())
def test_sentences_resegment_to_themselves(text):
    once = sent_tokenize(text)
    # each sentence, taken alone, is one sentence
    assert [sent_tokenize(s) for s in once] == [[s] for s in once]
