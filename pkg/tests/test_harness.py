import math
from collections import Counter

import pytest
from hypothesis import given
from hypothesis import strategies as st

from privfill.evaluation.harness import (
    ADAPTIVE,
    STATIC,
    align,
    evaluate_privacy,
    majority_fraction,
    run_privacy_attack,
    run_utility_eval,
    split_indices,
    validation_labels,
)
from privfill.evaluation.providers import ConstantTrainer, OracleTrainer
from privfill.rewriter import Document, RewriteOutput


def make_dataset(n=40):
    authors = ["ann", "ann", "ann", "bob", "cat"]
    return [
        Document(f"d{i}", f"Review number {i}. It was {'good' if i % 3 else 'bad'}.",
                 "pos" if i % 3 else "neg", authors[i % 5])
        for i in range(n)
    ]


def rewritten(docs, fn):
    return [RewriteOutput(d.id, "privfill", [], fn(d.text), []) for d in docs]


def enumerate_constant_f1(labels, predicted):
    # micro F1 pooled over classes, counted one item at a time
    tp = fp = fn = 0
    for gold in labels:
        if gold == predicted:
            tp += 1
        else:
            fp += 1
            fn += 1
    return 100 * 2 * tp / (2 * tp + fp + fn)


@given(st.integers(2, 500), st.integers(0, 1000))
def test_split_properties(n, seed):
    train, val = split_indices(n, seed)
    assert len(val) == min(max(1, math.ceil(0.1 * n)), n - 1)
    assert sorted(list(train) + list(val)) == list(range(n))
    assert set(train).isdisjoint(val)


def test_split_is_seeded():
    assert [list(x) for x in split_indices(100, 42)] == [list(x) for x in split_indices(100, 42)]
    assert list(split_indices(100, 42)[1]) != list(split_indices(100, 43)[1])


def test_identity_oracle_attack_is_perfect():
    docs = make_dataset()
    truth = {d.text: d.privacy_label for d in docs}
    scores = evaluate_privacy(docs, rewritten(docs, lambda t: t), OracleTrainer(truth))
    assert scores.static == scores.adaptive_mean == 100.0
    assert scores.adaptive_std == 0.0


def test_constant_rewriting_constant_attacker():
    docs = make_dataset()
    scores = evaluate_privacy(docs, rewritten(docs, lambda t: "REDACTED"), ConstantTrainer())
    train, val = split_indices(len(docs))
    top = Counter(docs[i].privacy_label for i in train).most_common(1)[0][0]
    expected = enumerate_constant_f1([docs[i].privacy_label for i in val], top)
    assert scores.adaptive_mean == pytest.approx(expected)
    assert scores.static == pytest.approx(expected)


def test_static_trains_on_originals():
    docs = make_dataset()
    seen = {}

    class Spy:
        def train(self, texts, labels, seed):
            seen.setdefault("texts", []).append(list(texts))
            return ConstantTrainer().train(texts, labels)

    outs = rewritten(docs, lambda t: "X " + t)
    run_privacy_attack(STATIC, docs, outs, Spy())
    run_privacy_attack(ADAPTIVE, docs, outs, Spy())
    static_texts, adaptive_texts = seen["texts"]
    assert all(not t.startswith("X ") for t in static_texts)
    assert all(t.startswith("X ") for t in adaptive_texts)


def test_adaptive_repeats_use_different_shuffles():
    docs = make_dataset()
    orders = []

    class Spy:
        def train(self, texts, labels, seed):
            orders.append(tuple(texts))
            return ConstantTrainer().train(texts, labels)

    evaluate_privacy(docs, rewritten(docs, str.upper), Spy())
    assert len(orders) == 4
    assert len(set(orders[1:])) == 3
    assert sorted(orders[1]) == sorted(orders[2])


def test_utility_eval():
    docs = make_dataset()
    truth = {d.text: d.utility_label for d in docs}
    assert run_utility_eval(docs, OracleTrainer(truth)) == (100.0, 0.0)
    mean, std = run_utility_eval(docs, ConstantTrainer())
    val = validation_labels(docs, "utility_label")
    assert mean == pytest.approx(100 * majority_fraction(val)) and std == 0


def test_utility_eval_rejects_bad_labels():
    docs = make_dataset(10)
    with pytest.raises(ValueError):
        run_utility_eval([Document(d.id, d.text, "one") for d in docs], ConstantTrainer())
    with pytest.raises(ValueError):
        run_utility_eval([Document(d.id, d.text) for d in docs], ConstantTrainer())


def test_align_rejects_mismatch():
    docs = make_dataset(5)
    with pytest.raises(ValueError):
        align(docs, rewritten(docs[:4], str.upper))
    swapped = rewritten(docs, str.upper)
    swapped[0], swapped[1] = swapped[1], swapped[0]
    with pytest.raises(ValueError, match="d0!=d1"):
        align(docs, swapped)
    assert align(docs, [d.text for d in docs]) == [d.text for d in docs]


def test_unknown_protocol():
    docs = make_dataset(5)
    with pytest.raises(ValueError):
        run_privacy_attack("oracle", docs, docs, ConstantTrainer())


def test_static_equals_adaptive_for_noop_rewriting():
    docs = make_dataset()
    truth = {d.text: d.privacy_label for d in docs}
    outs = rewritten(docs, lambda t: t)
    assert run_privacy_attack(STATIC, docs, outs, OracleTrainer(truth)) == run_privacy_attack(
        ADAPTIVE, docs, outs, OracleTrainer(truth))


def test_harness_is_reproducible():
    pytest.importorskip("sklearn")
    from privfill.evaluation.providers import TfidfTrainer

    docs = make_dataset()
    outs = rewritten(docs, str.lower)
    assert evaluate_privacy(docs, outs, TfidfTrainer()) == evaluate_privacy(docs, outs, TfidfTrainer())
    assert run_utility_eval(docs, TfidfTrainer()) == run_utility_eval(docs, TfidfTrainer())
