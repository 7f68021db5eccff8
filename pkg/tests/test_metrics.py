import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from privfill.evaluation.metrics import (
    EvalInputs,
    cosine_similarity,
    majority_f1,
    mean_perplexity,
    micro_f1,
    pp_plus,
    relative_gain,
)
from privfill.evaluation.providers import (
    ConstantTrainer,
    HashingEmbedder,
    OracleTrainer,
    UnigramScorer,
    load_embedder,
    load_scorer,
    load_trainer,
)


@pytest.mark.parametrize("p, expected", [
    (1618 / 1730, 96.65),
    (304 / 1730, 29.89),
    (2713 / 2949, 95.83),
    (0.5, 66.67),
])
def test_majority_f1_reference_values(p, expected):
    assert majority_f1(p) == pytest.approx(expected, abs=0.01)


def test_majority_f1_range():
    assert majority_f1(1.0) == 100
    with pytest.raises(ValueError):
        majority_f1(0)


TRUSTPILOT = dict(U_o=99.57, P_o=72.46, MG_u=95.83, MG_p=66.67)
YELP = dict(U_o=95.03, P_o=96.30, MG_u=96.65, MG_p=29.89)


@pytest.mark.parametrize("base, u_r, p_r, expected", [
    (TRUSTPILOT, 98.16, 59.47, 1.87),  # DP-BART eps=1000, static
    (TRUSTPILOT, 98.63, 60.16, 1.87),  # PrivFill bart-large, static
    (YELP, 93.49, 19.44, 2.11),  # DP-Prompt eps=2, adaptive
])
def test_relative_gain_reference_values(base, u_r, p_r, expected):
    assert relative_gain(EvalInputs(U_r=u_r, P_r=p_r, **base)) == pytest.approx(expected, abs=0.02)


def test_relative_gain_baseline_is_zero():
    # rewriting that changes nothing keeps all utility and leaks all privacy
    assert relative_gain(EvalInputs(90, 90, 70, 70, 50, 50)) == 0


@given(st.floats(51, 100), st.floats(0, 100), st.floats(51, 100), st.floats(0, 100))
def test_relative_gain_formula(u_o, u_r, p_o, p_r):
    rg = relative_gain(EvalInputs(u_o, u_r, p_o, p_r, 50.0, 50.0))
    assert rg == pytest.approx((u_r - 50) / (u_o - 50) - (p_r - 50) / (p_o - 50))


@pytest.mark.parametrize("field", ["U_o", "P_o"])
def test_relative_gain_degenerate(field):
    values = dict(U_o=90, U_r=80, P_o=70, P_r=60, MG_u=50, MG_p=50)
    values[field] = 50
    with pytest.raises(ZeroDivisionError, match=field):
        relative_gain(EvalInputs(**values))


def test_eval_inputs_range():
    with pytest.raises(ValueError):
        EvalInputs(101, 0, 0, 0, 0, 0)


@pytest.mark.parametrize("f1, mg, expected", [
    (99.57, 95.83, 374), (93.59, 95.83, -224), (98.16, 95.83, 233), (95.03, 96.65, -162), (96.65, 96.65, 0),
])
def test_pp_plus(f1, mg, expected):
    assert pp_plus(f1, mg) == expected


def test_micro_f1_is_accuracy():
    gold = ["a", "a", "b", "c", "b", "a"]
    pred = ["a", "b", "b", "a", "b", "a"]
    # per-class counts pooled: TP = 4, FP = FN = 2
    tp, fp, fn = 4, 2, 2
    assert micro_f1(gold, pred) == pytest.approx(2 * tp / (2 * tp + fp + fn))
    assert micro_f1(gold, pred) == pytest.approx(4 / 6)
    with pytest.raises(ValueError):
        micro_f1([], [])
    with pytest.raises(ValueError):
        micro_f1(["a"], ["a", "b"])


def test_cosine_similarity():
    emb = HashingEmbedder()
    assert cosine_similarity("The cat sat.", "the cats sat", emb) == pytest.approx(1.0)
    assert -1 <= cosine_similarity("alpha", "omega zulu", emb) <= 1

    class Fixed:
        def __init__(self, vec):
            self.vec = vec

        def embed(self, text):
            return np.array(self.vec[text])

    fixed = Fixed({"a": [1.0, 0.0], "b": [0.0, 2.0], "c": [-3.0, 0.0], "z": [0.0, 0.0]})
    assert cosine_similarity("a", "b", fixed) == 0
    assert cosine_similarity("a", "c", fixed) == -1
    with pytest.raises(ValueError):
        cosine_similarity("a", "z", fixed)


def test_mean_perplexity_skips_failures():
    scorer = UnigramScorer(["the cat sat on the mat"])
    result = mean_perplexity(["the cat", "", "the mat"], scorer)
    assert result.scored == 2 and result.skipped == 1
    expected = (scorer.perplexity("the cat") + scorer.perplexity("the mat")) / 2
    assert result.mean == pytest.approx(expected)
    with pytest.raises(ValueError):
        mean_perplexity(["", "!!"], scorer)


def test_unigram_perplexity_oracle():
    scorer = UnigramScorer(["a a b"])
    # counts a=2, b=1; total 3; vocab 2 + 1 unseen slot
    p_a, p_c = 3 / 6, 1 / 6
    assert scorer.perplexity("a c") == pytest.approx(math.exp(-(math.log(p_a) + math.log(p_c)) / 2))


def test_trainers():
    assert ConstantTrainer().train(["x"] * 5, list("aabbb")).predict(["q", "r"]) == ["b", "b"]
    assert ConstantTrainer().train(["x"] * 4, list("baab")).predict(["q"]) == ["a"]
    oracle = OracleTrainer({"t1": "m", "t2": "f"}).train([], [])
    assert oracle.predict(["t2", "t1"]) == ["f", "m"]


def test_tfidf_trainer_learns():
    pytest.importorskip("sklearn")
    texts = ["great food", "great staff", "awful food", "awful staff"] * 5
    labels = ["pos", "pos", "neg", "neg"] * 5
    model = load_trainer("tfidf").train(texts, labels, seed=0)
    assert model.predict(["great place", "awful place"]) == ["pos", "neg"]


def test_loaders():
    assert isinstance(load_trainer("stub:constant"), ConstantTrainer)
    assert isinstance(load_embedder("stub:hash"), HashingEmbedder)
    assert isinstance(load_scorer("stub:unigram", ["a"]), UnigramScorer)
    for fn, name in ((load_trainer, "bert"), (load_embedder, "x"), (load_scorer, "y")):
        with pytest.raises(ValueError):
            fn(name)
    with pytest.raises(ValueError):
        load_trainer("oracle")


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_majority_f1_increasing(p, q):
    if p < q:
        assert majority_f1(p) < majority_f1(q)


@given(st.floats(0.5, 1.1), st.floats(-20, 0), st.floats(0.5, 1.1), st.floats(-15, 0))
def test_relative_gain_affine_invariant(su, tu, sp, tp):
    base = EvalInputs(U_o=90, U_r=70, P_o=60, P_r=45, MG_u=40, MG_p=30)
    # rescaling one side together with its baseline cancels in the ratio
    moved = EvalInputs(U_o=90 * su + tu, U_r=70 * su + tu, P_o=60 * sp + tp, P_r=45 * sp + tp,
                       MG_u=40 * su + tu, MG_p=30 * sp + tp)
    assert relative_gain(moved) == pytest.approx(relative_gain(base))
