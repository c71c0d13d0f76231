import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgnmt.bleu import corpus_bleu, token_accuracy
from cpgnmt.errors import ContractError

from oracles import ngram_bleu


def test_identical_corpus_scores_one():
    refs = [["a", "b", "c", "d", "e"], ["x", "y", "z", "w"]]
    assert corpus_bleu(refs, refs) == pytest.approx(1.0, abs=1e-12)


def test_missing_four_gram_gives_zero():
    assert corpus_bleu([["a", "b", "c", "e"]], [["a", "b", "c", "d"]]) == 0.0


def test_brevity_penalty_example():
    score = corpus_bleu([["a", "b", "c"]], [["a", "b", "c", "d"]], max_n=3)
    assert abs(score - np.exp(1 - 4 / 3)) < 1e-6
    assert abs(score - 0.71653) < 1e-5


def test_empty_and_mismatched_corpora():
    with pytest.raises(ContractError):
        corpus_bleu([], [])
    with pytest.raises(ContractError):
        corpus_bleu([["a"]], [["a"], ["b"]])


words = st.lists(st.sampled_from("abcde"), min_size=0, max_size=9)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(words, words), min_size=1, max_size=5))
def test_matches_oracle(pairs):
    hyps, refs = [h for h, _ in pairs], [r for _, r in pairs]
    assert corpus_bleu(hyps, refs) == pytest.approx(ngram_bleu(hyps, refs), abs=1e-9)


def test_token_accuracy():
    assert token_accuracy([["a", "b"], ["c"]], [["a", "x"], ["c", "d"]]) == pytest.approx(2 / 4)
    assert token_accuracy([["a"]], [["a"]]) == 1.0
