from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cpgnmt.text import (
    EOS,
    EOW,
    PAD,
    SPECIALS,
    UNK,
    BpeModel,
    Vocabulary,
    apply_bpe,
    build_vocabulary,
    decode_sentence,
    detokenize,
    encode_sentence,
    join_bpe,
    learn_bpe,
    reconstruct,
    tokenize,
)

from oracles import naive_learn_bpe


@pytest.mark.parametrize(
    "text,expected",
    [
        ("Hello, world!", ["Hello", ",", "world", "!"]),
        ("", []),
        ("a  b", ["a", "b"]),
        ("  (quoted) ", ["(", "quoted", ")"]),
        ("it&#39;s &amp; more", ["it's", "&", "more"]),
        ("don't stop 3.14", ["don't", "stop", "3.14"]),
    ],
)
def test_tokenize(text, expected):
    assert tokenize(text) == expected


def test_tokenize_nfc():
    assert tokenize("é") == ["é"]


def test_detokenize_reverses_simple_punctuation():
    assert detokenize(tokenize("Hello, world!")) == "Hello, world!"


def test_build_vocabulary_threshold():
    v = build_vocabulary({"a": 10, "b": 5, "c": 4}, "x", min_count=5)
    assert v.tokens == ["a", "b"]
    assert len(v) == 2 + len(SPECIALS)


def test_build_vocabulary_cap_excludes_specials():
    counts = {f"w{i:05d}": 5 + (i % 7) for i in range(25000)}
    v = build_vocabulary(counts, "x")
    assert len(v) == 20000 + len(SPECIALS)


def test_build_vocabulary_empty_and_order():
    assert len(build_vocabulary({}, "x")) == len(SPECIALS)
    v = build_vocabulary({"b": 6, "a": 6, "c": 9}, "x")
    assert v.tokens == ["c", "a", "b"]


def test_build_vocabulary_deterministic_under_input_order():
    counts = {"x": 7, "y": 7, "z": 9, "w": 5}
    shuffled = dict(reversed(list(counts.items())))
    assert build_vocabulary(counts).tokens == build_vocabulary(shuffled).tokens


def test_encode_decode():
    v = Vocabulary("x", ["a", "b"])
    assert encode_sentence(v, ["a", "b"]) == [4, 5, EOS]
    assert encode_sentence(v, ["zzz"]) == [UNK, EOS]
    assert decode_sentence(v, [4, 5, EOS, PAD]) == ["a", "b"]
    assert decode_sentence(v, [EOS]) == []
    assert decode_sentence(v, [UNK, EOS]) == ["<unk>"]
    with pytest.raises(IndexError):
        decode_sentence(v, [99])


@given(st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=20))
def test_encode_decode_roundtrip(tokens):
    v = Vocabulary("x", ["a", "b", "c", "d"])
    assert decode_sentence(v, encode_sentence(v, tokens)) == tokens


def test_vocabulary_file_roundtrip(tmp_path):
    v = Vocabulary("x", ["a", "b", "c"])
    v.save(tmp_path / "v.txt")
    assert (tmp_path / "v.txt").read_text().splitlines() == ["a", "b", "c"]
    assert Vocabulary.load(tmp_path / "v.txt", "x").itos == v.itos


def test_first_merge_on_reference_corpus():
    model = learn_bpe({"low": 5, "lower": 2, "newest": 6, "widest": 3}, 1)
    assert model.merges == [("e", "s")]


def test_learn_bpe_edge_cases():
    assert learn_bpe({"low": 5}, 0).merges == []
    with pytest.raises(ValueError):
        learn_bpe({"a": 1}, -1)


def test_single_word_aa_matches_brute_force():
    # "aa</w>" has pairs (a,a) and (a,</w>), each seen once: nothing reaches 2
    assert learn_bpe({"aa": 1}, 1).merges == naive_learn_bpe({"aa": 1}, 1) == []
    # at higher counts the two pairs tie and "</w>" sorts before "a"
    assert learn_bpe({"aa": 3}, 1).merges == naive_learn_bpe({"aa": 3}, 1) == [("a", EOW)]
    assert learn_bpe({"aa": 3}, 2).merges == [("a", EOW), ("a", "a</w>")]


def test_apply_bpe_in_order():
    model = BpeModel([("e", "s"), ("es", "t")])
    assert apply_bpe(model, "west") == ["w", "est" + EOW]
    assert apply_bpe(BpeModel([]), "ab") == ["a", "b" + EOW]


def test_bpe_file_roundtrip(tmp_path):
    model = learn_bpe({"low": 5, "lower": 2, "newest": 6, "widest": 3}, 10)
    model.save(tmp_path / "bpe.txt")
    again = BpeModel.load(tmp_path / "bpe.txt")
    assert again.merges == model.merges and again.marker == model.marker


def test_no_duplicate_merges():
    with pytest.raises(ValueError):
        BpeModel([("a", "b"), ("a", "b")])


words = st.text(alphabet="abcde", min_size=1, max_size=6)


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(words, st.integers(1, 20), min_size=1, max_size=30), st.integers(0, 40))
def test_learn_bpe_matches_naive_reference(counts, n):
    assert learn_bpe(counts, n).merges == naive_learn_bpe(counts, n)


@settings(max_examples=100, deadline=None)
@given(st.dictionaries(words, st.integers(1, 20), min_size=1, max_size=20), st.text(min_size=1, max_size=12))
def test_reconstruction_identity(counts, word):
    model = learn_bpe(counts, 15)
    units = apply_bpe(model, word)
    assert reconstruct(units) == word
    assert join_bpe(units) == [word]


def test_training_segmentation_reproduced():
    counts = Counter({"lower": 3, "lowest": 4, "newer": 5, "wider": 2})
    model = learn_bpe(counts, 6)
    for w in counts:
        assert "".join(apply_bpe(model, w)) == w + EOW


def test_reconstruction_on_random_ascii_words():
    rng = np.random.default_rng(0)
    letters = list("abcdefghijklmnopqrstuvwxyz")
    corpus = Counter("".join(rng.choice(letters, rng.integers(1, 9))) for _ in range(500))
    model = learn_bpe(corpus, 200)
    for _ in range(1000):
        w = "".join(rng.choice(letters, rng.integers(1, 12)))
        assert reconstruct(apply_bpe(model, w)) == w
