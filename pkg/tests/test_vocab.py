import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtslot import autodiff as ad
from mtslot.recurrent import CharEncoderParams
from mtslot.synth import default_suite, generate_synthetic
from mtslot.corpus import parse_sentence
from mtslot.vocab import (UNK, Token, Vocab, build_vocab, embed_closed, embed_open, embedding_table,
                          preprocess_token, tokenize, vocab_from_sentences)


@pytest.mark.parametrize("raw,norm", [("Burbank", "burbank"), ("1300", "####"), ("hello", "hello"),
                                      ("$1300", "$####")])
def test_preprocess(raw, norm):
    assert preprocess_token(raw) == norm


def test_preprocess_empty():
    with pytest.raises(ValueError):
        preprocess_token("")


def test_tokenize_peels_punctuation():
    assert tokenize("below $1300 per week.") == ["below", "$", "1300", "per", "week", "."]
    assert tokenize("it's 5:30") == ["it's", "5:30"]


def test_singletons_dropped():
    v = build_vocab(["a", "a", "b"])
    assert v.tokens == [UNK, "a"] and "b" not in v and v.unk_id == 0


def test_pairs_kept_in_frequency_order():
    v = build_vocab(["b", "a", "b", "a", "c", "c", "c"])
    assert v.tokens == [UNK, "c", "a", "b"]


def test_unk_never_a_member():
    assert UNK not in build_vocab(["x", "x"])


def test_empty_corpus():
    with pytest.raises(ValueError):
        build_vocab([])


def test_generated_singletons_map_to_unk():
    app = default_suite()["Airbnb"]
    sents = [parse_sentence(l) for l in generate_synthetic(app, 1000, 3)]
    v = vocab_from_sentences(sents)
    counts = {}
    for s in sents:
        for t in s.tokens:
            counts[t.norm] = counts.get(t.norm, 0) + 1
    for tok, n in counts.items():
        assert (v.id(tok) == v.unk_id) == (n == 1)


def test_vocab_round_trip(tmp_path):
    v = build_vocab("the cat the dog the cat".split())
    v.save(tmp_path / "v.tsv")
    w = Vocab.load(tmp_path / "v.tsv")
    assert w.tokens == v.tokens and w.counts == v.counts


@settings(max_examples=50, deadline=None)
@given(st.lists(st.sampled_from("abcdefg"), min_size=1, max_size=40))
def test_vocab_keeps_exactly_repeated_tokens(tokens):
    v = build_vocab(tokens)
    for t in set(tokens):
        assert (t in v) == (tokens.count(t) >= 2)
    assert v.tokens[0] == UNK
    assert sum(v.counts) == len(tokens)


def test_closed_embeddings(rng):
    v = build_vocab(["a", "a"])
    table = embedding_table("e", v, 5, rng)
    np.testing.assert_array_equal(embed_closed(v, table, Token.of("a")).value, table.value[v.id("a")])
    u1, u2 = embed_closed(v, table, Token.of("q")), embed_closed(v, table, Token.of("z"))
    np.testing.assert_array_equal(u1.value, u2.value)
    np.testing.assert_array_equal(u1.value, table.value[0])


def test_open_embeddings(rng):
    v = build_vocab(["a", "a"])
    table = embedding_table("e", v, 160, rng)
    chars = CharEncoderParams.init("abcdefghijklmnopqrstuvwxyz0123456789", rng)
    x, y = embed_open(v, table, chars, Token.of("qq")), embed_open(v, table, chars, Token.of("zz"))
    assert x.value.shape == (200,)
    np.testing.assert_array_equal(x.value[:160], y.value[:160])
    assert not np.allclose(x.value[160:], y.value[160:])


def test_open_embedding_sees_raw_digits(rng):
    v = build_vocab(["a", "a"])
    table = embedding_table("e", v, 4, rng)
    chars = CharEncoderParams.init("0123456789#", rng, out_dim=3)
    t = Token.of("42")
    assert t.norm == "##"
    got = embed_open(v, table, chars, t).value[4:]
    from mtslot.recurrent import char_word_encode
    np.testing.assert_array_equal(got, char_word_encode(chars, "42").value)
    assert not np.allclose(got, char_word_encode(chars, "##").value)


def test_embedding_init_range(rng):
    t = embedding_table("e", build_vocab(["a", "a"]), 50, rng)
    assert np.abs(t.value).max() <= 0.1
