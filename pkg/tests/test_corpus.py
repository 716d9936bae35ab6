import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtslot.corpus import (MarkupError, Span, TaggedSentence, is_valid_bio, load_tagged, oov_stats,
                           parse_markup, parse_sentence, read_conll, spans_to_tags, split_corpus,
                           tags_to_spans, to_markup, write_conll, write_corpus)
from mtslot.vocab import Token, build_vocab


def test_parse_united_example():
    p = parse_markup("please book flight from <FromLoc> burbank </FromLoc>")
    assert p.tokens == ["please", "book", "flight", "from", "burbank"]
    assert p.spans == [Span("FromLoc", 4, 4)]


def test_parse_multiword_span():
    p = parse_markup("We should return on <ReturnDate> Jan 11 </ReturnDate>")
    assert p.spans == [Span("ReturnDate", 4, 5)]


def test_parse_no_tags():
    assert parse_markup("hello there").spans == []


@pytest.mark.parametrize("line,msg", [
    ("<A> x <B> y </B> </A>", "nested"),
    ("x </A>", "unexpected"),
    ("<A> </A>", "empty"),
    ("<A> x", "unclosed"),
    ("<A> x </B>", "unexpected"),
])
def test_markup_errors(line, msg):
    with pytest.raises(MarkupError, match=msg):
        parse_markup(line)


def test_bio_from_spans():
    assert spans_to_tags(5, [Span("FromLoc", 4, 4)]) == ["O"] * 4 + ["B-FromLoc"]
    tags = parse_sentence("We should return on <ReturnDate> Jan 11 </ReturnDate>").tags
    assert tags[-2:] == ["B-ReturnDate", "I-ReturnDate"]
    assert spans_to_tags(3, []) == ["O"] * 3


def test_overlap_rejected():
    with pytest.raises(ValueError):
        spans_to_tags(4, [Span("A", 0, 2), Span("B", 2, 3)])


def test_split_sizes():
    items = list(range(100))
    sp = split_corpus(items, 0.30, seed=4)
    assert len(sp.train) == 30 and len(sp.test) == 70
    assert sorted(sp.train + sp.test) == items
    assert split_corpus(items, 0.30, seed=4).train == sp.train
    assert len(split_corpus(list(range(10))).train) == 3


def test_split_bad_fraction():
    with pytest.raises(ValueError):
        split_corpus([1, 2, 3], 1.0)


def test_oov_stats_cases():
    v = build_vocab(["a", "a", "b", "b"])
    s = TaggedSentence([Token.of("a"), Token.of("zz")], ["O", "O"])
    rate, subset = oov_stats(v, [s])
    assert rate == 0.5 and subset == [s]
    known = TaggedSentence([Token.of("b")], ["O"])
    assert oov_stats(v, [known]) == (0.0, [])


@st.composite
def bio_sentences(draw):
    n = draw(st.integers(1, 8))
    spans, i = [], 0
    while i < n:
        if draw(st.booleans()):
            end = draw(st.integers(i, n - 1))
            spans.append(Span(draw(st.sampled_from(["Loc", "Date", "Time"])), i, end))
            i = end + 1
        i += 1
    return n, spans


@settings(max_examples=80, deadline=None)
@given(bio_sentences())
def test_spans_tags_round_trip(case):
    n, spans = case
    tags = spans_to_tags(n, spans)
    assert is_valid_bio(tags)
    assert tags_to_spans(tags) == spans


@settings(max_examples=50, deadline=None)
@given(bio_sentences())
def test_markup_round_trip(case):
    n, spans = case
    s = TaggedSentence([Token.of(f"w{i}") for i in range(n)], spans_to_tags(n, spans))
    back = parse_sentence(to_markup(s))
    assert back.raw == s.raw and back.tags == s.tags


def test_corpus_files(tmp_path):
    lines = ["fly to <ToLoc> boston </ToLoc>", "hello"]
    write_corpus(tmp_path / "c.txt", "United", lines)
    app, sents = load_tagged(tmp_path / "c.txt")
    assert app == "United" and sents[0].tags == ["O", "O", "B-ToLoc"]
    write_conll(tmp_path / "c.conll", sents)
    back = read_conll(tmp_path / "c.conll")
    assert [s.tags for s in back] == [s.tags for s in sents]


def test_bad_line_reports_location(tmp_path):
    write_corpus(tmp_path / "c.txt", "United", ["ok", "<A> x"])
    with pytest.raises(MarkupError, match=r"c.txt:3"):
        load_tagged(tmp_path / "c.txt")
