"""Slot markup, BIO tagged sentences, splits and OOV statistics.

Markup lines look like ``please book flight from <FromLoc> burbank </FromLoc>``.
Corpus files carry one such line per sentence under a ``#app:<name>`` header.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .vocab import Token, Vocab, tokenize

_TAG = re.compile(r"<(/?)([A-Za-z][A-Za-z0-9_]*)>")


class MarkupError(ValueError):
    pass


class Span(NamedTuple):
    slot: str
    start: int
    end: int  # inclusive


@dataclass
class ParsedLine:
    tokens: list[str]
    spans: list[Span]


@dataclass
class TaggedSentence:
    tokens: list[Token]
    tags: list[str]
    task_id: str = ""

    def __post_init__(self):
        if len(self.tokens) != len(self.tags):
            raise ValueError(f"{len(self.tokens)} tokens but {len(self.tags)} tags")

    def __len__(self):
        return len(self.tokens)

    @property
    def raw(self) -> list[str]:
        return [t.raw for t in self.tokens]


@dataclass
class CorpusSplit:
    train: list[TaggedSentence]
    test: list[TaggedSentence]
    seed: int


def parse_markup(line: str) -> ParsedLine:
    """Tokenize a markup line and return its flat slot spans (token indices)."""
    tokens: list[str] = []
    spans: list[Span] = []
    open_slot, open_start, open_pos = None, 0, 0
    pos = 0
    for m in _TAG.finditer(line):
        tokens.extend(tokenize(line[pos:m.start()]))
        closing, name = m.group(1) == "/", m.group(2)
        if not closing:
            if open_slot is not None:
                raise MarkupError(f"nested tag <{name}> at char {m.start()} inside <{open_slot}>")
            open_slot, open_start, open_pos = name, len(tokens), m.start()
        else:
            if open_slot != name:
                raise MarkupError(f"unexpected </{name}> at char {m.start()}")
            if len(tokens) == open_start:
                raise MarkupError(f"empty <{name}> span at char {open_pos}")
            spans.append(Span(name, open_start, len(tokens) - 1))
            open_slot = None
        pos = m.end()
    if open_slot is not None:
        raise MarkupError(f"unclosed <{open_slot}> at char {open_pos}")
    tokens.extend(tokenize(line[pos:]))
    return ParsedLine(tokens, spans)


def is_valid_bio(tags: Sequence[str]) -> bool:
    prev = "O"
    for tag in tags:
        if tag.startswith("I-") and prev[2:] != tag[2:]:
            return False
        if tag != "O" and not tag.startswith(("B-", "I-")):
            return False
        prev = tag
    return True


def spans_to_tags(n: int, spans: Sequence[Span]) -> list[str]:
    tags = ["O"] * n
    for slot, start, end in sorted(spans, key=lambda s: s.start):
        if not 0 <= start <= end < n:
            raise ValueError(f"span {slot}[{start}:{end}] outside {n} tokens")
        if any(t != "O" for t in tags[start:end + 1]):
            raise ValueError(f"overlapping span {slot}[{start}:{end}]")
        tags[start] = f"B-{slot}"
        for i in range(start + 1, end + 1):
            tags[i] = f"I-{slot}"
    return tags


def to_bio(parsed: ParsedLine, task_id: str = "") -> TaggedSentence:
    tags = spans_to_tags(len(parsed.tokens), parsed.spans)
    return TaggedSentence([Token.of(t) for t in parsed.tokens], tags, task_id)


def tags_to_spans(tags: Sequence[str]) -> list[Span]:
    spans, cur = [], None
    for i, tag in enumerate(tags):
        if tag.startswith("I-") and cur is not None and cur[0] == tag[2:]:
            cur[2] = i
            continue
        if cur is not None:
            spans.append(Span(*cur))
            cur = None
        if tag.startswith("B-"):
            cur = [tag[2:], i, i]
        elif tag.startswith("I-"):
            raise ValueError(f"invalid BIO at {i}: {tag} follows {tags[i - 1] if i else 'start'}")
    if cur is not None:
        spans.append(Span(*cur))
    return spans


def to_markup(s: TaggedSentence) -> str:
    """Inverse of parse_markup at token level (tokens joined by single spaces)."""
    words = list(s.raw)
    for slot, start, end in reversed(tags_to_spans(s.tags)):
        words[end] = f"{words[end]} </{slot}>"
        words[start] = f"<{slot}> {words[start]}"
    return " ".join(words)


def parse_sentence(line: str, task_id: str = "") -> TaggedSentence:
    return to_bio(parse_markup(line), task_id)


def split_corpus(corpus: Sequence, train_frac: float = 0.30, seed: int = 0) -> CorpusSplit:
    """Seeded shuffle, then the first floor(n * train_frac) items train."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    if len(corpus) < 2:
        raise ValueError("need at least two sentences to split")
    order = np.random.default_rng(seed).permutation(len(corpus))
    n_train = math.floor(len(corpus) * train_frac + 1e-9)
    items = [corpus[i] for i in order]
    return CorpusSplit(items[:n_train], items[n_train:], seed)


def oov_stats(vocab: Vocab, test: Sequence[TaggedSentence]) -> tuple[float, list[TaggedSentence]]:
    """Fraction of test tokens missing from ``vocab`` and the sentences holding any."""
    total = oov = 0
    subset = []
    for s in test:
        n = sum(1 for t in s.tokens if t.norm not in vocab)
        total += len(s.tokens)
        oov += n
        if n:
            subset.append(s)
    return (oov / total if total else 0.0), subset


# ---------------------------------------------------------------- files

def write_corpus(path, app: str, lines: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"#app:{app}\n")
        for line in lines:
            fh.write(line + "\n")


def read_corpus(path) -> tuple[str, list[str]]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith("#app:"):
            raise MarkupError(f"{path}: missing #app:<name> header")
        return header[5:], [ln.rstrip("\n") for ln in fh if ln.strip()]


def load_tagged(path) -> tuple[str, list[TaggedSentence]]:
    app, lines = read_corpus(path)
    out = []
    for n, line in enumerate(lines, start=2):
        try:
            out.append(parse_sentence(line, app))
        except MarkupError as exc:
            raise MarkupError(f"{path}:{n}: {exc}") from exc
    return app, out


def write_conll(path, sentences: Sequence[TaggedSentence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, s in enumerate(sentences):
            if i:
                fh.write("\n")
            for tok, tag in zip(s.raw, s.tags):
                fh.write(f"{tok}\t{tag}\n")


def read_conll(path, task_id: str = "") -> list[TaggedSentence]:
    out, toks, tags = [], [], []
    with open(path, encoding="utf-8") as fh:
        for line in list(fh) + ["\n"]:
            line = line.rstrip("\n")
            if not line:
                if toks:
                    out.append(TaggedSentence([Token.of(t) for t in toks], tags, task_id))
                    toks, tags = [], []
                continue
            tok, tag = line.split("\t")
            toks.append(tok)
            tags.append(tag)
    return out
