"""Tokenization, normalization and the closed word vocabulary."""
from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter
from .recurrent import CharEncoderParams, char_word_encode

UNK = "<unk>"
EDGE_PUNCT = ".,!?;:'\"$"
_DIGIT = re.compile(r"\d")


def tokenize(text: str) -> list[str]:
    """Whitespace split, then peel leading/trailing punctuation off as tokens."""
    tokens = []
    for piece in text.split():
        lead, trail = [], []
        while piece and piece[0] in EDGE_PUNCT:
            lead.append(piece[0])
            piece = piece[1:]
        while piece and piece[-1] in EDGE_PUNCT:
            trail.append(piece[-1])
            piece = piece[:-1]
        tokens.extend(lead)
        if piece:
            tokens.append(piece)
        tokens.extend(reversed(trail))
    return tokens


def preprocess_token(raw: str) -> str:
    """Lowercase, then map every decimal digit to '#'. Nothing else changes."""
    if not raw:
        raise ValueError("cannot normalize an empty token")
    return _DIGIT.sub("#", raw.lower())


@dataclass(frozen=True)
class Token:
    raw: str
    norm: str

    @classmethod
    def of(cls, raw: str) -> "Token":
        return cls(raw, preprocess_token(raw))


@dataclass
class Vocab:
    tokens: list[str]
    counts: list[int]
    min_count: int = 2
    index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if UNK not in self.index:
            raise ValueError("vocabulary has no unknown-word entry")

    @property
    def unk_id(self) -> int:
        return self.index[UNK]

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, norm: str) -> bool:
        return norm != UNK and norm in self.index

    def id(self, norm: str) -> int:
        return self.index.get(norm, self.unk_id)

    def ids(self, norms: Iterable[str]) -> list[int]:
        return [self.id(t) for t in norms]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for i, (t, c) in enumerate(zip(self.tokens, self.counts)):
                fh.write(f"{t}\t{i}\t{c}\n")

    @classmethod
    def load(cls, path, min_count: int = 2) -> "Vocab":
        rows = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.rstrip("\n")
                if not line:
                    continue
                tok, idx, count = line.split("\t")
                rows.append((int(idx), tok, int(count)))
        rows.sort()
        if [r[0] for r in rows] != list(range(len(rows))):
            raise ValueError(f"{path}: ids are not dense")
        return cls([r[1] for r in rows], [r[2] for r in rows], min_count)


def build_vocab(corpus: Iterable[str], min_count: int = 2) -> Vocab:
    """Keep normalized tokens seen at least ``min_count`` times; UNK gets id 0.

    Remaining ids follow descending frequency, ties broken lexicographically.
    The UNK count records how many training tokens fall back to it.
    """
    freq = Counter(corpus)
    if not freq:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted((t for t, c in freq.items() if c >= min_count and t != UNK),
                  key=lambda t: (-freq[t], t))
    unk_count = sum(c for t, c in freq.items() if c < min_count or t == UNK)
    return Vocab([UNK, *kept], [unk_count, *(freq[t] for t in kept)], min_count)


def vocab_from_sentences(sentences, min_count: int = 2) -> Vocab:
    return build_vocab((t.norm for s in sentences for t in s.tokens), min_count)


def embed_closed(v: Vocab, table: Node, t: Token) -> Node:
    """Table row for the token, or the UNK row."""
    return ad.reshape(ad.take(table, [v.id(t.norm)]), (-1,))


def embed_open(v: Vocab, table: Node, chars: CharEncoderParams, t: Token) -> Node:
    """Word row (or UNK row) concatenated with the character encoding of the raw form."""
    return ad.concat([embed_closed(v, table, t), char_word_encode(chars, t.raw)], axis=0)


def embedding_table(name: str, v: Vocab, dim: int, rng: np.random.Generator,
                    init_range: float = 0.1) -> Parameter:
    return Parameter(name, rng.uniform(-init_range, init_range, (v.size, dim)))
