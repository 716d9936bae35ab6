"""Single- and multi-task bi-LSTM taggers with per-task softmax heads."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Node, Parameter
from .corpus import TaggedSentence, is_valid_bio
from .recurrent import BiLstmParams, CharEncoderParams, bilstm_batch, encode_words
from .vocab import Vocab, embedding_table


class ConfigError(ValueError):
    pass


def label_set(slots: Sequence[str]) -> list[str]:
    """``O`` first, then B-/I- pairs in slot order."""
    return ["O"] + [f"{p}-{s}" for s in slots for p in ("B", "I")]


@dataclass
class ModelConfig:
    mode: str = "multi"                # single | multi
    vocab_mode: str = "closed"         # closed | open
    word_dim: int = 200
    cell_dim: int = 250
    proj_dim: int = 170
    char_dim: int = 15
    char_cell1: int = 40
    char_proj1: int = 20
    char_cell2: int = 130
    char_out: int = 40
    labels: dict[str, list[str]] = field(default_factory=dict)
    peepholes: bool = True
    init_range: float = 0.1

    @classmethod
    def single(cls, task: str, labels: list[str], **kw) -> "ModelConfig":
        base = dict(mode="single", word_dim=60, cell_dim=100, proj_dim=70)
        base.update(kw)
        return cls(labels={task: labels}, **base)

    @classmethod
    def multi(cls, labels: dict[str, list[str]], vocab_mode: str = "closed", **kw) -> "ModelConfig":
        base = dict(mode="multi", vocab_mode=vocab_mode, word_dim=200, cell_dim=250, proj_dim=170)
        if vocab_mode == "open":
            base["word_dim"] = 160
        base.update(kw)
        return cls(labels=dict(labels), **base)

    @property
    def input_dim(self) -> int:
        return self.word_dim + (self.char_out if self.vocab_mode == "open" else 0)

    def validate(self) -> None:
        if self.mode not in ("single", "multi"):
            raise ConfigError(f"mode must be single or multi, got {self.mode!r}")
        if self.vocab_mode not in ("closed", "open"):
            raise ConfigError(f"vocab_mode must be closed or open, got {self.vocab_mode!r}")
        if not self.labels:
            raise ConfigError("no tasks configured")
        if self.mode == "single" and len(self.labels) != 1:
            raise ConfigError("single-task model needs exactly one label set")
        for task, labs in self.labels.items():
            if not labs or labs[0] != "O" or len(set(labs)) != len(labs):
                raise ConfigError(f"labels for {task} must be unique and start with O")
        dims = [self.word_dim, self.cell_dim, self.proj_dim]
        if self.vocab_mode == "open":
            dims += [self.char_dim, self.char_cell1, self.char_proj1, self.char_cell2, self.char_out]
        if min(dims) <= 0:
            raise ConfigError(f"dimensions must be positive: {dims}")


@dataclass
class TaskHead:
    task_id: str
    labels: list[str]
    W: Parameter
    b: Parameter

    def parameters(self) -> list[Parameter]:
        return [self.W, self.b]


@dataclass
class Model:
    config: ModelConfig
    vocab: Vocab
    embed: Parameter
    encoder: BiLstmParams
    heads: dict[str, TaskHead]
    chars: CharEncoderParams | None = None

    def shared_parameters(self) -> list[Parameter]:
        ps = [self.embed]
        if self.chars is not None:
            ps += self.chars.parameters()
        return ps + self.encoder.parameters()

    def parameters(self) -> list[Parameter]:
        ps = self.shared_parameters()
        for h in self.heads.values():
            ps += h.parameters()
        return ps

    def named_tensors(self) -> dict[str, np.ndarray]:
        return {p.name: p.value for p in self.parameters()}

    def head(self, task: str) -> TaskHead:
        try:
            return self.heads[task]
        except KeyError:
            raise KeyError(f"no head for task {task!r}; have {sorted(self.heads)}") from None


def assemble_model(cfg: ModelConfig, vocab: Vocab, seed: int, chars: str | set = "") -> Model:
    """Build a model with every parameter drawn uniform in [-init_range, init_range].

    ``chars`` lists the characters the open-vocabulary encoder knows.
    """
    cfg.validate()
    rng = np.random.default_rng(seed)
    r = cfg.init_range
    embed = embedding_table("embed", vocab, cfg.word_dim, rng, r)
    char_enc = None
    if cfg.vocab_mode == "open":
        char_enc = CharEncoderParams.init(chars, rng, cfg.char_dim, cfg.char_cell1, cfg.char_proj1,
                                          cfg.char_cell2, cfg.char_out, r, cfg.peepholes)
    encoder = BiLstmParams.init("encoder", cfg.input_dim, cfg.cell_dim, cfg.proj_dim, rng, r,
                                cfg.peepholes)
    heads = {}
    for task, labels in cfg.labels.items():
        heads[task] = TaskHead(
            task, list(labels),
            Parameter(f"head/{task}/W", rng.uniform(-r, r, (len(labels), encoder.out_dim))),
            Parameter(f"head/{task}/b", rng.uniform(-r, r, len(labels))),
        )
    return Model(cfg, vocab, embed, encoder, heads, char_enc)


# ---------------------------------------------------------------- forward

@dataclass
class Batch:
    lengths: np.ndarray
    word_ids: np.ndarray       # (T*B,) time-major, padding -> unk
    raw: list[list[str]]
    mask: np.ndarray           # (T*B,) 1 for real tokens

    @property
    def T(self) -> int:
        return int(self.lengths.max())

    @property
    def B(self) -> int:
        return len(self.lengths)


def make_batch(vocab: Vocab, sentences: Sequence[TaggedSentence]) -> Batch:
    lengths = np.array([len(s) for s in sentences])
    if len(lengths) == 0 or lengths.min() == 0:
        raise ValueError("cannot tag empty sentences")
    T, B = int(lengths.max()), len(sentences)
    ids = np.full((T, B), vocab.unk_id, dtype=np.intp)
    mask = np.zeros((T, B))
    for b, s in enumerate(sentences):
        ids[:len(s), b] = vocab.ids(t.norm for t in s.tokens)
        mask[:len(s), b] = 1.0
    return Batch(lengths, ids.reshape(-1), [s.raw for s in sentences], mask.reshape(-1))


def embed_batch(m: Model, batch: Batch) -> Node:
    """(T*B, input_dim) token embeddings for a padded batch."""
    E = ad.take(m.embed, batch.word_ids)
    if m.chars is None:
        return E
    words = sorted({w for sent in batch.raw for w in sent})
    where = {w: i for i, w in enumerate(words)}
    pos = np.zeros((batch.T, batch.B), dtype=np.intp)
    for b, sent in enumerate(batch.raw):
        pos[:len(sent), b] = [where[w] for w in sent]
    C = ad.take(encode_words(m.chars, words), pos.reshape(-1))
    return ad.concat([E, C], axis=1)


def batch_logits(m: Model, task: str, batch: Batch, training: bool = False,
                 rng: np.random.Generator | None = None, dropout: float = 0.0) -> Node:
    """(T*B, |labels|) scores; dropout hits the embeddings and the bi-LSTM output."""
    head = m.head(task)
    X = ad.dropout(embed_batch(m, batch), dropout, rng, training)
    H, _, _ = bilstm_batch(m.encoder, X, batch.lengths)
    H = ad.dropout(H, dropout, rng, training)
    return ad.add(ad.matmul(H, ad.transpose(head.W)), head.b)


def encoder_states(m: Model, tokens: Sequence) -> np.ndarray:
    """Shared bi-LSTM activations for one sentence (T, 2*proj)."""
    s = tokens if isinstance(tokens, TaggedSentence) else TaggedSentence(list(tokens), ["O"] * len(tokens))
    with ad.no_grad():
        batch = make_batch(m.vocab, [s])
        H, _, _ = bilstm_batch(m.encoder, embed_batch(m, batch), batch.lengths)
    return H.value


def tag_logits(m: Model, task: str, tokens: Sequence) -> np.ndarray:
    """Raw per-token label scores (T, |labels|) for a single sentence."""
    s = tokens if isinstance(tokens, TaggedSentence) else TaggedSentence(list(tokens), ["O"] * len(tokens))
    with ad.no_grad():
        return batch_logits(m, task, make_batch(m.vocab, [s])).value


def greedy_decode(scores, labels: Sequence[str]) -> list[str]:
    """Per-position argmax; ties go to the lowest label index."""
    scores = np.asarray(scores)
    if scores.ndim != 2 or len(scores) == 0:
        raise ValueError("need a nonempty (T, L) score matrix")
    return [labels[i] for i in np.argmax(scores, axis=1)]


def bio_repair(tags: Sequence[str]) -> list[str]:
    """Left-to-right scan: an I-X not preceded by B-X or I-X becomes O."""
    out = []
    prev = "O"
    for tag in tags:
        if tag.startswith("I-") and (prev == "O" or prev[2:] != tag[2:]):
            tag = "O"
        out.append(tag)
        prev = tag
    return out


def predict(m: Model, task: str, sentences: Sequence[TaggedSentence],
            batch_size: int = 50) -> list[list[str]]:
    """Greedy decode + BIO repair for every sentence."""
    labels = m.head(task).labels
    out = []
    with ad.no_grad():
        for k in range(0, len(sentences), batch_size):
            chunk = sentences[k:k + batch_size]
            batch = make_batch(m.vocab, chunk)
            S = batch_logits(m, task, batch).value.reshape(batch.T, batch.B, -1)
            for b, s in enumerate(chunk):
                tags = bio_repair(greedy_decode(S[:len(s), b], labels))
                assert is_valid_bio(tags)
                out.append(tags)
    return out


def count_parameters(m: Model) -> tuple[int, dict[str, int], float]:
    shared = sum(p.value.size for p in m.shared_parameters())
    per_task = {t: sum(p.value.size for p in h.parameters()) for t, h in m.heads.items()}
    total = shared + sum(per_task.values())
    return shared, per_task, shared / total


# ---------------------------------------------------------------- checkpoints

def vocab_hash(v: Vocab) -> str:
    h = hashlib.sha256()
    for t, c in zip(v.tokens, v.counts):
        h.update(f"{t}\t{c}\n".encode("utf-8"))
    return h.hexdigest()


def save_model(m: Model, path) -> None:
    meta = {
        "config": asdict(m.config),
        "vocab_sha256": vocab_hash(m.vocab),
        "labels": {t: h.labels for t, h in m.heads.items()},
        "chars": sorted(m.chars.chars, key=m.chars.chars.get) if m.chars else None,
    }
    ad.save_tensors(path, m.named_tensors(), json.dumps(meta, sort_keys=True).encode("utf-8"))


def load_model(path, vocab: Vocab) -> Model:
    tensors, raw = ad.load_tensors(path)
    meta = json.loads(raw.decode("utf-8"))
    if meta["vocab_sha256"] != vocab_hash(vocab):
        raise ConfigError(f"{path}: vocabulary does not match the one the model was trained with")
    cfg = ModelConfig(**meta["config"])
    chars = meta["chars"][1:] if meta["chars"] else ""
    m = assemble_model(cfg, vocab, 0, chars)
    for p in m.parameters():
        if p.name not in tensors or tensors[p.name].shape != p.value.shape:
            raise ConfigError(f"{path}: missing or misshapen tensor {p.name}")
        p.value = tensors[p.name]
    return m
