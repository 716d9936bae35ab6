"""Minibatch SGD with step decay, dropout and round-robin multi-task batching."""
from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import NumericError
from .corpus import TaggedSentence
from .model import Model, batch_logits, make_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    batch_size: int = 25
    lr0: float = 0.3
    decay: float = 0.98
    decay_every: int = 100
    dropout: float = 0.6
    init_range: float = 0.1
    epochs: int = 10
    seed: int = 0
    clip: float | None = 5.0

    def __post_init__(self):
        if not 0.0 < self.decay <= 1.0:
            raise ValueError(f"decay must be in (0, 1], got {self.decay}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.batch_size < 1 or self.decay_every < 1 or self.epochs < 0:
            raise ValueError("batch_size, decay_every must be positive and epochs >= 0")


@dataclass
class TrainLog:
    """Per-step (step, task, loss, lr) and per-epoch (epoch, split, value) records.

    Epoch rows with split ``train-loss`` hold the mean minibatch loss; other
    splits hold F1 from an evaluation callback.
    """

    steps: list[tuple[int, str, float, float]] = field(default_factory=list)
    epochs: list[tuple[int, str, float]] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "task", "loss", "lr"])
        for step, task, loss, lr in self.steps:
            w.writerow([step, task, repr(loss), repr(lr)])
        w.writerow([])
        w.writerow(["epoch", "split", "f1"])
        for epoch, split, f1 in self.epochs:
            w.writerow([epoch, split, repr(f1)])
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(self.to_csv())


def lr_schedule(step: int, cfg: TrainConfig | None = None) -> float:
    cfg = cfg or TrainConfig()
    if step < 0:
        raise ValueError("step must be nonnegative")
    return cfg.lr0 * cfg.decay ** (step // cfg.decay_every)


def apply_dropout(v, p: float, rng: np.random.Generator | None, training: bool) -> np.ndarray:
    """Inverted dropout on a plain array."""
    return ad.dropout(ad.constant(v), p, rng, training).value


def make_minibatches(corpus: Sequence, batch_size: int, rng: np.random.Generator) -> list[list]:
    """Shuffle, then cut into batches; the last one may be short."""
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    order = rng.permutation(len(corpus))
    return [[corpus[i] for i in order[k:k + batch_size]] for k in range(0, len(order), batch_size)]


def batch_loss(m: Model, task: str, sentences: Sequence[TaggedSentence], rng, dropout: float,
               training: bool = True) -> ad.Node:
    """Per-sentence mean token cross-entropy, summed over the batch."""
    batch = make_batch(m.vocab, sentences)
    labels = m.head(task).labels
    index = {l: i for i, l in enumerate(labels)}
    tgt = np.zeros((batch.T, batch.B), dtype=np.intp)
    for b, s in enumerate(sentences):
        tgt[:len(s), b] = [index[t] for t in s.tags]
    logits = batch_logits(m, task, batch, training, rng, dropout)
    # each sentence contributes its mean token loss; sentences sum over the batch
    weights = (batch.mask.reshape(batch.T, batch.B) / batch.lengths).reshape(-1)
    return ad.softmax_cross_entropy(logits, tgt.reshape(-1), weights)


def sgd_step(grads: dict, lr: float, clip: float | None = None) -> None:
    if clip is not None:
        norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > clip:
            lr = lr * clip / norm
    for p, g in grads.items():
        p.value -= lr * g


class _Trainer:
    def __init__(self, model: Model, cfg: TrainConfig, log_: TrainLog | None):
        self.model, self.cfg = model, cfg
        self.log = log_ or TrainLog()
        self.rng = np.random.default_rng(cfg.seed)
        self.step = 0

    def update(self, task: str, sentences) -> float:
        lr = lr_schedule(self.step, self.cfg)
        try:
            loss = batch_loss(self.model, task, sentences, self.rng, self.cfg.dropout)
        except NumericError as exc:
            raise NumericError(f"step {self.step} ({task}): {exc}") from exc
        grads = ad.backward(loss)
        for p, g in grads.items():
            if not np.all(np.isfinite(g)):
                raise NumericError(f"step {self.step} ({task}): non-finite gradient for {p.name}")
        sgd_step(grads, lr, self.cfg.clip)
        value = float(loss.value)
        self.log.steps.append((self.step, task, value, lr))
        self.step += 1
        return value


def train_single(model: Model, corpus: Sequence[TaggedSentence], cfg: TrainConfig,
                 task: str | None = None, on_epoch: Callable[[int, Model], dict] | None = None
                 ) -> tuple[Model, TrainLog]:
    """Plain minibatch SGD over one task for ``cfg.epochs`` epochs (in place)."""
    task = task or next(iter(model.heads))
    model.head(task)
    tr = _Trainer(model, cfg, None)
    for epoch in range(cfg.epochs):
        losses = [tr.update(task, b) for b in make_minibatches(corpus, cfg.batch_size, tr.rng)]
        tr.log.epochs.append((epoch, "train-loss", float(np.mean(losses))))
        _epoch_hook(tr.log, epoch, model, on_epoch)
    return model, tr.log


def train_multitask(model: Model, corpora: dict[str, Sequence[TaggedSentence]], cfg: TrainConfig,
                    on_epoch: Callable[[int, Model], dict] | None = None
                    ) -> tuple[Model, TrainLog]:
    """Alternate tasks batch by batch; a task that runs out reshuffles its own stream."""
    missing = set(corpora) - set(model.heads)
    if missing:
        raise KeyError(f"no heads for tasks {sorted(missing)}")
    tr = _Trainer(model, cfg, None)
    streams: dict[str, list] = {t: [] for t in corpora}
    cycles = max(-(-len(c) // cfg.batch_size) for c in corpora.values())
    for epoch in range(cfg.epochs):
        losses = []
        for _ in range(cycles):
            for task, corpus in corpora.items():
                if not streams[task]:
                    streams[task] = make_minibatches(corpus, cfg.batch_size, tr.rng)[::-1]
                losses.append(tr.update(task, streams[task].pop()))
        tr.log.epochs.append((epoch, "train-loss", float(np.mean(losses))))
        _epoch_hook(tr.log, epoch, model, on_epoch)
    return model, tr.log


def _epoch_hook(log_: TrainLog, epoch: int, model: Model, on_epoch) -> None:
    if on_epoch is None:
        return
    for split, f1 in on_epoch(epoch, model).items():
        log_.epochs.append((epoch, split, float(f1)))
    log.info("epoch %d: %s", epoch, log_.epochs[-1])
