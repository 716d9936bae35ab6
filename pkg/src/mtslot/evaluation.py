"""CoNLL-style chunk scoring.

A predicted chunk counts only when its type, start and end all match a gold
chunk. Counts are pooled over the corpus (micro average). With nothing
predicted precision is 0, with no gold chunks recall is 0, and when both sides
are empty every score is 100.
"""
from __future__ import annotations

import csv
import io
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

from .corpus import TaggedSentence, is_valid_bio, oov_stats
from .model import predict
from .vocab import Vocab


class Chunk(NamedTuple):
    slot_type: str
    start: int
    end: int


@dataclass
class Scores:
    precision: float
    recall: float
    f1: float
    correct: int
    predicted: int
    gold: int

    @property
    def support(self) -> int:
        return self.gold


@dataclass
class EvalReport:
    precision: float
    recall: float
    f1: float
    correct: int
    predicted: int
    gold: int
    per_type: dict[str, Scores] = field(default_factory=dict)
    sentences: int = 0


def extract_chunks(tags: Sequence[str]) -> set[Chunk]:
    if not is_valid_bio(tags):
        raise ValueError(f"invalid BIO sequence (repair it first): {list(tags)}")
    chunks, start, kind = set(), None, None
    for i, tag in enumerate(list(tags) + ["O"]):
        if start is not None and not (tag.startswith("I-") and tag[2:] == kind):
            chunks.add(Chunk(kind, start, i - 1))
            start = None
        if tag.startswith("B-"):
            start, kind = i, tag[2:]
    return chunks


def _prf(correct: int, predicted: int, gold: int) -> tuple[float, float, float]:
    if predicted == 0 and gold == 0:
        return 100.0, 100.0, 100.0
    p = 100.0 * correct / predicted if predicted else 0.0
    r = 100.0 * correct / gold if gold else 0.0
    f = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return p, r, f


def _count(gold: Sequence[Sequence[str]], pred: Sequence[Sequence[str]]):
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold sentences but {len(pred)} predicted")
    correct, n_pred, n_gold = Counter(), Counter(), Counter()
    for i, (g, p) in enumerate(zip(gold, pred)):
        if len(g) != len(p):
            raise ValueError(f"sentence {i}: {len(g)} gold tags but {len(p)} predicted")
        gc, pc = extract_chunks(g), extract_chunks(p)
        for c in gc:
            n_gold[c.slot_type] += 1
        for c in pc:
            n_pred[c.slot_type] += 1
        for c in gc & pc:
            correct[c.slot_type] += 1
    return correct, n_pred, n_gold


def per_slot_f1(gold, pred, min_support: int = 0) -> dict[str, Scores]:
    """Scores per slot type; types with fewer than ``min_support`` gold chunks are dropped."""
    correct, n_pred, n_gold = _count(gold, pred)
    out = {}
    for t in sorted(set(n_pred) | set(n_gold)):
        if n_gold[t] < min_support:
            continue
        c, np_, ng = correct[t], n_pred[t], n_gold[t]
        p = 100.0 * c / np_ if np_ else 0.0
        r = 100.0 * c / ng if ng else 0.0
        f = 2 * p * r / (p + r) if p + r > 0 else 0.0
        out[t] = Scores(p, r, f, c, np_, ng)
    return out


def conll_f1(gold, pred) -> EvalReport:
    correct, n_pred, n_gold = _count(gold, pred)
    c, np_, ng = sum(correct.values()), sum(n_pred.values()), sum(n_gold.values())
    p, r, f = _prf(c, np_, ng)
    return EvalReport(p, r, f, c, np_, ng, per_slot_f1(gold, pred), len(gold))


def evaluate_subsets(model, task: str, test: Sequence[TaggedSentence], train_vocab: Vocab
                     ) -> tuple[EvalReport, EvalReport | None]:
    """Score the full test set and the sentences holding a token unseen in ``train_vocab``.

    The OOV report is None when no test sentence has an OOV token.
    """
    pred = predict(model, task, test)
    gold = [s.tags for s in test]
    full = conll_f1(gold, pred)
    _, subset = oov_stats(train_vocab, test)
    if not subset:
        return full, None
    keep = {id(s) for s in subset}
    idx = [i for i, s in enumerate(test) if id(s) in keep]
    return full, conll_f1([gold[i] for i in idx], [pred[i] for i in idx])


# ---------------------------------------------------------------- output

REPORT_HEADER = ["scope", "slot_type", "precision", "recall", "f1", "support"]


def report_rows(report: EvalReport, scope: str) -> list[list]:
    rows = [[scope, "ALL", report.precision, report.recall, report.f1, report.gold]]
    for t, s in sorted(report.per_type.items()):
        rows.append([scope, t, s.precision, s.recall, s.f1, s.support])
    return rows


def report_csv(reports: dict[str, EvalReport | None]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_HEADER)
    for scope, rep in reports.items():
        if rep is not None:
            w.writerows([[a, b, f"{p:.4f}", f"{r:.4f}", f"{f:.4f}", n]
                         for a, b, p, r, f, n in report_rows(rep, scope)])
    return buf.getvalue()


def format_table(reports: dict[str, EvalReport | None]) -> str:
    lines = [f"{'scope':<8} {'slot type':<16} {'prec':>7} {'rec':>7} {'F1':>7} {'support':>8}"]
    for scope, rep in reports.items():
        if rep is None:
            lines.append(f"{scope:<8} (no sentences)")
            continue
        for a, b, p, r, f, n in report_rows(rep, scope):
            lines.append(f"{a:<8} {b:<16} {p:7.2f} {r:7.2f} {f:7.2f} {n:8d}")
    return "\n".join(lines)
