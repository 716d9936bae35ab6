"""Independent reference implementations used as test oracles."""
import numpy as np


def brute_chunks(tags):
    """Every (type, i, j) whose tags read B-type I-type* and are not continued at j+1."""
    found = set()
    n = len(tags)
    for i in range(n):
        if not tags[i].startswith("B-"):
            continue
        kind = tags[i][2:]
        for j in range(i, n):
            if j > i and tags[j] != "I-" + kind:
                break
            if j + 1 == n or tags[j + 1] != "I-" + kind:
                found.add((kind, i, j))
                break
    return found


def brute_f1(gold, pred):
    tp = fp = fn = 0
    for g, p in zip(gold, pred):
        gc, pc = brute_chunks(g), brute_chunks(p)
        tp += sum(1 for c in pc if c in gc)
        fp += sum(1 for c in pc if c not in gc)
        fn += sum(1 for c in gc if c not in pc)
    if tp + fp == 0 and tp + fn == 0:
        return 100.0, 100.0, 100.0
    p = 100.0 * tp / (tp + fp) if tp + fp else 0.0
    r = 100.0 * tp / (tp + fn) if tp + fn else 0.0
    return p, r, (2 * p * r / (p + r) if p + r else 0.0)


def random_valid_tags(rng, n, types):
    tags, prev = [], "O"
    for _ in range(n):
        choice = rng.integers(3)
        if choice == 0:
            tag = "O"
        elif choice == 1 or prev == "O":
            tag = "B-" + types[rng.integers(len(types))]
        else:
            tag = "I-" + prev[2:]
        tags.append(tag)
        prev = tag
    return tags


def random_raw_tags(rng, n, types):
    labels = ["O"] + [f"{p}-{t}" for t in types for p in "BI"]
    return [labels[i] for i in rng.integers(len(labels), size=n)]


def random_corpus(rng, max_sents=10, max_len=8, types=("A", "B", "C")):
    gold, pred = [], []
    for _ in range(rng.integers(1, max_sents + 1)):
        n = int(rng.integers(1, max_len + 1))
        gold.append(random_valid_tags(rng, n, types))
        pred.append(random_valid_tags(rng, n, types))
    return gold, pred
