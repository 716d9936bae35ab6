import numpy as np
import pytest

from mtslot.corpus import parse_sentence
from mtslot.model import ModelConfig, assemble_model, label_set
from mtslot.vocab import vocab_from_sentences

LINES = [
    "please book flight from <FromLoc> burbank </FromLoc>",
    "fly to <ToLoc> denver </ToLoc> on <Date> may 3 </Date>",
    "from <FromLoc> denver </FromLoc> to <ToLoc> burbank </ToLoc> please",
    "book flight to <ToLoc> boston </ToLoc>",
    "please fly from <FromLoc> boston </FromLoc> on <Date> june 12 </Date>",
]
SLOTS = ["FromLoc", "ToLoc", "Date"]


@pytest.fixture
def sentences():
    return [parse_sentence(line, "toy") for line in LINES]


def tiny_model(sentences, mode="single", vocab_mode="closed", seed=0, init_range=0.1, tasks=("toy",)):
    vocab = vocab_from_sentences(sentences)
    labels = {t: label_set(SLOTS) for t in tasks}
    dims = dict(word_dim=4, cell_dim=3, proj_dim=2, char_dim=2, char_cell1=2, char_proj1=2,
                char_cell2=3, char_out=2, init_range=init_range)
    if mode == "single":
        cfg = ModelConfig.single(tasks[0], labels[tasks[0]], vocab_mode=vocab_mode, **dims)
    else:
        cfg = ModelConfig.multi(labels, vocab_mode, **dims)
    chars = "".join(sorted({c for s in sentences for w in s.raw for c in w}))
    return assemble_model(cfg, vocab, seed, chars)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
