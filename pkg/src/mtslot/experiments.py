"""Experiment harness: data ablation, open vs closed vocabulary, OOV curves, per-slot scores.

Every runner returns plain rows and writes nothing itself; ``write_csv`` does the
output. Rows are fully determined by the config, so reruns give identical bytes.
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

from .corpus import CorpusSplit, TaggedSentence, load_tagged, oov_stats, split_corpus, write_corpus
from .evaluation import conll_f1, evaluate_subsets, per_slot_f1
from .model import ConfigError, Model, ModelConfig, assemble_model, label_set, predict
from .synth import ANCHOR, APP_ORDER, DESK_SIZES, FULL_SIZES, AppSpec, default_suite, generate_synthetic
from .training import TrainConfig, TrainLog, train_multitask, train_single
from .vocab import Vocab, vocab_from_sentences

OUTPUT_ENV = "MTSLOT_OUTPUT_DIR"
FULL = "full"
DESK_DIMS = {"word_dim": 60, "cell_dim": 100, "proj_dim": 70}


@dataclass
class ExperimentConfig:
    sizes: dict[str, int] = field(default_factory=lambda: dict(DESK_SIZES))
    anchor: str = ANCHOR
    targets: list[str] = field(default_factory=lambda: [a for a in APP_ORDER if a != ANCHOR])
    ablation_sizes: list = field(default_factory=lambda: [200, 400, 800, FULL])
    oov_grid: list = field(default_factory=lambda: [100, 200, 400, 800, FULL])
    heldout_frac: float = 0.2
    train_frac: float = 0.30
    data_seed: int = 0
    init_seed: int = 0
    train_seed: int = 0
    epochs: int = 10
    full_dims: bool = False
    min_support: int = 100
    output_dir: str = "results"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        unknown = set(self.sizes) - set(default_suite())
        if unknown:
            raise ConfigError(f"unknown apps {sorted(unknown)}")
        if self.anchor not in self.sizes:
            raise ConfigError(f"anchor {self.anchor!r} not in the suite")
        for t in self.targets:
            if t == self.anchor:
                raise ConfigError("anchor and target must differ")
            if t not in self.sizes:
                raise ConfigError(f"target {t!r} not in the suite")
        for name in ("ablation_sizes", "oov_grid"):
            _check_grid(name, getattr(self, name))
        if any(n < 2 for n in self.sizes.values()):
            raise ConfigError("every app needs at least two sentences")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"{path}: {exc}") from exc

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def reseeded(self, k: int) -> "ExperimentConfig":
        """Same data, different init and training seeds."""
        return replace(self, init_seed=self.init_seed + k, train_seed=self.train_seed + k)

    @property
    def apps(self) -> list[str]:
        return [a for a in APP_ORDER if a in self.sizes]

    @property
    def data_dir(self) -> Path:
        return Path(self.output_dir) / "corpus"


def _check_grid(name: str, grid: Sequence) -> None:
    nums = [g for g in grid if g != FULL]
    if not grid or any(not isinstance(g, int) or g <= 0 for g in nums):
        raise ConfigError(f"{name} must be positive integers or {FULL!r}: {grid}")
    if nums != sorted(nums) or FULL in grid[:-1]:
        raise ConfigError(f"{name} must be nondecreasing with {FULL!r} last: {grid}")


def full_scale(cfg: ExperimentConfig) -> ExperimentConfig:
    return replace(cfg, sizes=dict(FULL_SIZES), full_dims=True)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    target: str
    train_size: int
    mode: str
    vocab: str
    scope: str
    f1: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.f1 <= 100.0:
            raise ValueError(f"F1 out of range: {self.f1}")


RESULT_HEADER = [f.name for f in fields(ResultRow)]


# ---------------------------------------------------------------- data

def cmd_generate(cfg: ExperimentConfig, suite: dict[str, AppSpec] | None = None) -> list[Path]:
    """Write one markup corpus per app under ``<output_dir>/corpus``."""
    suite = suite or default_suite()
    cfg.data_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for i, app in enumerate(cfg.apps):
        lines = generate_synthetic(suite[app], cfg.sizes[app], cfg.data_seed + 1000 * i,
                                   cfg.heldout_frac)
        path = cfg.data_dir / f"{app}.txt"
        write_corpus(path, app, lines)
        paths.append(path)
    return paths


def load_splits(cfg: ExperimentConfig) -> dict[str, CorpusSplit]:
    out = {}
    for app in cfg.apps:
        path = cfg.data_dir / f"{app}.txt"
        if not path.exists():
            raise ConfigError(f"missing corpus {path}; run generate first")
        name, sents = load_tagged(path)
        if name != app:
            raise ConfigError(f"{path} holds app {name!r}, expected {app!r}")
        out[app] = split_corpus(sents, cfg.train_frac, cfg.data_seed)
    return out


def subset(train: Sequence[TaggedSentence], size) -> list[TaggedSentence]:
    """Prefix of the (already shuffled) training split, so subsets nest."""
    return list(train) if size == FULL else list(train[:size])


def _size(train, size) -> int:
    return len(subset(train, size))


# ---------------------------------------------------------------- one cell

@dataclass
class TrainedCell:
    model: Model
    log: TrainLog
    task_vocabs: dict[str, Vocab]


def train_cell(cfg: ExperimentConfig, splits: dict[str, CorpusSplit], target: str, size,
               mode: str, vocab_mode: str = "closed") -> TrainedCell:
    """Train one model. Multi-task cells use every app's full training split
    except the target, which gets its ``size`` prefix."""
    suite = default_suite()
    if mode == "single":
        data = {target: subset(splits[target].train, size)}
    elif mode == "multi":
        data = {a: subset(sp.train, size) if a == target else list(sp.train)
                for a, sp in splits.items()}
    else:
        raise ConfigError(f"mode must be single or multi, got {mode!r}")
    vocab = vocab_from_sentences([s for c in data.values() for s in c])
    labels = {a: label_set(suite[a].slots) for a in data}
    if mode == "single":
        mcfg = ModelConfig.single(target, labels[target], vocab_mode=vocab_mode)
    else:
        mcfg = ModelConfig.multi(labels, vocab_mode, **({} if cfg.full_dims else DESK_DIMS))
    if vocab_mode == "open" and not cfg.full_dims:
        # keep the encoder input as wide as in closed mode
        mcfg = replace(mcfg, word_dim=mcfg.word_dim - mcfg.char_out)
    chars = sorted({ch for c in data.values() for s in c for w in s.raw for ch in w})
    model = assemble_model(mcfg, vocab, cfg.init_seed, "".join(chars))
    tcfg = TrainConfig(epochs=cfg.epochs, seed=cfg.train_seed)
    if mode == "single":
        _, log = train_single(model, data[target], tcfg, task=target)
    else:
        _, log = train_multitask(model, data, tcfg)
    return TrainedCell(model, log, {a: vocab_from_sentences(c) for a, c in data.items()})


# ---------------------------------------------------------------- runners

def run_ablation(cfg: ExperimentConfig, splits: dict[str, CorpusSplit] | None = None
                 ) -> list[ResultRow]:
    """Targets x sizes x (single, multi), scored on each target's fixed test set."""
    splits = splits or load_splits(cfg)
    rows = []
    for target in cfg.targets:
        test = splits[target].test
        gold = [s.tags for s in test]
        for size in cfg.ablation_sizes:
            n = _size(splits[target].train, size)
            for mode in ("single", "multi"):
                cell = train_cell(cfg, splits, target, size, mode)
                f1 = conll_f1(gold, predict(cell.model, target, test)).f1
                rows.append(ResultRow("ablation", target, n, mode, "closed", "full", f1,
                                      cfg.train_seed))
    return rows


def train_open_closed(cfg: ExperimentConfig, splits: dict[str, CorpusSplit]
                      ) -> dict[str, TrainedCell]:
    """Full-data multi-task models differing only in the vocabulary mode."""
    return {vm: train_cell(cfg, splits, cfg.anchor, FULL, "multi", vm) for vm in ("closed", "open")}


def run_open_vs_closed(cfg: ExperimentConfig, splits: dict[str, CorpusSplit] | None = None,
                       trained: dict[str, TrainedCell] | None = None) -> list[ResultRow]:
    """apps x (closed, open) x (full, oov) rows; the OOV subset uses each app's own vocab."""
    splits = splits or load_splits(cfg)
    trained = trained or train_open_closed(cfg, splits)
    rows = []
    for app in cfg.apps:
        n = len(splits[app].train)
        for vm in ("closed", "open"):
            cell = trained[vm]
            full, oov = evaluate_subsets(cell.model, app, splits[app].test, cell.task_vocabs[app])
            rows.append(ResultRow("open_vs_closed", app, n, "multi", vm, "full", full.f1,
                                  cfg.train_seed))
            if oov is not None:
                rows.append(ResultRow("open_vs_closed", app, n, "multi", vm, "oov", oov.f1,
                                      cfg.train_seed))
    return rows


def run_oov_curve(cfg: ExperimentConfig, splits: dict[str, CorpusSplit] | None = None
                  ) -> list[tuple[str, int, float]]:
    """(app, train size, test-token OOV rate) over nested training subsets."""
    splits = splits or load_splits(cfg)
    out = []
    for app in cfg.apps:
        for size in cfg.oov_grid:
            train = subset(splits[app].train, size)
            rate, _ = oov_stats(vocab_from_sentences(train), splits[app].test)
            out.append((app, len(train), rate))
    return out


def run_per_slot(cfg: ExperimentConfig, splits: dict[str, CorpusSplit] | None = None,
                 trained: dict[str, TrainedCell] | None = None
                 ) -> list[tuple[str, str, float, float, int]]:
    """(app, slot type, closed F1, open F1, support) for types with enough gold chunks."""
    splits = splits or load_splits(cfg)
    trained = trained or train_open_closed(cfg, splits)
    out = []
    for app in cfg.apps:
        test = splits[app].test
        gold = [s.tags for s in test]
        scores = {vm: per_slot_f1(gold, predict(c.model, app, test), cfg.min_support)
                  for vm, c in trained.items()}
        for t in sorted(scores["closed"]):
            out.append((app, t, scores["closed"][t].f1, scores["open"][t].f1,
                        scores["closed"][t].support))
    return out


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    return f"{v:.6f}" if isinstance(v, float) else str(v)


def rows_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        vals = [getattr(r, h) for h in header] if isinstance(r, ResultRow) else list(r)
        w.writerow([_fmt(v) for v in vals])
    return buf.getvalue()


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(rows_csv(header, rows))
    return path


OOV_HEADER = ["app", "train_size", "oov_rate"]
PER_SLOT_HEADER = ["app", "slot_type", "closed_f1", "open_f1", "support"]


def resolve_output_dir(cfg: ExperimentConfig, flag: str | None = None) -> ExperimentConfig:
    """Flag beats the environment variable, which beats the config file."""
    out = flag or os.environ.get(OUTPUT_ENV) or cfg.output_dir
    return replace(cfg, output_dir=out)
