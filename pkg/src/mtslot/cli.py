"""Command line: ``mtslot <verb> [options]``.

Options come from an optional JSON config (``--config``, keys as in
ExperimentConfig); flags override it. The output directory resolves as
``--output-dir``, then $MTSLOT_OUTPUT_DIR, then the config. Exit codes: 0 ok,
1 config error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments as ex
from .autodiff import NumericError
from .corpus import MarkupError, write_conll
from .evaluation import evaluate_subsets, format_table, report_csv
from .model import ConfigError, load_model, save_model
from .synth import ConfigError as SuiteError
from .vocab import Vocab, vocab_from_sentences

log = logging.getLogger("mtslot")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


def _size(text: str):
    return text if text == ex.FULL else int(text)


def _app_size(text: str) -> tuple[str, int]:
    app, _, n = text.partition("=")
    if not n:
        raise argparse.ArgumentTypeError(f"expected APP=N, got {text!r}")
    return app, int(n)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig keys")
    common.add_argument("--output-dir")
    common.add_argument("--epochs", type=int)
    common.add_argument("--data-seed", type=int)
    common.add_argument("--init-seed", type=int)
    common.add_argument("--train-seed", type=int)
    common.add_argument("--full-scale", action="store_true",
                        help="full corpus sizes and model dimensions")
    common.add_argument("--size", action="append", type=_app_size, default=[],
                        metavar="APP=N", help="override one app's corpus size")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="mtslot", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("generate", parents=[common], help="write synthetic corpora")
    sub.add_parser("split", parents=[common], help="write train/test splits as CoNLL")

    t = sub.add_parser("train", parents=[common], help="train one model")
    t.add_argument("--target", required=True)
    t.add_argument("--train-size", type=_size, default=ex.FULL)
    t.add_argument("--mode", choices=["single", "multi"], default="multi")
    t.add_argument("--vocab", choices=["closed", "open"], default="closed")

    e = sub.add_parser("eval", parents=[common], help="score a trained model")
    e.add_argument("--model", required=True, help="checkpoint written by train")
    e.add_argument("--task", help="app to score (default: the model's target)")

    for verb, text in [("ablate", "data ablation, single vs multi-task"),
                       ("oov-curve", "OOV rate against training size"),
                       ("per-slot", "per-slot F1, closed vs open vocabulary"),
                       ("report", "full and OOV-subset F1, closed vs open vocabulary")]:
        s = sub.add_parser(verb, parents=[common], help=text)
        if verb != "oov-curve":
            s.add_argument("--seeds", type=int, default=1, help="replicates (init/train seeds)")
    return p


def load_config(args) -> ex.ExperimentConfig:
    cfg = ex.ExperimentConfig.load(args.config) if args.config else ex.ExperimentConfig()
    if args.full_scale:
        cfg = ex.full_scale(cfg)
    over = {k: getattr(args, k) for k in ("epochs", "data_seed", "init_seed", "train_seed")
            if getattr(args, k) is not None}
    if args.size:
        over["sizes"] = {**cfg.sizes, **dict(args.size)}
    cfg = replace(cfg, **over)
    return ex.resolve_output_dir(cfg, args.output_dir)


def _out(cfg: ex.ExperimentConfig, name: str) -> Path:
    return Path(cfg.output_dir) / name


def cmd_generate(cfg, args) -> None:
    for path in ex.cmd_generate(cfg):
        print(path)


def cmd_split(cfg, args) -> None:
    for app, sp in ex.load_splits(cfg).items():
        for part in ("train", "test"):
            path = _out(cfg, f"splits/{app}.{part}.conll")
            path.parent.mkdir(parents=True, exist_ok=True)
            write_conll(path, getattr(sp, part))
            print(path)


def cmd_train(cfg, args) -> None:
    if args.target not in cfg.sizes:
        raise ConfigError(f"unknown target {args.target!r}")
    splits = ex.load_splits(cfg)
    cell = ex.train_cell(cfg, splits, args.target, args.train_size, args.mode, args.vocab)
    stem = _out(cfg, f"models/{args.mode}-{args.vocab}-{args.target}-{args.train_size}")
    stem.parent.mkdir(parents=True, exist_ok=True)
    save_model(cell.model, stem.with_suffix(".ckpt"))
    cell.model.vocab.save(stem.with_suffix(".vocab"))
    cell.log.save(stem.with_suffix(".log.csv"))
    meta = {"target": args.target, "train_size": args.train_size, "config": json.loads(cfg.to_json())}
    stem.with_suffix(".json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(stem.with_suffix(".ckpt"))


def cmd_eval(cfg, args) -> None:
    ckpt = Path(args.model)
    try:
        meta = json.loads(ckpt.with_suffix(".json").read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"{ckpt}: cannot read sidecar metadata: {exc}") from exc
    model = load_model(ckpt, Vocab.load(ckpt.with_suffix(".vocab")))
    task = args.task or meta["target"]
    splits = ex.load_splits(cfg)
    if task not in splits:
        raise ConfigError(f"no corpus for task {task!r}")
    size = meta["train_size"] if task == meta["target"] else ex.FULL
    task_vocab = vocab_from_sentences(ex.subset(splits[task].train, size))
    full, oov = evaluate_subsets(model, task, splits[task].test, task_vocab)
    reports = {"full": full, "oov": oov}
    print(format_table(reports))
    path = _out(cfg, f"eval-{ckpt.stem}-{task}.csv")
    path.write_text(report_csv(reports))
    print(path)


def _replicates(cfg, args):
    return [cfg.reseeded(k) for k in range(args.seeds)]


def cmd_ablate(cfg, args) -> None:
    splits = ex.load_splits(cfg)
    rows = [r for c in _replicates(cfg, args) for r in ex.run_ablation(c, splits)]
    print(ex.write_csv(_out(cfg, "ablation.csv"), ex.RESULT_HEADER, rows))


def cmd_oov_curve(cfg, args) -> None:
    print(ex.write_csv(_out(cfg, "oov_curve.csv"), ex.OOV_HEADER, ex.run_oov_curve(cfg)))


def _open_closed(cfg, args, per_slot: bool):
    splits = ex.load_splits(cfg)
    rows, slots = [], []
    for c in _replicates(cfg, args):
        trained = ex.train_open_closed(c, splits)
        rows += ex.run_open_vs_closed(c, splits, trained)
        if per_slot:
            slots += [(c.train_seed, *r) for r in ex.run_per_slot(c, splits, trained)]
    print(ex.write_csv(_out(cfg, "open_vs_closed.csv"), ex.RESULT_HEADER, rows))
    if per_slot:
        print(ex.write_csv(_out(cfg, "per_slot.csv"), ["seed"] + ex.PER_SLOT_HEADER, slots))
    return rows


def cmd_per_slot(cfg, args) -> None:
    _open_closed(cfg, args, per_slot=True)


def cmd_report(cfg, args) -> None:
    rows = _open_closed(cfg, args, per_slot=False)
    cells = {(r.target, r.vocab, r.scope, r.seed): r.f1 for r in rows}
    seeds = sorted({r.seed for r in rows})
    cols = [(v, s) for v in ("closed", "open") for s in ("full", "oov")]
    print(f"{'app':<10} {'seed':>4} " + " ".join(f"{v + '/' + s:>12}" for v, s in cols))
    for app in cfg.apps:
        for seed in seeds:
            vals = [cells.get((app, v, s, seed)) for v, s in cols]
            print(f"{app:<10} {seed:>4} " + " ".join(
                f"{x:12.2f}" if x is not None else f"{'-':>12}" for x in vals))


COMMANDS = {"generate": cmd_generate, "split": cmd_split, "train": cmd_train,
            "eval": cmd_eval, "ablate": cmd_ablate, "oov-curve": cmd_oov_curve,
            "per-slot": cmd_per_slot, "report": cmd_report}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
        COMMANDS[args.verb](cfg, args)
    except MarkupError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, SuiteError, TypeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
