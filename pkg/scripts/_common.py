"""Shared argument handling for the experiment scripts."""
import argparse
from dataclasses import replace
from pathlib import Path

from mtslot import experiments as ex


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--output-dir", default="results")
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--full-scale", action="store_true")
    return p


def setup(args) -> tuple[ex.ExperimentConfig, dict]:
    """Config plus splits, generating the corpora on first use."""
    cfg = ex.ExperimentConfig(output_dir=args.output_dir, epochs=args.epochs)
    if args.full_scale:
        cfg = ex.full_scale(cfg)
    if not all((Path(cfg.data_dir) / f"{a}.txt").exists() for a in cfg.apps):
        ex.cmd_generate(cfg)
    return cfg, ex.load_splits(cfg)


def replicates(cfg, n):
    return [cfg.reseeded(k) for k in range(n)]
