"""Data ablation: single-task vs multi-task F1 as the target's training set shrinks."""
import statistics
from collections import defaultdict
from pathlib import Path

from mtslot import experiments as ex

from _common import parser, replicates, setup


def main():
    args = parser(__doc__).parse_args()
    cfg, splits = setup(args)
    rows = [r for c in replicates(cfg, args.seeds) for r in ex.run_ablation(c, splits)]
    print(ex.write_csv(Path(cfg.output_dir) / "ablation.csv", ex.RESULT_HEADER, rows))
    cells = defaultdict(list)
    for r in rows:
        cells[r.target, r.train_size, r.mode].append(r.f1)
    print(f"{'app':<10} {'size':>6} {'single':>8} {'multi':>8} {'gap':>7}")
    for app in cfg.targets:
        for n in sorted({k[1] for k in cells if k[0] == app}):
            single = statistics.median(cells[app, n, "single"])
            multi = statistics.median(cells[app, n, "multi"])
            print(f"{app:<10} {n:>6} {single:8.2f} {multi:8.2f} {multi - single:7.2f}")


if __name__ == "__main__":
    main()
