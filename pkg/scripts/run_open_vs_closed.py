"""Closed vs open vocabulary multi-task models: F1 on the full test set and its OOV subset."""
import statistics
from collections import defaultdict
from pathlib import Path

from mtslot import experiments as ex

from _common import parser, replicates, setup


def main():
    args = parser(__doc__).parse_args()
    cfg, splits = setup(args)
    rows = []
    for c in replicates(cfg, args.seeds):
        rows += ex.run_open_vs_closed(c, splits, ex.train_open_closed(c, splits))
    print(ex.write_csv(Path(cfg.output_dir) / "open_vs_closed.csv", ex.RESULT_HEADER, rows))
    cells = defaultdict(list)
    for r in rows:
        cells[r.target, r.vocab, r.scope].append(r.f1)
    cols = [(v, s) for s in ("full", "oov") for v in ("closed", "open")]
    print(f"{'app':<10} " + " ".join(f"{v + '/' + s:>12}" for v, s in cols))
    for app in cfg.apps:
        print(f"{app:<10} " + " ".join(
            f"{statistics.median(cells[app, v, s]):12.2f}" for v, s in cols))


if __name__ == "__main__":
    main()
