"""Per-slot F1 of closed and open vocabulary models, largest slots first."""
from pathlib import Path

from mtslot import experiments as ex

from _common import parser, replicates, setup


def main():
    args = parser(__doc__).parse_args()
    cfg, splits = setup(args)
    rows = [(c.train_seed, *r) for c in replicates(cfg, args.seeds)
            for r in ex.run_per_slot(c, splits, ex.train_open_closed(c, splits))]
    print(ex.write_csv(Path(cfg.output_dir) / "per_slot.csv", ["seed"] + ex.PER_SLOT_HEADER, rows))
    for seed, app, slot, closed, open_, support in sorted(rows, key=lambda r: (r[0], r[1], -r[5])):
        print(f"{seed:>3} {app:<10} {slot:<22} {closed:7.2f} {open_:7.2f} {open_ - closed:+7.2f} {support:>5}")


if __name__ == "__main__":
    main()
