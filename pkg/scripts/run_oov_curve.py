"""Test-set OOV rate per app as the training set grows."""
from pathlib import Path

from mtslot import experiments as ex

from _common import parser, setup


def main():
    args = parser(__doc__).parse_args()
    cfg, _ = setup(args)
    points = ex.run_oov_curve(cfg)
    print(ex.write_csv(Path(cfg.output_dir) / "oov_curve.csv", ex.OOV_HEADER, points))
    for app, n, rate in points:
        print(f"{app:<10} {n:>6} {rate:7.4f}")


if __name__ == "__main__":
    main()
