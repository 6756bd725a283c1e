"""Regime map over gamma1 through the CLI sweep, printed as CSV."""
import argparse
from pathlib import Path

from fdblowup.cli import SWEEP_HEADER, sweep

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--template", default=str(HERE / "configs" / "sweep_template.cfg"))
    ap.add_argument("--axis", default="gamma1")
    ap.add_argument("--values", type=float, nargs="*", default=[2.4, 2.6, 3, 4, 4.9, 5.5, 6])
    ap.add_argument("--out", default="out/regime_sweep")
    args = ap.parse_args()
    rows = sweep(Path(args.template).read_text(), args.axis, args.values, args.out)
    print(",".join(SWEEP_HEADER))
    for row in rows:
        print(",".join(str(x) for x in row))


if __name__ == "__main__":
    main()
