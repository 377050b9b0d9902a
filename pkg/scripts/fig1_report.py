"""Counterfactuality report for the simplified setup over a grid of outer reflectivities.

    python scripts/fig1_report.py --r 0.5 0.9 0.99 [--blockade] > fig1.csv
"""

from __future__ import annotations

import argparse
import sys

from cfsim.cli import dump_csv
from cfsim.protocol import Fig1Config, counterfactuality_report


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r", type=float, nargs="+", default=[0.5, 0.7, 0.9, 0.95, 0.99])
    ap.add_argument("--blockade", action="store_true")
    args = ap.parse_args(argv)
    rows = [counterfactuality_report(Fig1Config(r, blockade=args.blockade)).to_csv_row() for r in args.r]
    sys.stdout.write(dump_csv(rows))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
