"""Pointer coupling sweep on the channel: weak readout and leakage to E.

Writes one CSV row per g and prints the fitted log-log slope of P(E) to stderr.

    python scripts/disturbance_sweep.py --meter gauss --lo 1e-4 --hi 1e-1 --n 25
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from cfsim.cli import dump_csv
from cfsim.pointer import PointerModel, disturbance_profile, loglog_slope
from cfsim.protocol import Fig1Config, build_fig1


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--r-m", type=float, default=0.9)
    ap.add_argument("--meter", choices=("qubit", "gauss"), default="qubit")
    ap.add_argument("--lo", type=float, default=1e-4)
    ap.add_argument("--hi", type=float, default=1e-1)
    ap.add_argument("--n", type=int, default=25)
    args = ap.parse_args(argv)

    net = build_fig1(Fig1Config(args.r_m))
    gs = np.logspace(np.log10(args.lo), np.log10(args.hi), args.n)
    rows = disturbance_profile(net, "C", "s_mid", gs, PointerModel(args.meter))
    sys.stdout.write(dump_csv([r.record() for r in rows]))
    slope = loglog_slope(gs, [r.p_probe for r in rows])
    print(f"P(E) log-log slope over [{args.lo:g}, {args.hi:g}]: {slope:.6f}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
