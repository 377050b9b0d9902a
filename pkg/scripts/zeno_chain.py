"""Chained protocol: D1 survival versus outer cycle count, blocked and open.

    python scripts/zeno_chain.py --m-max 64 --n 4
"""

from __future__ import annotations

import argparse
import math
import sys

from cfsim.cli import dump_csv
from cfsim.optics import detector_distribution
from cfsim.protocol import ChainedConfig, build_chained, channel_occupancy


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--m-max", type=int, default=64)
    ap.add_argument("--n", type=int, default=4, help="inner cycles for the full chain")
    args = ap.parse_args(argv)

    rows = []
    for m in range(1, args.m_max + 1):
        outer_only = build_chained(ChainedConfig(m, 1, theta_inner=math.pi / 2, blockade=True))
        blocked = detector_distribution(build_chained(ChainedConfig(m, args.n, blockade=True))).grouped()
        open_ = detector_distribution(build_chained(ChainedConfig(m, args.n))).grouped()
        rows.append({
            "m": m,
            "outer_only_pD1": detector_distribution(outer_only)["D1"],
            "closed_form": math.cos(math.pi / (2 * m)) ** (2 * m),
            "outer_only_channel_amp": channel_occupancy(outer_only),
            "blocked_pD1": blocked["D1"],
            "blocked_pD2": blocked["D2"],
            "open_pD1": open_["D1"],
            "open_pD2": open_["D2"],
            "open_pD3": open_.get("D3", 0.0),
        })
    sys.stdout.write(dump_csv(rows))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
