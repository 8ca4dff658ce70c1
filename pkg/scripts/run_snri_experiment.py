#!/usr/bin/env python3
"""Small-scale SNR-improvement sweep comparing the classical denoisers.

Runs the same (r2f, SNR) conditions through each method and writes one
report JSON plus a flat CSV of plot points per method.  Scale the pair
count up to 500 to match the full published protocol.
"""

import argparse
import json
from pathlib import Path

import numpy as np

from ramanforge import dataio
from ramanforge.core import RngStream, default_grid
from ramanforge.evalkit import run_snri_protocol
from ramanforge.noisemodel import DarkStats

METHODS = [
    "identity",
    "sg:half_window=5,degree=3",
    "wavelet:family=db4,levels=4,rule=soft,scale=1.0",
]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="snri_experiment")
    parser.add_argument("--pairs", type=int, default=60)
    parser.add_argument("--seed", type=int, default=1234)
    parser.add_argument("--dark", default=None, help="dark stats JSON; synthetic flat stats if omitted")
    parser.add_argument("--methods", nargs="+", default=METHODS)
    args = parser.parse_args()

    grid = default_grid()
    if args.dark:
        dark = dataio.read_dark_stats(args.dark)
    else:
        dark = DarkStats(grid, np.zeros(693), np.full(693, 25.0), 0.1, 1000)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for spec in args.methods:
        records = run_snri_protocol(
            dataio.make_denoiser(spec), grid, [dark], RngStream(args.seed),
            n_pairs=args.pairs,
        )
        name = spec.split(":")[0]
        doc = {
            "kind": "report",
            "protocol": "snri",
            "denoiser": spec,
            "pairs": args.pairs,
            "signals_per_pair": 5,
            "realizations": 10,
            "seed": args.seed,
            "records": [
                {"r2f": r.r2f, "snr_old": r.snr_old, "snr_new": r.snr_new, "snri_db": r.snri_db}
                for r in records
            ],
        }
        report_path = out / f"snri_{name}.json"
        report_path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
        mean_db = float(np.mean([r.snri_db for r in records]))
        print(f"{spec:50s} mean SNRi {mean_db:+6.2f} dB over {args.pairs} pairs -> {report_path}")


if __name__ == "__main__":
    main()
