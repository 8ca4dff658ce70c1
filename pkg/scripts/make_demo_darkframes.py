#!/usr/bin/env python3
"""Fabricate plausible dark frames and summarize them into dark-stats files.

Real dark frames come off an instrument; this script stands in for one so
the simulate/eval pipeline can run end to end.  Each frame is a smooth
pedestal plus Poisson dark counts (rate proportional to integration time)
plus Gaussian read noise, which is exactly the structure the dark-variance
term is meant to absorb.
"""

import argparse
from pathlib import Path

import numpy as np

from ramanforge import dataio
from ramanforge.core import RngStream, Spectrum, default_grid
from ramanforge.noisemodel import estimate_dark_stats


def make_frames(grid, itime, n_frames, stream, dark_rate=60.0, read_sigma=2.0):
    gen = stream.generator
    pedestal = 4.0 + 0.003 * (grid.wavenumbers - grid.start_wn)
    lam = dark_rate * itime
    counts = gen.poisson(lam, size=(n_frames, grid.n_points)).astype(float)
    read = gen.normal(0.0, read_sigma, size=(n_frames, grid.n_points))
    return pedestal + counts + read


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="darkstats", help="output directory")
    parser.add_argument("--frames", type=int, default=1000, help="frames per integration time")
    parser.add_argument("--itimes", type=float, nargs="+", default=[0.1, 0.2, 0.5, 1.0])
    parser.add_argument("--seed", type=int, default=20240901)
    parser.add_argument("--keep-frames", action="store_true", help="also write the raw frame batches")
    args = parser.parse_args()

    grid = default_grid()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for k, itime in enumerate(args.itimes):
        stream = RngStream(args.seed, k)
        frames = make_frames(grid, itime, args.frames, stream)
        stats = estimate_dark_stats([Spectrum(grid, f) for f in frames], itime)
        stats_path = out / f"dark_{itime:g}s.json"
        dataio.write_dark_stats(stats_path, stats)
        print(f"wrote {stats_path} ({args.frames} frames, itime {itime:g}s)")
        if args.keep_frames:
            frames_path = out / f"frames_{itime:g}s.csv"
            dataio.write_batch(frames_path, grid, frames)
            print(f"wrote {frames_path}")


if __name__ == "__main__":
    main()
