#!/usr/bin/env python3
"""Emit shared DCT test vectors so other implementations can cross-check
their transform against this package's (orthonormal DCT-II).

Output is a JSON file of {length, inputs, coefficients} with inputs covering
constants, impulses, cosines and seeded noise at the working spectrum length.
"""

import argparse
import json

import numpy as np

from ramanforge.classical import dct


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="dct_vectors.json")
    parser.add_argument("--length", type=int, default=693)
    parser.add_argument("--seed", type=int, default=99)
    args = parser.parse_args()

    n = args.length
    rng = np.random.default_rng(args.seed)
    t = np.arange(n)
    inputs = [
        np.full(n, 1.0),
        np.eye(n)[0],
        np.eye(n)[n // 2],
        np.cos(np.pi * (t + 0.5) * 3 / n),
        np.linspace(-1.0, 1.0, n),
        rng.standard_normal(n),
        rng.standard_normal(n) * 100.0,
    ]
    doc = {
        "length": n,
        "inputs": [list(map(float, x)) for x in inputs],
        "coefficients": [list(map(float, dct(x))) for x in inputs],
    }
    with open(args.out, "w") as fh:
        json.dump(doc, fh)
    print(f"wrote {args.out}: {len(inputs)} vectors of length {n}")


if __name__ == "__main__":
    main()
