#!/usr/bin/env python3
"""Chart audit on the torus-of-revolution target: round-trip accuracy of the
chart inverse and the empirical two-sided chart constant as a function of
the chart radius.

Usage: python scripts/chart_audit_torus.py [--R 2.0] [--r 0.5]
"""

import argparse

import numpy as np

from harmonicflow import (
    TorusOfRevolution,
    bilipschitz_estimate,
    build_icosphere,
    constant_map,
)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--R", type=float, default=2.0)
    ap.add_argument("--r", type=float, default=0.5)
    ap.add_argument("--samples", type=int, default=32)
    args = ap.parse_args()

    target = TorusOfRevolution(args.R, args.r)
    mesh = build_icosphere(2)
    f = constant_map(mesh, target, np.array([args.R + args.r, 0.0, 0.0]))
    delta = target.tubular_radius()
    print(f"torus R={args.R}, r={args.r}: tubular radius {delta}")

    for frac in (1e-4, 1e-2, 0.05, 0.1):
        rep = bilipschitz_estimate(f, frac * delta, args.samples, seed=1)
        print(
            f"radius {frac * delta:.2e}: c4 = {rep.c4_estimate:.6f}, "
            f"max round-trip error {rep.max_roundtrip_error:.2e} "
            f"({rep.sample_count} samples)"
        )


if __name__ == "__main__":
    main()
